//! A `±1` pair under the point-vortex law: renormalized energy, attraction
//! and annihilation, with and without a shared Brownian drive.

use glvortex::forcing::{make_forcing, BrownianPath, ForcingFamily, ForcingField};
use glvortex::grid::Grid;
use glvortex::point_vortex::{renorm_energy, run_sde, PointConfig, TorusGreen};

fn main() -> glvortex::Result<()> {
    let side = 1.0;
    let g = Grid::torus(64, side)?;
    let green = TorusGreen::new(side, 16)?;
    for r in [0.1, 0.2, 0.3, 0.4, 0.5] {
        let cfg = PointConfig::new(vec![[0.5 - r / 2.0, 0.5], [0.5 + r / 2.0, 0.5]], vec![1, -1])?;
        println!("r = {r:.1}  W = {:+.5}", renorm_energy(&cfg, &green)?);
    }
    let start = PointConfig::new(vec![[0.3, 0.5], [0.7, 0.5]], vec![1, -1])?;
    let path = BrownianPath::sample(0.02, 1e-5, 4)?;
    let constant = make_forcing(ForcingFamily::TorusConstant { direction: [1.0, 0.5] }, &g)?;
    for (name, f) in [("F = 0", ForcingField::zero(&g)), ("F = (1, 0.5)", constant)] {
        let tracks = run_sde(&start, &path, &f, &green, 0.05, 100)?;
        println!("{name}");
        for k in (0..tracks.frames()).step_by(2) {
            let pos: Vec<String> = tracks.alive(k).map(|(_, p, d)| format!("{d:+} ({:.3}, {:.3})", p[0], p[1])).collect();
            if pos.is_empty() {
                println!("  t = {:.3}: annihilated", tracks.times[k]);
                break;
            }
            println!("  t = {:.3}: {}", tracks.times[k], pos.join("  "));
        }
    }
    Ok(())
}
