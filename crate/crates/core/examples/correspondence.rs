//! Tracked field pair against the point-vortex prediction on one path.

use glvortex::config::RunConfig;
use glvortex::ensemble::correspondence;
use glvortex::forcing::{BrownianPath, ForcingFamily};
use glvortex::gl::Vortex;

fn main() -> glvortex::Result<()> {
    let mut cfg = RunConfig::torus_pair(128, 0.1, 0.03, ForcingFamily::TorusConstant { direction: [0.5, 0.2] });
    cfg.grid.side = 2.0;
    cfg.vortices = vec![Vortex::new(0.55, 1.0, 1), Vortex::new(1.45, 1.0, -1)];
    cfg.detect.track_every = 100;
    let res = cfg.resolve()?;
    let path = BrownianPath::sample(res.horizon(), res.dt, 5)?;
    let c = correspondence(&cfg, &res, &path)?;
    for (t, pde, sde) in c.pair_distances(&res.grid).into_iter().step_by(4) {
        println!("t = {t:.4}  field {pde:?}  points {sde:?}");
    }
    println!("sup matched distance {:.4}, decoupled at {:?}", c.comparison.sup, c.comparison.divergence_time);
    Ok(())
}
