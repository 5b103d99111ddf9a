//! Term-by-term energy ledger of a vortex pair in a rotational flow, and the
//! cumulative residual under bridge refinement of the Brownian path.

use glvortex::forcing::{make_forcing, BrownianPath, ForcingFamily};
use glvortex::gl::{canonical_initial, GLParams, VortexSpec};
use glvortex::grid::Grid;
use glvortex::ledger::{cumulative, LedgerAccumulator};
use glvortex::stepper::{auto_dt, dt_max, run_observed, StepScheme};

fn main() -> glvortex::Result<()> {
    let g = Grid::torus(64, 1.0)?;
    let p = GLParams::new(0.1)?;
    let family = ForcingFamily::BumpRotational {
        center: [0.5, 0.5],
        radius: 0.3,
        amplitude: 0.5,
    };
    let f = make_forcing(family, &g)?;
    let u0 = canonical_initial(&VortexSpec::pair([0.25, 0.5], [0.75, 0.5]), &p, &g)?;
    let scheme = StepScheme::heun();
    let horizon = 0.01;
    let mut path = BrownianPath::sample(horizon, auto_dt(horizon, dt_max(&p, &g, &f, scheme.c_stab)), 3)?;
    let mut prev: Option<f64> = None;
    for level in 0..4 {
        let mut acc = LedgerAccumulator::new(&f, &p, &g, path.dt(), usize::MAX);
        run_observed(&u0, &path, &p, &f, scheme, &mut acc)?;
        let c = cumulative(acc.records()).expect("one record");
        if level == 0 {
            println!("dE = {:.6}", c.de);
            for (k, s) in c.s.iter().enumerate() {
                println!("  S{} = {s:+.6e}", k + 1);
            }
            println!("  compact S3..S7 = {:+.6e}", c.extra);
        }
        let ratio = prev.map(|r| format!("x{:.2}", r / c.residual.abs())).unwrap_or_default();
        println!("dt = {:.3e}  |R| = {:.3e} {ratio}", path.dt(), c.residual.abs());
        prev = Some(c.residual.abs());
        path = path.refine();
    }
    Ok(())
}
