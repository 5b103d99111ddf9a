//! A small ensemble with its expectation-bound rows and Markov tail table.

use glvortex::config::RunConfig;
use glvortex::ensemble::{bound_rows, run_ensemble, tightness_report};
use glvortex::forcing::ForcingFamily;

fn main() -> glvortex::Result<()> {
    let family = ForcingFamily::BumpRotational {
        center: [0.5, 0.5],
        radius: 0.35,
        amplitude: 1.0,
    };
    let mut cfg = RunConfig::torus_pair(48, 0.1, 0.004, family);
    cfg.seeds.count = 16;
    let ens = run_ensemble(&cfg)?;
    let res = cfg.resolve()?;
    println!("{} seeds, {} blowups", ens.samples.len(), ens.blowups.len());
    for r in bound_rows(&ens.stats, &res.forcing, &res.grid, cfg.model.eps) {
        println!("{:<14} t = {:.4}  {:>12.5} <= {:>12.5} + {:.2e}  {}", r.check, r.t, r.value, r.bound, r.slack, r.pass);
    }
    let tails = tightness_report(&ens.samples, &ens.stats, &cfg.report.lambdas);
    for t in tails.iter().filter(|t| t.t == *ens.stats.times.last().unwrap()) {
        println!("P(Er >= {:.3}) = {:.3}  <= {:.3} + {:.3}", t.lambda, t.empirical, t.markov, t.slack);
    }
    Ok(())
}
