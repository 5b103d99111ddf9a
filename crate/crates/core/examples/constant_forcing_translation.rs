//! With `F ≡ e` on the torus the stochastic solution is the deterministic one
//! translated by `-e B_t`.

use glvortex::forcing::BrownianPath;
use glvortex::gl::{canonical_initial, GLParams, VortexSpec};
use glvortex::grid::Grid;
use glvortex::stepper::{translate_compare, StepScheme};

fn main() -> glvortex::Result<()> {
    let p = GLParams::new(0.1)?;
    let e = [0.6, 0.3];
    let horizon = 0.005;
    let times: Vec<f64> = (1..=4).map(|k| k as f64 * horizon / 4.0).collect();
    let path = BrownianPath::sample(horizon, horizon / 1024.0, 1)?;
    for (n, path) in [(64, path.clone()), (128, path.refine())] {
        let g = Grid::torus(n, 1.0)?;
        let u0 = canonical_initial(&VortexSpec::pair([0.3, 0.45], [0.7, 0.55]), &p, &g)?;
        let gaps = translate_compare(&u0, &path, &p, e, StepScheme::heun(), &times)?;
        let line: Vec<String> = gaps.iter().map(|(t, d)| format!("{t:.5}: {d:.2e}")).collect();
        println!("n = {n:>3}  {}", line.join("  "));
    }
    Ok(())
}
