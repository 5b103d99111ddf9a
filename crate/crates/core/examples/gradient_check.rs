//! Central differences of the discrete energy against `-∫(f_ε, v)`.

use glvortex::gl::{energy, gl_force, GLParams};
use glvortex::grid::{integrate_dot, ComplexField, Grid};
use num_complex::Complex64;
use std::f64::consts::PI;

fn main() -> glvortex::Result<()> {
    let g = Grid::torus(64, 1.0)?;
    let p = GLParams::new(0.1)?;
    let u = ComplexField::from_fn(g, |x| {
        let a = 2.0 * PI * x[0];
        let b = 2.0 * PI * x[1];
        Complex64::new(0.6 + 0.3 * a.cos() * b.sin(), 0.4 * (a - b).sin())
    });
    let v = ComplexField::from_fn(g, |x| Complex64::new(0.3 + (2.0 * PI * x[0]).cos(), (2.0 * PI * (x[0] + x[1])).sin()));
    let exact = -integrate_dot(&gl_force(&u, &p), &v)?;
    println!("{:>8} {:>16} {:>10}", "step", "difference", "rel.err");
    for k in 1..=6 {
        let s = 10f64.powi(-k);
        let fd = (energy(&u.axpy(s, &v), &p) - energy(&u.axpy(-s, &v), &p)) / (2.0 * s);
        println!("{s:>8.0e} {fd:>16.10} {:>10.2e}", (fd - exact).abs() / exact.abs());
    }
    println!("-∫(f, v) = {exact:.10}");
    Ok(())
}
