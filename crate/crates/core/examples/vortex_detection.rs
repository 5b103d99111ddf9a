//! Degrees, ball masses and the dual-norm distance to the atomic measure for
//! a four-vortex field.

use glvortex::gl::{canonical_initial, jacobian, GLParams, Vortex, VortexSpec};
use glvortex::grid::Grid;
use glvortex::vortex::{ball_mass, detect, dual_norm, DiscreteMeasure, TestDictionary};
use std::f64::consts::PI;

fn main() -> glvortex::Result<()> {
    let g = Grid::torus(256, 2.0)?;
    let spec = VortexSpec::new(vec![
        Vortex::new(0.5, 0.5, 1),
        Vortex::new(1.5, 0.5, -1),
        Vortex::new(1.5, 1.5, 1),
        Vortex::new(0.5, 1.5, -1),
    ]);
    for eps in [0.1, 0.05, 0.025] {
        let p = GLParams::new(eps)?;
        let u = canonical_initial(&spec, &p, &g)?;
        let set = detect(&u, 3.0 * eps);
        let j = jacobian(&u);
        println!("eps = {eps}: {} vortices, total degree {}", set.len(), set.total_degree());
        for v in &set.vortices {
            let m = ball_mass(&j, v.pos(), 0.4);
            println!("  ({:.4}, {:.4}) d = {:+}  mass/pi = {:+.4}", v.x, v.y, v.degree, m / PI);
        }
        let dn = dual_norm(&DiscreteMeasure::Density(j), &set.atomic_measure(), &g, 1.0, &TestDictionary::standard(&g))?;
        println!("  dual norm to the atomic measure: {dn:.5}");
    }
    Ok(())
}
