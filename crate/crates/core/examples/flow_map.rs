//! Deterministic and stochastic flow of a rotational bump field.

use glvortex::forcing::{flow_map, make_forcing, BrownianPath, ForcingFamily};
use glvortex::grid::Grid;

fn main() -> glvortex::Result<()> {
    let g = Grid::dirichlet(64, 1.0)?;
    let family = ForcingFamily::BumpRotational {
        center: [0.5, 0.5],
        radius: 0.4,
        amplitude: 4.0,
    };
    let f = make_forcing(family, &g)?;
    let map = flow_map(&f, 1e-3)?;
    let x0 = [0.6, 0.5];
    for s in [0.0, 0.5, 1.0, 2.0] {
        let x = map.apply(x0, s);
        let back = map.apply(x, -s);
        println!("s = {s:.1}: ({:.5}, {:.5})  return error {:.1e}", x[0], x[1], (back[0] - x0[0]).hypot(back[1] - x0[1]));
    }
    let path = BrownianPath::sample(1.0, 1e-3, 2)?;
    let b = path.values();
    for m in [0, 250, 500, 750, 1000] {
        let x = map.stochastic(x0, &path, m);
        println!("t = {:.2}  B = {:+.4}  x = ({:.5}, {:.5})", path.time(m), b[m], x[0], x[1]);
    }
    Ok(())
}
