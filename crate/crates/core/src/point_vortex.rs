//! Point-vortex dynamics on the flat torus: the Kirchhoff–Onsager energy
//! built from the periodic Green's function, its gradient, and the
//! Stratonovich SDE driven by the same Brownian path as the field equation.
//!
//! The Green's function solves `-ΔG = δ - 1/L²` with zero mean:
//!
//! ```text
//! G(z) = -(1/2π) log|θ₁(πz/L)| + y²/(2L²) + C,    z = x + iy ∈ [-L/2, L/2)²,
//! ```
//!
//! with `C` fixed by the exponentially convergent mode sum at `(0, L/2)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forcing::{BrownianPath, ForcingField};
use crate::theta::Theta;
use crate::vortex::Tracks;

/// Mean-zero periodic Green's function of the square torus of side `L`.
#[derive(Clone, Debug)]
pub struct TorusGreen {
    side: f64,
    theta: Theta,
    constant: f64,
}

fn min_image(side: f64, v: f64) -> f64 {
    v - side * (v / side).round()
}

/// Minimal-image distance on the torus of side `side`.
pub fn torus_distance(side: f64, a: [f64; 2], b: [f64; 2]) -> f64 {
    min_image(side, b[0] - a[0]).hypot(min_image(side, b[1] - a[1]))
}

/// `G` by its Fourier series, summed exactly in `y` and truncated at `|m| ≤
/// kmax` in `x`. Converges like `e^{-2π kmax dist(y, Lℤ)/L}`.
pub fn mode_sum(side: f64, x: [f64; 2], kmax: usize) -> f64 {
    let l = side;
    let y = x[1].rem_euclid(l);
    let mut g = y * y / (2.0 * l) - y / 2.0 + l / 12.0;
    for m in 1..=kmax {
        let k = 2.0 * PI * m as f64 / l;
        let gm = ((k * (y - l)).exp() + (-k * y).exp()) / (2.0 * k * (1.0 - (-k * l).exp()));
        g += 2.0 * (k * x[0]).cos() * gm;
    }
    g / l
}

impl TorusGreen {
    /// `kmax` theta-series terms.
    pub fn new(side: f64, kmax: usize) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::InvalidParameter(format!("torus side {side}")));
        }
        let theta = Theta::new(kmax);
        let at_half: f64 = -1.0 / 24.0
            + (1..=40)
                .map(|m| {
                    let m = m as f64;
                    1.0 / (2.0 * PI * m * (PI * m).sinh())
                })
                .sum::<f64>();
        let t = theta.value(Complex64::new(0.0, -PI / 2.0)).norm();
        let constant = at_half + t.ln() / (2.0 * PI) - 0.125;
        Ok(Self { side, theta, constant })
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn kmax(&self) -> usize {
        self.theta.terms()
    }

    fn reduce(&self, x: [f64; 2]) -> (f64, f64) {
        (min_image(self.side, x[0]), min_image(self.side, x[1]))
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        let (a, b) = self.reduce(x);
        let l = self.side;
        let w = Complex64::new(a, b) * (PI / l);
        -self.theta.value(w).norm().ln() / (2.0 * PI) + b * b / (2.0 * l * l) + self.constant
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let (a, b) = self.reduce(x);
        let l = self.side;
        let w = Complex64::new(a, b) * (PI / l);
        let (t, dt) = self.theta.value_and_derivative(w);
        let rho = dt / t;
        [-rho.re / (2.0 * l), rho.im / (2.0 * l) + b / (l * l)]
    }
}

/// Vortex positions and degrees on the torus; indices are stable track ids.
#[derive(Clone, Debug, PartialEq)]
pub struct PointConfig {
    pub positions: Vec<[f64; 2]>,
    pub degrees: Vec<i32>,
    pub alive: Vec<bool>,
    /// Lattice offset `m` of the dipole moment `P = Σ d_k a_k + L m`, which
    /// fixes the mean phase gradient of the field. `None` selects the
    /// shortest `P`.
    pub branch: Option<[i64; 2]>,
}

impl PointConfig {
    pub fn new(positions: Vec<[f64; 2]>, degrees: Vec<i32>) -> Result<Self> {
        if positions.len() != degrees.len() {
            return Err(Error::InvalidParameter("positions and degrees differ in length".into()));
        }
        let alive = vec![true; positions.len()];
        Ok(Self {
            positions,
            degrees,
            alive,
            branch: None,
        })
    }

    pub fn from_spec(spec: &crate::gl::VortexSpec) -> Self {
        Self {
            positions: spec.vortices.iter().map(|v| v.pos()).collect(),
            degrees: spec.vortices.iter().map(|v| v.degree).collect(),
            alive: vec![true; spec.vortices.len()],
            branch: None,
        }
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    pub fn total_degree(&self) -> i64 {
        self.live().map(|k| self.degrees[k] as i64).sum()
    }

    fn live(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.positions.len()).filter(|&k| self.alive[k])
    }

    fn raw_moment(&self) -> [f64; 2] {
        let mut d = [0.0; 2];
        for k in self.live() {
            for c in 0..2 {
                d[c] += self.degrees[k] as f64 * self.positions[k][c];
            }
        }
        d
    }

    /// Lattice offset in use: the stored branch or the shortest one.
    pub fn lattice(&self, side: f64) -> [i64; 2] {
        self.branch.unwrap_or_else(|| {
            let d = self.raw_moment();
            [-(d[0] / side).round() as i64, -(d[1] / side).round() as i64]
        })
    }

    /// Dipole moment `P = Σ d_k a_k + L m`.
    pub fn moment(&self, side: f64) -> [f64; 2] {
        let d = self.raw_moment();
        let m = self.lattice(side);
        [d[0] + side * m[0] as f64, d[1] + side * m[1] as f64]
    }
}

fn check_balanced(cfg: &PointConfig) -> Result<()> {
    match cfg.total_degree() {
        0 => Ok(()),
        d => Err(Error::DegreesUnbalanced(d)),
    }
}

fn check_distinct(cfg: &PointConfig, side: f64) -> Result<()> {
    for j in cfg.live() {
        for k in cfg.live().filter(|&k| k > j) {
            if torus_distance(side, cfg.positions[j], cfg.positions[k]) < 1e-8 * side {
                return Err(Error::CoincidentVortices(j, k));
            }
        }
    }
    Ok(())
}

fn diff(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// `W = 2π² Σ_{j≠k} d_j d_k G(a_j - a_k) + (2π²/L²)|P|²`, so that `W ≈ -π
/// Σ_{j≠k} d_j d_k log|a_j - a_k|` for close vortices. The last term is the
/// energy of the mean phase gradient `(2π/L²) P^⊥` that a balanced
/// configuration forces on the torus; `P` is [`PointConfig::moment`].
pub fn renorm_energy(cfg: &PointConfig, g: &TorusGreen) -> Result<f64> {
    check_distinct(cfg, g.side())?;
    check_balanced(cfg)?;
    let l = g.side();
    let p = cfg.moment(l);
    let mut w = 2.0 * PI * PI * (p[0] * p[0] + p[1] * p[1]) / (l * l);
    for j in cfg.live() {
        for k in cfg.live().filter(|&k| k > j) {
            let dd = (cfg.degrees[j] * cfg.degrees[k]) as f64;
            w += 4.0 * PI * PI * dd * g.value(diff(cfg.positions[j], cfg.positions[k]));
        }
    }
    Ok(w)
}

/// `∂_{a_k} W = 4π² Σ_{j≠k} d_j d_k ∇G(a_k - a_j) + (4π²/L²) d_k P`; zero
/// for dead vortices.
pub fn renorm_gradient(cfg: &PointConfig, g: &TorusGreen) -> Result<Vec<[f64; 2]>> {
    check_distinct(cfg, g.side())?;
    check_balanced(cfg)?;
    let l = g.side();
    let p = cfg.moment(l);
    let mut out = vec![[0.0; 2]; cfg.positions.len()];
    for k in cfg.live() {
        let c = 4.0 * PI * PI * cfg.degrees[k] as f64 / (l * l);
        out[k] = [c * p[0], c * p[1]];
    }
    for j in cfg.live() {
        for k in cfg.live().filter(|&k| k > j) {
            let dd = (cfg.degrees[j] * cfg.degrees[k]) as f64;
            let gr = g.gradient(diff(cfg.positions[j], cfg.positions[k]));
            for c in 0..2 {
                let v = 4.0 * PI * PI * dd * gr[c];
                out[j][c] += v;
                out[k][c] -= v;
            }
        }
    }
    Ok(out)
}

/// One step of `da_k = -(1/π) ∂_{a_k}W dt - F(a_k) ∘ dB`: forward Euler on
/// the drift, Heun on the noise. The noise sign matches the field equation,
/// whose solution is transported by the flow of `-F`. Opposite pairs closer
/// than `rho_ann` are then removed, closest first; returns the removed pairs.
pub fn step_sde(
    cfg: &PointConfig,
    dt: f64,
    db: f64,
    forcing: &ForcingField,
    g: &TorusGreen,
    rho_ann: f64,
) -> Result<(PointConfig, Vec<(usize, usize)>)> {
    let grad = renorm_gradient(cfg, g)?;
    let l = g.side();
    let wrap = |p: [f64; 2]| [p[0].rem_euclid(l), p[1].rem_euclid(l)];
    let mut next = cfg.clone();
    let mut m = cfg.lattice(l);
    for k in cfg.live() {
        let a = cfg.positions[k];
        let drift = [-grad[k][0] / PI * dt, -grad[k][1] / PI * dt];
        let f0 = forcing.value(wrap(a));
        let pred = [a[0] + drift[0] - f0[0] * db, a[1] + drift[1] - f0[1] * db];
        let f1 = forcing.value(wrap(pred));
        let moved = [
            a[0] + drift[0] - 0.5 * (f0[0] + f1[0]) * db,
            a[1] + drift[1] - 0.5 * (f0[1] + f1[1]) * db,
        ];
        let w = wrap(moved);
        for c in 0..2 {
            m[c] += cfg.degrees[k] as i64 * ((moved[c] - w[c]) / l).round() as i64;
        }
        next.positions[k] = w;
    }
    let mut cand = Vec::new();
    for j in next.live() {
        for k in next.live().filter(|&k| k > j) {
            if next.degrees[j] == -next.degrees[k] {
                let d = torus_distance(l, next.positions[j], next.positions[k]);
                if d < rho_ann {
                    cand.push((d, j, k));
                }
            }
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut removed = Vec::new();
    for (_, j, k) in cand {
        if next.alive[j] && next.alive[k] {
            next.alive[j] = false;
            next.alive[k] = false;
            for c in 0..2 {
                let gap = next.positions[j][c] - next.positions[k][c];
                m[c] += next.degrees[j] as i64 * (gap / l).round() as i64;
            }
            removed.push((j, k));
        }
    }
    next.branch = Some(m);
    Ok((next, removed))
}

/// Integrates the point-vortex SDE along `path`, recording every `every`
/// steps (and the last step) as [`Tracks`].
pub fn run_sde(
    cfg0: &PointConfig,
    path: &BrownianPath,
    forcing: &ForcingField,
    g: &TorusGreen,
    rho_ann: f64,
    every: usize,
) -> Result<Tracks> {
    let every = every.max(1);
    let mut tracks = Tracks {
        times: Vec::new(),
        degrees: cfg0.degrees.clone(),
        positions: Vec::new(),
    };
    let record = |tracks: &mut Tracks, t: f64, cfg: &PointConfig| {
        tracks.times.push(t);
        tracks.positions.push((0..cfg.positions.len()).map(|k| cfg.alive[k].then_some(cfg.positions[k])).collect());
    };
    let mut cfg = cfg0.clone();
    record(&mut tracks, 0.0, &cfg);
    let dt = path.dt();
    for (m, &db) in path.increments().iter().enumerate() {
        if cfg.alive_count() > 0 {
            cfg = step_sde(&cfg, dt, db, forcing, g, rho_ann)?.0;
        }
        if (m + 1) % every == 0 || m + 1 == path.steps() {
            record(&mut tracks, path.time(m + 1), &cfg);
        }
    }
    Ok(tracks)
}

/// Matched-position distances between two track sets on the torus.
#[derive(Clone, Debug, PartialEq)]
pub struct PathComparison {
    pub times: Vec<f64>,
    /// `(pde id, sde id)` matched at `t = 0`.
    pub pairs: Vec<(usize, usize)>,
    /// `distances[frame][pair]`, `NaN` unless both are alive.
    pub distances: Vec<Vec<f64>>,
    pub sup: f64,
    /// First time a matched pair is separated by more than the decoupling
    /// radius, or is alive in one set only.
    pub divergence_time: Option<f64>,
}

pub fn compare_paths(pde: &Tracks, sde: &Tracks, side: f64, decouple: f64) -> Result<PathComparison> {
    let frames = pde.frames().min(sde.frames());
    if frames == 0 {
        return Ok(PathComparison {
            times: Vec::new(),
            pairs: Vec::new(),
            distances: Vec::new(),
            sup: 0.0,
            divergence_time: None,
        });
    }
    let a: Vec<_> = pde.alive(0).collect();
    let b: Vec<_> = sde.alive(0).collect();
    if a.len() != b.len() {
        return Err(Error::TrackMismatch(a.len(), b.len()));
    }
    let mut cand = Vec::new();
    for &(i, pi, di) in &a {
        for &(j, pj, dj) in &b {
            if di == dj {
                cand.push((torus_distance(side, pi, pj), i, j));
            }
        }
    }
    cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (_, i, j) in cand {
        if pairs.iter().all(|&(p, q)| p != i && q != j) {
            pairs.push((i, j));
        }
    }
    if pairs.len() != a.len() {
        return Err(Error::TrackMismatch(a.len(), pairs.len()));
    }
    pairs.sort_unstable();
    let mut out = PathComparison {
        times: Vec::with_capacity(frames),
        pairs: pairs.clone(),
        distances: Vec::with_capacity(frames),
        sup: 0.0,
        divergence_time: None,
    };
    for f in 0..frames {
        let (tp, ts) = (pde.times[f], sde.times[f]);
        if (tp - ts).abs() > 1e-9 * tp.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!("frame {f}: times {tp} and {ts} differ")));
        }
        let row: Vec<f64> = pairs
            .iter()
            .map(|&(i, j)| match (pde.positions[f].get(i).copied().flatten(), sde.positions[f].get(j).copied().flatten()) {
                (Some(p), Some(q)) => torus_distance(side, p, q),
                (None, None) => f64::NAN,
                _ => f64::INFINITY,
            })
            .collect();
        for &d in &row {
            if d.is_finite() {
                out.sup = out.sup.max(d);
            }
            if out.divergence_time.is_none() && (d.is_infinite() || d > decouple) {
                out.divergence_time = Some(tp);
            }
        }
        out.times.push(tp);
        out.distances.push(row.into_iter().map(|d| if d.is_infinite() { f64::NAN } else { d }).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::{make_forcing, ForcingFamily};
    use crate::grid::Grid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn green_matches_mode_sum_and_is_periodic() {
        for side in [1.0, 2.0] {
            let g = TorusGreen::new(side, 16).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..50 {
                let x = [rng.random_range(-1.0..1.0) * side, rng.random_range(0.1..0.9) * side];
                let a = g.value(x);
                let b = mode_sum(side, x, 80);
                assert!((a - b).abs() < 1e-10, "{x:?} {a} {b}");
                let shifted = g.value([x[0] + side, x[1] - 2.0 * side]);
                assert!((a - shifted).abs() < 1e-12);
                assert!((a - g.value([-x[0], -x[1]])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn green_has_zero_mean_and_log_singularity() {
        let side = 1.0;
        let g = TorusGreen::new(side, 16).unwrap();
        let n = 200;
        let h = side / n as f64;
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                s += g.value([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]) * h * h;
            }
        }
        assert!(s.abs() < 1e-3, "{s}");
        let (r1, r2) = (1e-3, 2e-3);
        let slope = (g.value([r2, 0.0]) - g.value([r1, 0.0])) / (r2 / r1).ln();
        assert!((slope + 1.0 / (2.0 * PI)).abs() < 1e-5, "{slope}");
    }

    #[test]
    fn green_laplacian_is_uniform_background() {
        let g = TorusGreen::new(1.0, 16).unwrap();
        let h = 1e-3;
        for x in [[0.3, 0.2], [-0.4, 0.45], [0.1, -0.3]] {
            let lap = (g.value([x[0] + h, x[1]]) + g.value([x[0] - h, x[1]]) + g.value([x[0], x[1] + h]) + g.value([x[0], x[1] - h])
                - 4.0 * g.value(x))
                / (h * h);
            assert!((lap - 1.0).abs() < 1e-5, "{lap}");
        }
    }

    #[test]
    fn green_gradient_matches_differences() {
        let g = TorusGreen::new(2.0, 16).unwrap();
        let h = 1e-6;
        for x in [[0.3, 0.2], [-0.9, 0.95], [0.05, -0.7]] {
            let gr = g.gradient(x);
            let fx = (g.value([x[0] + h, x[1]]) - g.value([x[0] - h, x[1]])) / (2.0 * h);
            let fy = (g.value([x[0], x[1] + h]) - g.value([x[0], x[1] - h])) / (2.0 * h);
            assert!((gr[0] - fx).abs() < 1e-7 && (gr[1] - fy).abs() < 1e-7, "{gr:?} {fx} {fy}");
        }
    }

    #[test]
    fn green_stable_in_kmax() {
        let (a, b) = (TorusGreen::new(1.0, 16).unwrap(), TorusGreen::new(1.0, 32).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x: [f64; 2] = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
            if x[0].hypot(x[1]) < 0.02 {
                continue;
            }
            assert!((a.value(x) - b.value(x)).abs() < 1e-8);
            let (ga, gb) = (a.gradient(x), b.gradient(x));
            assert!((ga[0] - gb[0]).abs() < 1e-8 && (ga[1] - gb[1]).abs() < 1e-8);
        }
    }

    fn pair(r: f64) -> PointConfig {
        PointConfig::new(vec![[0.5 - r / 2.0, 0.5], [0.5 + r / 2.0, 0.5]], vec![1, -1]).unwrap()
    }

    #[test]
    fn pair_energy_monotone_and_unbalanced_rejected() {
        let g = TorusGreen::new(1.0, 16).unwrap();
        let one = PointConfig::new(vec![[0.2, 0.3]], vec![1]).unwrap();
        assert!(matches!(renorm_energy(&one, &g), Err(Error::DegreesUnbalanced(1))));
        assert!(matches!(renorm_gradient(&one, &g), Err(Error::DegreesUnbalanced(1))));
        let mut last = f64::NEG_INFINITY;
        for i in 0..=25 {
            let r = 0.05 + 0.01 * i as f64;
            let w = renorm_energy(&pair(r), &g).unwrap();
            assert!(w > last);
            last = w;
        }
        let w = renorm_energy(&pair(0.01), &g).unwrap();
        let w2 = renorm_energy(&pair(0.02), &g).unwrap();
        assert!(((w2 - w) / 2f64.ln() - 2.0 * PI).abs() < 1e-2, "{w} {w2}");
        let bad = PointConfig::new(vec![[0.2, 0.3], [0.2, 0.3]], vec![1, -1]).unwrap();
        assert!(matches!(renorm_energy(&bad, &g), Err(Error::CoincidentVortices(0, 1))));
    }

    #[test]
    fn symmetric_pair_gradient_is_opposite_along_axis() {
        let g = TorusGreen::new(1.0, 16).unwrap();
        let gr = renorm_gradient(&pair(0.2), &g).unwrap();
        assert!(gr[0][1].abs() < 1e-12 && gr[1][1].abs() < 1e-12);
        assert!((gr[0][0] + gr[1][0]).abs() < 1e-12);
        assert!(gr[0][0] < 0.0, "W grows with separation, so the left vortex sees ∂W pointing left");
    }

    #[test]
    fn field_energy_follows_renormalized_energy() {
        use crate::gl::{canonical_initial, energy, GLParams, VortexSpec};
        let grid = crate::grid::Grid::torus(128, 1.0).unwrap();
        let p = GLParams::new(0.05).unwrap();
        let g = TorusGreen::new(1.0, 16).unwrap();
        let cases = [
            ([0.35, 0.5], [0.65, 0.5]),
            ([0.3, 0.5], [0.7, 0.5]),
            ([0.85, 0.5], [0.15, 0.5]),
            ([0.5, 0.9], [0.5, 0.2]),
            ([0.3, 0.3], [0.6, 0.55]),
            ([0.25, 0.5], [0.75, 0.5]),
        ];
        let gaps: Vec<f64> = cases
            .iter()
            .map(|&(a, b)| {
                let spec = VortexSpec::pair(a, b);
                let u = canonical_initial(&spec, &p, &grid).unwrap();
                energy(&u, &p) - renorm_energy(&PointConfig::from_spec(&spec), &g).unwrap()
            })
            .collect();
        let lo = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo < 0.1, "{gaps:?}");
        assert!((gaps[0] - gaps[2]).abs() < 1e-9);
    }

    #[test]
    fn branch_follows_wrapping_and_annihilation() {
        let g = TorusGreen::new(1.0, 16).unwrap();
        let grid = crate::grid::Grid::torus(16, 1.0).unwrap();
        let f = crate::forcing::make_forcing(crate::forcing::ForcingFamily::TorusConstant { direction: [1.0, 0.0] }, &grid).unwrap();
        let cfg = PointConfig::new(vec![[0.95, 0.5], [0.25, 0.5]], vec![1, -1]).unwrap();
        let p0 = cfg.moment(1.0);
        let (next, _) = step_sde(&cfg, 1e-9, -0.1, &f, &g, 0.0).unwrap();
        assert!(next.positions[0][0] < 0.1);
        let p1 = next.moment(1.0);
        assert!((p1[0] - p0[0]).abs() < 1e-6 && (p1[1] - p0[1]).abs() < 1e-12, "{p0:?} {p1:?}");
        let (gone, removed) = step_sde(&next, 1e-9, 0.0, &ForcingField::zero(&grid), &g, 0.5).unwrap();
        assert_eq!(removed, vec![(0, 1)]);
        assert_eq!(gone.moment(1.0), [0.0, 0.0]);
    }

    fn random_config(seed: u64) -> PointConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos = (0..4).map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
        PointConfig::new(pos, vec![1, -1, 1, -1]).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = TorusGreen::new(1.0, 16).unwrap();
        for seed in 0..10 {
            let cfg = random_config(seed);
            let gr = renorm_gradient(&cfg, &g).unwrap();
            let h = 1e-6;
            for k in 0..4 {
                for c in 0..2 {
                    let mut p = cfg.clone();
                    p.positions[k][c] += h;
                    let mut m = cfg.clone();
                    m.positions[k][c] -= h;
                    let fd = (renorm_energy(&p, &g).unwrap() - renorm_energy(&m, &g).unwrap()) / (2.0 * h);
                    let scale = gr[k][c].abs().max(1.0);
                    assert!((fd - gr[k][c]).abs() <= 1e-6 * scale, "{seed} {k} {c}: {fd} {}", gr[k][c]);
                }
            }
        }
    }

    #[test]
    fn zero_forcing_pair_attracts_and_annihilates() {
        let g = TorusGreen::new(1.0, 16).unwrap();
        let grid = Grid::torus(16, 1.0).unwrap();
        let zero = ForcingField::zero(&grid);
        let mut cfg = pair(0.3);
        let mut d = 0.3;
        let dt = 1e-5;
        let mut steps = 0;
        while cfg.alive_count() == 2 {
            let w0 = renorm_energy(&cfg, &g).unwrap();
            let (next, removed) = step_sde(&cfg, dt, 0.0, &zero, &g, 0.02).unwrap();
            if !removed.is_empty() {
                assert_eq!(removed, vec![(0, 1)]);
                cfg = next;
                break;
            }
            let nd = torus_distance(1.0, next.positions[0], next.positions[1]);
            assert!(nd < d);
            assert!(renorm_energy(&next, &g).unwrap() <= w0);
            d = nd;
            cfg = next;
            steps += 1;
        }
        assert_eq!(cfg.alive_count(), 0);
        // ṙ = -(2/π) W'(r) with W from the mode sum, by RK4 until r = 0.02.
        let w = |r: f64| -4.0 * PI * PI * mode_sum(1.0, [0.0, r], 400) + 2.0 * PI * PI * r * r;
        let rate = |r: f64| -2.0 / PI * (w(r + 1e-6) - w(r - 1e-6)) / 2e-6;
        let (mut r, mut t_ref, h) = (0.3, 0.0, 1e-6);
        while r > 0.02 {
            let k1 = rate(r);
            let k2 = rate(r + 0.5 * h * k1);
            let k3 = rate(r + 0.5 * h * k2);
            let k4 = rate(r + h * k3);
            r += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
            t_ref += h;
        }
        let t = steps as f64 * dt;
        assert!((t - t_ref).abs() < 0.01 * t_ref, "{t} {t_ref}");
    }

    #[test]
    fn constant_forcing_translates_rigidly() {
        let g = TorusGreen::new(1.0, 16).unwrap();
        let grid = Grid::torus(16, 1.0).unwrap();
        let f = make_forcing(ForcingFamily::TorusConstant { direction: [1.0, 0.5] }, &grid).unwrap();
        let cfg = random_config(4);
        let (a, _) = step_sde(&cfg, 0.0, 0.01, &f, &g, 0.0).unwrap();
        for k in 0..4 {
            let d = diff(a.positions[k], cfg.positions[k]);
            assert!((min_image(1.0, d[0]) + 0.01).abs() < 1e-14);
            assert!((min_image(1.0, d[1]) + 0.005).abs() < 1e-14);
        }
    }

    #[test]
    fn sde_tracks_and_comparison() {
        let g = TorusGreen::new(1.0, 16).unwrap();
        let grid = Grid::torus(16, 1.0).unwrap();
        let zero = ForcingField::zero(&grid);
        let path = BrownianPath::sample(0.002, 1e-5, 0).unwrap();
        let a = run_sde(&pair(0.3), &path, &zero, &g, 0.02, 10).unwrap();
        assert_eq!(a.frames(), 21);
        let same = compare_paths(&a, &a, 1.0, 0.01).unwrap();
        assert_eq!(same.sup, 0.0);
        assert!(same.divergence_time.is_none());
        let b = run_sde(&pair(0.31), &path, &zero, &g, 0.02, 10).unwrap();
        let c = compare_paths(&a, &b, 1.0, 0.001).unwrap();
        assert!(c.sup >= 0.005 && c.divergence_time == Some(0.0));
        let three = run_sde(&random_config(1), &path, &zero, &g, 0.0, 10).unwrap();
        assert!(matches!(compare_paths(&a, &three, 1.0, 0.1), Err(Error::TrackMismatch(2, 4))));
        let short = BrownianPath::sample(1e-5, 1e-5, 0).unwrap();
        let z = run_sde(&pair(0.3), &short, &zero, &g, 0.02, 1).unwrap();
        assert_eq!(compare_paths(&z, &z, 1.0, 0.1).unwrap().sup, 0.0);
    }

    proptest! {
        #[test]
        fn energy_translation_invariant_and_momentum_free(seed in 0u64..500, vx in -1.0f64..1.0, vy in -1.0f64..1.0) {
            let g = TorusGreen::new(1.0, 16).unwrap();
            let cfg = random_config(seed);
            let mut moved = cfg.clone();
            for p in &mut moved.positions {
                *p = [p[0] + vx, p[1] + vy];
            }
            let (w, w2) = (renorm_energy(&cfg, &g).unwrap(), renorm_energy(&moved, &g).unwrap());
            prop_assert!((w - w2).abs() < 1e-9 * w.abs().max(1.0));
            let gr = renorm_gradient(&cfg, &g).unwrap();
            let s = gr.iter().fold([0.0, 0.0], |a, v| [a[0] + v[0], a[1] + v[1]]);
            prop_assert!(s[0].abs() < 1e-9 && s[1].abs() < 1e-9);
        }
    }
}
