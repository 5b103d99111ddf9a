//! Forcing fields `F` with analytic first and second derivatives, the
//! convective operator `(F·∇)`, the coefficient fields `ψ`, `Ψ`, Brownian
//! paths and the deterministic flow `Φ` generated by `-F`.
//!
//! Index conventions: `A_{ab} = ∂_b F^a` and `H_{abc} = ∂_b ∂_c F^a`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{gradient, hessian, ComplexField, Geometry, Grid, MatrixField, ScalarField};

/// Forcing family and parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ForcingFamily {
    Zero,
    /// `F = χ(x) e` with `χ = (1 - |x - c|²/R²)⁴₊`.
    BumpConstant {
        center: [f64; 2],
        radius: f64,
        direction: [f64; 2],
    },
    /// `F = a χ(x) (x - c)^⊥`.
    BumpRotational {
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
    },
    /// `F ≡ e`; torus only.
    TorusConstant { direction: [f64; 2] },
    /// `F = (a (1 - (x₁ - c)²/R²)⁴₊, 0)`; torus only.
    Axis {
        center: f64,
        radius: f64,
        amplitude: f64,
    },
}

impl ForcingFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ForcingFamily::Zero => "zero",
            ForcingFamily::BumpConstant { .. } => "bump-constant",
            ForcingFamily::BumpRotational { .. } => "bump-rotational",
            ForcingFamily::TorusConstant { .. } => "torus-constant",
            ForcingFamily::Axis { .. } => "axis",
        }
    }
}

/// Value and derivatives of `F` at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub f: [f64; 2],
    /// `a[a][b] = ∂_b F^a`.
    pub a: [[f64; 2]; 2],
    /// `h[a][b][c] = ∂_b ∂_c F^a`.
    pub h: [[[f64; 2]; 2]; 2],
}

impl Jet {
    pub fn div(&self) -> f64 {
        self.a[0][0] + self.a[1][1]
    }

    /// `ψ = ½ div(F div F) = ½((div F)² + F·∇ div F)`.
    pub fn psi(&self) -> f64 {
        let d = self.div();
        let mut f_grad_div = 0.0;
        for c in 0..2 {
            let g = self.h[0][0][c] + self.h[1][1][c];
            f_grad_div += self.f[c] * g;
        }
        0.5 * (d * d + f_grad_div)
    }

    /// `(∇w)_{lk}` for `w = A F`.
    pub fn grad_w(&self) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for (l, row) in out.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                for s in 0..2 {
                    *v += self.h[l][s][k] * self.f[s] + self.a[l][s] * self.a[s][k];
                }
            }
        }
        out
    }

    /// `Ψ = ½ A Aᵀ + (A²)ᵀ - div F·Aᵀ - ½ (∇w)ᵀ`.
    pub fn psi_matrix(&self) -> [[f64; 2]; 2] {
        let a = &self.a;
        let gw = self.grad_w();
        let d = self.div();
        let mut out = [[0.0; 2]; 2];
        for (j, row) in out.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                let aat = a[j][0] * a[k][0] + a[j][1] * a[k][1];
                let a2t = a[k][0] * a[0][j] + a[k][1] * a[1][j];
                *v = 0.5 * aat + a2t - d * a[k][j] - 0.5 * gw[k][j];
            }
        }
        out
    }
}

/// Polynomial bump `(1 - r²/R²)⁴` and its derivatives at displacement `x`.
fn bump(x: [f64; 2], radius: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let r2 = radius * radius;
    let s = 1.0 - (x[0] * x[0] + x[1] * x[1]) / r2;
    if s <= 0.0 {
        return (0.0, [0.0; 2], [[0.0; 2]; 2]);
    }
    let s2 = s * s;
    let s3 = s2 * s;
    let chi = s2 * s2;
    let d = [-8.0 * s3 * x[0] / r2, -8.0 * s3 * x[1] / r2];
    let mut dd = [[0.0; 2]; 2];
    for b in 0..2 {
        for c in 0..2 {
            let delta = if b == c { 1.0 } else { 0.0 };
            dd[b][c] = -8.0 * s3 * delta / r2 + 48.0 * s2 * x[b] * x[c] / (r2 * r2);
        }
    }
    (chi, d, dd)
}

fn bump1d(x: f64, radius: f64) -> (f64, f64, f64) {
    let r2 = radius * radius;
    let s = 1.0 - x * x / r2;
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let s2 = s * s;
    let s3 = s2 * s;
    (s2 * s2, -8.0 * s3 * x / r2, -8.0 * s3 / r2 + 48.0 * s2 * x * x / (r2 * r2))
}

/// A forcing family bound to a domain, with sampled norms.
#[derive(Clone, Debug, PartialEq)]
pub struct ForcingField {
    family: ForcingFamily,
    geometry: Geometry,
    side: f64,
    c0: f64,
    c1: f64,
    c2: f64,
}

/// Validates `family` against the domain of `grid` and samples its norms.
pub fn make_forcing(family: ForcingFamily, grid: &Grid) -> Result<ForcingField> {
    let side = grid.side();
    let torus = grid.is_torus();
    let check_radius = |r: f64| -> Result<()> {
        if !(r.is_finite() && r > 0.0 && r < 0.5 * side) {
            return Err(Error::InvalidParameter(format!(
                "support radius {r} must lie in (0, L/2)"
            )));
        }
        Ok(())
    };
    let check_disc = |c: [f64; 2], r: f64| -> Result<()> {
        check_radius(r)?;
        if !torus && !(c[0] - r > 0.0 && c[0] + r < side && c[1] - r > 0.0 && c[1] + r < side) {
            return Err(Error::InvalidParameter(format!(
                "support of radius {r} around {c:?} leaves the square"
            )));
        }
        Ok(())
    };
    match family {
        ForcingFamily::Zero => {}
        ForcingFamily::BumpConstant { center, radius, .. }
        | ForcingFamily::BumpRotational { center, radius, .. } => check_disc(center, radius)?,
        ForcingFamily::TorusConstant { .. } => {
            if !torus {
                return Err(Error::UnsupportedOnGeometry("constant forcing"));
            }
        }
        ForcingFamily::Axis { radius, .. } => {
            if !torus {
                return Err(Error::UnsupportedOnGeometry("axis-dependent forcing"));
            }
            check_radius(radius)?;
        }
    }
    let mut field = ForcingField {
        family,
        geometry: grid.geometry(),
        side,
        c0: 0.0,
        c1: 0.0,
        c2: 0.0,
    };
    let samples = 256;
    let step = side / samples as f64;
    let (mut s0, mut s1, mut s2) = (0.0_f64, 0.0_f64, 0.0_f64);
    for j in 0..=samples {
        for i in 0..=samples {
            let jet = field.jet([i as f64 * step, j as f64 * step]);
            s0 = s0.max(jet.f[0].hypot(jet.f[1]));
            s1 = s1.max(frobenius(&jet.a));
            let hn: f64 = jet.h.iter().flatten().flatten().map(|v| v * v).sum::<f64>().sqrt();
            s2 = s2.max(hn);
        }
    }
    field.c0 = s0;
    field.c1 = s0 + s1;
    field.c2 = s0 + s1 + s2;
    Ok(field)
}

fn frobenius(m: &[[f64; 2]; 2]) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

impl ForcingField {
    pub fn zero(grid: &Grid) -> Self {
        make_forcing(ForcingFamily::Zero, grid).expect("zero forcing is always valid")
    }

    pub fn family(&self) -> &ForcingFamily {
        &self.family
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, ForcingFamily::Zero)
    }

    /// `sup |F|`.
    pub fn sup_norm(&self) -> f64 {
        self.c0
    }

    /// `sup |F| + sup |∇F|`, sampled.
    pub fn c1_norm(&self) -> f64 {
        self.c1
    }

    /// `sup |F| + sup |∇F| + sup |∇²F|`, sampled.
    pub fn c2_norm(&self) -> f64 {
        self.c2
    }

    fn offset(&self, x: [f64; 2], c: [f64; 2]) -> [f64; 2] {
        let mut d = [x[0] - c[0], x[1] - c[1]];
        if self.geometry == Geometry::Torus {
            for v in &mut d {
                *v -= self.side * (*v / self.side).round();
            }
        }
        d
    }

    pub fn value(&self, x: [f64; 2]) -> [f64; 2] {
        self.jet(x).f
    }

    pub fn jet(&self, x: [f64; 2]) -> Jet {
        let mut jet = Jet::default();
        match self.family {
            ForcingFamily::Zero => {}
            ForcingFamily::TorusConstant { direction } => jet.f = direction,
            ForcingFamily::BumpConstant {
                center,
                radius,
                direction: e,
            } => {
                let (chi, d, dd) = bump(self.offset(x, center), radius);
                for a in 0..2 {
                    jet.f[a] = chi * e[a];
                    for b in 0..2 {
                        jet.a[a][b] = e[a] * d[b];
                        for c in 0..2 {
                            jet.h[a][b][c] = e[a] * dd[b][c];
                        }
                    }
                }
            }
            ForcingFamily::BumpRotational {
                center,
                radius,
                amplitude,
            } => {
                let r = self.offset(x, center);
                let (chi, d, dd) = bump(r, radius);
                let g = [-r[1], r[0]];
                let jg = [[0.0, -1.0], [1.0, 0.0]];
                for a in 0..2 {
                    jet.f[a] = amplitude * chi * g[a];
                    for b in 0..2 {
                        jet.a[a][b] = amplitude * (d[b] * g[a] + chi * jg[a][b]);
                        for c in 0..2 {
                            jet.h[a][b][c] = amplitude
                                * (dd[b][c] * g[a] + d[b] * jg[a][c] + d[c] * jg[a][b]);
                        }
                    }
                }
            }
            ForcingFamily::Axis {
                center,
                radius,
                amplitude,
            } => {
                let mut s = x[0] - center;
                s -= self.side * (s / self.side).round();
                let (v, d, dd) = bump1d(s, radius);
                jet.f[0] = amplitude * v;
                jet.a[0][0] = amplitude * d;
                jet.h[0][0][0] = amplitude * dd;
            }
        }
        jet
    }

    /// Samples `F`, `∇F` and `∇²F` at every node of `grid`.
    pub fn sample(&self, grid: &Grid) -> SampledForcing {
        let jets: Vec<Jet> = grid.points().map(|p| self.jet(p)).collect();
        SampledForcing { grid: *grid, jets }
    }
}

/// Nodal samples of a [`ForcingField`].
#[derive(Clone, Debug)]
pub struct SampledForcing {
    pub grid: Grid,
    pub jets: Vec<Jet>,
}

impl SampledForcing {
    pub fn is_identically_zero(&self) -> bool {
        self.jets.iter().all(|j| *j == Jet::default())
    }

    pub fn component(&self, a: usize) -> Vec<f64> {
        self.jets.iter().map(|j| j.f[a]).collect()
    }

    pub fn div(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.jets.iter().map(Jet::div).collect(),
        }
    }

    pub fn grad(&self) -> MatrixField {
        let mut m = MatrixField::zeros(self.grid);
        for (k, j) in self.jets.iter().enumerate() {
            m.set(k, j.a);
        }
        m
    }
}

/// `ψ` sampled on the grid.
pub fn psi_field(f: &SampledForcing) -> ScalarField {
    ScalarField {
        grid: f.grid,
        data: f.jets.iter().map(Jet::psi).collect(),
    }
}

/// `Ψ` sampled on the grid.
#[allow(non_snake_case)]
pub fn Psi_field(f: &SampledForcing) -> MatrixField {
    let mut m = MatrixField::zeros(f.grid);
    for (k, j) in f.jets.iter().enumerate() {
        m.set(k, j.psi_matrix());
    }
    m
}

/// `(F·∇)u` with centered differences.
pub fn convective(f: &SampledForcing, u: &ComplexField) -> ComplexField {
    let du = gradient(u);
    let mut out = ComplexField::zeros(u.grid);
    for (k, j) in f.jets.iter().enumerate() {
        out.re[k] = j.f[0] * du.d1.re[k] + j.f[1] * du.d2.re[k];
        out.im[k] = j.f[0] * du.d1.im[k] + j.f[1] * du.d2.im[k];
    }
    out
}

/// `(F·∇)²u = F^j F^k ∂²_{jk}u + F^j ∂_j F^k ∂_k u` with analytic `∇F` and
/// centered second differences.
pub fn ito_correction(f: &SampledForcing, u: &ComplexField) -> ComplexField {
    let du = gradient(u);
    let hu = hessian(u);
    let mut out = ComplexField::zeros(u.grid);
    for (k, jet) in f.jets.iter().enumerate() {
        let [f1, f2] = jet.f;
        let w1 = jet.a[0][0] * f1 + jet.a[0][1] * f2;
        let w2 = jet.a[1][0] * f1 + jet.a[1][1] * f2;
        let second = |a: &ComplexField, b: &ComplexField, c: &ComplexField| -> Complex64 {
            a.at(k) * (f1 * f1) + b.at(k) * (2.0 * f1 * f2) + c.at(k) * (f2 * f2)
        };
        let z = second(&hu.d11, &hu.d12, &hu.d22) + du.d1.at(k) * w1 + du.d2.at(k) * w2;
        out.set(k, z);
    }
    out
}

/// Samples of one scalar Brownian motion on a uniform time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    dt: f64,
    increments: Vec<f64>,
    seed: u64,
    level: u64,
}

fn steps_for(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && horizon >= 0.0 && dt.is_finite() && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("T = {horizon}, dt = {dt}")));
    }
    let steps = (horizon / dt).round();
    if (steps * dt - horizon).abs() > 1e-9 * horizon.max(dt) {
        return Err(Error::InvalidParameter(format!("dt = {dt} does not divide T = {horizon}")));
    }
    Ok(steps as usize)
}

impl BrownianPath {
    /// Independent `N(0, dt)` increments drawn from a ChaCha stream keyed by `seed`.
    pub fn sample(horizon: f64, dt: f64, seed: u64) -> Result<Self> {
        let steps = steps_for(horizon, dt)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = dt.sqrt();
        let increments = (0..steps)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect();
        Ok(Self {
            dt,
            increments,
            seed,
            level: 0,
        })
    }

    /// The path `B ≡ 0`.
    pub fn zero(horizon: f64, dt: f64) -> Result<Self> {
        let steps = steps_for(horizon, dt)?;
        Ok(Self {
            dt,
            increments: vec![0.0; steps],
            seed: 0,
            level: 0,
        })
    }

    pub fn from_increments(dt: f64, increments: Vec<f64>) -> Self {
        Self {
            dt,
            increments,
            seed: 0,
            level: 0,
        }
    }

    /// Halves `dt` by Brownian-bridge midpoint insertion; coarse values are kept.
    pub fn refine(&self) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.level + 1);
        let sd = (0.25 * self.dt).sqrt();
        let mut increments = Vec::with_capacity(2 * self.increments.len());
        for &db in &self.increments {
            let z: f64 = StandardNormal.sample(&mut rng);
            let first = 0.5 * db + sd * z;
            increments.push(first);
            increments.push(db - first);
        }
        Self {
            dt: 0.5 * self.dt,
            increments,
            seed: self.seed,
            level: self.level + 1,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.increments.len() as f64
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt
    }

    /// `B_{t_m}` for `m = 0..=steps`.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        let mut b = 0.0;
        out.push(b);
        for db in &self.increments {
            b += db;
            out.push(b);
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# glvortex-path v1 seed={} dt={}", self.seed, self.dt)?;
        writeln!(w, "t,B")?;
        for (m, b) in self.values().iter().enumerate() {
            writeln!(w, "{},{}", self.time(m), b)?;
        }
        Ok(())
    }
}

/// Flow `∂_s Φ(x, s) = -F(Φ(x, s))`, `Φ(x, 0) = x`, integrated with classical
/// RK4 at a fixed step; the stochastic flow is `φ_{0,t}(x) = Φ(x, B_t)`.
#[derive(Clone, Debug)]
pub struct FlowMap {
    forcing: ForcingField,
    step: f64,
}

/// Flow map of `-F` with maximal integrator step `step`.
pub fn flow_map(forcing: &ForcingField, step: f64) -> Result<FlowMap> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("flow step {step}")));
    }
    Ok(FlowMap {
        forcing: forcing.clone(),
        step,
    })
}

impl FlowMap {
    pub fn apply(&self, x: [f64; 2], s: f64) -> [f64; 2] {
        if s == 0.0 {
            return x;
        }
        let n = (s.abs() / self.step).ceil().max(1.0) as usize;
        let h = s / n as f64;
        let rhs = |p: [f64; 2]| {
            let f = self.forcing.value(p);
            [-f[0], -f[1]]
        };
        let mut p = x;
        for _ in 0..n {
            let k1 = rhs(p);
            let k2 = rhs([p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]]);
            let k3 = rhs([p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]]);
            let k4 = rhs([p[0] + h * k3[0], p[1] + h * k3[1]]);
            for c in 0..2 {
                p[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
        }
        p
    }

    /// `φ_{0,t_m}(x) = Φ(x, B_{t_m})`.
    pub fn stochastic(&self, x: [f64; 2], path: &BrownianPath, m: usize) -> [f64; 2] {
        let b: f64 = path.increments()[..m].iter().sum();
        self.apply(x, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn torus() -> Grid {
        Grid::torus(64, 1.0).unwrap()
    }

    fn families() -> Vec<ForcingFamily> {
        vec![
            ForcingFamily::BumpConstant {
                center: [0.5, 0.5],
                radius: 0.3,
                direction: [0.7, -0.4],
            },
            ForcingFamily::BumpRotational {
                center: [0.45, 0.55],
                radius: 0.35,
                amplitude: 1.3,
            },
            ForcingFamily::TorusConstant {
                direction: [1.0, 0.5],
            },
            ForcingFamily::Axis {
                center: 0.5,
                radius: 0.3,
                amplitude: 0.8,
            },
        ]
    }

    #[test]
    fn constant_and_zero_have_vanishing_derivatives() {
        let g = torus();
        let f = make_forcing(ForcingFamily::TorusConstant { direction: [1.0, 0.0] }, &g).unwrap();
        let jet = f.jet([0.3, 0.9]);
        assert_eq!(jet.f, [1.0, 0.0]);
        assert_eq!(jet.a, [[0.0; 2]; 2]);
        assert_eq!(jet.psi(), 0.0);
        assert_eq!(jet.psi_matrix(), [[0.0; 2]; 2]);
        let z = ForcingField::zero(&g);
        assert_eq!(z.jet([0.1, 0.1]), Jet::default());
    }

    #[test]
    fn geometry_restrictions() {
        let d = Grid::dirichlet(32, 1.0).unwrap();
        let c = ForcingFamily::TorusConstant { direction: [1.0, 0.0] };
        assert!(matches!(make_forcing(c, &d), Err(Error::UnsupportedOnGeometry(_))));
        let leaking = ForcingFamily::BumpConstant {
            center: [0.1, 0.5],
            radius: 0.3,
            direction: [1.0, 0.0],
        };
        assert!(matches!(make_forcing(leaking, &d), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let g = torus();
        let f = make_forcing(families()[0], &g).unwrap();
        assert_eq!(f.jet([0.5, 0.85]), Jet::default());
        assert_eq!(f.jet([0.05, 0.05]), Jet::default());
    }

    fn fd_jet(f: &ForcingField, x: [f64; 2], h: f64) -> ([[f64; 2]; 2], [[[f64; 2]; 2]; 2]) {
        let mut a = [[0.0; 2]; 2];
        let mut hh = [[[0.0; 2]; 2]; 2];
        for b in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[b] += h;
            xm[b] -= h;
            let (jp, jm) = (f.jet(xp), f.jet(xm));
            for c in 0..2 {
                a[c][b] = (jp.f[c] - jm.f[c]) / (2.0 * h);
                for d in 0..2 {
                    hh[c][d][b] = (jp.a[c][d] - jm.a[c][d]) / (2.0 * h);
                }
            }
        }
        (a, hh)
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let g = torus();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for fam in families() {
            let f = make_forcing(fam, &g).unwrap();
            let scale = f.c2_norm().max(1.0);
            for _ in 0..1000 {
                let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
                let jet = f.jet(x);
                let (a, h) = fd_jet(&f, x, 1e-6);
                for p in 0..2 {
                    for q in 0..2 {
                        assert!((a[p][q] - jet.a[p][q]).abs() <= 1e-5 * scale, "{fam:?}");
                        for r in 0..2 {
                            assert!((h[p][q][r] - jet.h[p][q][r]).abs() <= 1e-5 * scale);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn hessian_is_symmetric_in_derivative_indices() {
        let g = torus();
        for fam in families() {
            let jet = make_forcing(fam, &g).unwrap().jet([0.41, 0.63]);
            for a in 0..2 {
                assert!((jet.h[a][0][1] - jet.h[a][1][0]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rotational_bump_divergence_comes_from_bump_only() {
        let g = torus();
        let f = make_forcing(families()[1], &g).unwrap();
        let jet = f.jet([0.5, 0.6]);
        // (x-c)^⊥ is divergence free and ∇χ ∥ (x-c), so div F = 0.
        assert!(jet.div().abs() < 1e-14);
    }

    #[test]
    fn psi_matches_finite_difference_of_f_div_f() {
        let g = torus();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for fam in [families()[0], families()[3]] {
            let f = make_forcing(fam, &g).unwrap();
            for _ in 0..200 {
                let x = [rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)];
                let h = 1e-5;
                let q = |y: [f64; 2]| {
                    let j = f.jet(y);
                    [j.f[0] * j.div(), j.f[1] * j.div()]
                };
                let div_q = (q([x[0] + h, x[1]])[0] - q([x[0] - h, x[1]])[0]) / (2.0 * h)
                    + (q([x[0], x[1] + h])[1] - q([x[0], x[1] - h])[1]) / (2.0 * h);
                assert!((0.5 * div_q - f.jet(x).psi()).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn psi_matrix_matches_independent_assembly() {
        let g = torus();
        let f = make_forcing(families()[1], &g).unwrap();
        let x = [0.52, 0.41];
        let jet = f.jet(x);
        // ∇(AF) by finite differences of w = A F.
        let w = |y: [f64; 2]| {
            let j = f.jet(y);
            [
                j.a[0][0] * j.f[0] + j.a[0][1] * j.f[1],
                j.a[1][0] * j.f[0] + j.a[1][1] * j.f[1],
            ]
        };
        let h = 1e-6;
        let mut gw = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (a, b) = (w(xp), w(xm));
            for l in 0..2 {
                gw[l][k] = (a[l] - b[l]) / (2.0 * h);
            }
        }
        let a = jet.a;
        let tr = a[0][0] + a[1][1];
        let mut expect = [[0.0; 2]; 2];
        for j in 0..2 {
            for k in 0..2 {
                let mut aat = 0.0;
                let mut a2 = 0.0;
                for s in 0..2 {
                    aat += a[j][s] * a[k][s];
                    a2 += a[k][s] * a[s][j];
                }
                expect[j][k] = 0.5 * aat + a2 - tr * a[k][j] - 0.5 * gw[k][j];
            }
        }
        let got = jet.psi_matrix();
        for j in 0..2 {
            for k in 0..2 {
                assert!((got[j][k] - expect[j][k]).abs() < 1e-5, "{got:?} {expect:?}");
            }
        }
    }

    #[test]
    fn convective_and_correction_simple_cases() {
        let g = Grid::torus(32, 1.0).unwrap();
        let c = make_forcing(ForcingFamily::TorusConstant { direction: [1.0, 0.0] }, &g)
            .unwrap()
            .sample(&g);
        // periodic stand-ins for x₁ and x₁²: sin and its Taylor-exact pieces.
        let u = ComplexField::from_fn(g, |x| Complex64::new((2.0 * std::f64::consts::PI * x[0]).sin(), 0.0));
        let lu = convective(&c, &u);
        let cu = ito_correction(&c, &u);
        let llu = convective(&c, &lu);
        for k in 0..g.len() {
            let exact1 = 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * g.point(k % 32, k / 32)[0]).cos();
            assert!((lu.re[k] - exact1).abs() < 0.05);
            assert!((cu.re[k] + 4.0 * std::f64::consts::PI.powi(2) * u.re[k]).abs() < 0.4);
            assert!((llu.re[k] - cu.re[k]).abs() < 0.4);
        }
        let z = ForcingField::zero(&g).sample(&g);
        assert_eq!(convective(&z, &u).max_modulus(), 0.0);
        assert_eq!(ito_correction(&z, &u).max_modulus(), 0.0);

        let d = Grid::dirichlet(16, 1.0).unwrap();
        let cf = SampledForcing {
            grid: d,
            jets: vec![
                Jet {
                    f: [1.0, 0.0],
                    ..Jet::default()
                };
                d.len()
            ],
        };
        let lin = ComplexField::from_fn(d, |x| Complex64::new(x[0], 0.0));
        assert!(convective(&cf, &lin).re.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let quad = ComplexField::from_fn(d, |x| Complex64::new(x[0] * x[0], 0.0));
        assert!(ito_correction(&cf, &quad).re.iter().all(|v| (v - 2.0).abs() < 1e-9));
    }

    #[test]
    fn correction_matches_composition_at_second_order() {
        let err = |n: usize| {
            let g = Grid::torus(n, 1.0).unwrap();
            let f = make_forcing(families()[1], &g).unwrap().sample(&g);
            let u = ComplexField::from_fn(g, |x| {
                let a = 2.0 * std::f64::consts::PI * x[0];
                let b = 2.0 * std::f64::consts::PI * x[1];
                Complex64::new(a.cos() * b.sin(), (a + b).sin())
            });
            ito_correction(&f, &u).sup_distance(&convective(&f, &convective(&f, &u)))
        };
        let (a, b) = (err(32), err(64));
        assert!(a / b > 3.0, "{a} {b}");
    }

    #[test]
    fn brownian_determinism_refinement_and_variance() {
        let p = BrownianPath::sample(1.0, 0.125, 42).unwrap();
        assert_eq!(p, BrownianPath::sample(1.0, 0.125, 42).unwrap());
        assert_ne!(p, BrownianPath::sample(1.0, 0.125, 43).unwrap());
        let r = p.refine();
        assert_eq!(r.steps(), 16);
        let (cv, fv) = (p.values(), r.values());
        for m in 0..=p.steps() {
            assert!((cv[m] - fv[2 * m]).abs() < 1e-14);
        }
        let rr = r.refine();
        let fv2 = rr.values();
        for m in 0..=r.steps() {
            assert!((fv[m] - fv2[2 * m]).abs() < 1e-14);
        }
        assert!(BrownianPath::sample(1.0, 0.3, 1).is_err());

        let t = 0.5;
        let seeds = 10_000;
        let var: f64 = (0..seeds)
            .map(|s| {
                let b: f64 = BrownianPath::sample(t, 0.25, s).unwrap().increments().iter().sum();
                b * b
            })
            .sum::<f64>()
            / seeds as f64;
        assert!((var - t).abs() < 0.05 * t, "{var}");
    }

    #[test]
    fn refined_increments_have_halved_variance() {
        let mut acc = 0.0;
        let mut count = 0;
        for s in 0..200 {
            let r = BrownianPath::sample(1.0, 0.1, s).unwrap().refine();
            for db in r.increments() {
                acc += db * db;
                count += 1;
            }
        }
        let v = acc / count as f64;
        assert!((v - 0.05).abs() < 0.05 * 0.05 * 3.0, "{v}");
    }

    #[test]
    fn path_csv_schema() {
        let p = BrownianPath::sample(0.5, 0.25, 3).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "t,B");
        assert_eq!(lines[2], "0,0");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn flow_map_cases() {
        let g = torus();
        let c = make_forcing(ForcingFamily::TorusConstant { direction: [0.3, -0.2] }, &g).unwrap();
        let phi = flow_map(&c, 1e-3).unwrap();
        assert_eq!(phi.apply([0.1, 0.2], 0.0), [0.1, 0.2]);
        let y = phi.apply([0.1, 0.2], 0.7);
        assert!((y[0] - (0.1 - 0.21)).abs() < 1e-13 && (y[1] - (0.2 + 0.14)).abs() < 1e-13);

        let rot = make_forcing(families()[1], &g).unwrap();
        let phi = flow_map(&rot, 1e-3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = [rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)];
            let s = rng.random_range(-1.0..1.0);
            let back = phi.apply(phi.apply(x, s), -s);
            assert!((back[0] - x[0]).hypot(back[1] - x[1]) <= 1e-8);
            let s2 = rng.random_range(-0.5..0.5);
            let a = phi.apply(phi.apply(x, s), s2);
            let b = phi.apply(x, s + s2);
            assert!((a[0] - b[0]).hypot(a[1] - b[1]) <= 1e-8);
        }
    }

    proptest::proptest! {
        #[test]
        fn constant_forcing_kills_coefficient_fields(e0 in -2.0f64..2.0, e1 in -2.0f64..2.0, x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let g = Grid::torus(16, 1.0).unwrap();
            let f = make_forcing(ForcingFamily::TorusConstant { direction: [e0, e1] }, &g).unwrap();
            let jet = f.jet([x, y]);
            proptest::prop_assert_eq!(jet.psi(), 0.0);
            proptest::prop_assert_eq!(jet.psi_matrix(), [[0.0; 2]; 2]);
        }
    }
}
