//! Ginzburg-Landau functionals and canonical vortex initial data.
//!
//! On the torus the discrete energy is built on grid edges,
//!
//! ```text
//! E_h(u) = h² Σ_nodes [ ¼ Σ_axes (|D⁺u|² + |D⁻u|²) + (1 - |u|²)² / 4ε² ],
//! ```
//!
//! so that `-∇E_h / h²` is exactly the 5-point [`gl_force`]. The Jacobian uses
//! centered differences, and since `½|D⁰u|² ≤ ¼(|D⁺u|² + |D⁻u|²)` the bound
//! `|J| ≤ e_ε` holds node by node.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    self, gradient, laplacian, ComplexField, ComplexGradient, Geometry, Grid, MatrixField,
    ScalarField,
};
use crate::theta::Theta;

/// Model parameters: `ε` and `k_ε = 1 / log(1/ε)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GLParams {
    eps: f64,
    log_inv_eps: f64,
}

impl GLParams {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps = {eps} not in (0, 1)")));
        }
        Ok(Self {
            eps,
            log_inv_eps: (1.0 / eps).ln(),
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `log(1/ε)`.
    pub fn log_inv_eps(&self) -> f64 {
        self.log_inv_eps
    }

    /// `k_ε = 1 / log(1/ε)`.
    pub fn k_eps(&self) -> f64 {
        1.0 / self.log_inv_eps
    }
}

/// One prescribed vortex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vortex {
    pub x: f64,
    pub y: f64,
    pub degree: i32,
}

impl Vortex {
    pub fn new(x: f64, y: f64, degree: i32) -> Self {
        Self { x, y, degree }
    }

    pub fn pos(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Prescribed vortex configuration for [`canonical_initial`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VortexSpec {
    pub vortices: Vec<Vortex>,
}

impl VortexSpec {
    pub fn new(vortices: Vec<Vortex>) -> Self {
        Self { vortices }
    }

    /// A `+1` vortex at `a` and a `-1` vortex at `b`.
    pub fn pair(a: [f64; 2], b: [f64; 2]) -> Self {
        Self::new(vec![Vortex::new(a[0], a[1], 1), Vortex::new(b[0], b[1], -1)])
    }

    pub fn total_degree(&self) -> i64 {
        self.vortices.iter().map(|v| v.degree as i64).sum()
    }
}

fn potential(re: f64, im: f64, inv_4eps2: f64) -> f64 {
    let s = 1.0 - re * re - im * im;
    s * s * inv_4eps2
}

fn gradient_energy_density(u: &ComplexField, du: &ComplexGradient) -> Vec<f64> {
    let g = &u.grid;
    let m = g.nodes();
    let inv_h = 1.0 / g.h();
    let mut out = vec![0.0; g.len()];
    let sq = |k1: usize, k2: usize| {
        let a = (u.re[k1] - u.re[k2]) * inv_h;
        let b = (u.im[k1] - u.im[k2]) * inv_h;
        a * a + b * b
    };
    for j in 0..m {
        for i in 0..m {
            let k = g.idx(i, j);
            out[k] = match g.geometry() {
                Geometry::Torus => {
                    let ip = g.idx((i + 1) % m, j);
                    let im = g.idx((i + m - 1) % m, j);
                    let jp = g.idx(i, (j + 1) % m);
                    let jm = g.idx(i, (j + m - 1) % m);
                    0.25 * (sq(ip, k) + sq(k, im) + sq(jp, k) + sq(k, jm))
                }
                Geometry::Dirichlet => {
                    if g.is_boundary(i, j) {
                        0.5 * du.norm_sq_at(k)
                    } else {
                        let ip = g.idx(i + 1, j);
                        let im = g.idx(i - 1, j);
                        let jp = g.idx(i, j + 1);
                        let jm = g.idx(i, j - 1);
                        0.25 * (sq(ip, k) + sq(k, im) + sq(jp, k) + sq(k, jm))
                    }
                }
            };
        }
    }
    out
}

/// `e_ε(u) = ½|∇u|² + (1 - |u|²)² / 4ε²`, with the edge form of `|∇u|²`.
pub fn energy_density(u: &ComplexField, p: &GLParams) -> ScalarField {
    let du = gradient(u);
    let mut data = gradient_energy_density(u, &du);
    let c = 0.25 / (p.eps() * p.eps());
    for (k, d) in data.iter_mut().enumerate() {
        *d += potential(u.re[k], u.im[k], c);
    }
    ScalarField { grid: u.grid, data }
}

/// `E_ε(u) = ∫ e_ε(u)`.
pub fn energy(u: &ComplexField, p: &GLParams) -> f64 {
    grid::integrate(&energy_density(u, p))
}

/// `ℰ_ε(u) = k_ε E_ε(u)`.
pub fn rescaled_energy(u: &ComplexField, p: &GLParams) -> f64 {
    energy(u, p) * p.k_eps()
}

/// `f_ε(u) = Δu + (1 - |u|²)u / ε²`, set to zero on the Dirichlet boundary
/// ring where the trace is fixed.
pub fn gl_force(u: &ComplexField, p: &GLParams) -> ComplexField {
    let mut f = laplacian(u);
    let inv_eps2 = 1.0 / (p.eps() * p.eps());
    for k in 0..f.re.len() {
        let s = (1.0 - u.re[k] * u.re[k] - u.im[k] * u.im[k]) * inv_eps2;
        f.re[k] += s * u.re[k];
        f.im[k] += s * u.im[k];
    }
    if !u.grid.is_torus() {
        zero_boundary(&mut f);
    }
    f
}

pub(crate) fn zero_boundary(f: &mut ComplexField) {
    let g = f.grid;
    let m = g.nodes();
    for j in 0..m {
        for i in 0..m {
            if g.is_boundary(i, j) {
                let k = g.idx(i, j);
                f.re[k] = 0.0;
                f.im[k] = 0.0;
            }
        }
    }
}

/// `J(u) = ∂₁u¹ ∂₂u² - ∂₂u¹ ∂₁u²`.
pub fn jacobian(u: &ComplexField) -> ScalarField {
    jacobian_from_gradient(&gradient(u))
}

pub fn jacobian_from_gradient(du: &ComplexGradient) -> ScalarField {
    let data = (0..du.d1.re.len())
        .map(|k| du.d1.re[k] * du.d2.im[k] - du.d2.re[k] * du.d1.im[k])
        .collect();
    ScalarField {
        grid: du.d1.grid,
        data,
    }
}

/// Stress tensor `G_{ab} = (∂_a u, ∂_b u)`.
pub fn stress_tensor(u: &ComplexField) -> MatrixField {
    stress_from_gradient(&gradient(u))
}

pub fn stress_from_gradient(du: &ComplexGradient) -> MatrixField {
    let g = du.d1.grid;
    let mut out = MatrixField::zeros(g);
    for k in 0..g.len() {
        let (a, b) = (du.d1.re[k], du.d1.im[k]);
        let (c, d) = (du.d2.re[k], du.d2.im[k]);
        let off = a * c + b * d;
        out.set(k, [[a * a + b * b, off], [off, c * c + d * d]]);
    }
    out
}

/// Radial core profile: `tanh ρ` blended to exactly `1` by `ρ = ρ_out`
/// with a C¹ smoothstep starting at `ρ_out / 2`. Increasing, `f(0) = 0`.
pub fn core_profile(rho: f64, rho_out: f64) -> f64 {
    let t0 = rho.tanh();
    if !rho_out.is_finite() {
        return t0;
    }
    let start = 0.5 * rho_out;
    if rho <= start {
        t0
    } else if rho >= rho_out {
        1.0
    } else {
        let t = (rho - start) / (rho_out - start);
        let s = t * t * (3.0 - 2.0 * t);
        1.0 - (1.0 - t0) * (1.0 - s)
    }
}

/// Canonical initial datum `u⁰ = u_* Π_k f(|x - a_k| / ε)`.
///
/// On the torus `u_*` is the doubly periodic S¹-valued map
/// `Π_k (θ₁(π(z - a_k)/L) / |θ₁|)^{d_k} · exp(-2πi (Σ d_k a_{k,1}) y / L²)`,
/// whose phase is harmonic with winding `d_k` at `a_k`; it needs `Σ d_k = 0`.
/// On the square `u_* = Π_k ((x - a_k)/|x - a_k|)^{d_k}` and the boundary ring
/// carries its restriction as the trace.
pub fn canonical_initial(spec: &VortexSpec, p: &GLParams, grid: &Grid) -> Result<ComplexField> {
    let vs = &spec.vortices;
    if grid.is_torus() && spec.total_degree() != 0 {
        return Err(Error::DegreesUnbalanced(spec.total_degree()));
    }
    let side = grid.side();
    for v in vs {
        let inside = v.x.is_finite() && v.y.is_finite();
        let inside = inside
            && (grid.is_torus() || (v.x > 0.0 && v.x < side && v.y > 0.0 && v.y < side));
        if !inside {
            return Err(Error::OutOfDomain {
                x: v.x,
                y: v.y,
                side,
            });
        }
    }
    let pos: Vec<[f64; 2]> = vs.iter().map(|v| grid.wrap(v.pos())).collect();
    let mut min_sep = f64::INFINITY;
    for a in 0..pos.len() {
        for b in a + 1..pos.len() {
            let d = grid.distance(pos[a], pos[b]);
            if d < 4.0 * p.eps() {
                return Err(Error::VorticesTooClose(a, b));
            }
            min_sep = min_sep.min(d);
        }
    }
    let mut reach = 0.5 * min_sep;
    if grid.is_torus() {
        reach = reach.min(0.5 * side);
    }
    let rho_out = reach / p.eps();

    let theta = Theta::default();
    let pi_l = std::f64::consts::PI / side;
    let drift: f64 = vs.iter().zip(&pos).map(|(v, a)| v.degree as f64 * a[0]).sum();
    let torus = grid.is_torus();

    let phase = ComplexField::from_fn(*grid, |x| {
        let mut phase = Complex64::new(1.0, 0.0);
        for (v, a) in vs.iter().zip(&pos) {
            let factor = if torus {
                let z = Complex64::new(x[0] - a[0], x[1] - a[1]) * pi_l;
                theta.value(z)
            } else {
                Complex64::new(x[0] - a[0], x[1] - a[1])
            };
            let n = factor.norm();
            if n > 0.0 {
                phase *= (factor / n).powi(v.degree);
            }
        }
        if torus {
            let ang = -2.0 * std::f64::consts::PI * drift * x[1] / (side * side);
            phase *= Complex64::from_polar(1.0, ang);
        }
        phase
    });
    let mut u = if torus { shortest_moment_branch(phase, vs, &pos) } else { phase };
    let modulus = ScalarField::from_fn(*grid, |x| {
        pos.iter().map(|a| core_profile(grid.distance(x, *a) / p.eps(), rho_out)).product()
    });
    for (k, m) in modulus.data.iter().enumerate() {
        u.set(k, u.at(k) * *m);
    }
    Ok(u)
}

/// Mean phase increment per period along grid rows and columns, in turns.
fn mean_windings(u: &ComplexField) -> [f64; 2] {
    let g = u.grid;
    let n = g.n();
    let mut w = [0.0; 2];
    for line in 0..n {
        for s in 0..n {
            let t = (s + 1) % n;
            w[0] += (u.at(g.idx(s, line)).conj() * u.at(g.idx(t, line))).arg();
            w[1] += (u.at(g.idx(line, s)).conj() * u.at(g.idx(line, t))).arg();
        }
    }
    let turns = std::f64::consts::TAU * n as f64;
    [w[0] / turns, w[1] / turns]
}

/// Multiplies a torus phase by the integer plane wave that brings its mean
/// gradient to `(2π/L²)(P_y, -P_x)`, where `P = Σ d_k a_k + L m` is the
/// shortest dipole moment.
fn shortest_moment_branch(phase: ComplexField, vs: &[Vortex], pos: &[[f64; 2]]) -> ComplexField {
    let g = phase.grid;
    let l = g.side();
    let mut d = [0.0; 2];
    for (v, a) in vs.iter().zip(pos) {
        d[0] += v.degree as f64 * a[0];
        d[1] += v.degree as f64 * a[1];
    }
    let moment = [d[0] - l * (d[0] / l).round(), d[1] - l * (d[1] / l).round()];
    let w = mean_windings(&phase);
    let shift = [(moment[1] / l - w[0]).round(), (-moment[0] / l - w[1]).round()];
    if shift == [0.0, 0.0] {
        return phase;
    }
    let k = std::f64::consts::TAU / l;
    let mut out = phase;
    for (idx, x) in g.points().enumerate() {
        let z = out.at(idx) * Complex64::from_polar(1.0, k * (shift[0] * x[0] + shift[1] * x[1]));
        out.set(idx, z);
    }
    out
}

/// Discrete `½|D⁰u|²`, used only by diagnostics and tests.
pub fn centered_gradient_energy(u: &ComplexField) -> ScalarField {
    let du = gradient(u);
    ScalarField {
        grid: u.grid,
        data: (0..u.grid.len()).map(|k| 0.5 * du.norm_sq_at(k)).collect(),
    }
}
