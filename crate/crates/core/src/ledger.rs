//! Term-by-term audit of the pathwise energy identity
//!
//! ```text
//! ΔE = S1 + S2 + S3 + … + S7,
//! S1 = -log(1/ε) ∫∫ |f_ε|²,          S2 = -∫∫ (f_ε, (F·∇)u) dB,
//! S3 = ∫∫ e_ε ψ,                      S4 = ½ ∫∫ |∇u·∇F|²,
//! S5 = ∫∫ ∇u:(∇u·∇F·∇F),              S6 = -∫∫ ∇u:(∇u·∇F) div F,
//! S7 = -½ ∫∫ ∇u:(∇u·∇(∇F·F)),
//! ```
//!
//! with `S3 + … + S7 = ∫∫ e_ε ψ + tr(∇u Ψ ∇uᵀ)`. Time integrals use the left
//! point of each step, the Itô integral included.
//!
//! Besides the five explicit integrals and the compact form, the extra term
//! is also evaluated in its raw Itô-lemma shape
//! `-½ ∫(f_ε, (F·∇)²u) + ½ D²E_ε(u)⟨(F·∇)u, (F·∇)u⟩`, before any
//! integration by parts; agreement of the two is a discrete check of the
//! whole integration-by-parts cascade.

use std::io::Write;

use crate::error::{Error, Result};
use crate::forcing::{convective, ito_correction, ForcingFamily, ForcingField, Jet, SampledForcing};
use crate::gl::{energy, energy_density, gl_force, stress_from_gradient, GLParams};
use crate::grid::{gradient, hessian, integrate_slice, ComplexField, ComplexGradient};
use crate::stepper::{StepObserver, Trajectory};

/// One ledger interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerRecord {
    pub t1: f64,
    pub t2: f64,
    pub de: f64,
    /// `S1 … S7`.
    pub s: [f64; 7],
    /// Compact form of `S3 + … + S7`.
    pub extra: f64,
    /// `ΔE - (S1 + … + S7)`.
    pub residual: f64,
}

pub const LEDGER_HEADER: &str = "t1,t2,dE,S1,S2,S3,S4,S5,S6,S7,extra,residual";

/// Instantaneous spatial integrals of the five correction integrands.
pub fn correction_terms(u: &ComplexField, f: &SampledForcing, p: &GLParams) -> [f64; 5] {
    let du = gradient(u);
    let e = energy_density(u, p);
    let g = &u.grid;
    let mut cols: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; g.len()]);
    for (k, jet) in f.jets.iter().enumerate() {
        let t = node_terms(&du, k, e.data[k], jet);
        for c in 0..5 {
            cols[c][k] = t[c];
        }
    }
    std::array::from_fn(|c| integrate_slice(g, &cols[c]))
}

fn stress_at(du: &ComplexGradient, k: usize) -> [[f64; 2]; 2] {
    let (a, b) = (du.d1.re[k], du.d1.im[k]);
    let (c, d) = (du.d2.re[k], du.d2.im[k]);
    let off = a * c + b * d;
    [[a * a + b * b, off], [off, c * c + d * d]]
}

fn node_terms(du: &ComplexGradient, k: usize, e: f64, jet: &Jet) -> [f64; 5] {
    let a = &jet.a;
    let g = stress_at(du, k);
    let tr_a = jet.div();
    let gw = jet.grad_w();
    let mut s4 = 0.0;
    for v in [[du.d1.re[k], du.d2.re[k]], [du.d1.im[k], du.d2.im[k]]] {
        for col in 0..2 {
            let w = v[0] * a[0][col] + v[1] * a[1][col];
            s4 += w * w;
        }
    }
    let mut s5 = 0.0;
    let mut ga = 0.0;
    let mut s7 = 0.0;
    for kk in 0..2 {
        for s in 0..2 {
            let a2 = a[s][0] * a[0][kk] + a[s][1] * a[1][kk];
            s5 += g[kk][s] * a2;
            ga += g[kk][s] * a[s][kk];
            s7 += g[kk][s] * gw[s][kk];
        }
    }
    [e * jet.psi(), 0.5 * s4, s5, -tr_a * ga, -0.5 * s7]
}

/// `∫ e_ε ψ + tr(∇u Ψ ∇uᵀ)`.
pub fn extra_form(u: &ComplexField, f: &SampledForcing, p: &GLParams) -> f64 {
    let du = gradient(u);
    let e = energy_density(u, p);
    let stress = stress_from_gradient(&du);
    let data: Vec<f64> = f
        .jets
        .iter()
        .enumerate()
        .map(|(k, jet)| {
            let psi_m = jet.psi_matrix();
            let g = stress.at(k);
            let mut tr = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    tr += g[a][b] * psi_m[a][b];
                }
            }
            e.data[k] * jet.psi() + tr
        })
        .collect();
    integrate_slice(&u.grid, &data)
}

/// `-½ ∫(f_ε, (F·∇)²u) + ½ D²E_ε(u)⟨(F·∇)u, (F·∇)u⟩`, with analytic `F`
/// derivatives and centered derivatives of `u`.
pub fn ito_lemma_extra(u: &ComplexField, f: &SampledForcing, p: &GLParams) -> f64 {
    let force = gl_force(u, p);
    let corr = ito_correction(f, u);
    let du = gradient(u);
    let hu = hessian(u);
    let inv_eps2 = 1.0 / (p.eps() * p.eps());
    let data: Vec<f64> = f
        .jets
        .iter()
        .enumerate()
        .map(|(k, jet)| {
            let [f1, f2] = jet.f;
            let uk = u.at(k);
            let d = [du.d1.at(k), du.d2.at(k)];
            let h = [[hu.d11.at(k), hu.d12.at(k)], [hu.d12.at(k), hu.d22.at(k)]];
            let lu = d[0] * f1 + d[1] * f2;
            let mut grad_lu_sq = 0.0;
            for kk in 0..2 {
                let g = d[0] * jet.a[0][kk] + d[1] * jet.a[1][kk] + h[kk][0] * f1 + h[kk][1] * f2;
                grad_lu_sq += g.norm_sqr();
            }
            let m2 = uk.norm_sqr();
            let dot = uk.re * lu.re + uk.im * lu.im;
            let d2e = grad_lu_sq - inv_eps2 * (1.0 - m2) * lu.norm_sqr() + 2.0 * inv_eps2 * dot * dot;
            let fc = force.re[k] * corr.re[k] + force.im[k] * corr.im[k];
            -0.5 * fc + 0.5 * d2e
        })
        .collect();
    integrate_slice(&u.grid, &data)
}

/// `(∫(f_ε, (F·∇)u), ∫ e_ε div F - ∇F:(∇u⊗∇u))`.
pub fn stochastic_integrand(u: &ComplexField, f: &SampledForcing, p: &GLParams) -> (f64, f64) {
    let force = gl_force(u, p);
    let lu = convective(f, u);
    let direct = integrate_slice(&u.grid, &force.dot(&lu).data);
    let du = gradient(u);
    let e = energy_density(u, p);
    let data: Vec<f64> = f
        .jets
        .iter()
        .enumerate()
        .map(|(k, jet)| {
            let g = stress_at(&du, k);
            let mut ag = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    ag += jet.a[a][b] * g[a][b];
                }
            }
            e.data[k] * jet.div() - ag
        })
        .collect();
    (direct, integrate_slice(&u.grid, &data))
}

/// For `F = (F(x₁), 0)`: `(extra_form, ½∫(f_ε, ∂₁u) F F' + ½∫|∂₁u|² F'²)`.
pub fn special_case_check(u: &ComplexField, forcing: &ForcingField, p: &GLParams) -> Result<(f64, f64)> {
    if !matches!(forcing.family(), ForcingFamily::Axis { .. }) {
        return Err(Error::WrongForcingFamily("axis"));
    }
    let f = forcing.sample(&u.grid);
    let lhs = extra_form(u, &f, p);
    let force = gl_force(u, p);
    let du = gradient(u);
    let data: Vec<f64> = f
        .jets
        .iter()
        .enumerate()
        .map(|(k, jet)| {
            let ff = jet.f[0] * jet.a[0][0];
            let fp2 = jet.a[0][0] * jet.a[0][0];
            let d1 = du.d1.at(k);
            0.5 * (force.re[k] * d1.re + force.im[k] * d1.im) * ff + 0.5 * d1.norm_sqr() * fp2
        })
        .collect();
    Ok((lhs, integrate_slice(&u.grid, &data)))
}

/// Streaming ledger: consumes every state of a run and emits one record per
/// `interval` steps, without storing fields.
pub struct LedgerAccumulator {
    forcing: SampledForcing,
    params: GLParams,
    dt: f64,
    interval: usize,
    records: Vec<LedgerRecord>,
    open: Option<Open>,
    pending: Option<Pending>,
}

#[derive(Clone, Copy)]
struct Open {
    t1: f64,
    e1: f64,
    s: [f64; 7],
    extra: f64,
    steps: usize,
}

#[derive(Clone, Copy)]
struct Pending {
    s: [f64; 7],
    extra: f64,
}

impl LedgerAccumulator {
    pub fn new(forcing: &ForcingField, params: &GLParams, grid: &crate::grid::Grid, dt: f64, interval: usize) -> Self {
        Self {
            forcing: forcing.sample(grid),
            params: *params,
            dt,
            interval: interval.max(1),
            records: Vec::new(),
            open: None,
            pending: None,
        }
    }

    pub fn records(&self) -> &[LedgerRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<LedgerRecord> {
        self.records
    }

    fn step_terms(&self, u: &ComplexField, db: f64) -> Pending {
        let p = &self.params;
        let force = gl_force(u, p);
        let lu = convective(&self.forcing, u);
        let g = &u.grid;
        let s1 = -p.log_inv_eps() * integrate_slice(g, &force.modulus_squared().data) * self.dt;
        let s2 = -integrate_slice(g, &force.dot(&lu).data) * db;
        let c = correction_terms(u, &self.forcing, p);
        let extra = extra_form(u, &self.forcing, p) * self.dt;
        Pending {
            s: [s1, s2, c[0] * self.dt, c[1] * self.dt, c[2] * self.dt, c[3] * self.dt, c[4] * self.dt],
            extra,
        }
    }
}

impl StepObserver for LedgerAccumulator {
    fn observe(&mut self, m: usize, u: &ComplexField, db: Option<f64>) -> Result<()> {
        let t = m as f64 * self.dt;
        let e = energy(u, &self.params);
        if let Some(pend) = self.pending.take() {
            let open = self.open.get_or_insert(Open {
                t1: t - self.dt,
                e1: f64::NAN,
                s: [0.0; 7],
                extra: 0.0,
                steps: 0,
            });
            for c in 0..7 {
                open.s[c] += pend.s[c];
            }
            open.extra += pend.extra;
            open.steps += 1;
            if open.steps == self.interval || db.is_none() {
                let o = *open;
                let de = e - o.e1;
                let total: f64 = o.s.iter().sum();
                self.records.push(LedgerRecord {
                    t1: o.t1,
                    t2: t,
                    de,
                    s: o.s,
                    extra: o.extra,
                    residual: de - total,
                });
                self.open = None;
            }
        }
        if let Some(db) = db {
            if self.open.is_none() {
                self.open = Some(Open {
                    t1: t,
                    e1: e,
                    s: [0.0; 7],
                    extra: 0.0,
                    steps: 0,
                });
            }
            self.pending = Some(self.step_terms(u, db));
        }
        Ok(())
    }
}

/// Ledger of a trajectory stored at every step, one record per step.
pub fn ledger(traj: &Trajectory, forcing: &ForcingField, p: &GLParams) -> Result<Vec<LedgerRecord>> {
    if !traj.full_resolution {
        return Err(Error::LedgerNeedsFullResolution);
    }
    let grid = match traj.fields.first() {
        Some(u) => u.grid,
        None => return Ok(Vec::new()),
    };
    let mut acc = LedgerAccumulator::new(forcing, p, &grid, traj.path.dt(), 1);
    let incs = traj.path.increments();
    for (m, u) in traj.fields.iter().enumerate() {
        acc.observe(m, u, incs.get(m).copied())?;
    }
    Ok(acc.into_records())
}

/// Cumulative sums of a ledger: `(ΔE, S1…S7, extra, residual)` over `[t₀, T]`.
pub fn cumulative(records: &[LedgerRecord]) -> Option<LedgerRecord> {
    let first = records.first()?;
    let last = records.last()?;
    let mut out = LedgerRecord {
        t1: first.t1,
        t2: last.t2,
        de: 0.0,
        s: [0.0; 7],
        extra: 0.0,
        residual: 0.0,
    };
    for r in records {
        out.de += r.de;
        for c in 0..7 {
            out.s[c] += r.s[c];
        }
        out.extra += r.extra;
        out.residual += r.residual;
    }
    Some(out)
}

pub fn write_ledger_csv<W: Write>(records: &[LedgerRecord], mut w: W) -> Result<()> {
    writeln!(w, "{LEDGER_HEADER}")?;
    for r in records {
        write!(w, "{},{},{}", r.t1, r.t2, r.de)?;
        for s in &r.s {
            write!(w, ",{s}")?;
        }
        writeln!(w, ",{},{}", r.extra, r.residual)?;
    }
    Ok(())
}
