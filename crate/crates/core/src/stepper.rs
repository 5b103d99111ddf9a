//! Explicit time integration of
//!
//! ```text
//! du = log(1/ε) f_ε(u) dt + ½ L²u dt + Lu dB,     L = F·∇,
//! ```
//!
//! on a given Brownian path, plus the exact constant-`F` translation
//! comparator on the torus.
//!
//! `L` is discretized with centered differences and the correction term
//! `½(F·∇)²u` as the composition `L_h(L_h u)`. With that choice the Itô
//! (Euler–Maruyama) and Stratonovich (Heun) schemes are consistent with the
//! same semi-discrete equation and converge to each other as `dt → 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::{
    convective, make_forcing, BrownianPath, ForcingFamily, ForcingField, SampledForcing,
};
use crate::gl::{energy, gl_force, GLParams};
use crate::grid::{interpolate, ComplexField, Grid};

/// Modulus above which a run is declared unstable.
pub const BLOWUP_MODULUS: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    /// Euler–Maruyama on the Itô form.
    EulerMaruyamaIto,
    /// Heun predictor–corrector on the Stratonovich form.
    StratonovichHeun,
}

/// Scheme choice plus the stability constant `c_stab ∈ (0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepScheme {
    pub kind: SchemeKind,
    pub c_stab: f64,
}

impl StepScheme {
    pub fn new(kind: SchemeKind, c_stab: f64) -> Result<Self> {
        if !(c_stab > 0.0 && c_stab <= 1.0) {
            return Err(Error::InvalidParameter(format!("c_stab = {c_stab} not in (0, 1]")));
        }
        Ok(Self { kind, c_stab })
    }

    pub fn heun() -> Self {
        Self {
            kind: SchemeKind::StratonovichHeun,
            c_stab: 0.5,
        }
    }

    pub fn euler() -> Self {
        Self {
            kind: SchemeKind::EulerMaruyamaIto,
            c_stab: 0.5,
        }
    }
}

/// `dt_max = c_stab / [log(1/ε)(4/h² + 1/ε²) + ‖F‖²_{C¹}/h²]`.
pub fn dt_max(p: &GLParams, grid: &Grid, forcing: &ForcingField, c_stab: f64) -> f64 {
    let h2 = grid.h() * grid.h();
    let eps2 = p.eps() * p.eps();
    let f = forcing.c1_norm();
    c_stab / (p.log_inv_eps() * (4.0 / h2 + 1.0 / eps2) + f * f / h2)
}

/// Largest `T / 2^k` not above `dt_max`.
pub fn auto_dt(horizon: f64, dt_cap: f64) -> f64 {
    let mut steps = 1usize;
    while horizon / steps as f64 > dt_cap {
        steps *= 2;
    }
    horizon / steps as f64
}

/// One explicit step with the forcing already sampled on the grid.
pub struct Stepper {
    params: GLParams,
    forcing: SampledForcing,
    active: bool,
    kind: SchemeKind,
}

impl Stepper {
    pub fn new(params: GLParams, forcing: &ForcingField, grid: &Grid, kind: SchemeKind) -> Self {
        let sampled = forcing.sample(grid);
        let active = !sampled.is_identically_zero();
        Self {
            params,
            forcing: sampled,
            active,
            kind,
        }
    }

    pub fn sampled_forcing(&self) -> &SampledForcing {
        &self.forcing
    }

    fn drift(&self, u: &ComplexField) -> ComplexField {
        gl_force(u, &self.params).scale(self.params.log_inv_eps())
    }

    /// Advances `u` by `dt` with Brownian increment `db`; returns the new
    /// state and its sup modulus.
    pub fn advance(&self, u: &ComplexField, dt: f64, db: f64) -> (ComplexField, f64) {
        let a = self.drift(u);
        let mut next = u.axpy(dt, &a);
        if self.active {
            let lu = convective(&self.forcing, u);
            match self.kind {
                SchemeKind::EulerMaruyamaIto => {
                    let llu = convective(&self.forcing, &lu);
                    for k in 0..next.re.len() {
                        next.re[k] += 0.5 * dt * llu.re[k] + db * lu.re[k];
                        next.im[k] += 0.5 * dt * llu.im[k] + db * lu.im[k];
                    }
                }
                SchemeKind::StratonovichHeun => {
                    let predictor = next.axpy(db, &lu);
                    let lp = convective(&self.forcing, &predictor);
                    for k in 0..next.re.len() {
                        next.re[k] += 0.5 * db * (lu.re[k] + lp.re[k]);
                        next.im[k] += 0.5 * db * (lu.im[k] + lp.im[k]);
                    }
                }
            }
        }
        if !u.grid.is_torus() {
            restore_boundary(&mut next, u);
        }
        let m = next.max_modulus();
        let m = if next.is_finite() { m } else { f64::INFINITY };
        (next, m)
    }
}

fn restore_boundary(next: &mut ComplexField, prev: &ComplexField) {
    let g = next.grid;
    let n = g.nodes();
    for j in 0..n {
        for i in 0..n {
            if g.is_boundary(i, j) {
                let k = g.idx(i, j);
                next.re[k] = prev.re[k];
                next.im[k] = prev.im[k];
            }
        }
    }
}

/// Single step `u ↦ u'`; errors with [`Error::Blowup`] when `max|u'| > 2`.
pub fn step(
    u: &ComplexField,
    dt: f64,
    db: f64,
    p: &GLParams,
    forcing: &ForcingField,
    scheme: SchemeKind,
) -> Result<ComplexField> {
    let (next, m) = Stepper::new(*p, forcing, &u.grid, scheme).advance(u, dt, db);
    if m > BLOWUP_MODULUS {
        return Err(Error::Blowup {
            step: 0,
            time: dt,
            max_modulus: m,
        });
    }
    Ok(next)
}

/// Receives every state of a run.
pub trait StepObserver {
    /// Called with the state at step `m` and the increment `dB_m` that moves
    /// it to step `m + 1`; `db` is `None` at the final time.
    fn observe(&mut self, m: usize, u: &ComplexField, db: Option<f64>) -> Result<()>;

    /// Ends the run early after the current state.
    fn finished(&self) -> bool {
        false
    }
}

/// Which states a [`Trajectory`] keeps.
#[derive(Clone, Debug, PartialEq)]
pub enum Snapshots {
    /// Every step (required by the energy ledger).
    Every,
    /// The given times, each a multiple of `dt`.
    Times(Vec<f64>),
}

/// Runs `u0` along `path`, feeding every state to `observer`; returns the
/// final state.
pub fn run_observed(
    u0: &ComplexField,
    path: &BrownianPath,
    p: &GLParams,
    forcing: &ForcingField,
    scheme: StepScheme,
    observer: &mut dyn StepObserver,
) -> Result<ComplexField> {
    let grid = u0.grid;
    let dt = path.dt();
    let cap = dt_max(p, &grid, forcing, scheme.c_stab);
    if dt > cap * (1.0 + 1e-12) {
        return Err(Error::UnstableTimeStep { dt, dt_max: cap });
    }
    let stepper = Stepper::new(*p, forcing, &grid, scheme.kind);
    let mut u = u0.clone();
    for (m, &db) in path.increments().iter().enumerate() {
        observer.observe(m, &u, Some(db))?;
        if observer.finished() {
            return Ok(u);
        }
        let (next, modulus) = stepper.advance(&u, dt, db);
        if modulus > BLOWUP_MODULUS {
            return Err(Error::Blowup {
                step: m + 1,
                time: path.time(m + 1),
                max_modulus: modulus,
            });
        }
        u = next;
    }
    observer.observe(path.steps(), &u, None)?;
    Ok(u)
}

/// Stored states of a run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub steps: Vec<usize>,
    pub fields: Vec<ComplexField>,
    pub energies: Vec<f64>,
    /// `max |u(t_m)|` for every step `m`.
    pub max_modulus: Vec<f64>,
    pub path: BrownianPath,
    pub params: GLParams,
    pub forcing: ForcingFamily,
    pub scheme: StepScheme,
    pub full_resolution: bool,
}

fn snapshot_steps(path: &BrownianPath, snapshots: &Snapshots) -> Result<Option<Vec<usize>>> {
    match snapshots {
        Snapshots::Every => Ok(None),
        Snapshots::Times(ts) => {
            let mut out = Vec::with_capacity(ts.len());
            for &t in ts {
                let m = (t / path.dt()).round();
                if (m * path.dt() - t).abs() > 1e-9 * path.dt().max(t) || m < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "snapshot time {t} is not on the step grid dt = {}",
                        path.dt()
                    )));
                }
                if m as usize > path.steps() {
                    return Err(Error::InvalidParameter(format!(
                        "snapshot time {t} beyond the path horizon {}",
                        path.horizon()
                    )));
                }
                out.push(m as usize);
            }
            out.sort_unstable();
            out.dedup();
            Ok(Some(out))
        }
    }
}

struct Collector<'a> {
    wanted: Option<Vec<usize>>,
    params: &'a GLParams,
    times: Vec<f64>,
    steps: Vec<usize>,
    fields: Vec<ComplexField>,
    energies: Vec<f64>,
    max_modulus: Vec<f64>,
    dt: f64,
}

impl StepObserver for Collector<'_> {
    fn observe(&mut self, m: usize, u: &ComplexField, _db: Option<f64>) -> Result<()> {
        self.max_modulus.push(u.max_modulus());
        let keep = match &self.wanted {
            None => true,
            Some(w) => w.binary_search(&m).is_ok(),
        };
        if keep {
            self.times.push(m as f64 * self.dt);
            self.steps.push(m);
            self.energies.push(energy(u, self.params));
            self.fields.push(u.clone());
        }
        Ok(())
    }
}

/// Runs `u0` along `path`, storing the requested snapshots.
pub fn run(
    u0: &ComplexField,
    path: &BrownianPath,
    p: &GLParams,
    forcing: &ForcingField,
    scheme: StepScheme,
    snapshots: &Snapshots,
) -> Result<Trajectory> {
    let wanted = snapshot_steps(path, snapshots)?;
    let full = wanted.is_none();
    let mut c = Collector {
        wanted,
        params: p,
        times: Vec::new(),
        steps: Vec::new(),
        fields: Vec::new(),
        energies: Vec::new(),
        max_modulus: Vec::new(),
        dt: path.dt(),
    };
    run_observed(u0, path, p, forcing, scheme, &mut c)?;
    Ok(Trajectory {
        times: c.times,
        steps: c.steps,
        fields: c.fields,
        energies: c.energies,
        max_modulus: c.max_modulus,
        path: path.clone(),
        params: *p,
        forcing: *forcing.family(),
        scheme,
        full_resolution: full,
    })
}

/// `d(t_m) = sup_x |u(x, t_m) - v(x + e B_{t_m}, t_m)|` where `u` solves the
/// equation with `F ≡ e` on `path` and `v` the deterministic equation from
/// the same datum. Compared at the requested times.
pub fn translate_compare(
    u0: &ComplexField,
    path: &BrownianPath,
    p: &GLParams,
    direction: [f64; 2],
    scheme: StepScheme,
    times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let grid = u0.grid;
    if !grid.is_torus() {
        return Err(Error::UnsupportedOnGeometry("translation comparison"));
    }
    let forcing = make_forcing(ForcingFamily::TorusConstant { direction }, &grid)?;
    let snaps = Snapshots::Times(times.to_vec());
    let stoch = run(u0, path, p, &forcing, scheme, &snaps)?;
    let zero = BrownianPath::zero(path.horizon(), path.dt())?;
    // The deterministic run must use the same step size; its stability cap
    // is only looser.
    let det = run(u0, &zero, p, &ForcingField::zero(&grid), scheme, &snaps)?;
    let b = path.values();
    let mut out = Vec::with_capacity(stoch.steps.len());
    for (idx, &m) in stoch.steps.iter().enumerate() {
        let shift = [direction[0] * b[m], direction[1] * b[m]];
        let us = &stoch.fields[idx];
        let ud = &det.fields[idx];
        let mut sup = 0.0_f64;
        for (k, x) in grid.points().enumerate() {
            let v = interpolate(ud, [x[0] + shift[0], x[1] + shift[1]])?;
            sup = sup.max((us.at(k) - v).norm());
        }
        out.push((stoch.times[idx], sup));
    }
    Ok(out)
}
