//! Monte Carlo ensembles over seeds and the statistical reports built on them.
//!
//! Seeds run in parallel and are folded back in seed order, so every output
//! is a deterministic function of the configuration and the seed list.
//! Confidence half-widths use the normal approximation `1.96·s/√M`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Resolved, RunConfig};
use crate::error::{Error, Result};
use crate::forcing::{psi_field, BrownianPath, ForcingField, Psi_field};
use crate::gl::{canonical_initial, energy, energy_density, jacobian, GLParams};
use crate::grid::{integrate, ComplexField, Grid};
use crate::point_vortex::{compare_paths, run_sde, PathComparison, PointConfig, TorusGreen};
use crate::stepper::{run_observed, StepObserver};
use crate::vortex::{
    ball_mass, density_ratio, detect, dual_norm, DiscreteMeasure, TestDictionary, TrackOptions, Tracker, Tracks, TrackingObserver,
    VortexSet,
};

pub const Z95: f64 = 1.96;

pub const STATS_HEADER: &str = "t,E_mean,E_var,E_ci,Er_mean,Er_var,Er_ci,Er2_mean,Er2_var,Er2_ci,J_mean,J_var,J_ci,L2_mean,L2_var,L2_ci,count_hist,degree_hist";
pub const SAMPLES_HEADER: &str = "seed,t,E,Er,J,L2,count,degrees";
pub const TAILS_HEADER: &str = "t,lambda,empirical,markov,slack,pass";
pub const REPORT_HEADER: &str = "check,t,value,bound,slack,pass";
pub const STRUCTURE_HEADER: &str = "eps,n,seed,count,degrees,abs_degree_mass,ball_radius,ball_ratio,dual_norm,density_ratio,Er";

/// Final-time concentration diagnostics of one seed.
#[derive(Clone, Debug)]
pub struct FinalStructure {
    pub vortices: VortexSet,
    pub ball_radius: f64,
    /// `∫_{B_r(a_k)} J / (π d_k)` for every detected core.
    pub ball_ratios: Vec<f64>,
    /// Distance from `J` to `π Σ d_k δ_{a_k}`.
    pub dual_norm: f64,
    pub density_ratio: f64,
    pub rescaled_energy: f64,
}

/// Snapshot series of one seed.
#[derive(Clone, Debug)]
pub struct SeedSample {
    pub seed: u64,
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub rescaled: Vec<f64>,
    /// `∫|J|`.
    pub jac_l1: Vec<f64>,
    /// `‖u‖²_{L²}`.
    pub l2: Vec<f64>,
    pub degrees: Vec<Vec<i32>>,
    pub structure: FinalStructure,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlowupRecord {
    pub seed: u64,
    pub message: String,
}

/// Per-time sample mean, unbiased variance and 95% half-width, accumulated
/// relative to the first sample.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub half: Vec<f64>,
}

impl Moments {
    /// `values[s][t]`; a single sample has zero variance.
    pub fn from_samples(values: &[&[f64]]) -> Self {
        let m = values.len();
        let len = values.first().map_or(0, |v| v.len());
        let mut out = Moments::default();
        for t in 0..len {
            let shift = values[0][t];
            let d: Vec<f64> = values.iter().map(|v| v[t] - shift).collect();
            let s1: f64 = d.iter().sum();
            let mean = shift + s1 / m as f64;
            let var = if m > 1 {
                let c = s1 / m as f64;
                d.iter().map(|x| (x - c).powi(2)).sum::<f64>() / (m - 1) as f64
            } else {
                0.0
            };
            out.mean.push(mean);
            out.var.push(var);
            out.half.push(Z95 * (var / m as f64).sqrt());
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct EnsembleStats {
    pub seeds: Vec<u64>,
    pub times: Vec<f64>,
    pub energy: Moments,
    pub rescaled: Moments,
    pub rescaled_sq: Moments,
    pub jac_l1: Moments,
    pub l2: Moments,
    pub count_hist: Vec<BTreeMap<usize, usize>>,
    pub degree_hist: Vec<BTreeMap<i32, usize>>,
}

impl EnsembleStats {
    pub fn from_samples(samples: &[SeedSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::TooFewSeeds { needed: 1, got: 0 });
        }
        let col = |f: fn(&SeedSample) -> &Vec<f64>| -> Moments {
            let v: Vec<&[f64]> = samples.iter().map(|s| f(s).as_slice()).collect();
            Moments::from_samples(&v)
        };
        let sq: Vec<Vec<f64>> = samples.iter().map(|s| s.rescaled.iter().map(|e| e * e).collect()).collect();
        let sq_refs: Vec<&[f64]> = sq.iter().map(|v| v.as_slice()).collect();
        let frames = samples[0].times.len();
        let mut count_hist = vec![BTreeMap::new(); frames];
        let mut degree_hist = vec![BTreeMap::new(); frames];
        for s in samples {
            for (t, ds) in s.degrees.iter().enumerate() {
                *count_hist[t].entry(ds.len()).or_insert(0) += 1;
                for &d in ds {
                    *degree_hist[t].entry(d).or_insert(0) += 1;
                }
            }
        }
        Ok(Self {
            seeds: samples.iter().map(|s| s.seed).collect(),
            times: samples[0].times.clone(),
            energy: col(|s| &s.energy),
            rescaled: col(|s| &s.rescaled),
            rescaled_sq: Moments::from_samples(&sq_refs),
            jac_l1: col(|s| &s.jac_l1),
            l2: col(|s| &s.l2),
            count_hist,
            degree_hist,
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{STATS_HEADER}")?;
        for t in 0..self.times.len() {
            let mut line = format!("{}", self.times[t]);
            for m in [&self.energy, &self.rescaled, &self.rescaled_sq, &self.jac_l1, &self.l2] {
                line += &format!(",{},{},{}", m.mean[t], m.var[t], m.half[t]);
            }
            line += &format!(",{},{}", hist_string(&self.count_hist[t]), hist_string(&self.degree_hist[t]));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

fn hist_string<K: std::fmt::Display>(h: &BTreeMap<K, usize>) -> String {
    h.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(";")
}

fn degree_string(ds: &[i32]) -> String {
    ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(";")
}

/// Result of [`run_ensemble`]: statistics over the seeds that finished.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub stats: EnsembleStats,
    pub samples: Vec<SeedSample>,
    pub blowups: Vec<BlowupRecord>,
    pub eps: f64,
    pub n: usize,
}

struct SnapshotProbe<'a> {
    wanted: &'a [usize],
    params: &'a GLParams,
    r_merge: f64,
    dt: f64,
    times: Vec<f64>,
    energy: Vec<f64>,
    jac_l1: Vec<f64>,
    l2: Vec<f64>,
    sets: Vec<VortexSet>,
    last: Option<ComplexField>,
}

impl StepObserver for SnapshotProbe<'_> {
    fn observe(&mut self, m: usize, u: &ComplexField, _db: Option<f64>) -> Result<()> {
        if self.wanted.binary_search(&m).is_err() {
            return Ok(());
        }
        self.times.push(m as f64 * self.dt);
        self.energy.push(energy(u, self.params));
        self.jac_l1.push(integrate(&jacobian(u).map(f64::abs)));
        self.l2.push(integrate(&u.modulus_squared()));
        self.sets.push(detect(u, self.r_merge));
        if Some(&m) == self.wanted.last() {
            self.last = Some(u.clone());
        }
        Ok(())
    }
}

/// Concentration diagnostics of a single field.
pub fn final_structure(u: &ComplexField, set: VortexSet, p: &GLParams, alpha: f64) -> Result<FinalStructure> {
    let g = u.grid;
    let eps = p.eps();
    let j = jacobian(u);
    let mut radius = 10.0 * eps;
    for a in 0..set.len() {
        let pa = set.vortices[a].pos();
        for b in a + 1..set.len() {
            radius = radius.min(0.45 * g.distance(pa, set.vortices[b].pos()));
        }
        if !g.is_torus() {
            let wall = pa[0].min(pa[1]).min(g.side() - pa[0]).min(g.side() - pa[1]);
            radius = radius.min(wall);
        }
    }
    let ball_ratios = set
        .vortices
        .iter()
        .map(|v| ball_mass(&j, v.pos(), radius) / (std::f64::consts::PI * v.degree as f64))
        .collect();
    let dict = TestDictionary::standard(&g);
    let dn = dual_norm(&DiscreteMeasure::Density(j.clone()), &set.atomic_measure(), &g, alpha, &dict)?;
    let mu = energy_density(u, p).map(|e| e * p.k_eps());
    let radii: Vec<f64> = [5.0, 10.0, 20.0].iter().map(|k| k * eps).filter(|&r| r < 0.5 * g.side()).collect();
    let stride = (g.n() / 32).max(1);
    let dr = if radii.is_empty() { 0.0 } else { density_ratio(&j, &mu, &radii, stride)?.max };
    Ok(FinalStructure {
        vortices: set,
        ball_radius: radius,
        ball_ratios,
        dual_norm: dn,
        density_ratio: dr,
        rescaled_energy: p.k_eps() * energy(u, p),
    })
}

/// One member of the ensemble on the given path.
pub fn run_seed(cfg: &RunConfig, res: &Resolved, path: &BrownianPath, seed: u64) -> Result<SeedSample> {
    let u0 = canonical_initial(&res.spec, &res.params, &res.grid)?;
    let mut probe = SnapshotProbe {
        wanted: &res.snapshot_steps,
        params: &res.params,
        r_merge: cfg.detect.r_merge * res.params.eps(),
        dt: res.dt,
        times: Vec::new(),
        energy: Vec::new(),
        jac_l1: Vec::new(),
        l2: Vec::new(),
        sets: Vec::new(),
        last: None,
    };
    run_observed(&u0, path, &res.params, &res.forcing, res.scheme, &mut probe)?;
    let last = probe.last.take().expect("final step is a snapshot");
    let final_set = probe.sets.last().cloned().expect("at least one snapshot");
    let structure = final_structure(&last, final_set, &res.params, cfg.report.alpha)?;
    let k = res.params.k_eps();
    Ok(SeedSample {
        seed,
        rescaled: probe.energy.iter().map(|e| k * e).collect(),
        times: probe.times,
        energy: probe.energy,
        jac_l1: probe.jac_l1,
        l2: probe.l2,
        degrees: probe.sets.iter().map(|s| s.vortices.iter().map(|v| v.degree).collect()).collect(),
        structure,
    })
}

/// Runs every seed of `cfg` on sampled Brownian paths.
pub fn run_ensemble(cfg: &RunConfig) -> Result<Ensemble> {
    run_ensemble_with(cfg, |horizon, dt, seed| BrownianPath::sample(horizon, dt, seed))
}

/// Runs every seed of `cfg` on the paths produced by `make_path`.
///
/// Seeds that blow up are recorded in [`Ensemble::blowups`] and excluded
/// from the statistics; any other error aborts the run.
pub fn run_ensemble_with<P>(cfg: &RunConfig, make_path: P) -> Result<Ensemble>
where
    P: Fn(f64, f64, u64) -> Result<BrownianPath> + Sync,
{
    let mut res = cfg.resolve()?;
    let last = *res.snapshot_steps.last().expect("snapshots are never empty");
    if last != res.steps {
        res.snapshot_steps.push(res.steps);
    }
    let horizon = res.horizon();
    let outcomes: Vec<Result<SeedSample>> = res
        .seeds
        .par_iter()
        .map(|&seed| {
            let path = make_path(horizon, res.dt, seed)?;
            run_seed(cfg, &res, &path, seed)
        })
        .collect();
    let mut samples = Vec::new();
    let mut blowups = Vec::new();
    for (seed, out) in res.seeds.iter().zip(outcomes) {
        match out {
            Ok(s) => samples.push(s),
            Err(e @ Error::Blowup { .. }) => blowups.push(BlowupRecord {
                seed: *seed,
                message: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    let stats = EnsembleStats::from_samples(&samples)?;
    Ok(Ensemble {
        stats,
        samples,
        blowups,
        eps: cfg.model.eps,
        n: cfg.grid.n,
    })
}

impl Ensemble {
    pub fn write_samples_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{SAMPLES_HEADER}")?;
        for s in &self.samples {
            for t in 0..s.times.len() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    s.seed,
                    s.times[t],
                    s.energy[t],
                    s.rescaled[t],
                    s.jac_l1[t],
                    s.l2[t],
                    s.degrees[t].len(),
                    degree_string(&s.degrees[t])
                )?;
            }
        }
        Ok(())
    }
}

fn opnorm(m: [[f64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = m;
    let s = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    (0.5 * (s + (s * s - 4.0 * det * det).max(0.0).sqrt())).sqrt()
}

/// `K̂₁ = sup_x (|ψ| + 2‖Ψ‖_op)`, sampled on the grid, so that the drift
/// correction satisfies `|∫ e ψ + G:Ψ| ≤ K̂₁ E_ε`.
pub fn k1_hat(forcing: &ForcingField, grid: &Grid) -> f64 {
    let s = forcing.sample(grid);
    let psi = psi_field(&s);
    let big = Psi_field(&s);
    (0..grid.len())
        .map(|k| psi.data[k].abs() + 2.0 * opnorm(big.at(k)))
        .fold(0.0, f64::max)
}

/// `K̂_s = sup|div F| + 2 sup‖∇F‖_op`, bounding the noise integrand
/// `|∫ e div F - ∇F:G| ≤ K̂_s E_ε`.
pub fn ks_hat(forcing: &ForcingField, grid: &Grid) -> f64 {
    let s = forcing.sample(grid);
    let div = s.div();
    let grad = s.grad();
    let d = div.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let a = (0..grid.len()).map(|k| opnorm(grad.at(k))).fold(0.0, f64::max);
    d + 2.0 * a
}

/// Least-squares slope of `log y` against `t`.
pub fn growth_rate(times: &[f64], values: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    let m = pts.len() as f64;
    if pts.len() < 2 {
        return 0.0;
    }
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub check: String,
    pub t: f64,
    pub value: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
}

impl ReportRow {
    fn new(check: &str, t: f64, value: f64, bound: f64, slack: f64) -> Self {
        Self {
            check: check.into(),
            t,
            value,
            bound,
            slack,
            pass: value <= bound + slack,
        }
    }
}

pub fn write_report_csv<W: Write>(rows: &[ReportRow], mut w: W) -> Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.check, r.t, r.value, r.bound, r.slack, r.pass)?;
    }
    Ok(())
}

/// Expectation-bound rows: the exponential energy bound, the second-moment
/// bound, the `L²` bound and the fitted growth rate against `K̂₁`.
pub fn bound_rows(stats: &EnsembleStats, forcing: &ForcingField, grid: &Grid, eps: f64) -> Vec<ReportRow> {
    let k1 = k1_hat(forcing, grid);
    let ks = ks_hat(forcing, grid);
    let e0 = stats.rescaled.mean[0];
    let log = (1.0 / eps).ln();
    let mut rows = Vec::new();
    for (i, &t) in stats.times.iter().enumerate() {
        let m = &stats.rescaled;
        let bound = (k1 * t).exp() * e0;
        rows.push(ReportRow::new("energy-exp", t, m.mean[i], bound, m.half[i] * bound / m.mean[i].max(f64::MIN_POSITIVE)));
        let m2 = &stats.rescaled_sq;
        let bound2 = ((2.0 * k1 + ks * ks) * t).exp() * stats.rescaled_sq.mean[0];
        rows.push(ReportRow::new("second-moment", t, m2.mean[i], bound2, m2.half[i] * bound2 / m2.mean[i].max(f64::MIN_POSITIVE)));
        let l2b = 1.5 * grid.area() + 2.0 * eps * eps * log * m.mean[i];
        rows.push(ReportRow::new("l2", t, stats.l2.mean[i], l2b, 0.0));
    }
    let kappa = growth_rate(&stats.times, &stats.rescaled.mean);
    rows.push(ReportRow::new("growth-rate", *stats.times.last().unwrap_or(&0.0), kappa, k1, 0.0));
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailRow {
    pub t: f64,
    pub lambda: f64,
    pub empirical: f64,
    pub markov: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Empirical `P{ℰ_ε(t) ≥ λ}` against the Chebyshev–Markov bound `mean/λ`.
///
/// `multiples` scale the final-time mean rescaled energy into the λ-grid;
/// the slack is the binomial half-width plus the half-width of `mean/λ`.
pub fn tightness_report(samples: &[SeedSample], stats: &EnsembleStats, multiples: &[f64]) -> Vec<TailRow> {
    let m = samples.len() as f64;
    let last = stats.times.len() - 1;
    let base = stats.rescaled.mean[last];
    let mut rows = Vec::new();
    for (i, &t) in stats.times.iter().enumerate() {
        for &k in multiples {
            let lambda = k * base;
            let hits = samples.iter().filter(|s| s.rescaled[i] >= lambda).count() as f64;
            let p = hits / m;
            let markov = stats.rescaled.mean[i] / lambda;
            let slack = Z95 * (p * (1.0 - p) / m).sqrt() + stats.rescaled.half[i] / lambda;
            rows.push(TailRow {
                t,
                lambda,
                empirical: p,
                markov,
                slack,
                pass: p <= markov + slack,
            });
        }
    }
    rows
}

pub fn write_tails_csv<W: Write>(rows: &[TailRow], mut w: W) -> Result<()> {
    writeln!(w, "{TAILS_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.t, r.lambda, r.empirical, r.markov, r.slack, r.pass)?;
    }
    Ok(())
}

/// Structure diagnostics at one `ε`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureLevel {
    pub eps: f64,
    pub n: usize,
    pub seeds: usize,
    /// Every detected degree lies in `{-1, 0, 1}`.
    pub unit_degrees: bool,
    pub degree_hist: BTreeMap<i32, usize>,
    pub median_ball_ratio: f64,
    pub median_dual_norm: f64,
    pub median_density_ratio: f64,
    /// Mean of `π Σ|d_k|`.
    pub mean_abs_degree_mass: f64,
    pub mean_rescaled: f64,
    pub half_rescaled: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureReport {
    pub levels: Vec<StructureLevel>,
    /// Median dual norm strictly decreases along the list.
    pub dual_norm_decreasing: bool,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Final-time quantization and concentration diagnostics across an `ε`-list.
pub fn structure_report(ensembles: &[Ensemble]) -> StructureReport {
    let mut levels = Vec::new();
    for e in ensembles {
        let mut hist = BTreeMap::new();
        let mut ratios = Vec::new();
        let mut masses = Vec::new();
        for s in &e.samples {
            for v in &s.structure.vortices.vortices {
                *hist.entry(v.degree).or_insert(0) += 1;
            }
            ratios.extend_from_slice(&s.structure.ball_ratios);
            let abs: i32 = s.structure.vortices.vortices.iter().map(|v| v.degree.abs()).sum();
            masses.push(std::f64::consts::PI * abs as f64);
        }
        let last = e.stats.times.len() - 1;
        let dn: Vec<f64> = e.samples.iter().map(|s| s.structure.dual_norm).collect();
        let dr: Vec<f64> = e.samples.iter().map(|s| s.structure.density_ratio).collect();
        levels.push(StructureLevel {
            eps: e.eps,
            n: e.n,
            seeds: e.samples.len(),
            unit_degrees: hist.keys().all(|d| d.abs() <= 1),
            degree_hist: hist,
            median_ball_ratio: median(&ratios),
            median_dual_norm: median(&dn),
            median_density_ratio: median(&dr),
            mean_abs_degree_mass: masses.iter().sum::<f64>() / masses.len().max(1) as f64,
            mean_rescaled: e.stats.rescaled.mean[last],
            half_rescaled: e.stats.rescaled.half[last],
        });
    }
    let dual_norm_decreasing = levels.windows(2).all(|w| w[1].median_dual_norm < w[0].median_dual_norm);
    StructureReport {
        levels,
        dual_norm_decreasing,
    }
}

pub fn write_structure_csv<W: Write>(ensembles: &[Ensemble], mut w: W) -> Result<()> {
    writeln!(w, "{STRUCTURE_HEADER}")?;
    for e in ensembles {
        for s in &e.samples {
            let st = &s.structure;
            let ds: Vec<i32> = st.vortices.vortices.iter().map(|v| v.degree).collect();
            let abs: i32 = ds.iter().map(|d| d.abs()).sum();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                e.eps,
                e.n,
                s.seed,
                ds.len(),
                degree_string(&ds),
                std::f64::consts::PI * abs as f64,
                st.ball_radius,
                median(&st.ball_ratios),
                st.dual_norm,
                st.density_ratio,
                st.rescaled_energy
            )?;
        }
    }
    Ok(())
}

/// Tracked field vortices next to the point-vortex prediction on the same
/// Brownian path.
#[derive(Clone, Debug)]
pub struct Correspondence {
    pub pde: Tracks,
    pub sde: Tracks,
    pub events: Tracker,
    pub comparison: PathComparison,
}

pub const PAIR_HEADER: &str = "t,pde_distance,sde_distance,relative";
pub const COMPARE_HEADER: &str = "t,pair,distance";

/// Runs the field equation with tracking every `detect.track_every` steps and
/// the point-vortex SDE on `path`, then matches the two track sets.
pub fn correspondence(cfg: &RunConfig, res: &Resolved, path: &BrownianPath) -> Result<Correspondence> {
    if !res.grid.is_torus() {
        return Err(Error::UnsupportedOnGeometry("point-vortex comparison"));
    }
    let eps = res.params.eps();
    let u0 = canonical_initial(&res.spec, &res.params, &res.grid)?;
    let every = cfg.detect.track_every.max(1);
    let opts = TrackOptions {
        rho_ann: cfg.detect.rho_ann * eps,
        max_jump: cfg.detect.rho_ann * eps,
        tie: 1e-12,
    };
    let mut obs = TrackingObserver::new(res.grid, eps, res.dt, every);
    obs.tracker = Tracker::new(res.grid, opts);
    obs.r_merge = cfg.detect.r_merge * eps;
    run_observed(&u0, path, &res.params, &res.forcing, res.scheme, &mut obs)?;
    let green = TorusGreen::new(res.grid.side(), cfg.point_vortex.kmax)?;
    let sde = run_sde(&PointConfig::from_spec(&res.spec), path, &res.forcing, &green, opts.rho_ann, every)?;
    let pde = obs.tracker.tracks().clone();
    let comparison = compare_paths(&pde, &sde, res.grid.side(), opts.rho_ann)?;
    Ok(Correspondence {
        pde,
        sde,
        events: obs.tracker,
        comparison,
    })
}

impl Correspondence {
    /// `(t, PDE pair distance, SDE pair distance)` per frame.
    pub fn pair_distances(&self, grid: &Grid) -> Vec<(f64, Option<f64>, Option<f64>)> {
        let frames = self.pde.frames().min(self.sde.frames());
        (0..frames)
            .map(|f| (self.pde.times[f], self.pde.pair_distance(f, grid), self.sde.pair_distance(f, grid)))
            .collect()
    }

    pub fn write_pair_csv<W: Write>(&self, grid: &Grid, mut w: W) -> Result<()> {
        writeln!(w, "{PAIR_HEADER}")?;
        let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for (t, a, b) in self.pair_distances(grid) {
            let rel = a.zip(b).map(|(a, b)| (a - b).abs() / b);
            writeln!(w, "{t},{},{},{}", cell(a), cell(b), cell(rel))?;
        }
        Ok(())
    }

    pub fn write_compare_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{COMPARE_HEADER}")?;
        let c = &self.comparison;
        for (f, row) in c.distances.iter().enumerate() {
            for (k, d) in row.iter().enumerate() {
                if d.is_finite() {
                    writeln!(w, "{},{k},{d}", c.times[f])?;
                }
            }
        }
        Ok(())
    }
}

/// Provenance record written next to the CSV outputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub schema: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub blowups: Vec<BlowupRecord>,
    pub files: Vec<String>,
    /// Command-specific summary values.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub data: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig, seeds: Vec<u64>) -> Self {
        Self {
            schema: "glvortex-manifest/v1",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config_hash: cfg.hash(),
            seeds,
            blowups: Vec::new(),
            files: Vec::new(),
            data: BTreeMap::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

/// Writes `stats.csv`, `samples.csv`, `tails.csv`, `report.csv` and
/// `manifest.json` for one ensemble.
pub fn write_ensemble_outputs(dir: &Path, cfg: &RunConfig, ens: &Ensemble) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let res = cfg.resolve()?;
    let create = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
        Ok(std::io::BufWriter::new(std::fs::File::create(dir.join(name))?))
    };
    ens.stats.write_csv(create("stats.csv")?)?;
    ens.write_samples_csv(create("samples.csv")?)?;
    let tails = tightness_report(&ens.samples, &ens.stats, &cfg.report.lambdas);
    write_tails_csv(&tails, create("tails.csv")?)?;
    let rows = bound_rows(&ens.stats, &res.forcing, &res.grid, cfg.model.eps);
    write_report_csv(&rows, create("report.csv")?)?;
    let mut m = Manifest::new("ensemble", cfg, res.seeds.clone());
    m.blowups = ens.blowups.clone();
    m.files = ["stats.csv", "samples.csv", "tails.csv", "report.csv"].map(String::from).to_vec();
    m.write(dir)?;
    Ok(m)
}
