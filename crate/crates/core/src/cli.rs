//! Command-line surface of the `glvortex` binary.
//!
//! Every command reads a `glvortex/v1` TOML file and writes CSV files plus a
//! `manifest.json` into the output directory.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::{Resolved, RunConfig};
use crate::ensemble::{
    bound_rows, correspondence, run_ensemble, structure_report, write_ensemble_outputs, write_report_csv, write_structure_csv,
    Ensemble, Manifest,
};
use crate::error::{Error, Result};
use crate::forcing::BrownianPath;
use crate::gl::{canonical_initial, rescaled_energy};
use crate::grid::write_field_csv;
use crate::ledger::{cumulative, write_ledger_csv, LedgerAccumulator};
use crate::point_vortex::{renorm_energy, run_sde, PointConfig, TorusGreen};
use crate::stepper::{run, run_observed, Snapshots};
use crate::vortex::{detect, TrackOptions, Tracker};

#[derive(Debug, Parser)]
#[command(name = "glvortex", version, about = "Stochastic Ginzburg-Landau vortex laboratory")]
pub struct Cli {
    /// Run configuration (TOML, schema glvortex/v1).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for single runs; base seed for ensembles.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; defaults to `output.dir` of the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// One run: energies, vortex tracks, Brownian path and optional fields.
    Simulate,
    /// Monte Carlo ensemble with expectation-bound and tail reports.
    Ensemble,
    /// Term-by-term energy ledger and its residual under dt refinement.
    Ledger,
    /// Point-vortex SDE from the configured vortices.
    Pointvortex,
    /// Tracked field vortices against the point-vortex SDE on one path.
    Compare,
    /// Structure report across the configured (eps, n) levels.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Ensemble => "ensemble",
            Command::Ledger => "ledger",
            Command::Pointvortex => "pointvortex",
            Command::Compare => "compare",
            Command::Report => "report",
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Runs a parsed command line; returns the manifest it wrote.
pub fn run_cli(cli: &Cli) -> Result<Manifest> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <file> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    let ensemble_like = matches!(cli.command, Command::Ensemble | Command::Report);
    if let (Some(seed), true) = (cli.seed, ensemble_like) {
        cfg.seeds.list = None;
        cfg.seeds.base = seed;
    }
    let dir = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    std::fs::create_dir_all(&dir)?;
    let single_seed = || -> Result<u64> {
        match cli.seed {
            Some(s) => Ok(s),
            None => Ok(cfg.seeds()?[0]),
        }
    };
    match cli.command {
        Command::Simulate => simulate(&cfg, single_seed()?, &dir),
        Command::Ensemble => ensemble(&cfg, &dir),
        Command::Ledger => ledger(&cfg, single_seed()?, &dir),
        Command::Pointvortex => pointvortex(&cfg, single_seed()?, &dir),
        Command::Compare => compare(&cfg, single_seed()?, &dir),
        Command::Report => report(&cfg, &dir),
    }
}

fn sample_path(res: &Resolved, seed: u64) -> Result<BrownianPath> {
    BrownianPath::sample(res.horizon(), res.dt, seed)
}

pub fn simulate(cfg: &RunConfig, seed: u64, dir: &Path) -> Result<Manifest> {
    let res = cfg.resolve()?;
    let path = sample_path(&res, seed)?;
    let u0 = canonical_initial(&res.spec, &res.params, &res.grid)?;
    let traj = run(&u0, &path, &res.params, &res.forcing, res.scheme, &Snapshots::Times(res.snapshot_times()))?;
    let eps = res.params.eps();
    let mut tracker = Tracker::new(res.grid, TrackOptions::for_eps(eps));
    for (t, u) in traj.times.iter().zip(&traj.fields) {
        tracker.push(*t, detect(u, cfg.detect.r_merge * eps));
    }
    let mut files = vec!["energy.csv".to_string(), "path.csv".into(), "tracks.csv".into(), "events.csv".into()];
    {
        use std::io::Write;
        let mut w = create(dir, "energy.csv")?;
        writeln!(w, "t,E,Er")?;
        for (k, t) in traj.times.iter().enumerate() {
            writeln!(w, "{t},{},{}", traj.energies[k], rescaled_energy(&traj.fields[k], &res.params))?;
        }
    }
    path.write_csv(create(dir, "path.csv")?)?;
    tracker.tracks().write_csv(create(dir, "tracks.csv")?)?;
    tracker.write_events_csv(create(dir, "events.csv")?)?;
    if cfg.output.fields {
        for (k, u) in traj.fields.iter().enumerate() {
            let name = format!("field_{k:04}.csv");
            write_field_csv(u, create(dir, &name)?)?;
            files.push(name);
        }
    }
    let mut m = Manifest::new("simulate", cfg, vec![seed]);
    m.files = files;
    m.data.insert("seed".into(), json!(seed));
    m.data.insert("times".into(), json!(traj.times));
    m.data.insert("energies".into(), json!(traj.energies));
    m.write(dir)?;
    Ok(m)
}

fn fail_on_blowups(ens: &[&Ensemble]) -> Result<()> {
    let count: usize = ens.iter().map(|e| e.blowups.len()).sum();
    if count > 0 {
        return Err(Error::BlowupSeeds(count));
    }
    Ok(())
}

pub fn ensemble(cfg: &RunConfig, dir: &Path) -> Result<Manifest> {
    let ens = run_ensemble(cfg)?;
    let m = write_ensemble_outputs(dir, cfg, &ens)?;
    fail_on_blowups(&[&ens])?;
    Ok(m)
}

pub fn ledger(cfg: &RunConfig, seed: u64, dir: &Path) -> Result<Manifest> {
    use std::io::Write;
    let res = cfg.resolve()?;
    let u0 = canonical_initial(&res.spec, &res.params, &res.grid)?;
    let mut path = sample_path(&res, seed)?;
    let mut table = create(dir, "ledger_convergence.csv")?;
    writeln!(table, "level,dt,residual,ratio")?;
    let mut prev: Option<f64> = None;
    let mut residuals = Vec::new();
    for level in 0..=cfg.ledger.refinements {
        let interval = cfg.ledger.interval << level;
        let mut acc = LedgerAccumulator::new(&res.forcing, &res.params, &res.grid, path.dt(), interval);
        run_observed(&u0, &path, &res.params, &res.forcing, res.scheme, &mut acc)?;
        if level == 0 {
            write_ledger_csv(acc.records(), create(dir, "ledger.csv")?)?;
        }
        let r = cumulative(acc.records()).map(|c| c.residual).unwrap_or(0.0);
        let ratio = prev.map(|p| (p / r).abs().to_string()).unwrap_or_default();
        writeln!(table, "{level},{},{r},{ratio}", path.dt())?;
        residuals.push(r);
        prev = Some(r);
        path = path.refine();
    }
    drop(table);
    let mut m = Manifest::new("ledger", cfg, vec![seed]);
    m.files = vec!["ledger.csv".into(), "ledger_convergence.csv".into()];
    m.data.insert("residuals".into(), json!(residuals));
    m.write(dir)?;
    Ok(m)
}

pub fn pointvortex(cfg: &RunConfig, seed: u64, dir: &Path) -> Result<Manifest> {
    use std::io::Write;
    let res = cfg.resolve()?;
    let path = sample_path(&res, seed)?;
    let green = TorusGreen::new(res.grid.side(), cfg.point_vortex.kmax)?;
    let eps = res.params.eps();
    let start = PointConfig::from_spec(&res.spec);
    let every = cfg.detect.track_every;
    let tracks = run_sde(&start, &path, &res.forcing, &green, cfg.detect.rho_ann * eps, every)?;
    tracks.write_csv(create(dir, "sde_tracks.csv")?)?;
    let mut w = create(dir, "sde_distance.csv")?;
    writeln!(w, "t,distance")?;
    for f in 0..tracks.frames() {
        if let Some(d) = tracks.pair_distance(f, &res.grid) {
            writeln!(w, "{},{d}", tracks.times[f])?;
        }
    }
    let mut m = Manifest::new("pointvortex", cfg, vec![seed]);
    m.files = vec!["sde_tracks.csv".into(), "sde_distance.csv".into()];
    m.data.insert("initial_w".into(), json!(renorm_energy(&start, &green)?));
    m.write(dir)?;
    Ok(m)
}

pub fn compare(cfg: &RunConfig, seed: u64, dir: &Path) -> Result<Manifest> {
    let res = cfg.resolve()?;
    let path = sample_path(&res, seed)?;
    let c = correspondence(cfg, &res, &path)?;
    c.pde.write_csv(create(dir, "pde_tracks.csv")?)?;
    c.sde.write_csv(create(dir, "sde_tracks.csv")?)?;
    c.events.write_events_csv(create(dir, "events.csv")?)?;
    c.write_pair_csv(&res.grid, create(dir, "pair.csv")?)?;
    c.write_compare_csv(create(dir, "compare.csv")?)?;
    let mut m = Manifest::new("compare", cfg, vec![seed]);
    m.files = ["pde_tracks.csv", "sde_tracks.csv", "events.csv", "pair.csv", "compare.csv"].map(String::from).to_vec();
    m.data.insert("sup_distance".into(), json!(c.comparison.sup));
    m.data.insert("divergence_time".into(), json!(c.comparison.divergence_time));
    m.write(dir)?;
    Ok(m)
}

pub fn report(cfg: &RunConfig, dir: &Path) -> Result<Manifest> {
    let (eps_list, n_list) = (&cfg.report.eps_list, &cfg.report.n_list);
    if eps_list.len() != n_list.len() {
        return Err(Error::Config(format!(
            "report.eps_list has {} entries, report.n_list {}",
            eps_list.len(),
            n_list.len()
        )));
    }
    let levels: Vec<RunConfig> = if eps_list.is_empty() {
        vec![cfg.clone()]
    } else {
        eps_list.iter().zip(n_list).map(|(&e, &n)| cfg.with_resolution(e, n)).collect()
    };
    let mut ensembles = Vec::with_capacity(levels.len());
    let mut rows = Vec::new();
    for level in &levels {
        let ens = run_ensemble(level)?;
        let res = level.resolve()?;
        rows.extend(bound_rows(&ens.stats, &res.forcing, &res.grid, level.model.eps));
        ensembles.push(ens);
    }
    write_structure_csv(&ensembles, create(dir, "structure.csv")?)?;
    write_report_csv(&rows, create(dir, "report.csv")?)?;
    let summary = structure_report(&ensembles);
    let mut m = Manifest::new("report", cfg, cfg.seeds()?);
    m.files = vec!["structure.csv".into(), "report.csv".into()];
    m.blowups = ensembles.iter().flat_map(|e| e.blowups.clone()).collect();
    m.data.insert("structure".into(), serde_json::to_value(&summary)?);
    m.write(dir)?;
    fail_on_blowups(&ensembles.iter().collect::<Vec<_>>())?;
    Ok(m)
}
