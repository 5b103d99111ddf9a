//! Loads a TOML configuration and runs the `simulate` and `ledger` commands.

use glvortex::cli::{ledger, simulate};
use glvortex::config::RunConfig;

fn main() -> glvortex::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/pair_torus.toml").into());
    let mut cfg = RunConfig::load(path.as_ref())?;
    cfg.output.fields = false;
    let out = std::env::temp_dir().join("glvortex-run");
    std::fs::create_dir_all(&out)?;
    let m = simulate(&cfg, cfg.seeds()?[0], &out)?;
    println!("simulate wrote {:?} to {}", m.files, out.display());
    let m = ledger(&cfg, cfg.seeds()?[0], &out)?;
    println!("ledger residuals {}", m.data["residuals"]);
    println!("config hash {}", m.config_hash);
    Ok(())
}
