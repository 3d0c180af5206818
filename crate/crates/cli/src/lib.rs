//! Command-line front end: configuration, orchestration and report files.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config_file, RunConfig, KEYS};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "quotelag", version, about = "Quote adjustment speed and behavioral-bias signatures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full-sample cointegration and VECM per side.
    Estimate(Flags),
    /// Estimate, then trace a global price impulse through each side.
    Impulse(Flags),
    /// Weekly estimations, one row per week and side.
    Panel(Flags),
    /// Regress weekly RQV on market returns and gain proportion, then label.
    Classify(Flags),
    /// Intraday spread profile and spread regression.
    Spreads(Flags),
    /// Write a synthetic dataset with its ground truth.
    Simulate(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Estimate(_) => "estimate",
            Command::Impulse(_) => "impulse",
            Command::Panel(_) => "panel",
            Command::Classify(_) => "classify",
            Command::Spreads(_) => "spreads",
            Command::Simulate(_) => "simulate",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Estimate(f)
            | Command::Impulse(f)
            | Command::Panel(f)
            | Command::Classify(f)
            | Command::Spreads(f)
            | Command::Simulate(f) => f,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Config file of `key = value` lines.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// VECM lag order.
    #[arg(long, value_name = "N")]
    pub p: Option<usize>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Comma-separated, e.g. 30m,1h,1.5h.
    #[arg(long, value_name = "LIST")]
    pub horizons: Option<String>,
    /// Skip the unit-root check on the level series.
    #[arg(long)]
    pub force: bool,
    /// Local quote CSV.
    #[arg(long, value_name = "PATH")]
    pub local: Option<PathBuf>,
    /// Global quote CSV, in the quote currency.
    #[arg(long, value_name = "PATH")]
    pub global: Option<PathBuf>,
    /// FX CSV: local currency per unit of quote currency.
    #[arg(long, value_name = "PATH")]
    pub fx: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub trades: Option<PathBuf>,
    /// Directory holding local_quotes.csv, global_quotes.csv, fx.csv and optionally trades.csv.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Panel CSV to classify instead of rebuilding it.
    #[arg(long, value_name = "PATH")]
    pub panel: Option<PathBuf>,
    /// JSON coefficient system to shock instead of estimating one.
    #[arg(long, value_name = "PATH")]
    pub system: Option<PathBuf>,
    #[arg(long)]
    pub asset: Option<String>,
    /// Scenario kind for simulate: disposition, house_money or none.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long, value_name = "N")]
    pub weeks: Option<usize>,
    /// Any config key, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Flags {
    fn overrides(&self) -> CliResult<BTreeMap<String, String>> {
        let mut m = BTreeMap::new();
        let path = |p: &PathBuf| p.to_string_lossy().into_owned();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("--set {kv}: expected KEY=VALUE")))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(CliError::config(format!("--set: unknown key '{k}'")));
            }
            m.insert(k.to_string(), v.trim().to_string());
        }
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("output.dir", self.out.as_ref().map(path));
        put("estimate.p", self.p.map(|x| x.to_string()));
        put("seed", self.seed.map(|x| x.to_string()));
        put("workers", self.workers.map(|x| x.to_string()));
        put("horizons", self.horizons.clone());
        put("estimate.force", self.force.then(|| "true".to_string()));
        put("input.local", self.local.as_ref().map(path));
        put("input.global", self.global.as_ref().map(path));
        put("input.fx", self.fx.as_ref().map(path));
        put("input.trades", self.trades.as_ref().map(path));
        put("input.data", self.data.as_ref().map(path));
        put("input.panel", self.panel.as_ref().map(path));
        put("input.system", self.system.as_ref().map(path));
        put("asset", self.asset.clone());
        put("simulate.kind", self.kind.clone());
        put("simulate.weeks", self.weeks.map(|x| x.to_string()));
        Ok(m)
    }

    /// Config file values with flags on top.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut map = match &self.config {
            Some(p) => load_config_file(p)?,
            None => BTreeMap::new(),
        };
        map.extend(self.overrides()?);
        RunConfig::resolve(&map)
    }
}

/// Run one command to completion and return the written paths.
pub fn execute(command: &Command) -> CliResult<Vec<PathBuf>> {
    let cfg = command.flags().resolve()?;
    let outputs = match command {
        Command::Estimate(_) => commands::cmd_estimate(&cfg)?,
        Command::Impulse(_) => commands::cmd_impulse(&cfg)?,
        Command::Panel(_) => commands::cmd_panel(&cfg)?,
        Command::Classify(_) => commands::cmd_classify(&cfg)?,
        Command::Spreads(_) => commands::cmd_spreads(&cfg)?,
        Command::Simulate(_) => commands::cmd_simulate(&cfg)?,
    };
    log::info!("{}: writing {}", command.name(), outputs.names().join(", "));
    outputs.commit(&cfg.out)
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("quotelag {}: {}", cli.command.name(), e.message);
            e.code()
        }
    }
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("QUOTELAG_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}
