//! Flags. Every flag overrides the matching field of the `--config` document.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use stochcool::BoundaryMode;

use crate::commands;
use crate::config::{RangeSpec, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "stochcool",
    version,
    about = "Energy budget, cooling boundaries and simulation of stochastic cooling in a harmonic trap"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-term single-step energy budget for one configuration.
    Energy {
        #[command(flatten)]
        common: CommonArgs,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Cooling/heating boundary curves d(s), one CSV per curve.
    Boundary {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Minimal beam radius versus l_th^2.
    Smin {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Compare the closed forms against the independent numerical oracle.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Reduced grid.
        #[arg(long)]
        quick: bool,
        /// Negative control: scale one closed-form value, e.g. `dt_par_cool=1.001`.
        #[arg(long, value_name = "TARGET=FACTOR")]
        tamper: Option<String>,
    },
    /// Monte Carlo of repeated measure-kick-evolve cycles.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Closed-form (and optionally simulated) energy changes over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
}

/// `opt` or a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaArg {
    Optimal,
    Value(f64),
}

fn parse_sigma(s: &str) -> Result<SigmaArg, String> {
    match s {
        "opt" | "optimal" => Ok(SigmaArg::Optimal),
        v => v
            .parse()
            .map(SigmaArg::Value)
            .map_err(|_| format!("expected `opt` or a number, got `{v}`")),
    }
}

fn parse_range(s: &str) -> Result<RangeSpec, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [min, max, points] = parts[..] else {
        return Err(format!("expected MIN,MAX,POINTS, got `{s}`"));
    };
    let f = |v: &str| {
        v.parse::<f64>()
            .map_err(|_| format!("`{v}` is not a number"))
    };
    Ok(RangeSpec {
        min: f(min)?,
        max: f(max)?,
        points: points
            .parse()
            .map_err(|_| format!("`{points}` is not a count"))?,
        log: true,
    })
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run directory; defaults to `$STOCHCOOL_OUTPUT_DIR/<command>`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core). Never changes the results.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,

    #[arg(long)]
    pub n_atoms: Option<f64>,
    #[arg(long)]
    pub l_th_sq: Option<f64>,
    #[arg(long)]
    pub t_over_t0: Option<f64>,
    #[arg(long)]
    pub kt_over_omega: Option<f64>,
    /// Beam radius in units of the cloud rms size.
    #[arg(long)]
    pub s: Option<f64>,
    /// Beam offset in units of the cloud rms size.
    #[arg(long)]
    pub d: Option<f64>,
    /// Resolution in units of Δp0, or `opt`.
    #[arg(long, value_parser = parse_sigma)]
    pub sigma: Option<SigmaArg>,

    /// Trap angular frequency (rad/s).
    #[arg(long)]
    pub omega: Option<f64>,
    /// Atomic mass (kg).
    #[arg(long)]
    pub mass: Option<f64>,
    /// Temperature (K).
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Beam radius (m).
    #[arg(long)]
    pub r0: Option<f64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub y0: Option<f64>,
    /// Resolution (kg m/s).
    #[arg(long)]
    pub sigma_si: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    #[arg(long, value_delimiter = ',')]
    pub s_values: Option<Vec<f64>>,
    /// Log-spaced `MIN,MAX,POINTS`.
    #[arg(long, value_parser = parse_range)]
    pub s_range: Option<RangeSpec>,
    #[arg(long, value_delimiter = ',')]
    pub d_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub l_th_sq_list: Option<Vec<f64>>,
    /// Per-N temperature `T = ratio · T0(N)` for the grid.
    #[arg(long)]
    pub grid_t_over_t0: Option<f64>,
    /// Any of longitudinal_only, total, asymptotic.
    #[arg(long, value_delimiter = ',')]
    pub modes: Option<Vec<BoundaryMode>>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Atom-number estimate used by the feedback; defaults to <N_w>.
    #[arg(long)]
    pub n_effective: Option<f64>,
    /// Fixed inter-step trap phase (rad); random if absent.
    #[arg(long)]
    pub phase: Option<f64>,
    /// Replicas written to trajectories.csv.
    #[arg(long)]
    pub trajectories: Option<usize>,
}

fn set<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

impl CommonArgs {
    /// The `--config` document (or an empty one) with these flags applied.
    pub fn merged(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        set(&mut cfg.out_dir, self.out_dir.clone());
        set(&mut cfg.seed, self.seed);
        let p = &mut cfg.physics;
        set(&mut p.n_atoms, self.n_atoms);
        set(&mut p.l_th_sq, self.l_th_sq);
        set(&mut p.t_over_t0, self.t_over_t0);
        set(&mut p.kt_over_omega, self.kt_over_omega);
        set(&mut p.s, self.s);
        set(&mut p.d, self.d);
        match self.sigma {
            Some(SigmaArg::Optimal) => {
                p.sigma_over_dp0 = None;
                p.sigma = None;
            }
            Some(SigmaArg::Value(v)) => p.sigma_over_dp0 = Some(v),
            None => {}
        }
        set(&mut p.omega, self.omega);
        set(&mut p.mass, self.mass);
        set(&mut p.temperature, self.temperature);
        set(&mut p.r0, self.r0);
        set(&mut p.x0, self.x0);
        set(&mut p.y0, self.y0);
        set(&mut p.sigma, self.sigma_si);
        Ok(cfg)
    }
}

impl GridArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let g = &mut cfg.grid;
        if self.s_values.is_some() {
            g.s_values = self.s_values.clone();
            g.s_range = None;
        }
        if self.s_range.is_some() {
            g.s_range = self.s_range;
            g.s_values = None;
        }
        set(&mut g.d_values, self.d_values.clone());
        set(&mut g.n_atoms, self.n_list.clone());
        if self.l_th_sq_list.is_some() {
            g.l_th_sq = self.l_th_sq_list.clone();
            g.t_over_t0 = None;
        }
        if self.grid_t_over_t0.is_some() {
            g.t_over_t0 = self.grid_t_over_t0;
            g.l_th_sq = None;
        }
        set(&mut g.modes, self.modes.clone());
    }
}

impl SimArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.simulate;
        set(&mut s.replicas, self.replicas);
        set(&mut s.steps, self.steps);
        set(&mut s.n_effective, self.n_effective);
        set(&mut s.phase, self.phase);
        set(&mut s.trajectories, self.trajectories);
    }
}

/// Runs one parsed command line and returns its standard output.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Energy { common, json } => commands::cmd_energy(&common.merged()?, json),
        Command::Boundary { common, grid } => {
            let mut cfg = common.merged()?;
            grid.apply(&mut cfg);
            commands::cmd_boundary(&cfg, common.workers)
        }
        Command::Smin { common, grid } => {
            let mut cfg = common.merged()?;
            grid.apply(&mut cfg);
            commands::cmd_smin(&cfg, common.workers)
        }
        Command::Verify {
            common,
            quick,
            tamper,
        } => {
            let mut cfg = common.merged()?;
            cfg.verify.quick |= quick;
            set(&mut cfg.verify.tamper, tamper);
            commands::cmd_verify(&cfg, common.workers)
        }
        Command::Simulate { common, sim } => {
            let mut cfg = common.merged()?;
            sim.apply(&mut cfg);
            commands::cmd_simulate(&cfg, common.workers)
        }
        Command::Sweep { common, grid, sim } => {
            let mut cfg = common.merged()?;
            grid.apply(&mut cfg);
            sim.apply(&mut cfg);
            commands::cmd_sweep(&cfg, common.workers)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 4, "physics": {"n_atoms": 10, "l_th_sq": 20, "s": 1, "sigma_over_dp0": 2}}"#).unwrap();
        let cli = Cli::try_parse_from([
            "stochcool",
            "energy",
            "--config",
            path.to_str().unwrap(),
            "--s",
            "2",
            "--sigma",
            "opt",
        ])
        .unwrap();
        let Command::Energy { common, .. } = cli.command else {
            panic!()
        };
        let cfg = common.merged().unwrap();
        assert_eq!(cfg.physics.s, Some(2.0));
        assert_eq!(cfg.physics.sigma_over_dp0, None);
        assert_eq!(cfg.physics.l_th_sq, Some(20.0));
        assert_eq!(cfg.seed, Some(4));
    }

    #[test]
    fn range_flag() {
        assert_eq!(
            parse_range("0.5,10,20").unwrap(),
            RangeSpec {
                min: 0.5,
                max: 10.0,
                points: 20,
                log: true
            }
        );
        assert!(parse_range("1,2").is_err());
        assert_eq!(parse_sigma("opt").unwrap(), SigmaArg::Optimal);
        assert_eq!(parse_sigma("3").unwrap(), SigmaArg::Value(3.0));
    }
}
