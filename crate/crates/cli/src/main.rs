//! `zrp`: command line front end for the ladder zero range experiments.
//!
//! Exit status is 0 on success, 2 for invalid input or configuration and
//! 3 when a numerical stage fails.

mod io;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use zrp_core::analysis::{compare_profiles, empirical_profile, predicted_block_means};
use zrp_core::environment::{decompose_tiles, Environment};
use zrp_core::measures::{FugacityTable, JumpRate};
use zrp_core::pde::{solve_pde, InitialProfile, PDEConfig};
use zrp_core::pipeline::{
    run_c_of_l, run_exact_small, run_hydro, run_one_block, run_prop4, run_stationarity, simulate_replicas, EnvSpec,
    Experiment, ExperimentConfig, Reference,
};
use zrp_core::{Result, ZrpError};

#[derive(Parser)]
#[command(
    name = "zrp",
    version,
    about = "Zero range process on a random ladder: simulation, PDE and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an environment and write it as a line of figure digits.
    GenEnv {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tile decomposition and kappa_N of an environment file, as JSON.
    Decompose {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run replicas from the product measure and write occupancy snapshots.
    Simulate {
        #[arg(long)]
        env: PathBuf,
        #[arg(long, default_value = "const1")]
        g: String,
        #[arg(long)]
        rho0: InitialProfile,
        #[arg(long)]
        t: f64,
        /// Comma separated macroscopic times; defaults to `t`.
        #[arg(long, value_delimiter = ',')]
        snapshots: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Simulate the time-reversed dynamics.
        #[arg(long)]
        reverse: bool,
    },
    /// Solve the limiting PDE on a uniform periodic grid.
    SolvePde {
        #[arg(long, default_value = "const1")]
        g: String,
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        rho0: InitialProfile,
        #[arg(long = "M", default_value_t = 1024)]
        m: usize,
        #[arg(long)]
        t: f64,
        /// Use Crank-Nicolson with this time step instead of the explicit scheme.
        #[arg(long)]
        implicit_dt: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Block profile of a snapshot directory against a PDE profile.
    Compare {
        #[arg(long)]
        snapshots: PathBuf,
        #[arg(long)]
        pde: PathBuf,
        #[arg(long)]
        block: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-block statistic under the stationary measure.
    OneBlock {
        #[arg(long)]
        rho: Option<f64>,
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Canonical-measure residuals over the exact test matrix.
    Stationarity {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Certify a gamma for the entropy inequality on a PDE instance.
    Prop4 {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Full hydrodynamic comparison: simulation, PDE and block profiles.
    Hydro {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Run whatever experiment a configuration file names.
    Run {
        #[command(flatten)]
        common: ConfigArgs,
    },
}

/// Experiment settings: an optional JSON file, overridden field by field by flags.
#[derive(Args, Default)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    env_seed: Option<u64>,
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    rho0: Option<InitialProfile>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    block: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    l_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<u32>>,
    #[arg(long = "M")]
    pde_m: Option<usize>,
    /// Compare against the closed-form heat solution (linear rates only).
    #[arg(long)]
    exact_linear: bool,
    #[arg(long)]
    reverse: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(self, experiment: Option<Experiment>) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(e) = experiment {
            c.experiment = e;
        }
        if let Some(file) = self.env {
            c.env.file = Some(file);
        }
        let EnvSpec { n, p, seed, .. } = &mut c.env;
        set(n, self.n);
        set(p, self.p);
        set(seed, self.env_seed);
        set(&mut c.g, self.g);
        set(&mut c.rho0, self.rho0);
        set(&mut c.t, self.t);
        set(&mut c.snapshots, self.snapshots);
        set(&mut c.replicas, self.replicas);
        if self.block.is_some() {
            c.block = self.block;
        }
        set(&mut c.l_list, self.l_list);
        set(&mut c.k_list, self.k_list);
        set(&mut c.pde_m, self.pde_m);
        if self.exact_linear {
            c.reference = Reference::ExactLinear;
        }
        c.reverse |= self.reverse;
        set(&mut c.seed, self.seed);
        if self.out.is_some() {
            c.out = self.out;
        }
        Ok(c)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Serialize)]
struct DecomposeReport<'a> {
    env_hash: String,
    n: usize,
    t_n: usize,
    kappa_n: f64,
    sizes: Vec<usize>,
    decomposition: &'a zrp_core::environment::TileDecomposition,
}

#[derive(Serialize)]
struct SimulateSummary {
    env_hash: String,
    g: String,
    rho0: String,
    t: f64,
    snapshots: Vec<f64>,
    snapshot_dirs: Vec<String>,
    replicas: usize,
    seed: u64,
    reverse: bool,
    total_events: u64,
    conserved: bool,
    absorbed_replicas: usize,
    runs: Vec<zrp_core::dynamics::RunSummary>,
}

#[derive(Serialize)]
struct CompareReport {
    snapshots: String,
    pde: String,
    sites: usize,
    comparison: zrp_core::analysis::ComparisonReport,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenEnv { n, p, seed, out } => {
            let env = Environment::generate(n, p, seed)?;
            env.save(&out)?;
            eprintln!("wrote {} (n = {n}, hash {})", out.display(), env.hash());
            Ok(())
        }
        Command::Decompose { env, out } => {
            let env = Environment::load(env)?;
            let d = decompose_tiles(&env)?;
            io::emit_json(
                out.as_deref(),
                &DecomposeReport {
                    env_hash: env.hash(),
                    n: env.n(),
                    t_n: d.t_n,
                    kappa_n: d.kappa_n,
                    sizes: d.sizes(),
                    decomposition: &d,
                },
            )
        }
        Command::Simulate {
            env,
            g,
            rho0,
            t,
            snapshots,
            replicas,
            seed,
            out,
            reverse,
        } => {
            let env = Environment::load(env)?;
            let table = FugacityTable::<f64>::new(JumpRate::from_name(&g)?)?;
            let times = if snapshots.is_empty() { vec![t] } else { snapshots };
            if times.windows(2).any(|w| w[0] > w[1]) || times.iter().any(|&s| !(0.0..=t).contains(&s)) {
                return Err(ZrpError::Config(format!(
                    "snapshot times must be sorted within [0, {t}]"
                )));
            }
            if replicas == 0 {
                return Err(ZrpError::Config("replicas must be at least 1".into()));
            }
            let runs = simulate_replicas(&env, &table, &rho0, &times, replicas, seed, reverse)?;
            ensure_dir(&out)?;
            let mut dirs = Vec::new();
            for (i, snaps) in runs.snapshots.iter().enumerate() {
                let dir = io::snapshot_dir(&out, i);
                ensure_dir(&dir)?;
                for (r, c) in snaps.iter().enumerate() {
                    io::write_configuration(&io::replica_file(&dir, r), c)?;
                }
                dirs.push(dir.file_name().unwrap().to_string_lossy().into_owned());
            }
            let summary = SimulateSummary {
                env_hash: env.hash(),
                g,
                rho0: rho0.to_string(),
                t,
                snapshots: times,
                snapshot_dirs: dirs,
                replicas,
                seed,
                reverse,
                total_events: runs.summaries.iter().map(|s| s.events).sum(),
                conserved: runs.summaries.iter().all(|s| s.conserved),
                absorbed_replicas: runs.summaries.iter().filter(|s| s.absorbed).count(),
                runs: runs.summaries,
            };
            io::emit_json(Some(&out.join("summary.json")), &summary)
        }
        Command::SolvePde {
            g,
            kappa,
            rho0,
            m,
            t,
            implicit_dt,
            out,
        } => {
            let table = FugacityTable::<f64>::new(JumpRate::from_name(&g)?)?;
            rho0.check(&table)?;
            let cfg = match implicit_dt {
                Some(dt) => PDEConfig::implicit(kappa, m, Some(dt)),
                None => PDEConfig::explicit(kappa, m),
            };
            let sol = solve_pde(&rho0.grid::<f64>(m), &table, &cfg, t)?;
            io::write_profile(&out, &sol)
        }
        Command::Compare {
            snapshots,
            pde,
            block,
            out,
        } => {
            let configs = io::read_snapshot_dir(&snapshots)?;
            let n = configs[0].sites();
            if configs.iter().any(|c| c.sites() != n) {
                return Err(ZrpError::Input("snapshots have different sizes".into()));
            }
            let b = block.unwrap_or_else(|| zrp_core::analysis::default_block_size(n));
            let profile = io::read_profile(&pde)?;
            let emp = empirical_profile(&configs, b)?;
            let predicted = predicted_block_means(&profile, n, b)?;
            let comparison = compare_profiles(&emp, &predicted)?;
            io::emit_json(
                out.as_deref(),
                &CompareReport {
                    snapshots: snapshots.display().to_string(),
                    pde: pde.display().to_string(),
                    sites: n,
                    comparison,
                },
            )
        }
        Command::OneBlock { rho, common } => {
            let mut cfg = common.resolve(Some(Experiment::OneBlock))?;
            if let Some(value) = rho {
                cfg.rho0 = InitialProfile::Const { value };
            }
            run_config(cfg)
        }
        Command::Stationarity { common } => run_config(common.resolve(Some(Experiment::Stationarity))?),
        Command::Prop4 { common } => run_config(common.resolve(Some(Experiment::Prop4))?),
        Command::Hydro { common } => run_config(common.resolve(Some(Experiment::Hydro))?),
        Command::Run { common } => {
            if common.config.is_none() {
                return Err(ZrpError::Config("run needs --config".into()));
            }
            run_config(common.resolve(None)?)
        }
    }
}

fn run_config(cfg: ExperimentConfig) -> Result<()> {
    let out = cfg.out.clone();
    match cfg.experiment {
        Experiment::Hydro => {
            let report = run_hydro(&cfg)?;
            match out {
                Some(dir) => {
                    ensure_dir(&dir)?;
                    for (i, snap) in report.snapshots.iter().enumerate() {
                        io::write_block_rows(&dir.join(format!("blocks_{i:03}.csv")), &snap.comparison)?;
                    }
                    io::emit_json(Some(&dir.join("report.json")), &report)
                }
                None => io::emit_json(None, &report),
            }
        }
        Experiment::Stationarity => io::emit_json(out.as_deref(), &run_stationarity(&cfg)?),
        Experiment::OneBlock => io::emit_json(out.as_deref(), &run_one_block(&cfg)?),
        Experiment::COfL => io::emit_json(out.as_deref(), &run_c_of_l(&cfg)?),
        Experiment::Prop4 => io::emit_json(out.as_deref(), &run_prop4(&cfg)?),
        Experiment::ExactSmall => io::emit_json(out.as_deref(), &run_exact_small(&cfg)?),
    }
}

fn exit_code(err: &ZrpError) -> u8 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
