//! Experiment configuration and the end-to-end pipelines. Every report
//! embeds the configuration and the environment hash it was produced from.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    c_of_l, compare_profiles, empirical_average, empirical_profile, f_profile, one_block_statistic,
    predicted_block_means, section5_statistic, ComparisonReport, SiteDensity,
};
use crate::dynamics::{
    build_exact_model, relative_entropy, replica_rng, run_replicas, stationarity_residual, Configuration, ExactModel,
    RunSummary, Simulator,
};
use crate::environment::{build_edges, decompose_tiles, Environment, FigureType};
use crate::error::{Result, StageExt, ZrpError};
use crate::measures::{EntropyBoundGrid, FugacityTable, JumpRate, ProductSampler};
use crate::pde::{solve_pde, DensityProfile, InitialProfile, PDEConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Stationarity,
    Hydro,
    OneBlock,
    COfL,
    Prop4,
    ExactSmall,
}

/// Where the environment comes from: a file, or a generated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvSpec {
    pub n: usize,
    pub p: f64,
    pub seed: u64,
    pub file: Option<PathBuf>,
}

impl Default for EnvSpec {
    fn default() -> Self {
        EnvSpec {
            n: 64,
            p: 0.0,
            seed: 0,
            file: None,
        }
    }
}

impl EnvSpec {
    pub fn build(&self) -> Result<Environment> {
        match &self.file {
            Some(path) => Environment::load(path),
            None => Environment::generate(self.n, self.p, self.seed),
        }
    }
}

/// Prediction the hydro pipeline compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// The finite-difference solution with `kappa = kappa_N`.
    #[default]
    Pde,
    /// Closed-form heat flow of a sine profile; only valid when `Phi = id`.
    ExactLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub env: EnvSpec,
    pub g: String,
    pub rho0: InitialProfile,
    pub t: f64,
    /// Macroscopic snapshot times; empty means `[t]`.
    pub snapshots: Vec<f64>,
    pub replicas: usize,
    /// Block size in sites; `None` uses the default `max(4, n/64)`.
    pub block: Option<usize>,
    pub l_list: Vec<usize>,
    pub k_list: Vec<u32>,
    pub pde_m: usize,
    pub reference: Reference,
    /// Simulate the time-reversed dynamics (all edges reversed).
    pub reverse: bool,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Hydro,
            env: EnvSpec::default(),
            g: "const1".into(),
            rho0: InitialProfile::Sine {
                mean: 1.0,
                amplitude: 0.5,
            },
            t: 0.02,
            snapshots: Vec::new(),
            replicas: 200,
            block: None,
            l_list: vec![1, 2, 4, 8, 16],
            k_list: vec![1, 2, 3],
            pde_m: 1024,
            reference: Reference::Pde,
            reverse: false,
            seed: 0,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn jump_rate(&self) -> Result<JumpRate> {
        JumpRate::from_name(&self.g)
    }

    /// Snapshot times with the default applied.
    pub fn snapshot_times(&self) -> Vec<f64> {
        if self.snapshots.is_empty() {
            vec![self.t]
        } else {
            self.snapshots.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(ZrpError::Config("replicas must be at least 1".into()));
        }
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(ZrpError::Config(format!("t must be finite and >= 0, got {}", self.t)));
        }
        let snaps = self.snapshot_times();
        if snaps.windows(2).any(|w| w[0] > w[1]) || snaps.iter().any(|&s| !(0.0..=self.t).contains(&s)) {
            return Err(ZrpError::Config(format!(
                "snapshot times {snaps:?} must be sorted within [0, {}]",
                self.t
            )));
        }
        let (lo, _) = self.rho0.bounds();
        if !(lo > 0.0) {
            return Err(ZrpError::Config(format!(
                "initial density must be bounded below by K1 > 0, got {lo}"
            )));
        }
        if self.pde_m < 3 {
            return Err(ZrpError::Config("pde_m must be at least 3".into()));
        }
        Ok(())
    }
}

/// Identifies the environment a report was computed on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config: ExperimentConfig,
    pub env_hash: String,
    pub n: usize,
    pub t_n: usize,
    pub kappa_n: f64,
}

fn provenance(config: &ExperimentConfig, env: &Environment) -> Result<Provenance> {
    let d = decompose_tiles(env)?;
    Ok(Provenance {
        config: config.clone(),
        env_hash: env.hash(),
        n: env.n(),
        t_n: d.t_n,
        kappa_n: d.kappa_n,
    })
}

pub fn write_json<S: Serialize>(path: impl AsRef<Path>, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// hydro

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotReport {
    pub time: f64,
    pub comparison: ComparisonReport,
    /// Replica mean and standard error of
    /// `(1/N) sum_j cos(2 pi j/N) (omega_{j,1} + omega_{j,-1}) - int cos(2 pi x) 2 rho(t,x) dx`.
    pub cosine_moment_error: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HydroReport {
    pub provenance: Provenance,
    pub reference: Reference,
    pub block_size: usize,
    pub snapshots: Vec<SnapshotReport>,
    pub total_events: u64,
    pub conserved: bool,
    pub absorbed_replicas: usize,
}

/// Final-time simulation output of every replica.
#[derive(Debug, Clone)]
pub struct ReplicaRuns {
    /// `snapshots[i][r]`: replica `r` at snapshot time `i`.
    pub snapshots: Vec<Vec<Configuration>>,
    pub summaries: Vec<RunSummary>,
}

/// Samples the initial product measure for every replica and runs the
/// dynamics, recording the requested snapshots.
pub fn simulate_replicas(
    env: &Environment,
    table: &FugacityTable<f64>,
    rho0: &InitialProfile,
    times: &[f64],
    replicas: usize,
    seed: u64,
    reverse: bool,
) -> Result<ReplicaRuns> {
    rho0.check(table).stage("initial profile")?;
    let edges = build_edges(env).stage("edges")?;
    let edges = if reverse { edges.reversed() } else { edges };
    let sampler = ProductSampler::new(table, &rho0.lattice::<f64>(env.n())).stage("initial measure")?;
    let horizon = times.last().copied().unwrap_or(0.0);
    let g = table.jump_rate();
    let runs = run_replicas(replicas, seed, |_, rng| {
        let start = sampler.sample(rng);
        let mut sim = Simulator::new(start, &edges, g)?;
        let mut snaps = Vec::with_capacity(times.len());
        let summary = sim.run(horizon, times, rng, |_, _, c| snaps.push(c.clone()))?;
        Ok((snaps, summary))
    })
    .stage("simulation")?;
    let mut snapshots = vec![Vec::with_capacity(replicas); times.len()];
    let mut summaries = Vec::with_capacity(replicas);
    for (snaps, summary) in runs {
        for (i, c) in snaps.into_iter().enumerate() {
            snapshots[i].push(c);
        }
        summaries.push(summary);
    }
    Ok(ReplicaRuns { snapshots, summaries })
}

/// PDE solutions at each of the sorted `times`, started from `rho0` on `m` nodes.
pub fn pde_snapshots(
    table: &FugacityTable<f64>,
    rho0: &InitialProfile,
    kappa: f64,
    m: usize,
    times: &[f64],
) -> Result<Vec<DensityProfile<f64>>> {
    let cfg = PDEConfig::explicit(kappa, m);
    let mut current = rho0.grid::<f64>(m);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        current = solve_pde(&current, table, &cfg, t - current.time)?;
        out.push(current.clone());
    }
    Ok(out)
}

fn reference_block_means(
    reference: Reference,
    table: &FugacityTable<f64>,
    rho0: &InitialProfile,
    kappa: f64,
    pde: &DensityProfile<f64>,
    n: usize,
    b: usize,
) -> Result<Vec<f64>> {
    match reference {
        Reference::Pde => predicted_block_means(pde, n, b),
        Reference::ExactLinear => {
            let identity = [0.5, 1.0, 2.0]
                .iter()
                .all(|&r| table.flux(r).map(|p| (p - r).abs() < 1e-9).unwrap_or(false));
            if !identity {
                return Err(ZrpError::Misuse(format!(
                    "the exact linear reference needs Phi = id, got g = {}",
                    table.jump_rate().name()
                )));
            }
            let evolved = rho0.heat_evolved(kappa, pde.time);
            Ok((0..n / b)
                .map(|k| {
                    let (a, c) = crate::analysis::block_interval(n, b, k);
                    evolved.interval_mean(a, c)
                })
                .collect())
        }
    }
}

pub fn run_hydro(config: &ExperimentConfig) -> Result<HydroReport> {
    config.validate().stage("config")?;
    let env = config.env.build().stage("environment")?;
    let prov = provenance(config, &env).stage("decomposition")?;
    let table = FugacityTable::<f64>::new(config.jump_rate().stage("jump rate")?).stage("fugacity table")?;
    let n = env.n();
    let b = config.block.unwrap_or_else(|| crate::analysis::default_block_size(n));
    if b == 0 || n % b != 0 {
        return Err(ZrpError::Config(format!("block size {b} does not divide n = {n}")).at("config"));
    }
    let times = config.snapshot_times();
    let runs = simulate_replicas(
        &env,
        &table,
        &config.rho0,
        &times,
        config.replicas,
        config.seed,
        config.reverse,
    )?;
    let kappa = prov.kappa_n;
    let m = config.pde_m;
    let pdes = pde_snapshots(&table, &config.rho0, kappa, m, &times).stage("pde")?;
    let mut snapshots = Vec::with_capacity(times.len());
    for ((&time, snaps), pde) in times.iter().zip(&runs.snapshots).zip(&pdes) {
        let emp = empirical_profile(snaps, b).stage("empirical profile")?;
        let predicted =
            reference_block_means(config.reference, &table, &config.rho0, kappa, pde, n, b).stage("reference")?;
        let comparison = compare_profiles(&emp, &predicted).stage("comparison")?;
        let cosine = |x: f64| (2.0 * std::f64::consts::PI * x).cos();
        let target =
            crate::analysis::local_equilibrium_integral(pde, cosine, &SiteDensity, &table).stage("cosine moment")?;
        let errs: Vec<f64> = snaps
            .iter()
            .map(|c| empirical_average(c, cosine, &SiteDensity).map(|v| v - target))
            .collect::<Result<_>>()
            .stage("cosine moment")?;
        snapshots.push(SnapshotReport {
            time,
            comparison,
            cosine_moment_error: mean_and_se(&errs),
        });
    }
    Ok(HydroReport {
        provenance: prov,
        reference: config.reference,
        block_size: b,
        snapshots,
        total_events: runs.summaries.iter().map(|s| s.events).sum(),
        conserved: runs.summaries.iter().all(|s| s.conserved),
        absorbed_replicas: runs.summaries.iter().filter(|s| s.absorbed).count(),
    })
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

// ---------------------------------------------------------------------------
// stationarity

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityCase {
    pub env: String,
    pub g: String,
    pub k: u32,
    pub states: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativeControl {
    pub env: String,
    pub k: u32,
    /// Residual of the unweighted uniform law under `g(k) = k`.
    pub residual: f64,
    /// The control is expected to fail stationarity; this records that it did.
    pub expected_fail: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    pub config: ExperimentConfig,
    pub cases: Vec<StationarityCase>,
    pub max_residual: f64,
    pub negative_control: NegativeControl,
}

/// The environments of the stationarity test matrix.
pub fn stationarity_envs() -> Vec<Environment> {
    use FigureType::*;
    vec![
        Environment::homogeneous(2),
        Environment::homogeneous(3),
        Environment::homogeneous(4),
        Environment::from_figures(vec![F1, F2, F3]),
        Environment::from_figures(vec![F2, F3]),
    ]
}

pub fn run_stationarity(config: &ExperimentConfig) -> Result<StationarityReport> {
    let envs = match &config.env.file {
        Some(_) => vec![config.env.build().stage("environment")?],
        None => stationarity_envs(),
    };
    let mut cases = Vec::new();
    for env in &envs {
        for g in [JumpRate::const1(), JumpRate::linear()] {
            for &k in &config.k_list {
                let model: ExactModel<f64> = build_exact_model(env, &g, k).stage("exact model")?;
                let residual = stationarity_residual(&model, &model.canonical_measure()).stage("residual")?;
                cases.push(StationarityCase {
                    env: env.to_line(),
                    g: g.name().to_string(),
                    k,
                    states: model.len(),
                    residual,
                });
            }
        }
    }
    let control_env = Environment::homogeneous(2);
    let control: ExactModel<f64> = build_exact_model(&control_env, &JumpRate::linear(), 2).stage("negative control")?;
    let residual = stationarity_residual(&control, &control.uniform()).stage("negative control")?;
    Ok(StationarityReport {
        config: config.clone(),
        max_residual: cases.iter().map(|c| c.residual).fold(0.0, f64::max),
        cases,
        negative_control: NegativeControl {
            env: control_env.to_line(),
            k: 2,
            residual,
            expected_fail: residual > 0.01,
        },
    })
}

// ---------------------------------------------------------------------------
// proposition 4

/// Smallest gamma the search will go down to.
pub const GAMMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop4Report {
    pub provenance: Provenance,
    pub kappa: f64,
    /// `sup |F(s, x)|` over the PDE solution on `[0, t]`.
    pub f_bound: f64,
    pub rho_range: (f64, f64),
    pub lambda_points: usize,
    /// Largest certified gamma in `(0, 1]`, or `None` if even the floor fails.
    pub gamma: Option<f64>,
    /// Grid maximum of `gamma |F M| - J` at the certified gamma.
    pub grid_max: Option<f64>,
    /// Same maximum on a twice finer lambda grid, at `0.9 gamma`.
    pub refined_grid_max: Option<f64>,
    pub certified: bool,
}

fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
}

/// Lambda grid on `[0, lambda_max]`, with extra resolution on the density range.
pub fn prop4_lambda_grid(lo: f64, hi: f64, lambda_max: f64, points: usize) -> Vec<f64> {
    let mut grid = linspace(0.0, lambda_max, points);
    grid.extend(linspace(0.5 * lo, 2.0 * hi, points));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

pub fn run_prop4(config: &ExperimentConfig) -> Result<Prop4Report> {
    config.validate().stage("config")?;
    let env = config.env.build().stage("environment")?;
    let prov = provenance(config, &env).stage("decomposition")?;
    let table = FugacityTable::<f64>::new(config.jump_rate().stage("jump rate")?).stage("fugacity table")?;
    let kappa = prov.kappa_n;
    let (lo, hi) = config.rho0.bounds();
    let times: Vec<f64> = linspace(0.0, config.t, 9).into_iter().filter(|&s| s > 0.0).collect();
    let mut f_bound = f_profile(&config.rho0.grid::<f64>(config.pde_m), &table, kappa)
        .stage("F")?
        .values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    for sol in pde_snapshots(&table, &config.rho0, kappa, config.pde_m, &times).stage("pde")? {
        let f = f_profile(&sol, &table, kappa).stage("F")?;
        f_bound = f.values.iter().fold(f_bound, |m, v| m.max(v.abs()));
    }
    let rho_grid = linspace(lo, hi, 41);
    let lambda_max = table.rho_max();
    let points = 400;
    let grid = EntropyBoundGrid::new(
        &table,
        kappa,
        f_bound,
        &rho_grid,
        &prop4_lambda_grid(lo, hi, lambda_max, points),
    )
    .stage("prop4 grid")?;
    let gamma = certify_gamma(|g| grid.worst_case(g));
    let (grid_max, refined_grid_max) = match gamma {
        Some(g) => {
            let refined = EntropyBoundGrid::new(
                &table,
                kappa,
                f_bound,
                &rho_grid,
                &prop4_lambda_grid(lo, hi, lambda_max, 2 * points),
            )
            .stage("prop4 grid")?;
            (Some(grid.worst_case(g)), Some(refined.worst_case(0.9 * g)))
        }
        None => (None, None),
    };
    Ok(Prop4Report {
        provenance: prov,
        kappa,
        f_bound,
        rho_range: (lo, hi),
        lambda_points: 2 * points,
        certified: gamma.is_some(),
        gamma,
        grid_max,
        refined_grid_max,
    })
}

/// Largest `gamma in [GAMMA_FLOOR, 1]` with `worst(gamma) <= 0`, by bisection;
/// `worst` is nondecreasing in gamma.
pub fn certify_gamma(worst: impl Fn(f64) -> f64) -> Option<f64> {
    if worst(1.0) <= 0.0 {
        return Some(1.0);
    }
    if worst(GAMMA_FLOOR) > 0.0 {
        return None;
    }
    let (mut good, mut bad) = (GAMMA_FLOOR, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (good + bad);
        if worst(mid) <= 0.0 {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Some(good)
}

// ---------------------------------------------------------------------------
// one-block and C(l)

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneBlockRow {
    pub l: usize,
    pub mean: f64,
    pub std_error: f64,
    pub section5_mean: f64,
    pub c_of_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneBlockReport {
    pub provenance: Provenance,
    pub rho: f64,
    pub rows: Vec<OneBlockRow>,
}

/// One-block statistics under the stationary product measure at the
/// constant density of `config.rho0`.
pub fn run_one_block(config: &ExperimentConfig) -> Result<OneBlockReport> {
    config.validate().stage("config")?;
    let rho = match config.rho0 {
        InitialProfile::Const { value } => value,
        other => return Err(ZrpError::Config(format!("one-block needs a constant density, got {other}")).at("config")),
    };
    let env = config.env.build().stage("environment")?;
    let prov = provenance(config, &env).stage("decomposition")?;
    let decomp = decompose_tiles(&env).stage("decomposition")?;
    let table = FugacityTable::<f64>::new(config.jump_rate().stage("jump rate")?).stage("fugacity table")?;
    let sampler = ProductSampler::new(&table, &vec![rho; env.n()]).stage("stationary measure")?;
    let per_replica = run_replicas(config.replicas, config.seed, |_, rng| {
        let c = sampler.sample(rng);
        config
            .l_list
            .iter()
            .map(|&l| {
                Ok((
                    one_block_statistic(&c, &decomp, &table, l)?,
                    section5_statistic(&c, &decomp, &table, l)?,
                ))
            })
            .collect::<Result<Vec<_>>>()
    })
    .stage("one-block")?;
    let rows = config
        .l_list
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let (mean, std_error) = mean_and_se(&per_replica.iter().map(|r| r[i].0).collect::<Vec<_>>());
            let (section5_mean, _) = mean_and_se(&per_replica.iter().map(|r| r[i].1).collect::<Vec<_>>());
            Ok(OneBlockRow {
                l,
                mean,
                std_error,
                section5_mean,
                c_of_l: c_of_l(&decomp, l)?,
            })
        })
        .collect::<Result<_>>()
        .stage("one-block")?;
    Ok(OneBlockReport {
        provenance: prov,
        rho,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct COfLReport {
    pub provenance: Provenance,
    /// `(l, C(l))` pairs.
    pub values: Vec<(usize, f64)>,
}

pub fn run_c_of_l(config: &ExperimentConfig) -> Result<COfLReport> {
    let env = config.env.build().stage("environment")?;
    let prov = provenance(config, &env).stage("decomposition")?;
    let decomp = decompose_tiles(&env).stage("decomposition")?;
    let values = config
        .l_list
        .iter()
        .map(|&l| Ok((l, c_of_l(&decomp, l)?)))
        .collect::<Result<_>>()
        .stage("C(l)")?;
    Ok(COfLReport {
        provenance: prov,
        values,
    })
}

// ---------------------------------------------------------------------------
// exact vs Monte Carlo on a tiny instance

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactSmallReport {
    pub provenance: Provenance,
    pub k: u32,
    pub states: usize,
    /// Generator time of the comparison.
    pub time: f64,
    pub replicas: usize,
    pub total_variation: f64,
    /// `(t, H(mu_t | canonical))` from the initial point mass.
    pub entropy: Vec<(f64, f64)>,
    pub entropy_nonincreasing: bool,
}

/// Initial state of the exact comparison: all particles on vertex 0.
pub fn corner_state(vertices: usize, k: u32) -> Vec<u32> {
    let mut occ = vec![0u32; vertices];
    occ[0] = k;
    occ
}

/// Total variation between the uniformized law at generator time `t` and the
/// empirical law of `replicas` simulated trajectories.
pub fn run_exact_small(config: &ExperimentConfig) -> Result<ExactSmallReport> {
    config.validate().stage("config")?;
    let env = config.env.build().stage("environment")?;
    let prov = provenance(config, &env).stage("decomposition")?;
    let g = config.jump_rate().stage("jump rate")?;
    let k = *config
        .k_list
        .first()
        .ok_or_else(|| ZrpError::Config("k_list is empty".into()))?;
    let model: ExactModel<f64> = build_exact_model(&env, &g, k).stage("exact model")?;
    let start = corner_state(env.vertex_count(), k);
    let i0 = model.state_index(&start).expect("corner state enumerated");
    let mu0 = model.point_mass(i0);
    let exact = model.evolve(&mu0, config.t).stage("uniformization")?;

    let edges = build_edges(&env).stage("edges")?;
    let finals = run_replicas(config.replicas, config.seed, |_, rng| {
        let mut sim = Simulator::new(Configuration::from_occupancy(start.clone()), &edges, &g)?;
        sim.run_micro(config.t, rng)?;
        Ok(model
            .state_index(sim.config().occupancy())
            .expect("state space is closed"))
    })
    .stage("simulation")?;
    let mut counts = vec![0usize; model.len()];
    for s in finals {
        counts[s] += 1;
    }
    let tv = 0.5
        * counts
            .iter()
            .zip(&exact)
            .map(|(&c, &p)| (c as f64 / config.replicas as f64 - p).abs())
            .sum::<f64>();

    let pi = model.canonical_measure();
    let grid: Vec<f64> = (1..=20).map(|i| config.t.max(1.0) * 0.25 * i as f64).collect();
    let mut entropy = vec![(0.0, relative_entropy(&mu0, &pi).stage("entropy")?)];
    for (t, mu) in grid.iter().zip(model.evolve_grid(&mu0, &grid).stage("uniformization")?) {
        entropy.push((*t, relative_entropy(&mu, &pi).stage("entropy")?));
    }
    let entropy_nonincreasing = entropy.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    Ok(ExactSmallReport {
        provenance: prov,
        k,
        states: model.len(),
        time: config.t,
        replicas: config.replicas,
        total_variation: tv,
        entropy,
        entropy_nonincreasing,
    })
}

/// A fresh generator for ad-hoc draws tied to the configuration seed.
pub fn config_rng(config: &ExperimentConfig, stream: u64) -> rand_chacha::ChaCha8Rng {
    replica_rng(config.seed, stream)
}
