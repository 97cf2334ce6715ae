//! Observables used to check the hydrodynamic limit: tile and window
//! averages, one-block statistics, the window-size defect `C(l)`, the
//! functions `F` and `G`, empirical density profiles and the test-function
//! statistic against the local equilibrium prediction.

use serde::Serialize;

use crate::dynamics::Configuration;
use crate::environment::{cyclic_window_sums, TileDecomposition};
use crate::error::{Result, ZrpError};
use crate::measures::{FugacityTable, JumpRate, MarginalSampler};
use crate::pde::DensityProfile;
use crate::scalar::Scalar;

/// Window averages around every tile, for half-width `l`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TileAverages<T> {
    pub l: usize,
    /// Particles held by each tile.
    pub omega_hat: Vec<T>,
    /// Particles per vertex in the `2l+1` tiles around tile `j`.
    pub omega_l: Vec<T>,
    /// Particles per tile in the same window.
    pub omega_bar_l: Vec<T>,
    /// Jump rates of the window's centre vertices, divided by `4l+2`.
    pub g_l: Vec<T>,
}

fn check_config(config: &Configuration, decomp: &TileDecomposition) -> Result<()> {
    if config.sites() != decomp.n() {
        return Err(ZrpError::Input(format!(
            "configuration has {} sites, decomposition has {}",
            config.sites(),
            decomp.n()
        )));
    }
    Ok(())
}

pub fn tile_averages<T: Scalar>(
    config: &Configuration,
    decomp: &TileDecomposition,
    g: &JumpRate,
    l: usize,
) -> Result<TileAverages<T>> {
    check_config(config, decomp)?;
    decomp.check_window(l)?;
    let occ = config.occupancy();
    // window sums are taken in exact integer / f64 arithmetic, then converted
    let hat: Vec<u64> = decomp
        .tiles
        .iter()
        .map(|t| t.vertices.iter().map(|v| u64::from(occ[v.index()])).sum())
        .collect();
    let rates: Vec<f64> = decomp
        .tiles
        .iter()
        .map(|t| {
            let x = t.centre_site;
            g.eval(u64::from(occ[2 * x])) + g.eval(u64::from(occ[2 * x + 1]))
        })
        .collect();
    let particle_windows = cyclic_window_sums(&hat, l);
    let vertex_windows = decomp.window_vertex_counts(l)?;
    let rate_windows = exact_window_sums(&rates, l);
    let width = T::of_usize(2 * l + 1);
    let twice = T::of_usize(4 * l + 2);
    Ok(TileAverages {
        l,
        omega_hat: hat.iter().map(|&h| T::of(h as f64)).collect(),
        omega_l: particle_windows
            .iter()
            .zip(&vertex_windows)
            .map(|(&s, &w)| T::of(s as f64) / T::of_usize(w))
            .collect(),
        omega_bar_l: particle_windows.iter().map(|&s| T::of(s as f64) / width).collect(),
        g_l: rate_windows.iter().map(|&r| T::of(r) / twice).collect(),
    })
}

/// Window sums recomputed per window, so no rounding drift accumulates
/// along the ring (rates may be arbitrary reals).
fn exact_window_sums(values: &[f64], l: usize) -> Vec<f64> {
    let t = values.len();
    (0..t)
        .map(|j| (0..=2 * l).map(|d| values[(j + t - l + d) % t]).sum())
        .collect()
}

fn flux_of_windows<T: Scalar>(table: &FugacityTable<T>, omega_l: &[T]) -> Result<Vec<T>> {
    omega_l
        .iter()
        .map(|&w| {
            table.check_density(w)?;
            Ok(table.flux_interp(w))
        })
        .collect()
}

/// `(1/T_N) sum_j |g_j^l - Phi(omega_j^l)|`.
pub fn one_block_statistic<T: Scalar>(
    config: &Configuration,
    decomp: &TileDecomposition,
    table: &FugacityTable<T>,
    l: usize,
) -> Result<T> {
    let avg = tile_averages::<T>(config, decomp, table.jump_rate(), l)?;
    let flux = flux_of_windows(table, &avg.omega_l)?;
    let total = avg
        .g_l
        .iter()
        .zip(&flux)
        .fold(T::zero(), |acc, (&g, &p)| acc + (g - p).abs());
    Ok(total / T::of_usize(decomp.t_n))
}

/// `(1/T_N) sum_j |g^l(omega_j) - 2 Phi(omega_j^l)|`, where `g^l` sums the
/// centre rates of both rows over the window and divides by `2l+1` only.
pub fn section5_statistic<T: Scalar>(
    config: &Configuration,
    decomp: &TileDecomposition,
    table: &FugacityTable<T>,
    l: usize,
) -> Result<T> {
    check_config(config, decomp)?;
    decomp.check_window(l)?;
    let g = table.jump_rate();
    let occ = config.occupancy();
    let centre_rates: Vec<f64> = decomp
        .centres()
        .iter()
        .map(|&x| g.eval(u64::from(occ[2 * x])) + g.eval(u64::from(occ[2 * x + 1])))
        .collect();
    let avg = tile_averages::<T>(config, decomp, g, l)?;
    let flux = flux_of_windows(table, &avg.omega_l)?;
    let width = T::of_usize(2 * l + 1);
    let two = T::of(2.0);
    let total = exact_window_sums(&centre_rates, l)
        .iter()
        .zip(&flux)
        .fold(T::zero(), |acc, (&r, &p)| acc + (T::of(r) / width - two * p).abs());
    Ok(total / T::of_usize(decomp.t_n))
}

/// `C(l) = (1/T_N) sum_j |1/kappa_N - (4l+2) / sum_{|m-j|<=l} N_m|`.
pub fn c_of_l<T: Scalar>(decomp: &TileDecomposition, l: usize) -> Result<T> {
    let windows = decomp.window_vertex_counts(l)?;
    let inv_kappa = T::of_usize(decomp.t_n) / T::of_usize(decomp.n());
    let twice = T::of_usize(4 * l + 2);
    let total = windows
        .iter()
        .fold(T::zero(), |acc, &w| acc + (inv_kappa - twice / T::of_usize(w)).abs());
    Ok(total / T::of_usize(decomp.t_n))
}

/// `F = kappa (Phi o rho)'' / (Phi o rho)` at every node of a PDE solution,
/// with `Phi` evaluated by direct inversion and a central second difference.
pub fn f_profile<T: Scalar>(
    solution: &DensityProfile<T>,
    table: &FugacityTable<T>,
    kappa: T,
) -> Result<DensityProfile<T>> {
    let m = solution.len();
    if m < 3 {
        return Err(ZrpError::Input(format!("need at least 3 grid points, got {m}")));
    }
    if let Some(i) = solution.values.iter().position(|&r| !(r > T::zero())) {
        return Err(ZrpError::Singularity(format!(
            "density {} at x = {} makes F undefined",
            solution.values[i],
            solution.x(i)
        )));
    }
    let phi: Vec<T> = solution.values.iter().map(|&r| table.flux(r)).collect::<Result<_>>()?;
    let inv_dx2 = T::of_usize(m * m);
    let values = (0..m)
        .map(|i| {
            let lap = phi[(i + m - 1) % m] - phi[i] - phi[i] + phi[(i + 1) % m];
            kappa * lap * inv_dx2 / phi[i]
        })
        .collect();
    Ok(DensityProfile {
        values,
        time: solution.time,
    })
}

/// `F(t, x)`, linearly interpolated between grid nodes.
pub fn eval_f<T: Scalar>(solution: &DensityProfile<T>, table: &FugacityTable<T>, kappa: T, x: T) -> Result<T> {
    Ok(f_profile(solution, table, kappa)?.at(x))
}

/// `G = 2 kappa gamma F {Phi(lambda) - Phi(rho) - (lambda - rho) Phi'(rho)}`.
pub fn eval_g<T: Scalar>(table: &FugacityTable<T>, kappa: T, gamma: T, f_value: T, rho: T, lambda: T) -> Result<T> {
    let bracket = table.flux(lambda)? - table.flux(rho)? - (lambda - rho) * table.flux_derivative(rho)?;
    Ok(T::of(2.0) * kappa * gamma * f_value * bracket)
}

/// Constants of the linear bound `|G(u, lambda)| <= C1 + C2 lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GBound<T> {
    /// Lipschitz constant of `Phi` on the table range, at least `Phi(K2)`.
    pub c0: T,
    pub c1: T,
    pub c2: T,
}

impl<T: Scalar> GBound<T> {
    /// `C1 = 4 kappa gamma |F| (Phi(K2) + C0 K2)`, `C2 = 8 kappa gamma |F| C0`.
    pub fn new(table: &FugacityTable<T>, kappa: T, gamma: T, f_norm: T, k2: T) -> Result<Self> {
        let phi_k2 = table.flux(k2)?;
        let c0 = table.max_flux_derivative(T::zero(), table.rho_max()).max(phi_k2);
        let s = kappa * gamma * f_norm.abs();
        Ok(GBound {
            c0,
            c1: T::of(4.0) * s * (phi_k2 + c0 * k2),
            c2: T::of(8.0) * s * c0,
        })
    }

    pub fn at(&self, lambda: T) -> T {
        self.c1 + self.c2 * lambda
    }
}

/// Block means of replica snapshots with their standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalProfile {
    pub sites: usize,
    pub block_size: usize,
    pub replicas: usize,
    /// Particles per vertex in each block, averaged over replicas.
    pub means: Vec<f64>,
    /// Standard error of each block mean across replicas (0 for one replica).
    pub std_errors: Vec<f64>,
}

impl EmpiricalProfile {
    pub fn blocks(&self) -> usize {
        self.means.len()
    }

    /// Macroscopic centre of block `k`.
    pub fn centre(&self, k: usize) -> f64 {
        let (a, b) = self.interval(k);
        0.5 * (a + b)
    }

    /// Macroscopic cell covered by block `k`: site `j` stands for
    /// `[(j - 1/2)/n, (j + 1/2)/n)`.
    pub fn interval(&self, k: usize) -> (f64, f64) {
        block_interval(self.sites, self.block_size, k)
    }

    pub fn intervals(&self) -> Vec<(f64, f64)> {
        (0..self.blocks()).map(|k| self.interval(k)).collect()
    }

    /// Root mean square of the per-block standard errors.
    pub fn pooled_se(&self) -> f64 {
        (self.std_errors.iter().map(|s| s * s).sum::<f64>() / self.blocks() as f64).sqrt()
    }
}

/// Cell `[(kb - 1/2)/n, ((k+1)b - 1/2)/n)` of the `k`-th block of `b` sites.
pub fn block_interval(n: usize, b: usize, k: usize) -> (f64, f64) {
    let n = n as f64;
    (((k * b) as f64 - 0.5) / n, (((k + 1) * b) as f64 - 0.5) / n)
}

/// Means of a continuum profile over the cells of the site blocks.
pub fn predicted_block_means<T: Scalar>(profile: &DensityProfile<T>, n: usize, b: usize) -> Result<Vec<f64>> {
    if b == 0 || n % b != 0 {
        return Err(ZrpError::Input(format!("block size {b} does not divide {n} sites")));
    }
    Ok((0..n / b)
        .map(|k| {
            let (a, c) = block_interval(n, b, k);
            profile.interval_mean(T::of(a), T::of(c)).as_f64()
        })
        .collect())
}

/// Default block size `max(4, n/64)`.
pub fn default_block_size(n: usize) -> usize {
    (n / 64).max(4)
}

/// Per-vertex density in blocks of `b` consecutive sites (both rows),
/// averaged over the snapshots.
pub fn empirical_profile(snapshots: &[Configuration], b: usize) -> Result<EmpiricalProfile> {
    let first = snapshots
        .first()
        .ok_or_else(|| ZrpError::Input("no snapshots to average".into()))?;
    let n = first.sites();
    if b == 0 || n % b != 0 {
        return Err(ZrpError::Input(format!("block size {b} does not divide {n} sites")));
    }
    if snapshots.iter().any(|s| s.sites() != n) {
        return Err(ZrpError::Input("snapshots have different sizes".into()));
    }
    let blocks = n / b;
    let r = snapshots.len();
    let per_replica: Vec<Vec<f64>> = snapshots
        .iter()
        .map(|s| {
            s.occupancy()
                .chunks(2 * b)
                .map(|c| c.iter().map(|&k| f64::from(k)).sum::<f64>() / (2 * b) as f64)
                .collect()
        })
        .collect();
    let mut means = vec![0.0; blocks];
    let mut std_errors = vec![0.0; blocks];
    for k in 0..blocks {
        let mean = per_replica.iter().map(|v| v[k]).sum::<f64>() / r as f64;
        means[k] = mean;
        if r > 1 {
            let var = per_replica.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
            std_errors[k] = (var / r as f64).sqrt();
        }
    }
    Ok(EmpiricalProfile {
        sites: n,
        block_size: b,
        replicas: r,
        means,
        std_errors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockRow {
    pub centre: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub predicted: f64,
}

/// Empirical block profile against a predicted one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `sum_k |empirical_k - predicted_k| / B`, the L1 distance of the step functions.
    pub l1_error: f64,
    pub replicas: usize,
    pub block_size: usize,
    pub pooled_se: f64,
    /// `1.96` pooled standard errors.
    pub half_width: f64,
    pub blocks: Vec<BlockRow>,
}

/// Compares block means with predicted block means (same block layout).
pub fn compare_profiles(empirical: &EmpiricalProfile, predicted: &[f64]) -> Result<ComparisonReport> {
    if predicted.len() != empirical.blocks() {
        return Err(ZrpError::Input(format!(
            "{} predicted blocks for {} empirical ones",
            predicted.len(),
            empirical.blocks()
        )));
    }
    let blocks: Vec<BlockRow> = (0..empirical.blocks())
        .map(|k| BlockRow {
            centre: empirical.centre(k),
            empirical: empirical.means[k],
            std_error: empirical.std_errors[k],
            predicted: predicted[k],
        })
        .collect();
    let l1_error = blocks.iter().map(|b| (b.empirical - b.predicted).abs()).sum::<f64>() / blocks.len() as f64;
    let pooled_se = empirical.pooled_se();
    Ok(ComparisonReport {
        l1_error,
        replicas: empirical.replicas,
        block_size: empirical.block_size,
        pooled_se,
        half_width: 1.96 * pooled_se,
        blocks,
    })
}

/// A bounded function of the occupations on `range()` consecutive sites
/// starting at the origin. `window[2s]` and `window[2s + 1]` are the upper and
/// lower vertex of site `s`.
pub trait Cylinder: Sync {
    fn range(&self) -> usize;

    fn eval(&self, window: &[u32]) -> f64;

    /// Window positions the function actually reads; defaults to all of them.
    fn support(&self) -> Vec<usize> {
        (0..2 * self.range()).collect()
    }

    /// Expectation under the product measure with the given marginal, by
    /// enumeration over the support, dropping branches of probability below
    /// `1e-17`.
    fn expectation(&self, marginal: &MarginalSampler) -> f64 {
        let pmf = marginal.pmf();
        let support = self.support();
        let mut window = vec![0u32; 2 * self.range()];
        fn rec<C: Cylinder + ?Sized>(
            c: &C,
            pmf: &[f64],
            support: &[usize],
            depth: usize,
            prob: f64,
            window: &mut [u32],
        ) -> f64 {
            if depth == support.len() {
                return prob * c.eval(window);
            }
            let mut acc = 0.0;
            for (k, &p) in pmf.iter().enumerate() {
                let q = prob * p;
                if q < 1e-17 {
                    continue;
                }
                window[support[depth]] = k as u32;
                acc += rec(c, pmf, support, depth + 1, q, window);
            }
            window[support[depth]] = 0;
            acc
        }
        rec(self, &pmf, &support, 0, 1.0, &mut window)
    }
}

/// Particles at site 0 (both rows).
#[derive(Debug, Clone, Copy, Default)]
pub struct SiteDensity;

impl Cylinder for SiteDensity {
    fn range(&self) -> usize {
        1
    }
    fn eval(&self, w: &[u32]) -> f64 {
        f64::from(w[0]) + f64::from(w[1])
    }
}

/// `g(omega_{0,1})`, the jump rate of the upper vertex at site 0.
#[derive(Debug, Clone)]
pub struct UpperRate(pub JumpRate);

impl Cylinder for UpperRate {
    fn range(&self) -> usize {
        1
    }
    fn eval(&self, w: &[u32]) -> f64 {
        self.0.eval(u64::from(w[0]))
    }
    fn support(&self) -> Vec<usize> {
        vec![0]
    }
}

/// `1{omega_{0,1} >= 1} 1{omega_{1,-1} >= 1}`, a two-site indicator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeighbourOccupied;

impl Cylinder for NeighbourOccupied {
    fn range(&self) -> usize {
        2
    }
    fn eval(&self, w: &[u32]) -> f64 {
        f64::from(u8::from(w[0] > 0 && w[3] > 0))
    }
    fn support(&self) -> Vec<usize> {
        vec![0, 3]
    }
}

/// `|(1/N) sum_j phi(j/N) psi(tau_j omega) - int phi(x) E_{rho(t,x)}[psi] dx|`,
/// with the integral taken by the periodic trapezoid rule on the PDE grid.
pub fn theorem1_statistic<T: Scalar, C: Cylinder + ?Sized>(
    config: &Configuration,
    solution: &DensityProfile<T>,
    phi: impl Fn(f64) -> f64,
    psi: &C,
    table: &FugacityTable<T>,
) -> Result<f64> {
    let predicted = local_equilibrium_integral(solution, &phi, psi, table)?;
    Ok((empirical_average(config, &phi, psi)? - predicted).abs())
}

/// `(1/N) sum_j phi(j/N) psi(tau_j omega)`.
pub fn empirical_average<C: Cylinder + ?Sized>(
    config: &Configuration,
    phi: impl Fn(f64) -> f64,
    psi: &C,
) -> Result<f64> {
    let n = config.sites();
    let r = psi.range();
    if r == 0 || r > n {
        return Err(ZrpError::Input(format!("cylinder range {r} does not fit {n} sites")));
    }
    let occ = config.occupancy();
    let mut window = vec![0u32; 2 * r];
    let mut acc = 0.0;
    for j in 0..n {
        for s in 0..r {
            let site = (j + s) % n;
            window[2 * s] = occ[2 * site];
            window[2 * s + 1] = occ[2 * site + 1];
        }
        acc += phi(j as f64 / n as f64) * psi.eval(&window);
    }
    Ok(acc / n as f64)
}

/// `int phi(x) E_{rho(x)}[psi] dx` over the nodes of `solution`.
pub fn local_equilibrium_integral<T: Scalar, C: Cylinder + ?Sized>(
    solution: &DensityProfile<T>,
    phi: impl Fn(f64) -> f64,
    psi: &C,
    table: &FugacityTable<T>,
) -> Result<f64> {
    let m = solution.len();
    if m == 0 {
        return Err(ZrpError::Input("empty density profile".into()));
    }
    let mut acc = 0.0;
    for (i, &rho) in solution.values.iter().enumerate() {
        let marginal = MarginalSampler::new(table, rho)?;
        acc += phi(i as f64 / m as f64) * psi.expectation(&marginal);
    }
    Ok(acc / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{decompose_tiles, Environment, FigureType::*};
    use crate::measures::sample_product_configuration;
    use crate::pde::InitialProfile;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn geometric() -> &'static FugacityTable<f64> {
        static TABLE: OnceLock<FugacityTable<f64>> = OnceLock::new();
        TABLE.get_or_init(|| FugacityTable::new(JumpRate::const1()).unwrap())
    }

    fn poisson() -> &'static FugacityTable<f64> {
        static TABLE: OnceLock<FugacityTable<f64>> = OnceLock::new();
        TABLE.get_or_init(|| FugacityTable::new(JumpRate::linear()).unwrap())
    }

    fn stationary(env: &Environment, rho: f64, seed: u64) -> Configuration {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_product_configuration(env, &vec![rho; env.n()], geometric(), &mut rng).unwrap()
    }

    #[test]
    fn constants_pass_through_windows() {
        let env = Environment::generate(300, 0.4, 2).unwrap();
        let d = decompose_tiles(&env).unwrap();
        let c = Configuration::constant(300, 3);
        let avg = tile_averages::<f64>(&c, &d, &JumpRate::linear(), 4).unwrap();
        let windows = d.window_vertex_counts(4).unwrap();
        for j in 0..d.t_n {
            assert!((avg.omega_l[j] - 3.0).abs() < 1e-14);
            assert!((avg.g_l[j] - 3.0).abs() < 1e-14);
            assert!((avg.omega_bar_l[j] - 3.0 * windows[j] as f64 / 9.0).abs() < 1e-13);
        }
    }

    #[test]
    fn homogeneous_tiles_hold_two_vertices() {
        let env = Environment::homogeneous(40);
        let d = decompose_tiles(&env).unwrap();
        let c = stationary(&env, 1.0, 1);
        let avg = tile_averages::<f64>(&c, &d, &JumpRate::const1(), 3).unwrap();
        for j in 0..d.t_n {
            assert_eq!(avg.omega_bar_l[j], 2.0 * avg.omega_l[j]);
        }
    }

    #[test]
    fn tile_density_over_kappa_is_twice_vertex_density() {
        let env = Environment::generate(100_000, 0.4, 9).unwrap();
        let d = decompose_tiles(&env).unwrap();
        let c = stationary(&env, 1.0, 4);
        let avg = tile_averages::<f64>(&c, &d, &JumpRate::const1(), 64).unwrap();
        let mean_gap = avg
            .omega_bar_l
            .iter()
            .zip(&avg.omega_l)
            .map(|(b, w)| (b / d.kappa_n - 2.0 * w).abs())
            .sum::<f64>()
            / d.t_n as f64;
        // the gap is C(l)-sized times the density plus window noise
        assert!(mean_gap < 0.1, "{mean_gap}");
    }

    #[test]
    fn one_block_closed_forms() {
        let env = Environment::generate(200, 0.3, 5).unwrap();
        let d = decompose_tiles(&env).unwrap();
        let table = geometric();
        assert_eq!(
            one_block_statistic(&Configuration::empty(200), &d, &table, 2).unwrap(),
            0.0
        );
        assert_eq!(
            section5_statistic(&Configuration::empty(200), &d, &table, 2).unwrap(),
            0.0
        );
        for c in [1u32, 2, 5] {
            let s = one_block_statistic(&Configuration::constant(200, c), &d, &table, 2).unwrap();
            let want = 1.0 - f64::from(c) / (1.0 + f64::from(c));
            assert!((s - want).abs() < 1e-9, "{s} vs {want}");
        }
    }

    #[test]
    fn one_block_decreases_with_window() {
        let env = Environment::homogeneous(10_000);
        let d = decompose_tiles(&env).unwrap();
        let c = stationary(&env, 1.0, 6);
        let table = geometric();
        let stats: Vec<f64> = [1, 2, 4, 8, 16]
            .iter()
            .map(|&l| one_block_statistic(&c, &d, &table, l).unwrap())
            .collect();
        assert!(stats.windows(2).all(|w| w[1] < w[0]), "{stats:?}");
        assert!(stats[4] < 0.05, "{stats:?}");
    }

    #[test]
    fn window_errors() {
        let d = decompose_tiles(&Environment::homogeneous(5)).unwrap();
        let c = Configuration::constant(5, 1);
        assert!(matches!(
            one_block_statistic(&c, &d, geometric(), 3),
            Err(ZrpError::InvalidWindow(_))
        ));
        assert!(matches!(c_of_l::<f64>(&d, 3), Err(ZrpError::InvalidWindow(_))));
        assert!(c_of_l::<f64>(&d, 2).is_ok());
    }

    #[test]
    fn c_of_l_vanishes_on_homogeneous_tiles() {
        for env in [Environment::homogeneous(50), Environment::all_pairs(25)] {
            let d = decompose_tiles(&env).unwrap();
            for l in 0..10 {
                assert_eq!(c_of_l::<f64>(&d, l).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn f_closed_form_for_linear_flux() {
        let table = poisson();
        let a = 0.5;
        let sol = InitialProfile::Sine {
            mean: 1.0,
            amplitude: a,
        }
        .grid::<f64>(1024);
        for kappa in [1.0, 1.7] {
            let f = eval_f(&sol, table, kappa, 0.25).unwrap();
            let want = -4.0 * std::f64::consts::PI.powi(2) * kappa * a / (1.0 + a);
            assert!((f - want).abs() < 1e-4, "{f} vs {want}");
        }
        let flat = DensityProfile::from_fn(64, |_| 2.0);
        assert!(f_profile(&flat, table, 1.0)
            .unwrap()
            .values
            .iter()
            .all(|v| v.abs() < 1e-9));
        let touching = InitialProfile::Sine {
            mean: 0.5,
            amplitude: 0.5,
        }
        .grid::<f64>(64);
        assert!(matches!(
            f_profile(&touching, table, 1.0),
            Err(ZrpError::Singularity(_))
        ));
    }

    #[test]
    fn f_is_second_order() {
        let table = geometric();
        let p = InitialProfile::Sine {
            mean: 1.0,
            amplitude: 0.5,
        };
        let at = |m: usize| eval_f(&p.grid::<f64>(m), &table, 1.5, 0.125).unwrap();
        let (a, b, c) = (at(128), at(256), at(512));
        let order = ((a - b) / (b - c)).abs().log2();
        assert!((order - 2.0).abs() < 0.1, "{order}");
    }

    #[test]
    fn g_relations() {
        let table = geometric();
        let (kappa, gamma) = (1.5, 0.05);
        assert_eq!(eval_g(&table, kappa, gamma, 3.0, 1.0, 1.0).unwrap(), 0.0);
        let bound = GBound::new(&table, kappa, gamma, 40.0, 1.5).unwrap();
        for i in 0..=100 {
            let lambda = 0.2 * i as f64;
            for rho in [0.5, 1.0, 1.5] {
                let g = eval_g(&table, kappa, gamma, 40.0, rho, lambda).unwrap();
                let m = crate::measures::curvature_gap(&table, kappa, lambda, rho).unwrap();
                assert!((g - gamma * 40.0 * m).abs() < 1e-13);
                assert!(g.abs() <= bound.at(lambda), "lambda {lambda} rho {rho}");
            }
        }
    }

    #[test]
    fn empirical_profile_bookkeeping() {
        let c = Configuration::constant(64, 3);
        let p = empirical_profile(&[c], 8).unwrap();
        assert_eq!(p.means, vec![3.0; 8]);
        assert_eq!(p.pooled_se(), 0.0);
        assert!(empirical_profile(&[], 4).is_err());
        assert!(empirical_profile(&[Configuration::constant(10, 1)], 4).is_err());
        assert_eq!(default_block_size(64), 4);
        assert_eq!(default_block_size(1024), 16);
    }

    #[test]
    fn sampled_profile_within_three_pooled_errors() {
        let table = geometric();
        let env = Environment::homogeneous(256);
        let p = InitialProfile::Sine {
            mean: 1.0,
            amplitude: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let snaps: Vec<Configuration> = (0..100)
            .map(|_| sample_product_configuration(&env, &p.lattice::<f64>(256), &table, &mut rng).unwrap())
            .collect();
        let emp = empirical_profile(&snaps, 16).unwrap();
        // the sampled lattice profile evaluated at the sites of each block
        let predicted: Vec<f64> = (0..16)
            .map(|k| (0..16).map(|s| p.value((16 * k + s) as f64 / 256.0)).sum::<f64>() / 16.0)
            .collect();
        let report = compare_profiles(&emp, &predicted).unwrap();
        assert!(
            report.l1_error <= 3.0 * report.pooled_se,
            "{} vs {}",
            report.l1_error,
            report.pooled_se
        );
    }

    #[test]
    fn theorem1_density_identity() {
        let table = geometric();
        let env = Environment::homogeneous(128);
        let c = stationary(&env, 1.0, 3);
        let sol = DensityProfile::from_fn(64, |_| 1.0);
        let stat = theorem1_statistic(&c, &sol, |_| 1.0, &SiteDensity, &table).unwrap();
        let direct = (c.total() as f64 / 128.0 - 2.0).abs();
        assert!((stat - direct).abs() < 1e-12, "{stat} vs {direct}");
    }

    #[test]
    fn cylinder_expectations() {
        let table = geometric();
        let m = MarginalSampler::new(&table, 1.0).unwrap();
        assert!((SiteDensity.expectation(&m) - 2.0).abs() < 1e-12);
        assert!((UpperRate(JumpRate::const1()).expectation(&m) - 0.5).abs() < 1e-12);
        assert!((NeighbourOccupied.expectation(&m) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rate_cylinder_at_stationarity() {
        let table = geometric();
        let env = Environment::homogeneous(2000);
        let sol = DensityProfile::from_fn(16, |_| 1.0);
        let psi = UpperRate(JumpRate::const1());
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let signed: Vec<f64> = (0..50)
            .map(|_| {
                let c = sample_product_configuration(&env, &vec![1.0; 2000], &table, &mut rng).unwrap();
                empirical_average(&c, |_| 1.0, &psi).unwrap() - 0.5
            })
            .collect();
        let mean = signed.iter().sum::<f64>() / 50.0;
        let se = (signed.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / 49.0 / 50.0).sqrt();
        assert!(mean.abs() < 3.0 * se, "{mean} vs {se}");
        let stat = theorem1_statistic(&Configuration::constant(2000, 1), &sol, |_| 1.0, &psi, &table).unwrap();
        assert!((stat - 0.5).abs() < 1e-12);
    }

    #[test]
    fn relabeling_invariance() {
        let env = Environment::from_figures(vec![F1, F2, F3, F1, F1, F2, F3, F2, F3, F1, F1, F1]);
        let c = Configuration::from_occupancy((0..24).map(|i| (i * 7 % 5) as u32).collect());
        let table = geometric();
        let d = decompose_tiles(&env).unwrap();
        for shift in 0..12 {
            let d2 = decompose_tiles(&env.shifted(shift)).unwrap();
            let c2 = c.shifted(shift);
            for l in 0..3 {
                let a = one_block_statistic(&c, &d, &table, l).unwrap();
                let b = one_block_statistic(&c2, &d2, &table, l).unwrap();
                assert!((a - b).abs() < 1e-12);
                let a = c_of_l::<f64>(&d, l).unwrap();
                let b = c_of_l::<f64>(&d2, l).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn section5_is_twice_one_block(seed in 0u64..1000, l in 0usize..4, linear in any::<bool>()) {
            let env = Environment::generate(60, 0.4, seed).unwrap();
            let d = decompose_tiles(&env).unwrap();
            let table = if linear { poisson() } else { geometric() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = sample_product_configuration(&env, &vec![1.2; 60], &table, &mut rng).unwrap();
            let a = one_block_statistic(&c, &d, &table, l).unwrap();
            let b = section5_statistic(&c, &d, &table, l).unwrap();
            prop_assert!((b - 2.0 * a).abs() <= 1e-12 * (1.0 + b));
        }

        #[test]
        fn statistics_are_nonnegative(seed in 0u64..1000, l in 0usize..5) {
            let env = Environment::generate(80, 0.5, seed).unwrap();
            let d = decompose_tiles(&env).unwrap();
            let c = stationary(&env, 0.8, seed);
            prop_assert!(c_of_l::<f64>(&d, l).unwrap() >= 0.0);
            prop_assert!(one_block_statistic(&c, &d, geometric(), l).unwrap() >= 0.0);
            let avg = tile_averages::<f64>(&c, &d, &JumpRate::const1(), l).unwrap();
            prop_assert!(avg.omega_l.iter().chain(&avg.omega_bar_l).chain(&avg.g_l).all(|&v| v >= 0.0));
        }
    }
}
