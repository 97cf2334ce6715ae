use rand::Rng;

use super::FugacityTable;
use crate::dynamics::Configuration;
use crate::environment::Environment;
use crate::error::{Result, ZrpError};
use crate::scalar::Scalar;

/// Inverse-CDF sampler for the single-vertex marginal at density `rho`,
/// `P(k) = Phi(rho)^k / (Z(Phi(rho)) g(k)!)`.
#[derive(Debug, Clone)]
pub struct MarginalSampler {
    rho: f64,
    cdf: Vec<f64>,
}

impl MarginalSampler {
    pub fn new<T: Scalar>(table: &FugacityTable<T>, rho: T) -> Result<Self> {
        let phi = table.flux(rho)?.as_f64();
        let g = table.jump_rate();
        let mut weights = vec![1.0f64];
        let mut w = 1.0f64;
        let mut total = 1.0f64;
        let mut k = 0u64;
        while phi > 0.0 {
            k += 1;
            w *= phi / g.eval(k);
            if !w.is_finite() {
                return Err(ZrpError::Solver(format!(
                    "marginal weights overflow at rho = {}",
                    rho.as_f64()
                )));
            }
            weights.push(w);
            total += w;
            let ratio = phi / g.eval(k + 1);
            if ratio < 1.0 && w * ratio / (1.0 - ratio) < 1e-18 * total {
                break;
            }
            if k > 50_000_000 {
                return Err(ZrpError::Solver("marginal support too long to tabulate".into()));
            }
        }
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(MarginalSampler { rho: rho.as_f64(), cdf })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn probability(&self, k: usize) -> f64 {
        match k {
            0 => self.cdf.first().copied().unwrap_or(1.0),
            _ if k < self.cdf.len() => self.cdf[k] - self.cdf[k - 1],
            _ => 0.0,
        }
    }

    /// Probabilities `P(k)` for `k` up to the truncation point (tail below `1e-18`).
    pub fn pmf(&self) -> Vec<f64> {
        (0..self.cdf.len()).map(|k| self.probability(k)).collect()
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        // mass concentrates on small k, so a forward walk beats bisection
        let mut k = 0;
        while k < self.cdf.len() && self.cdf[k] <= u {
            k += 1;
        }
        k.min(self.cdf.len() - 1) as u32
    }
}

/// Draws one occupation from the marginal at density `rho`.
pub fn sample_marginal<T: Scalar, R: Rng + ?Sized>(table: &FugacityTable<T>, rho: T, rng: &mut R) -> Result<u32> {
    Ok(MarginalSampler::new(table, rho)?.sample(rng))
}

/// Product measure on the ladder whose two vertices at site `j` share the
/// density `profile[j]`. Samplers are built once and reused across draws.
#[derive(Debug, Clone)]
pub struct ProductSampler {
    per_site: Vec<usize>,
    samplers: Vec<MarginalSampler>,
}

impl ProductSampler {
    pub fn new<T: Scalar>(table: &FugacityTable<T>, profile: &[T]) -> Result<Self> {
        let mut samplers: Vec<MarginalSampler> = Vec::new();
        let mut per_site = Vec::with_capacity(profile.len());
        for &rho in profile {
            table.check_density(rho)?;
            let reuse = samplers.last().filter(|s| s.rho() == rho.as_f64()).is_some();
            if !reuse {
                samplers.push(MarginalSampler::new(table, rho)?);
            }
            per_site.push(samplers.len() - 1);
        }
        Ok(ProductSampler { per_site, samplers })
    }

    pub fn sites(&self) -> usize {
        self.per_site.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let mut occ = Vec::with_capacity(2 * self.per_site.len());
        for &s in &self.per_site {
            let sampler = &self.samplers[s];
            occ.push(sampler.sample(rng));
            occ.push(sampler.sample(rng));
        }
        Configuration::from_occupancy(occ)
    }
}

/// One draw from the product measure with site densities `profile`.
pub fn sample_product_configuration<T: Scalar, R: Rng + ?Sized>(
    env: &Environment,
    profile: &[T],
    table: &FugacityTable<T>,
    rng: &mut R,
) -> Result<Configuration> {
    if profile.len() != env.n() {
        return Err(ZrpError::Input(format!(
            "profile has {} sites, environment has {}",
            profile.len(),
            env.n()
        )));
    }
    Ok(ProductSampler::new(table, profile)?.sample(rng))
}
