//! Rate function of i.i.d. marginals and the Bregman-type gap that the
//! entropy estimate must dominate.

use super::FugacityTable;
use crate::error::{Result, ZrpError};
use crate::scalar::Scalar;

/// `J_rho(lambda) = sup_theta [theta*lambda - log E_rho exp(theta*omega)]`.
///
/// The log-moment generating function is `log Z(Phi(rho) e^theta) - log Z(Phi(rho))`
/// and its derivative is `R(Phi(rho) e^theta)`, so the maximiser solves
/// `R(Phi(rho) e^theta) = lambda`, i.e. `theta = log(Phi(lambda) / Phi(rho))`,
/// found by the table's Newton inversion. `lambda < 0` is unreachable and
/// returns `+inf`; `lambda = 0` is the boundary value `log Z(Phi(rho))`.
pub fn rate_function<T: Scalar>(table: &FugacityTable<T>, rho: T, lambda: T) -> Result<T> {
    table.check_density(rho)?;
    if lambda < T::zero() {
        return Ok(T::infinity());
    }
    if lambda > table.rho_max() {
        return Err(ZrpError::Range {
            value: lambda.as_f64(),
            lo: 0.0,
            hi: table.rho_max().as_f64(),
        });
    }
    if lambda == rho {
        return Ok(T::zero());
    }
    let phi_rho = table.flux(rho)?;
    let log_z_rho = table.partition(phi_rho)?.ln();
    if lambda == T::zero() {
        return Ok(log_z_rho);
    }
    if rho == T::zero() {
        // point mass at zero: every positive mean is unreachable
        return Ok(T::infinity());
    }
    let phi_lambda = table.flux(lambda)?;
    Ok(legendre_value(
        lambda,
        phi_lambda,
        phi_rho,
        table.partition(phi_lambda)?.ln(),
        log_z_rho,
    ))
}

#[inline]
fn legendre_value<T: Scalar>(lambda: T, phi_lambda: T, phi_rho: T, log_z_lambda: T, log_z_rho: T) -> T {
    let theta = (phi_lambda / phi_rho).ln();
    (theta * lambda - log_z_lambda + log_z_rho).max(T::zero())
}

/// `M(lambda, rho) = 2 kappa {Phi(lambda) - Phi(rho) - (lambda - rho) Phi'(rho)}`.
pub fn curvature_gap<T: Scalar>(table: &FugacityTable<T>, kappa: T, lambda: T, rho: T) -> Result<T> {
    let two = T::of(2.0);
    Ok(two * kappa * (table.flux(lambda)? - table.flux(rho)? - (lambda - rho) * table.flux_derivative(rho)?))
}

/// Precomputed grid for `max_{rho, lambda} gamma |F M(lambda, rho)| - J_rho(lambda)`,
/// so that a search over `gamma` reuses the fugacity inversions.
#[derive(Debug, Clone)]
pub struct EntropyBoundGrid<T> {
    f_bound: T,
    /// `|M(lambda, rho)|` and `J_rho(lambda)` for every grid pair.
    pairs: Vec<(T, T)>,
}

impl<T: Scalar> EntropyBoundGrid<T> {
    pub fn new(table: &FugacityTable<T>, kappa: T, f_bound: T, rho_grid: &[T], lambda_grid: &[T]) -> Result<Self> {
        if rho_grid.is_empty() || lambda_grid.is_empty() {
            return Err(ZrpError::Input("empty grid".into()));
        }
        let two = T::of(2.0);
        struct Point<T> {
            x: T,
            phi: T,
            log_z: T,
        }
        let point = |x: T| -> Result<Point<T>> {
            let phi = table.flux(x)?;
            Ok(Point {
                x,
                phi,
                log_z: table.partition(phi)?.ln(),
            })
        };
        let lambdas = lambda_grid.iter().map(|&x| point(x)).collect::<Result<Vec<_>>>()?;
        let mut pairs = Vec::with_capacity(rho_grid.len() * lambda_grid.len());
        for &rho in rho_grid {
            let r = point(rho)?;
            let dphi = table.flux_derivative(rho)?;
            for l in &lambdas {
                let m = two * kappa * (l.phi - r.phi - (l.x - r.x) * dphi);
                let j = if l.x == r.x {
                    T::zero()
                } else if l.x == T::zero() {
                    r.log_z
                } else {
                    legendre_value(l.x, l.phi, r.phi, l.log_z, r.log_z)
                };
                pairs.push((m.abs(), j));
            }
        }
        Ok(EntropyBoundGrid { f_bound, pairs })
    }

    /// Grid maximum of `gamma |F M| - J`; nonpositive certifies the bound.
    pub fn worst_case(&self, gamma: T) -> T {
        let scale = gamma * self.f_bound.abs();
        self.pairs
            .iter()
            .map(|&(m, j)| scale * m - j)
            .fold(T::neg_infinity(), T::max)
    }

    /// Smallest `J` over pairs with `lambda != rho`, the `gamma -> 0` limit of `-worst_case`.
    pub fn min_rate(&self) -> T {
        self.pairs
            .iter()
            .filter(|(_, j)| *j > T::zero())
            .map(|&(_, j)| j)
            .fold(T::infinity(), T::min)
    }
}

/// Worst case of `gamma |F_bound M(lambda, rho)| - J_rho(lambda)` over the grids.
pub fn proposition4_check<T: Scalar>(
    table: &FugacityTable<T>,
    kappa: T,
    f_bound: T,
    gamma: T,
    rho_grid: &[T],
    lambda_grid: &[T],
) -> Result<T> {
    if !(gamma > T::zero()) {
        return Err(ZrpError::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    Ok(EntropyBoundGrid::new(table, kappa, f_bound, rho_grid, lambda_grid)?.worst_case(gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::JumpRate;
    use approx::assert_relative_eq;

    /// Golden-section maximisation of `theta*lambda - Lambda(theta)`, with the
    /// log-MGF supplied in closed form.
    fn legendre_oracle(lambda: f64, log_mgf: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let f = |t: f64| t * lambda - log_mgf(t);
        let (mut a, mut b) = (lo, hi);
        for _ in 0..300 {
            let c = b - inv_phi * (b - a);
            let d = a + inv_phi * (b - a);
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        f(0.5 * (a + b))
    }

    fn geometric_log_mgf(rho: f64) -> impl Fn(f64) -> f64 {
        let p = rho / (1.0 + rho);
        move |t: f64| ((1.0 - p) / (1.0 - p * t.exp())).ln()
    }

    #[test]
    fn geometric_rate_matches_legendre_oracle() {
        let table = FugacityTable::<f64>::new(JumpRate::const1()).unwrap();
        // boundary of the exponential moments: theta < log(2) at rho = 1
        let oracle = legendre_oracle(2.0, geometric_log_mgf(1.0), -30.0, 2f64.ln() - 1e-12);
        let closed = 2.0 * (4.0f64 / 3.0).ln() + (2.0f64 / 3.0).ln();
        assert_relative_eq!(oracle, closed, epsilon = 1e-9);
        let j = rate_function(&table, 1.0, 2.0).unwrap();
        assert!((j - oracle).abs() <= 1e-8, "{j} vs {oracle}");
        for (rho, lambda) in [(0.5, 0.1), (1.5, 4.0), (1.0, 0.3), (0.8, 12.0)] {
            let hi = (1.0 + rho) / rho;
            let oracle = legendre_oracle(lambda, geometric_log_mgf(rho), -60.0, hi.ln() - 1e-12);
            let j = rate_function(&table, rho, lambda).unwrap();
            assert!((j - oracle).abs() <= 1e-8, "rho {rho} lambda {lambda}: {j} vs {oracle}");
        }
    }

    #[test]
    fn poisson_rate_closed_form() {
        let table = FugacityTable::<f64>::new(JumpRate::linear()).unwrap();
        for (rho, lambda) in [(1.0f64, 2.0f64), (2.0, 0.5), (0.7, 9.0)] {
            let expect = lambda * (lambda / rho).ln() - lambda + rho;
            assert_relative_eq!(rate_function(&table, rho, lambda).unwrap(), expect, max_relative = 1e-9);
        }
        // J(0) = -log P(omega = 0) = rho
        assert_relative_eq!(rate_function(&table, 1.3, 0.0).unwrap(), 1.3, max_relative = 1e-12);
    }

    #[test]
    fn rate_vanishes_at_mean_and_is_convex() {
        let table = FugacityTable::<f64>::new(JumpRate::const1()).unwrap();
        for rho in [0.3, 1.0, 2.5] {
            assert_eq!(rate_function(&table, rho, rho).unwrap(), 0.0);
            let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
            let j: Vec<f64> = grid.iter().map(|&l| rate_function(&table, rho, l).unwrap()).collect();
            for w in j.windows(3) {
                assert!(w[1] <= 0.5 * (w[0] + w[2]) + 1e-12);
            }
            assert!(j.iter().all(|&v| v >= 0.0));
        }
        assert!(rate_function(&table, 1.0, -0.5).unwrap().is_infinite());
    }

    #[test]
    fn curvature_gap_values() {
        let c = FugacityTable::<f64>::new(JumpRate::const1()).unwrap();
        let l = FugacityTable::<f64>::new(JumpRate::linear()).unwrap();
        assert_eq!(curvature_gap(&c, 1.5, 0.8, 0.8).unwrap(), 0.0);
        assert_relative_eq!(curvature_gap(&c, 1.0, 2.0, 1.0).unwrap(), -1.0 / 6.0, epsilon = 1e-10);
        for (a, b) in [(0.1, 3.0), (5.0, 1.0), (2.0, 2.5)] {
            assert!(curvature_gap(&l, 1.3, a, b).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn linear_rates_certify_every_gamma() {
        let l = FugacityTable::<f64>::new(JumpRate::linear()).unwrap();
        let rhos: Vec<f64> = (0..=10).map(|i| 0.5 + 0.1 * i as f64).collect();
        let lambdas: Vec<f64> = (1..=100).map(|i| 0.5 * i as f64).collect();
        for gamma in [1e-3, 1.0, 100.0] {
            assert!(proposition4_check(&l, 1.0, 20.0, gamma, &rhos, &lambdas).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn small_gamma_limit_is_minus_min_rate() {
        let c = FugacityTable::<f64>::new(JumpRate::const1()).unwrap();
        let rhos = [0.5, 1.0, 1.5];
        let lambdas: Vec<f64> = (1..=50).map(|i| 0.37 * i as f64).collect();
        let grid = EntropyBoundGrid::new(&c, 1.5, 10.0, &rhos, &lambdas).unwrap();
        let mut prev = f64::INFINITY;
        for gamma in [1.0, 0.1, 0.01, 1e-4, 1e-8] {
            let w = grid.worst_case(gamma);
            assert!(w <= prev);
            prev = w;
        }
        assert_relative_eq!(prev, -grid.min_rate(), max_relative = 1e-4);
        assert!(proposition4_check(&c, 1.5, 10.0, 0.0, &rhos, &lambdas).is_err());
    }
}
