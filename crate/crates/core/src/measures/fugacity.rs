//! Fugacity machinery: the normalising series `Z`, the density `R` at a given
//! fugacity and its inverse, the flux `Phi`.

use std::io::Write;

use serde::Serialize;

use super::JumpRate;
use crate::error::{Result, ZrpError};
use crate::scalar::Scalar;

const MAX_TERMS: u64 = 10_000_000;

/// Default upper end of the tabulated density range.
pub const DEFAULT_RHO_MAX: f64 = 50.0;

/// Number of interpolation nodes in a [`FugacityTable`].
pub const TABLE_NODES: usize = 4096;

/// Moments of the stationary marginal at fugacity `phi`: the normaliser
/// `Z(phi)`, the mean `R(phi)` and the variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesMoments<T> {
    pub z: T,
    pub mean: T,
    pub variance: T,
}

fn check_fugacity<T: Scalar>(g: &JumpRate, phi: T) -> Result<()> {
    let p = phi.as_f64();
    if !(p >= 0.0) {
        return Err(ZrpError::Domain(format!("fugacity must be nonnegative, got {p}")));
    }
    if p >= g.phi_star() {
        return Err(ZrpError::Divergence {
            phi: p,
            phi_star: g.phi_star(),
        });
    }
    Ok(())
}

/// Sums `phi^k / g(k)!` and its first two moments until the geometric tail
/// bound drops below `1e-17` of the partial sum.
pub fn series_moments<T: Scalar>(g: &JumpRate, phi: T) -> Result<SeriesMoments<T>> {
    check_fugacity(g, phi)?;
    let one = T::one();
    let two = T::of(2.0);
    let eps = T::of(1e-17).max(T::epsilon() * T::of(1e-2));
    let (mut s0, mut s1, mut s2) = (one, T::zero(), T::zero());
    let mut w = one;
    let mut k: u64 = 0;
    loop {
        let gk1 = T::of(g.eval(k + 1));
        let ratio = phi / gk1;
        if ratio < one {
            let kk = T::from_u64(k).unwrap_or_else(T::max_value);
            let q = one - ratio;
            let tail = w * (two * kk * kk * ratio / q + two * ratio * (one + ratio) / (q * q * q));
            if tail <= eps * s0 || w == T::zero() {
                break;
            }
        }
        k += 1;
        if k > MAX_TERMS {
            return Err(ZrpError::Solver(format!(
                "partition series at fugacity {} did not settle within {MAX_TERMS} terms",
                phi.as_f64()
            )));
        }
        w *= ratio;
        let kk = T::from_u64(k).unwrap_or_else(T::max_value);
        s0 += w;
        s1 += kk * w;
        s2 += kk * kk * w;
    }
    let mean = s1 / s0;
    let variance = (s2 / s0 - mean * mean).max(T::zero());
    Ok(SeriesMoments { z: s0, mean, variance })
}

/// `Z(phi) = sum_k phi^k / g(k)!`.
pub fn partition_function<T: Scalar>(g: &JumpRate, phi: T) -> Result<T> {
    Ok(series_moments(g, phi)?.z)
}

/// `R(phi)`, the mean occupation under the marginal at fugacity `phi`.
pub fn mean_density<T: Scalar>(g: &JumpRate, phi: T) -> Result<T> {
    Ok(series_moments(g, phi)?.mean)
}

/// Solves `R(phi) = rho` by safeguarded Newton iteration inside a bisection
/// bracket. `guess` seeds the iteration when it lies in the bracket.
fn invert_density<T: Scalar>(g: &JumpRate, rho: T, guess: Option<T>) -> Result<T> {
    if rho == T::zero() {
        return Ok(T::zero());
    }
    let one = T::one();
    let mut lo = T::zero();
    let mut hi;
    if g.phi_star().is_finite() {
        hi = T::of(g.phi_star());
    } else {
        hi = one;
        while series_moments(g, hi)?.mean < rho {
            lo = hi;
            hi = hi * T::of(2.0);
        }
    }
    let tol = T::of(1e-15).max(T::bisection_tol());
    let mut x = match guess {
        Some(x0) if x0 > lo && x0 < hi => x0,
        _ => (lo + hi) / T::of(2.0),
    };
    for _ in 0..400 {
        let m = series_moments(g, x)?;
        let f = m.mean - rho;
        if f == T::zero() {
            return Ok(x);
        }
        if f < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        // R'(phi) = Var / phi
        let slope = m.variance / x;
        let newton = x - f / slope;
        let next = if slope > T::zero() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) / T::of(2.0)
        };
        let step = (next - x).abs();
        x = next;
        if step <= tol * x || hi - lo <= tol * hi {
            return Ok(x);
        }
    }
    Err(ZrpError::Solver(format!(
        "density inversion at rho = {} did not converge",
        rho.as_f64()
    )))
}

/// Density-to-flux map `Phi = R^{-1}` with its tabulated interpolant.
///
/// Direct evaluations ([`flux`](Self::flux), [`flux_derivative`](Self::flux_derivative))
/// invert the series on demand; the `*_interp` variants use a cubic Hermite
/// interpolant on `TABLE_NODES` densities clustered near zero, for hot loops.
#[derive(Debug, Clone)]
pub struct FugacityTable<T> {
    g: JumpRate,
    rho_max: T,
    nodes: Vec<T>,
    phi: Vec<T>,
    dphi: Vec<T>,
}

impl<T: Scalar> FugacityTable<T> {
    pub fn new(g: JumpRate) -> Result<Self> {
        Self::with_rho_max(g, T::of(DEFAULT_RHO_MAX))
    }

    pub fn with_rho_max(g: JumpRate, rho_max: T) -> Result<Self> {
        if !(rho_max > T::zero()) {
            return Err(ZrpError::InvalidParameter("rho_max must be positive".into()));
        }
        g.check(1000)?;
        let last = T::of_usize(TABLE_NODES - 1);
        let mut nodes = Vec::with_capacity(TABLE_NODES);
        let mut phi = Vec::with_capacity(TABLE_NODES);
        let mut dphi = Vec::with_capacity(TABLE_NODES);
        let mut prev = None;
        for i in 0..TABLE_NODES {
            let u = T::of_usize(i) / last;
            let rho = if i + 1 == TABLE_NODES { rho_max } else { rho_max * u * u };
            let p = invert_density(&g, rho, prev).map_err(|e| match e {
                ZrpError::Divergence { .. } => ZrpError::Range {
                    value: rho.as_f64(),
                    lo: 0.0,
                    hi: rho.as_f64(),
                },
                other => other,
            })?;
            nodes.push(rho);
            phi.push(p);
            dphi.push(Self::derivative_at(&g, p)?);
            prev = Some(p);
        }
        Ok(FugacityTable {
            g,
            rho_max,
            nodes,
            phi,
            dphi,
        })
    }

    fn derivative_at(g: &JumpRate, phi: T) -> Result<T> {
        if phi == T::zero() {
            return Ok(T::of(g.eval(1)));
        }
        let m = series_moments(g, phi)?;
        Ok(phi / m.variance)
    }

    pub fn jump_rate(&self) -> &JumpRate {
        &self.g
    }

    pub fn rho_max(&self) -> T {
        self.rho_max
    }

    pub fn phi_star(&self) -> f64 {
        self.g.phi_star()
    }

    /// Largest fugacity reached by the table, `Phi(rho_max)`.
    pub fn phi_max(&self) -> T {
        *self.phi.last().expect("table has nodes")
    }

    pub fn check_density(&self, rho: T) -> Result<()> {
        if rho >= T::zero() && rho <= self.rho_max {
            Ok(())
        } else {
            Err(ZrpError::Range {
                value: rho.as_f64(),
                lo: 0.0,
                hi: self.rho_max.as_f64(),
            })
        }
    }

    pub fn partition(&self, phi: T) -> Result<T> {
        partition_function(&self.g, phi)
    }

    pub fn mean_density(&self, phi: T) -> Result<T> {
        mean_density(&self.g, phi)
    }

    pub fn moments(&self, phi: T) -> Result<SeriesMoments<T>> {
        series_moments(&self.g, phi)
    }

    /// `Phi(rho)` by direct inversion of `R`.
    pub fn flux(&self, rho: T) -> Result<T> {
        self.check_density(rho)?;
        let guess = self.flux_interp(rho);
        invert_density(&self.g, rho, Some(guess))
    }

    /// `Phi'(rho) = Phi / Var`, evaluated at the directly inverted fugacity.
    pub fn flux_derivative(&self, rho: T) -> Result<T> {
        let p = self.flux(rho)?;
        Self::derivative_at(&self.g, p)
    }

    /// `E[g(omega)] = Phi(rho)` restated: the expected jump rate at density `rho`.
    pub fn expected_rate(&self, rho: T) -> Result<T> {
        self.flux(rho)
    }

    #[inline]
    fn locate(&self, rho: T) -> (usize, T) {
        let last = TABLE_NODES - 1;
        let u = (rho / self.rho_max).max(T::zero()).sqrt() * T::of_usize(last);
        let i = u.floor().to_usize().unwrap_or(0).min(last - 1);
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        (i, (rho - a) / (b - a))
    }

    /// Interpolated `Phi(rho)`. Inputs outside `[0, rho_max]` are clamped.
    #[inline]
    pub fn flux_interp(&self, rho: T) -> T {
        let rho = rho.max(T::zero()).min(self.rho_max);
        let (i, s) = self.locate(rho);
        let h = self.nodes[i + 1] - self.nodes[i];
        let (s2, s3) = (s * s, s * s * s);
        let two = T::of(2.0);
        let three = T::of(3.0);
        let h00 = two * s3 - three * s2 + T::one();
        let h10 = s3 - two * s2 + s;
        let h01 = three * s2 - two * s3;
        let h11 = s3 - s2;
        h00 * self.phi[i] + h10 * h * self.dphi[i] + h01 * self.phi[i + 1] + h11 * h * self.dphi[i + 1]
    }

    /// Interpolated `Phi'(rho)` (derivative of the Hermite interpolant).
    #[inline]
    pub fn flux_derivative_interp(&self, rho: T) -> T {
        let rho = rho.max(T::zero()).min(self.rho_max);
        let (i, s) = self.locate(rho);
        let h = self.nodes[i + 1] - self.nodes[i];
        let s2 = s * s;
        let six = T::of(6.0);
        let d00 = six * s2 - six * s;
        let d10 = T::of(3.0) * s2 - T::of(4.0) * s + T::one();
        let d01 = -d00;
        let d11 = T::of(3.0) * s2 - T::of(2.0) * s;
        (d00 * self.phi[i] + d01 * self.phi[i + 1]) / h + d10 * self.dphi[i] + d11 * self.dphi[i + 1]
    }

    /// Largest tabulated `Phi'` on `[lo, hi]`, used for stability bounds.
    pub fn max_flux_derivative(&self, lo: T, hi: T) -> T {
        let mut best = self.flux_derivative_interp(lo).max(self.flux_derivative_interp(hi));
        for (r, d) in self.nodes.iter().zip(&self.dphi) {
            if *r >= lo && *r <= hi {
                best = best.max(*d);
            }
        }
        best
    }

    /// Audit rows `(phi, Z, R)` at every table node.
    pub fn rows(&self) -> Result<Vec<TableRow>> {
        self.phi
            .iter()
            .map(|&p| {
                let m = self.moments(p)?;
                Ok(TableRow {
                    phi: p.as_f64(),
                    z: m.z.as_f64(),
                    r: m.mean.as_f64(),
                })
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "phi,Z,R")?;
        for row in self.rows()? {
            writeln!(out, "{:.17e},{:.17e},{:.17e}", row.phi, row.z, row.r)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    pub phi: f64,
    pub z: f64,
    pub r: f64,
}
