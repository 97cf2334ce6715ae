use std::fmt;
use std::sync::Arc;

use crate::error::{Result, ZrpError};

type RateFn = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Const1,
    Linear,
    Custom(RateFn),
}

/// Jump rate `g(k)`: the rate at which a vertex holding `k` particles emits
/// one along each of its outgoing edges.
#[derive(Clone)]
pub struct JumpRate {
    name: String,
    kind: Kind,
    slg: bool,
    phi_star: f64,
}

impl fmt::Debug for JumpRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpRate")
            .field("name", &self.name)
            .field("slg", &self.slg)
            .field("phi_star", &self.phi_star)
            .finish()
    }
}

/// Probe point for the ratio-test estimate of the radius of convergence.
const RADIUS_PROBE: u64 = 1_000_000;

impl JumpRate {
    /// `g(k) = 1{k >= 1}`. Stationary marginals are geometric.
    pub fn const1() -> Self {
        JumpRate {
            name: "const1".into(),
            kind: Kind::Const1,
            slg: true,
            phi_star: 1.0,
        }
    }

    /// `g(k) = k`. Particles move independently; marginals are Poisson.
    pub fn linear() -> Self {
        JumpRate {
            name: "linear".into(),
            kind: Kind::Linear,
            slg: false,
            phi_star: f64::INFINITY,
        }
    }

    /// A user supplied rate. Without an explicit `phi_star` the radius of
    /// convergence of `Z` is bounded below by `g` at a large probe point,
    /// which is exact in the limit for nondecreasing `g`.
    pub fn custom<F>(name: &str, f: F, phi_star: Option<f64>, slg: bool) -> Result<Self>
    where
        F: Fn(u64) -> f64 + Send + Sync + 'static,
    {
        let f: RateFn = Arc::new(f);
        let phi_star = phi_star.unwrap_or_else(|| f(RADIUS_PROBE));
        let rate = JumpRate {
            name: name.into(),
            kind: Kind::Custom(f),
            slg,
            phi_star,
        };
        rate.check(10_000)?;
        if !(phi_star > 0.0) {
            return Err(ZrpError::InvalidParameter(format!(
                "radius bound for {name} must be positive, got {phi_star}"
            )));
        }
        Ok(rate)
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "const1" => Ok(Self::const1()),
            "linear" => Ok(Self::linear()),
            other => Err(ZrpError::InvalidParameter(format!(
                "unknown jump rate {other:?}, expected const1 or linear"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Whether `limsup g(k)/k = 0` is asserted for this rate.
    pub fn slg(&self) -> bool {
        self.slg
    }

    /// Bound on the radius of convergence of `Z(phi) = sum phi^k / g(k)!`.
    pub fn phi_star(&self) -> f64 {
        self.phi_star
    }

    #[inline]
    pub fn eval(&self, k: u64) -> f64 {
        match &self.kind {
            Kind::Const1 => f64::from(u8::from(k > 0)),
            Kind::Linear => k as f64,
            Kind::Custom(f) => {
                if k == 0 {
                    0.0
                } else {
                    f(k)
                }
            }
        }
    }

    /// Checks `g(0) = 0` and monotonicity on `[0, k_max]`.
    pub fn check(&self, k_max: u64) -> Result<()> {
        let g0 = match &self.kind {
            Kind::Custom(f) => f(0),
            _ => self.eval(0),
        };
        if g0 != 0.0 {
            return Err(ZrpError::InvalidParameter(format!(
                "{}: g(0) = {g0}, expected 0",
                self.name
            )));
        }
        let mut prev = 0.0;
        for k in 1..=k_max {
            let v = self.eval(k);
            if !(v >= prev) || !v.is_finite() {
                return Err(ZrpError::InvalidParameter(format!(
                    "{}: g not nondecreasing and finite at k = {k} ({prev} -> {v})",
                    self.name
                )));
            }
            prev = v;
        }
        if self.eval(1) <= 0.0 {
            return Err(ZrpError::InvalidParameter(format!(
                "{}: g(1) must be positive",
                self.name
            )));
        }
        Ok(())
    }

    /// `max g(k)/k` over `k` in `[k_min, k_max]`; tends to zero under the
    /// sublinear growth condition.
    pub fn growth_ratio(&self, k_min: u64, k_max: u64) -> f64 {
        (k_min.max(1)..=k_max)
            .map(|k| self.eval(k) / k as f64)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_rates() {
        let c = JumpRate::const1();
        assert_eq!((c.eval(0), c.eval(1), c.eval(40)), (0.0, 1.0, 1.0));
        let l = JumpRate::linear();
        assert_eq!((l.eval(0), l.eval(7)), (0.0, 7.0));
        c.check(1000).unwrap();
        l.check(1000).unwrap();
        assert!(c.slg() && !l.slg());
        assert!(JumpRate::from_name("cubic").is_err());
    }

    #[test]
    fn sublinear_growth_ratio() {
        let c = JumpRate::const1();
        assert!(c.growth_ratio(1000, 1_000_000) <= 1e-3);
        assert!(c.growth_ratio(999_999, 1_000_000) < 1.1e-6);
        assert_eq!(JumpRate::linear().growth_ratio(1000, 2000), 1.0);
    }

    #[test]
    fn custom_rates_are_checked() {
        let sqrt = JumpRate::custom("sqrt", |k| (k as f64).sqrt(), None, true).unwrap();
        assert_eq!(sqrt.phi_star(), 1000.0);
        assert!(JumpRate::custom("bad", |k| 1.0 / (k as f64 + 1.0), None, true).is_err());
        assert!(JumpRate::custom("offset", |k| k as f64 + 1.0, None, false).is_err());
    }
}
