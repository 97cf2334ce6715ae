//! Finite-difference solver for `d_t rho = kappa d_xx Phi(rho)` on the unit
//! torus, and the exact Fourier solution of the linear case.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZrpError};
use crate::measures::FugacityTable;
use crate::scalar::Scalar;

/// Grid function on the torus: `values[i]` is the density at `x_i = i / M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProfile<T> {
    pub values: Vec<T>,
    pub time: T,
}

impl<T: Scalar> DensityProfile<T> {
    pub fn new(values: Vec<T>, time: T) -> Self {
        DensityProfile { values, time }
    }

    /// Samples `f` at the `m` grid points.
    pub fn from_fn(m: usize, f: impl Fn(T) -> T) -> Self {
        let values = (0..m).map(|i| f(T::of_usize(i) / T::of_usize(m))).collect();
        DensityProfile {
            values,
            time: T::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dx(&self) -> T {
        T::one() / T::of_usize(self.len())
    }

    pub fn x(&self, i: usize) -> T {
        T::of_usize(i) * self.dx()
    }

    /// `sum rho_i dx`, the discrete mass (periodic trapezoid rule).
    pub fn mass(&self) -> T {
        self.values.iter().copied().fold(T::zero(), |a, b| a + b) * self.dx()
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Periodic linear interpolation at `x`.
    pub fn at(&self, x: T) -> T {
        let m = self.len();
        let s = (x - x.floor()) * T::of_usize(m);
        let i = s.floor().to_usize().unwrap_or(0).min(m - 1);
        let w = s - T::of_usize(i);
        self.values[i] * (T::one() - w) + self.values[(i + 1) % m] * w
    }

    /// Exact averages of the piecewise-linear interpolant over `blocks` equal
    /// cells `[k/B, (k+1)/B)`. Needs `blocks` to divide the grid size.
    pub fn block_means(&self, blocks: usize) -> Result<Vec<T>> {
        let m = self.len();
        if blocks == 0 || m % blocks != 0 {
            return Err(ZrpError::Input(format!(
                "{blocks} blocks do not tile a grid of {m} points"
            )));
        }
        let per = m / blocks;
        let half = T::of(0.5);
        Ok((0..blocks)
            .map(|k| {
                let a = k * per;
                let mut s = half * (self.values[a] + self.values[(a + per) % m]);
                for i in a + 1..a + per {
                    s += self.values[i];
                }
                s / T::of_usize(per)
            })
            .collect())
    }

    /// Integral of the periodic piecewise-linear interpolant over `[0, x]`, `x in [0, 1]`.
    fn primitive(&self, x: T) -> T {
        let m = self.len();
        let dx = self.dx();
        let s = x * T::of_usize(m);
        let i = s.floor().to_usize().unwrap_or(0).min(m);
        let half = T::of(0.5);
        let mut acc = T::zero();
        for k in 0..i.min(m) {
            acc += half * (self.values[k] + self.values[(k + 1) % m]);
        }
        if i < m {
            let w = s - T::of_usize(i);
            let (a, b) = (self.values[i], self.values[(i + 1) % m]);
            acc += w * a + half * w * w * (b - a);
        }
        acc * dx
    }

    /// Mean of the interpolant over `[a, b]` with `0 < b - a <= 1`; the
    /// interval may wrap around the torus.
    pub fn interval_mean(&self, a: T, b: T) -> T {
        let len = b - a;
        let shift = a.floor();
        let (a, b) = (a - shift, b - shift);
        let total = if b <= T::one() {
            self.primitive(b) - self.primitive(a)
        } else {
            self.primitive(T::one()) - self.primitive(a) + self.primitive(b - T::one())
        };
        total / len
    }

    /// `max_i |self_i - other_i|`; grids must match.
    pub fn max_norm_distance(&self, other: &Self) -> Result<T> {
        if self.len() != other.len() {
            return Err(ZrpError::Input(format!(
                "grids differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs())))
    }

    /// Restriction to a grid coarser by an integer factor (shared nodes only).
    pub fn restrict(&self, m: usize) -> Result<Self> {
        if m == 0 || self.len() % m != 0 {
            return Err(ZrpError::Input(format!("cannot restrict {} points to {m}", self.len())));
        }
        let step = self.len() / m;
        Ok(DensityProfile {
            values: self.values.iter().step_by(step).copied().collect(),
            time: self.time,
        })
    }
}

/// Initial density shapes used by the experiments: `const:c` or
/// `sine:a,b` for `a + b sin(2 pi x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialProfile {
    Const { value: f64 },
    Sine { mean: f64, amplitude: f64 },
}

impl InitialProfile {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            InitialProfile::Const { value } => value,
            InitialProfile::Sine { mean, amplitude } => mean + amplitude * (2.0 * std::f64::consts::PI * x).sin(),
        }
    }

    /// Bounds `(K1, K2)` of the profile.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            InitialProfile::Const { value } => (value, value),
            InitialProfile::Sine { mean, amplitude } => (mean - amplitude.abs(), mean + amplitude.abs()),
        }
    }

    /// Exact mean over `[a, b]`.
    pub fn interval_mean(&self, a: f64, b: f64) -> f64 {
        match *self {
            InitialProfile::Const { value } => value,
            InitialProfile::Sine { mean, amplitude } => {
                let w = 2.0 * std::f64::consts::PI;
                mean + amplitude * ((w * a).cos() - (w * b).cos()) / (w * (b - a))
            }
        }
    }

    /// The linear heat flow `d_t rho = kappa d_xx rho` applied to this
    /// profile: the sine mode decays by `exp(-4 pi^2 kappa t)`.
    pub fn heat_evolved(&self, kappa: f64, t: f64) -> Self {
        match *self {
            InitialProfile::Sine { mean, amplitude } => InitialProfile::Sine {
                mean,
                amplitude: amplitude * (-4.0 * std::f64::consts::PI.powi(2) * kappa * t).exp(),
            },
            c => c,
        }
    }

    pub fn grid<T: Scalar>(&self, m: usize) -> DensityProfile<T> {
        DensityProfile::from_fn(m, |x: T| T::of(self.value(x.as_f64())))
    }

    /// Per-site densities `rho0(j / n)` for a lattice of `n` sites.
    pub fn lattice<T: Scalar>(&self, n: usize) -> Vec<T> {
        (0..n).map(|j| T::of(self.value(j as f64 / n as f64))).collect()
    }

    /// Rejects profiles that leave `(0, rho_max]`.
    pub fn check<T: Scalar>(&self, table: &FugacityTable<T>) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !(lo > 0.0) || !lo.is_finite() || !hi.is_finite() {
            return Err(ZrpError::InvalidParameter(format!(
                "initial density must satisfy 0 < K1, got K1 = {lo}"
            )));
        }
        table.check_density(T::of(hi))
    }
}

impl fmt::Display for InitialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialProfile::Const { value } => write!(f, "const:{value}"),
            InitialProfile::Sine { mean, amplitude } => write!(f, "sine:{mean},{amplitude}"),
        }
    }
}

impl FromStr for InitialProfile {
    type Err = ZrpError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            ZrpError::Parse(format!(
                "initial profile '{s}': expected const:<c> or sine:<mean>,<amplitude>"
            ))
        };
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match (kind.trim(), nums.as_slice()) {
            ("const", [c]) => Ok(InitialProfile::Const { value: *c }),
            ("sine", [a, b]) => Ok(InitialProfile::Sine {
                mean: *a,
                amplitude: *b,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Forward Euler; stable for `dt <= dx^2 / (2 kappa max Phi')`.
    Explicit,
    /// Crank-Nicolson with Newton iterations on each step.
    Implicit,
}

/// Fraction of the stability bound used when the explicit step is chosen automatically.
pub const CFL_SAFETY: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PDEConfig<T> {
    pub kappa: T,
    pub m: usize,
    /// `None` picks `CFL_SAFETY` times the stability bound (explicit) or
    /// `dx` (implicit).
    pub dt: Option<T>,
    pub scheme: Scheme,
}

impl<T: Scalar> PDEConfig<T> {
    pub fn explicit(kappa: T, m: usize) -> Self {
        PDEConfig {
            kappa,
            m,
            dt: None,
            scheme: Scheme::Explicit,
        }
    }

    pub fn implicit(kappa: T, m: usize, dt: Option<T>) -> Self {
        PDEConfig {
            kappa,
            m,
            dt,
            scheme: Scheme::Implicit,
        }
    }
}

/// Stability bound `dx^2 / (2 kappa max Phi')` over the density range `[lo, hi]`.
pub fn cfl_bound<T: Scalar>(table: &FugacityTable<T>, kappa: T, m: usize, lo: T, hi: T) -> T {
    let dx = T::one() / T::of_usize(m);
    dx * dx / (T::of(2.0) * kappa * table.max_flux_derivative(lo, hi))
}

/// Evolves `rho0` to time `rho0.time + t`.
pub fn solve_pde<T: Scalar>(
    rho0: &DensityProfile<T>,
    table: &FugacityTable<T>,
    cfg: &PDEConfig<T>,
    t: T,
) -> Result<DensityProfile<T>> {
    let m = rho0.len();
    if m != cfg.m || m < 3 {
        return Err(ZrpError::Config(format!(
            "grid of {m} points does not match configured M = {} (need M >= 3)",
            cfg.m
        )));
    }
    if !(cfg.kappa > T::zero()) || !cfg.kappa.is_finite() {
        return Err(ZrpError::Config(format!("kappa must be positive, got {}", cfg.kappa)));
    }
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(ZrpError::Config(format!("horizon must be finite and >= 0, got {t}")));
    }
    let (lo, hi) = (rho0.min(), rho0.max());
    table.check_density(lo)?;
    table.check_density(hi)?;
    if t == T::zero() {
        return Ok(rho0.clone());
    }
    match cfg.scheme {
        Scheme::Explicit => explicit(rho0, table, cfg, t, lo, hi),
        Scheme::Implicit => crank_nicolson(rho0, table, cfg, t),
    }
}

fn laplacian_into<T: Scalar>(f: &[T], out: &mut [T]) {
    let m = f.len();
    for i in 0..m {
        let l = f[if i == 0 { m - 1 } else { i - 1 }];
        let r = f[if i + 1 == m { 0 } else { i + 1 }];
        out[i] = l - f[i] - f[i] + r;
    }
}

fn explicit<T: Scalar>(
    rho0: &DensityProfile<T>,
    table: &FugacityTable<T>,
    cfg: &PDEConfig<T>,
    t: T,
    lo: T,
    hi: T,
) -> Result<DensityProfile<T>> {
    let m = rho0.len();
    let bound = cfl_bound(table, cfg.kappa, m, lo, hi);
    let dt_max = match cfg.dt {
        Some(dt) if dt > bound => {
            return Err(ZrpError::Config(format!(
                "explicit step {dt} exceeds the stability bound {bound}"
            )))
        }
        Some(dt) if !(dt > T::zero()) => return Err(ZrpError::Config(format!("time step must be positive, got {dt}"))),
        Some(dt) => dt,
        None => bound * T::of(CFL_SAFETY),
    };
    let steps = (t / dt_max).ceil().to_usize().unwrap_or(usize::MAX).max(1);
    let dt = t / T::of_usize(steps);
    let dx = rho0.dx();
    let c = cfg.kappa * dt / (dx * dx);
    let mut rho = rho0.values.clone();
    let mut f = vec![T::zero(); m];
    let mut lap = vec![T::zero(); m];
    for _ in 0..steps {
        for (fi, &r) in f.iter_mut().zip(&rho) {
            *fi = table.flux_interp(r);
        }
        laplacian_into(&f, &mut lap);
        for (r, &d) in rho.iter_mut().zip(&lap) {
            *r += c * d;
        }
    }
    Ok(DensityProfile {
        values: rho,
        time: rho0.time + t,
    })
}

/// Solves the cyclic tridiagonal system with sub/super diagonal entries
/// `a[i]` (coefficient of `x[i-1]`), `c[i]` (of `x[i+1]`) and diagonal `b[i]`.
fn solve_cyclic_tridiagonal<T: Scalar>(a: &[T], b: &[T], c: &[T], d: &[T]) -> Option<Vec<T>> {
    let m = b.len();
    // Sherman-Morrison on the corner entries a[0] and c[m-1]
    let gamma = -b[0];
    let mut bb = b.to_vec();
    bb[0] -= gamma;
    bb[m - 1] -= c[m - 1] * a[0] / gamma;
    let x = thomas(a, &bb, c, d)?;
    let mut u = vec![T::zero(); m];
    u[0] = gamma;
    u[m - 1] = c[m - 1];
    let z = thomas(a, &bb, c, &u)?;
    let fact = (x[0] + a[0] * x[m - 1] / gamma) / (T::one() + z[0] + a[0] * z[m - 1] / gamma);
    Some(x.iter().zip(&z).map(|(&xi, &zi)| xi - fact * zi).collect())
}

fn thomas<T: Scalar>(a: &[T], b: &[T], c: &[T], d: &[T]) -> Option<Vec<T>> {
    let m = b.len();
    let mut cp = vec![T::zero(); m];
    let mut dp = vec![T::zero(); m];
    if b[0] == T::zero() {
        return None;
    }
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..m {
        let den = b[i] - a[i] * cp[i - 1];
        if den == T::zero() || !den.is_finite() {
            return None;
        }
        cp[i] = c[i] / den;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = dp;
    for i in (0..m - 1).rev() {
        let next = x[i + 1];
        x[i] -= cp[i] * next;
    }
    Some(x)
}

const NEWTON_MAX_ITER: usize = 50;

fn crank_nicolson<T: Scalar>(
    rho0: &DensityProfile<T>,
    table: &FugacityTable<T>,
    cfg: &PDEConfig<T>,
    t: T,
) -> Result<DensityProfile<T>> {
    let m = rho0.len();
    let dx = rho0.dx();
    let dt_max = match cfg.dt {
        Some(dt) if !(dt > T::zero()) => return Err(ZrpError::Config(format!("time step must be positive, got {dt}"))),
        Some(dt) => dt,
        None => dx,
    };
    let steps = (t / dt_max).ceil().to_usize().unwrap_or(usize::MAX).max(1);
    let dt = t / T::of_usize(steps);
    let c = cfg.kappa * dt / (T::of(2.0) * dx * dx);
    let tol = T::of(1e-13).max(T::epsilon() * T::of(64.0));

    let mut rho = rho0.values.clone();
    let mut f = vec![T::zero(); m];
    let mut lap = vec![T::zero(); m];
    let mut rhs = vec![T::zero(); m];
    for step in 0..steps {
        // rhs = rho^n + c L Phi(rho^n)
        for (fi, &r) in f.iter_mut().zip(&rho) {
            *fi = table.flux_interp(r);
        }
        laplacian_into(&f, &mut lap);
        for i in 0..m {
            rhs[i] = rho[i] + c * lap[i];
        }
        let mut next = rho.clone();
        let mut converged = false;
        let mut last_norm = T::infinity();
        for _ in 0..NEWTON_MAX_ITER {
            for (fi, &r) in f.iter_mut().zip(&next) {
                *fi = table.flux_interp(r);
            }
            laplacian_into(&f, &mut lap);
            let residual: Vec<T> = (0..m).map(|i| next[i] - c * lap[i] - rhs[i]).collect();
            last_norm = residual.iter().fold(T::zero(), |a, r| a.max(r.abs()));
            if last_norm <= tol * (T::one() + rhs.iter().fold(T::zero(), |a, r| a.max(r.abs()))) {
                converged = true;
                break;
            }
            // J = I - c L diag(Phi'(next))
            let dphi: Vec<T> = next.iter().map(|&r| table.flux_derivative_interp(r)).collect();
            let a: Vec<T> = (0..m).map(|i| -c * dphi[(i + m - 1) % m]).collect();
            let b: Vec<T> = (0..m).map(|i| T::one() + T::of(2.0) * c * dphi[i]).collect();
            let cc: Vec<T> = (0..m).map(|i| -c * dphi[(i + 1) % m]).collect();
            let delta = solve_cyclic_tridiagonal(&a, &b, &cc, &residual)
                .ok_or_else(|| ZrpError::Solver(format!("singular Newton system at step {step}")))?;
            for (x, d) in next.iter_mut().zip(delta) {
                *x -= d;
            }
        }
        if !converged {
            return Err(ZrpError::Solver(format!(
                "Newton did not converge at step {step} of {steps} (dt = {dt}): residual {last_norm} after {NEWTON_MAX_ITER} iterations"
            )));
        }
        rho = next;
    }
    Ok(DensityProfile {
        values: rho,
        time: rho0.time + t,
    })
}

fn is_identity<T: Scalar>(table: &FugacityTable<T>) -> bool {
    [0.25, 1.0, 3.0, 10.0].iter().all(|&r| {
        let r = T::of(r).min(table.rho_max());
        table
            .flux(r)
            .map(|p| (p - r).abs() <= T::of(1e-8) * (T::one() + r))
            .unwrap_or(false)
    })
}

/// Exact solution of `d_t rho = kappa d_xx rho` started from the grid data of
/// `rho0`, evolving each discrete Fourier mode by `exp(-4 pi^2 k^2 kappa t)`.
///
/// Refuses tables whose `Phi` is not the identity.
pub fn exact_linear_solution<T: Scalar>(
    rho0: &DensityProfile<T>,
    table: &FugacityTable<T>,
    kappa: T,
    t: T,
) -> Result<DensityProfile<T>> {
    if !is_identity(table) {
        return Err(ZrpError::Misuse(format!(
            "the Fourier solution needs Phi = id, but the table is for g = {}",
            table.jump_rate().name()
        )));
    }
    let m = rho0.len();
    let two_pi = T::PI() * T::of(2.0);
    let twiddle: Vec<(T, T)> = (0..m)
        .map(|j| {
            let a = two_pi * T::of_usize(j) / T::of_usize(m);
            (a.cos(), a.sin())
        })
        .collect();
    let mut out = vec![T::zero(); m];
    for k in 0..m {
        let (mut re, mut im) = (T::zero(), T::zero());
        for (j, &v) in rho0.values.iter().enumerate() {
            let (c, s) = twiddle[(j * k) % m];
            re += v * c;
            im -= v * s;
        }
        // symmetric wavenumber; the Nyquist mode decays with |k| = m/2
        let kk = if 2 * k <= m { k } else { m - k };
        let decay = (-two_pi * two_pi * T::of_usize(kk * kk) * kappa * t).exp();
        let (re, im) = (re * decay, im * decay);
        for (j, o) in out.iter_mut().enumerate() {
            let (c, s) = twiddle[(j * k) % m];
            *o += re * c - im * s;
        }
    }
    let scale = T::one() / T::of_usize(m);
    Ok(DensityProfile {
        values: out.into_iter().map(|v| v * scale).collect(),
        time: rho0.time + t,
    })
}

/// Observed order `log2(|u_1 - u_2| / |u_2 - u_3|)` from three solutions on
/// grids `m, 2m, 4m`, compared at the coarse nodes.
pub fn self_convergence_order<T: Scalar>(
    rho0: InitialProfile,
    table: &FugacityTable<T>,
    kappa: T,
    t: T,
    m: usize,
) -> Result<T> {
    let solve = |mm: usize| solve_pde(&rho0.grid::<T>(mm), table, &PDEConfig::explicit(kappa, mm), t);
    let (a, b, c) = (solve(m)?, solve(2 * m)?, solve(4 * m)?);
    let e1 = a.max_norm_distance(&b.restrict(m)?)?;
    let e2 = b.restrict(m)?.max_norm_distance(&c.restrict(m)?)?;
    Ok((e1 / e2).log2())
}
