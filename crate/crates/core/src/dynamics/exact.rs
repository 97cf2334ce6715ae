//! Exact generator toolkit for tiny instances: every configuration with a
//! fixed particle number is enumerated and the generator is stored sparsely.

use std::collections::HashMap;

use crate::environment::{build_edges, Environment};
use crate::error::{Result, ZrpError};
use crate::measures::JumpRate;
use crate::scalar::Scalar;

/// Largest state space [`ExactModel::build`] will enumerate.
pub const STATE_LIMIT: u128 = 1_000_000;

/// Uniformization chunks keep `rate * dt` below this so that `exp(-rate * dt)`
/// stays comfortably inside the normal range.
const CHUNK_EXPONENT: f64 = 30.0;

/// `C(k + v - 1, k)`, the number of ways to put `k` particles on `v` vertices.
pub fn state_count(vertices: usize, k: u32) -> u128 {
    if vertices == 0 {
        return u128::from(k == 0);
    }
    let mut c: u128 = 1;
    // C(k+v-1, k) = prod_{i=1..k} (v-1+i)/i, exact at every step
    for i in 1..=u128::from(k) {
        c = match c.checked_mul(vertices as u128 - 1 + i) {
            Some(x) => x / i,
            None => return u128::MAX,
        };
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Transition<T> {
    target: usize,
    rate: T,
}

/// Sparse generator of the process restricted to `K` particles on `2n` vertices.
#[derive(Debug, Clone)]
pub struct ExactModel<T> {
    vertices: usize,
    particles: u32,
    states: Vec<u32>,
    index: HashMap<Vec<u32>, usize>,
    row_start: Vec<usize>,
    transitions: Vec<Transition<T>>,
    exit: Vec<T>,
    log_weight: Vec<T>,
    rates: JumpRate,
}

/// Convenience wrapper around [`ExactModel::build`].
pub fn build_exact_model<T: Scalar>(env: &Environment, g: &JumpRate, k: u32) -> Result<ExactModel<T>> {
    ExactModel::build(env, g, k)
}

fn compositions(vertices: usize, k: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; vertices];
    fn rec(pos: usize, left: u32, cur: &mut [u32], out: &mut Vec<u32>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.extend_from_slice(cur);
            return;
        }
        for take in (0..=left).rev() {
            cur[pos] = take;
            rec(pos + 1, left - take, cur, out);
        }
    }
    rec(0, k, &mut cur, &mut out);
    out
}

impl<T: Scalar> ExactModel<T> {
    pub fn build(env: &Environment, g: &JumpRate, k: u32) -> Result<Self> {
        let edges = build_edges(env)?;
        let vertices = env.vertex_count();
        let count = state_count(vertices, k);
        if count > STATE_LIMIT {
            return Err(ZrpError::StateSpace {
                states: count,
                limit: STATE_LIMIT,
            });
        }
        let states = compositions(vertices, k);
        let s = states.len() / vertices;
        debug_assert_eq!(s as u128, count);
        let index: HashMap<Vec<u32>, usize> = states
            .chunks(vertices)
            .enumerate()
            .map(|(i, c)| (c.to_vec(), i))
            .collect();

        // log of prod_x 1/g(sigma_x)!, with g(m)! = g(1)...g(m)
        let max_k = k as usize;
        let mut log_fact = vec![0.0f64; max_k + 1];
        for m in 1..=max_k {
            log_fact[m] = log_fact[m - 1] + g.eval(m as u64).ln();
        }

        let mut row_start = Vec::with_capacity(s + 1);
        let mut transitions = Vec::new();
        let mut exit = Vec::with_capacity(s);
        let mut log_weight = Vec::with_capacity(s);
        let mut scratch = vec![0u32; vertices];
        for i in 0..s {
            let sigma = &states[i * vertices..(i + 1) * vertices];
            row_start.push(transitions.len());
            let mut out_rate = T::zero();
            for e in edges.edges() {
                let (x, y) = (e.source.index(), e.target.index());
                if sigma[x] == 0 {
                    continue;
                }
                scratch.copy_from_slice(sigma);
                scratch[x] -= 1;
                scratch[y] += 1;
                let rate = T::of(g.eval(u64::from(sigma[x])));
                transitions.push(Transition {
                    target: index[scratch.as_slice()],
                    rate,
                });
                out_rate += rate;
            }
            exit.push(out_rate);
            log_weight.push(T::of(-sigma.iter().map(|&m| log_fact[m as usize]).sum::<f64>()));
        }
        row_start.push(transitions.len());
        Ok(ExactModel {
            vertices,
            particles: k,
            states,
            index,
            row_start,
            transitions,
            exit,
            log_weight,
            rates: g.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.exit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exit.is_empty()
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn particles(&self) -> u32 {
        self.particles
    }

    pub fn jump_rate(&self) -> &JumpRate {
        &self.rates
    }

    /// Occupancy vector of state `i`.
    pub fn state(&self, i: usize) -> &[u32] {
        &self.states[i * self.vertices..(i + 1) * self.vertices]
    }

    pub fn state_index(&self, occupancy: &[u32]) -> Option<usize> {
        self.index.get(occupancy).copied()
    }

    /// Number of stored off-diagonal transitions (one per state and edge with
    /// an occupied source).
    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    /// Total exit rate `-Q[i][i]` of state `i`.
    pub fn exit_rate(&self, i: usize) -> T {
        self.exit[i]
    }

    /// Off-diagonal entries `(target, rate)` of row `i`; targets may repeat.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        self.transitions[self.row_start[i]..self.row_start[i + 1]]
            .iter()
            .map(|t| (t.target, t.rate))
    }

    /// `sum_j Q[i][j]` for every row; zero up to rounding.
    pub fn row_sums(&self) -> Vec<T> {
        (0..self.len())
            .map(|i| self.row(i).fold(-self.exit[i], |acc, (_, r)| acc + r))
            .collect()
    }

    /// Dense copy of the generator, for very small models.
    pub fn dense_generator(&self) -> Vec<Vec<T>> {
        let s = self.len();
        let mut q = vec![vec![T::zero(); s]; s];
        for (i, row) in q.iter_mut().enumerate() {
            row[i] = -self.exit[i];
            for (j, r) in self.row(i) {
                row[j] += r;
            }
        }
        q
    }

    /// Canonical measure `pi(sigma) ∝ prod_x 1/g(sigma_x)!`, normalised.
    pub fn canonical_measure(&self) -> Vec<T> {
        let top = self.log_weight.iter().copied().fold(T::neg_infinity(), T::max);
        let mut w: Vec<T> = self.log_weight.iter().map(|&l| (l - top).exp()).collect();
        let z = w.iter().copied().fold(T::zero(), |a, b| a + b);
        w.iter_mut().for_each(|x| *x /= z);
        w
    }

    /// Uniform distribution over states.
    pub fn uniform(&self) -> Vec<T> {
        vec![T::one() / T::of_usize(self.len()); self.len()]
    }

    /// Point mass on state `i`.
    pub fn point_mass(&self, i: usize) -> Vec<T> {
        let mut mu = vec![T::zero(); self.len()];
        mu[i] = T::one();
        mu
    }

    fn check_distribution(&self, mu: &[T]) -> Result<()> {
        if mu.len() != self.len() {
            return Err(ZrpError::Input(format!(
                "distribution has {} entries, model has {} states",
                mu.len(),
                self.len()
            )));
        }
        if mu.iter().any(|&m| m < T::zero() || !m.is_finite()) {
            return Err(ZrpError::Domain(
                "distribution has negative or non-finite entries".into(),
            ));
        }
        let mass = mu.iter().copied().fold(T::zero(), |a, b| a + b);
        if (mass - T::one()).abs() > T::of(1e-10).max(T::epsilon() * T::of_usize(4 * self.len())) {
            return Err(ZrpError::Normalization(mass.as_f64()));
        }
        Ok(())
    }

    /// `mu^T Q`.
    pub fn apply_left(&self, mu: &[T]) -> Vec<T> {
        let mut out: Vec<T> = mu.iter().zip(&self.exit).map(|(&m, &e)| -m * e).collect();
        for (i, &m) in mu.iter().enumerate() {
            if m == T::zero() {
                continue;
            }
            for (j, r) in self.row(i) {
                out[j] += m * r;
            }
        }
        out
    }

    /// Transient law `mu0 exp(tQ)` by uniformization.
    pub fn evolve(&self, mu0: &[T], t: T) -> Result<Vec<T>> {
        self.check_distribution(mu0)?;
        if !(t >= T::zero()) || !t.is_finite() {
            return Err(ZrpError::InvalidParameter(format!(
                "evolution time must be finite and >= 0, got {t}"
            )));
        }
        let lambda = self.exit.iter().copied().fold(T::zero(), T::max);
        if lambda == T::zero() || t == T::zero() {
            return Ok(mu0.to_vec());
        }
        let chunks = ((lambda * t).as_f64() / CHUNK_EXPONENT).ceil().max(1.0) as usize;
        let dt = t / T::of_usize(chunks);
        let mut mu = mu0.to_vec();
        for _ in 0..chunks {
            mu = self.uniformized_step(&mu, lambda, dt);
        }
        Ok(mu)
    }

    /// Laws at each of the sorted `times`, evolving incrementally from `mu0`.
    pub fn evolve_grid(&self, mu0: &[T], times: &[T]) -> Result<Vec<Vec<T>>> {
        if times.windows(2).any(|w| w[0] > w[1]) {
            return Err(ZrpError::Input("evolution times must be sorted".into()));
        }
        let mut out = Vec::with_capacity(times.len());
        let mut mu = mu0.to_vec();
        let mut now = T::zero();
        for &t in times {
            mu = self.evolve(&mu, t - now)?;
            let mass = mu.iter().copied().fold(T::zero(), |a, b| a + b);
            mu.iter_mut().for_each(|m| *m /= mass);
            now = t;
            out.push(mu.clone());
        }
        Ok(out)
    }

    fn uniformized_step(&self, mu: &[T], lambda: T, dt: T) -> Vec<T> {
        // P = I + Q/lambda; mu_t = sum_k Poisson(lambda dt)(k) mu P^k
        let a = lambda * dt;
        let mut weight = (-a).exp();
        let mut term = mu.to_vec();
        let mut acc: Vec<T> = term.iter().map(|&m| m * weight).collect();
        let cutoff = T::of(1e-18).max(T::epsilon() * T::epsilon());
        let mut k = 0usize;
        loop {
            k += 1;
            let q = self.apply_left(&term);
            for (x, d) in term.iter_mut().zip(q) {
                *x += d / lambda;
            }
            weight = weight * a / T::of_usize(k);
            for (s, &x) in acc.iter_mut().zip(&term) {
                *s += weight * x;
            }
            if T::of_usize(k) > a && weight < cutoff {
                break;
            }
        }
        acc
    }
}

/// `||pi^T Q||_inf`; zero certifies stationarity.
pub fn stationarity_residual<T: Scalar>(model: &ExactModel<T>, pi: &[T]) -> Result<T> {
    model.check_distribution(pi)?;
    Ok(model.apply_left(pi).into_iter().fold(T::zero(), |m, x| m.max(x.abs())))
}

/// `H(mu | pi) = sum mu log(mu / pi)`; `+inf` when `mu` is not absolutely
/// continuous with respect to `pi`.
pub fn relative_entropy<T: Scalar>(mu: &[T], pi: &[T]) -> Result<T> {
    if mu.len() != pi.len() {
        return Err(ZrpError::Input(format!("lengths differ: {} vs {}", mu.len(), pi.len())));
    }
    let mut h = T::zero();
    for (&m, &p) in mu.iter().zip(pi) {
        if m < T::zero() || p < T::zero() {
            return Err(ZrpError::Domain("negative probability".into()));
        }
        if m == T::zero() {
            continue;
        }
        if p == T::zero() {
            return Ok(T::infinity());
        }
        h += m * (m / p).ln();
    }
    Ok(h)
}

/// `D(h) = 1/2 sum_sigma pi(sigma) sum_(x,y) g(sigma_x) (sqrt h(sigma^{x,y}) - sqrt h(sigma))^2`
/// with `pi` the canonical measure.
pub fn dirichlet_form<T: Scalar>(model: &ExactModel<T>, h: &[T]) -> Result<T> {
    if h.len() != model.len() {
        return Err(ZrpError::Input(format!(
            "function has {} entries, model has {} states",
            h.len(),
            model.len()
        )));
    }
    if let Some(bad) = h.iter().find(|&&v| v < T::zero() || v.is_nan()) {
        return Err(ZrpError::Domain(format!("dirichlet form needs h >= 0, found {bad}")));
    }
    let pi = model.canonical_measure();
    let root: Vec<T> = h.iter().map(|v| v.sqrt()).collect();
    let mut d = T::zero();
    for (i, &p) in pi.iter().enumerate() {
        let mut row = T::zero();
        for (j, r) in model.row(i) {
            let diff = root[j] - root[i];
            row += r * diff * diff;
        }
        d += p * row;
    }
    Ok(d * T::of(0.5))
}
