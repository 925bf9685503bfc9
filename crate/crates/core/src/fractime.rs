//! Fractional calculus on uniform time grids.
//!
//! The Caputo derivative is discretized with the L1 scheme
//!
//! ```text
//! ∂ₜᵅu(tₙ) ≈ Σₖ c_{n,k} (u_k − u_{k−1}) / τ,
//! c_{n,k} = [(tₙ − t_{k−1})^{1−α} − (tₙ − t_k)^{1−α}] / Γ(2−α)
//! ```
//!
//! and the Riemann–Liouville integral J^{1−α} by product integration of a
//! piecewise-linear interpolant against the exact weakly singular kernel.

use statrs::function::gamma::gamma;

use crate::field::{Field, SpaceTimeField};
use crate::{Error, Result};

/// Uniform partition `t_n = n T / N` of `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
    tau: f64,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::domain(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if steps == 0 {
            return Err(Error::domain("time grid needs at least one step"));
        }
        Ok(Self {
            t_final,
            steps,
            tau: t_final / steps as f64,
        })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `t_n`; exact at both ends.
    pub fn node(&self, n: usize) -> f64 {
        if n == self.steps {
            self.t_final
        } else {
            self.t_final * n as f64 / self.steps as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.node(n)).collect()
    }

    /// Trapezoid weights: τ/2 at both ends, τ inside.
    pub fn trapezoid_weight(&self, n: usize) -> f64 {
        if n == 0 || n == self.steps {
            0.5 * self.tau
        } else {
            self.tau
        }
    }

    pub fn check_same(&self, other: &TimeGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(T={}, N={}) vs (T={}, N={})",
                self.t_final, self.steps, other.t_final, other.steps
            )))
        }
    }
}

fn check_order(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "fractional order must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Triangular table of L1 weights `c_{n,k}`, `1 ≤ k ≤ n ≤ N`.
#[derive(Clone, Debug)]
pub struct L1Weights {
    alpha: f64,
    grid: TimeGrid,
    // row n (1-based) starts at n(n-1)/2
    table: Vec<f64>,
}

impl L1Weights {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `c_{n,k}`; panics outside `1 ≤ k ≤ n ≤ N`.
    pub fn get(&self, n: usize, k: usize) -> f64 {
        assert!(
            1 <= k && k <= n && n <= self.grid.steps,
            "L1 weight ({n}, {k}) out of range"
        );
        self.table[n * (n - 1) / 2 + k - 1]
    }

    /// Row `n` as a slice indexed by `k − 1`.
    pub fn row(&self, n: usize) -> &[f64] {
        assert!(1 <= n && n <= self.grid.steps, "L1 row {n} out of range");
        let start = n * (n - 1) / 2;
        &self.table[start..start + n]
    }

    /// The diagonal weight `c_{n,n} = τ^{1−α}/Γ(2−α)`, identical for every n.
    pub fn diagonal(&self) -> f64 {
        self.get(1, 1)
    }
}

pub fn l1_weights(alpha: f64, grid: &TimeGrid) -> Result<L1Weights> {
    check_order(alpha)?;
    let beta = 1.0 - alpha;
    let scale = 1.0 / gamma(2.0 - alpha);
    let tau = grid.tau();
    let steps = grid.steps();
    // (t_n − t_{k−1}) = (n − k + 1)τ, so only N + 1 distinct powers occur
    let powers: Vec<f64> = (0..=steps).map(|m| (m as f64 * tau).powf(beta)).collect();
    let mut table = Vec::with_capacity(steps * (steps + 1) / 2);
    for n in 1..=steps {
        for k in 1..=n {
            table.push((powers[n - k + 1] - powers[n - k]) * scale);
        }
    }
    Ok(L1Weights {
        alpha,
        grid: *grid,
        table,
    })
}

/// L1 approximation of the Caputo derivative at level `n` from samples `u_0..u_n`.
pub fn caputo_l1(u_history: &[f64], weights: &L1Weights, n: usize) -> Result<f64> {
    let steps = weights.grid.steps();
    if n == 0 || n > steps {
        return Err(Error::Index {
            index: n,
            valid: format!("1..={steps}"),
        });
    }
    if u_history.len() <= n {
        return Err(Error::Index {
            index: n,
            valid: format!("history of length {}", u_history.len()),
        });
    }
    let tau = weights.grid.tau();
    Ok(weights
        .row(n)
        .iter()
        .enumerate()
        .map(|(i, c)| c * (u_history[i + 1] - u_history[i]))
        .sum::<f64>()
        / tau)
}

/// Scalar samples on a [`TimeGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.steps() + 1 {
            return Err(Error::Dimension {
                expected: grid.steps() + 1,
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid, values }
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.steps() + 1],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, n: usize) -> f64 {
        self.values[n]
    }
}

/// Product-integration weights for `J^{β} f(t_n) ≈ Σ_j w_{n,j} f_j`,
/// with β = 1 − α and f piecewise linear between nodes.
struct ProductWeights {
    beta: f64,
    scale: f64,
}

impl ProductWeights {
    fn new(alpha: f64, tau: f64) -> Self {
        let beta = 1.0 - alpha;
        Self {
            beta,
            scale: tau.powf(beta) / gamma(beta + 2.0),
        }
    }

    /// Unscaled weight a_{j,n}; the caller multiplies by `scale`.
    fn raw(&self, n: usize, j: usize) -> f64 {
        let b1 = self.beta + 1.0;
        let nf = n as f64;
        if j == n {
            1.0
        } else if j == 0 {
            (nf - 1.0).powf(b1) - (nf - 1.0 - self.beta) * nf.powf(self.beta)
        } else {
            let m = (n - j) as f64;
            (m + 1.0).powf(b1) - 2.0 * m.powf(b1) + (m - 1.0).powf(b1)
        }
    }
}

/// `J^{1−α} f` at every node by piecewise-linear product integration.
pub fn rl_integral(f: &TimeSeries, alpha: f64) -> Result<TimeSeries> {
    check_order(alpha)?;
    let w = ProductWeights::new(alpha, f.grid.tau());
    let steps = f.grid.steps();
    let mut out = vec![0.0; steps + 1];
    for (n, slot) in out.iter_mut().enumerate().skip(1) {
        let s: f64 = (0..=n).map(|j| w.raw(n, j) * f.values[j]).sum();
        *slot = w.scale * s;
    }
    TimeSeries::new(f.grid, out)
}

/// Solves `μ + q J^{1−α} μ = ρ` with the same product-integration rule as
/// [`rl_integral`], by forward substitution.
pub fn solve_volterra_mu(rho: &TimeSeries, q: f64, alpha: f64) -> Result<TimeSeries> {
    check_order(alpha)?;
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::domain(format!(
            "coupling q must be nonnegative, got {q}"
        )));
    }
    let w = ProductWeights::new(alpha, rho.grid.tau());
    let steps = rho.grid.steps();
    let mut mu = vec![0.0; steps + 1];
    mu[0] = rho.values[0];
    let diag = 1.0 + q * w.scale;
    for n in 1..=steps {
        let history: f64 = (0..n).map(|j| w.raw(n, j) * mu[j]).sum();
        mu[n] = (rho.values[n] - q * w.scale * history) / diag;
    }
    TimeSeries::new(rho.grid, mu)
}

/// Quadrature for `(μ * v)(t_n) = ∫₀^{t_n} μ(t_n − s) v(s) ds`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvolutionRule {
    Trapezoid,
    /// `τ Σ_{k=1}^{n} μ_k v_{n−k+1}`, the sum an implicit Euler step produces
    /// when it is unrolled.
    ShiftedRectangle,
}

/// `(μ * v)(t_n) = ∫₀^{t_n} μ(t_n − s) v(s) ds` by the trapezoid rule, nodewise in space.
pub fn convolve(mu: &TimeSeries, v: &SpaceTimeField) -> Result<SpaceTimeField> {
    convolve_with(mu, v, ConvolutionRule::Trapezoid)
}

pub fn convolve_with(mu: &TimeSeries, v: &SpaceTimeField, rule: ConvolutionRule) -> Result<SpaceTimeField> {
    mu.grid.check_same(v.grid())?;
    let grid = mu.grid;
    let tau = grid.tau();
    let nodes = v.node_count();
    let frames = v.frames();
    let mut out = Vec::with_capacity(grid.steps() + 1);
    out.push(Field::zeros(nodes));
    for n in 1..=grid.steps() {
        let mut acc = Field::zeros(nodes);
        match rule {
            ConvolutionRule::Trapezoid => {
                for (j, frame) in frames.iter().enumerate().take(n + 1) {
                    let weight = if j == 0 || j == n { 0.5 * tau } else { tau };
                    acc.axpy(weight * mu.values[n - j], frame);
                }
            }
            ConvolutionRule::ShiftedRectangle => {
                for k in 1..=n {
                    acc.axpy(tau * mu.values[k], &frames[n - k + 1]);
                }
            }
        }
        out.push(acc);
    }
    SpaceTimeField::new(grid, out)
}
