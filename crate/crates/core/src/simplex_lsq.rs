//! Rolling least-squares share estimates constrained to the simplex.
//!
//! Each window is a small convex QP solved exactly by a primal active-set
//! method. Equality-constrained subproblems are solved in the null space of
//! the sum constraint with an SVD pseudo-inverse, which yields the
//! minimum-norm minimizer when the design is rank deficient.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::accounting::{ObservationSeries, Quarter, ReturnPanel};
use crate::equity_share::EquityShareSeries;
use crate::error::{Error, Result};
use crate::simplex::SimplexShares;
use crate::state_model::observation_loadings;

pub const DEFAULT_TOL: f64 = 1e-8;

// Relative cutoff for treating a singular value of the reduced Hessian as zero.
const RANK_TOL: f64 = 1e-10;

/// Regressors and targets for one window of quarters.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowProblem {
    pub quarters: Vec<Quarter>,
    /// One row of per-currency loadings per quarter.
    pub regressors: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// Ridge toward `anchor`; zero disables it.
    pub smoothing: f64,
    pub anchor: Option<SimplexShares>,
}

impl WindowProblem {
    pub fn new(quarters: Vec<Quarter>, regressors: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if regressors.is_empty() {
            return Err(Error::invalid("window", "window is empty"));
        }
        if quarters.len() != regressors.len() || y.len() != regressors.len() {
            return Err(Error::invalid("window", "quarters, regressors and targets differ in length"));
        }
        let n = regressors[0].len();
        if n == 0 || regressors.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("window", "regressor rows must share a nonzero width"));
        }
        if regressors.iter().flatten().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("window", "non-finite regressor or target"));
        }
        Ok(Self { quarters, regressors, y, smoothing: 0.0, anchor: None })
    }

    /// Adds `smoothing * |beta - anchor|^2` to the objective.
    pub fn with_smoothing(mut self, smoothing: f64, anchor: SimplexShares) -> Result<Self> {
        if !(smoothing >= 0.0) || !smoothing.is_finite() {
            return Err(Error::config("baseline.smoothing", format!("{smoothing} must be nonnegative")));
        }
        if anchor.len() != self.n_currencies() {
            return Err(Error::invalid("anchor", "length differs from the regressors"));
        }
        self.smoothing = smoothing;
        self.anchor = Some(anchor);
        Ok(self)
    }

    pub fn n_currencies(&self) -> usize {
        self.regressors[0].len()
    }

    /// Sum of squared residuals `y_t - sum_i beta_i g_t,i`.
    pub fn sse(&self, beta: &[f64]) -> f64 {
        self.regressors
            .iter()
            .zip(&self.y)
            .map(|(g, y)| {
                let r = y - g.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
                r * r
            })
            .sum()
    }

    fn objective(&self, beta: &[f64]) -> f64 {
        let mut v = self.sse(beta);
        if let Some(a) = &self.anchor {
            v += self.smoothing * beta.iter().zip(a.as_slice()).map(|(b, a)| (b - a) * (b - a)).sum::<f64>();
        }
        v
    }

    // Objective as 0.5 b'Hb - f'b + const.
    fn quadratic(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.n_currencies();
        let g = DMatrix::from_fn(self.regressors.len(), n, |t, i| self.regressors[t][i]);
        let y = DVector::from_column_slice(&self.y);
        let mut h = g.transpose() * &g * 2.0;
        let mut f = g.transpose() * y * 2.0;
        if let Some(a) = &self.anchor {
            for i in 0..n {
                h[(i, i)] += 2.0 * self.smoothing;
                f[i] += 2.0 * self.smoothing * a.get(i);
            }
        }
        (h, f)
    }
}

/// Result of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSolution {
    pub shares: SimplexShares,
    pub sse: f64,
    /// Set when other points on the simplex attain the same objective.
    pub nonunique: bool,
    /// Largest violation of the optimality conditions, relative to the gradient scale.
    pub kkt_residual: f64,
}

/// Minimizes the window's squared residuals over the simplex.
pub fn solve_window(problem: &WindowProblem, tol: f64) -> Result<WindowSolution> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let n = problem.n_currencies();
    if n == 1 {
        return Ok(WindowSolution {
            shares: SimplexShares::new(vec![1.0])?,
            sse: problem.sse(&[1.0]),
            nonunique: false,
            kkt_residual: 0.0,
        });
    }
    let (h, f) = problem.quadratic();
    let scale = h.abs().max().max(f.abs().max()).max(f64::MIN_POSITIVE);

    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut active = vec![false; n];
    let max_iter = 50 * n + 50;
    let mut converged = false;
    for _ in 0..max_iter {
        let free: Vec<usize> = (0..n).filter(|i| !active[*i]).collect();
        let target = equality_minimizer(&h, &f, &free, n);
        let dir = &target - &x;
        if dir.amax() <= tol * 1e-3 {
            // Stationary on the current face; check multipliers of the active bounds.
            let (lambda, _) = multipliers(&h, &f, &x, &active);
            let worst = (0..n)
                .filter(|i| active[*i])
                .min_by(|a, b| lambda[*a].total_cmp(&lambda[*b]));
            match worst {
                Some(i) if lambda[i] < -tol * scale => active[i] = false,
                _ => {
                    converged = true;
                    break;
                }
            }
            continue;
        }
        // Longest feasible step toward the face minimizer.
        let mut step = 1.0;
        let mut blocking = None;
        for &i in &free {
            if dir[i] < 0.0 {
                let s = x[i] / -dir[i];
                if s < step {
                    step = s;
                    blocking = Some(i);
                }
            }
        }
        x += dir * step;
        if let Some(i) = blocking {
            x[i] = 0.0;
            active[i] = true;
        }
    }
    if !converged {
        return Err(Error::Numerical {
            quarter: *problem.quarters.last().expect("nonempty window"),
            reason: "simplex least squares did not converge".into(),
        });
    }

    let raw: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let shares = SimplexShares::normalize(&raw)?;
    let xs = DVector::from_column_slice(shares.as_slice());
    let (lambda, stationarity) = multipliers(&h, &f, &xs, &active);
    let dual_violation = (0..n).filter(|i| active[*i]).map(|i| (-lambda[i]).max(0.0)).fold(0.0, f64::max);
    let kkt_residual = stationarity.max(dual_violation) / scale;

    // Directions along which the objective is flat: the free set plus bounds
    // whose multiplier is zero.
    let loose: Vec<usize> = (0..n).filter(|i| !active[*i] || lambda[*i] <= tol * scale).collect();
    let nonunique = loose.len() > 1 && reduced_rank_deficient(&h, &loose);

    Ok(WindowSolution { sse: problem.sse(shares.as_slice()), shares, nonunique, kkt_residual })
}

/// Minimum-norm minimizer of `0.5 x'Hx - f'x` with `x_i = 0` off `free` and `sum x = 1`.
fn equality_minimizer(h: &DMatrix<f64>, f: &DVector<f64>, free: &[usize], n: usize) -> DVector<f64> {
    let k = free.len();
    let mut out = DVector::zeros(n);
    if k == 1 {
        out[free[0]] = 1.0;
        return out;
    }
    let x0 = DVector::from_element(k, 1.0 / k as f64);
    let z = null_basis(k);
    let hf = DMatrix::from_fn(k, k, |a, b| h[(free[a], free[b])]);
    let ff = DVector::from_fn(k, |a, _| f[free[a]]);
    let reduced = z.transpose() * &hf * &z;
    let rhs = z.transpose() * (&ff - &hf * &x0);
    let svd = reduced.svd(true, true);
    let cutoff = RANK_TOL * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let step = svd.solve(&rhs, cutoff).unwrap_or_else(|_| DVector::zeros(k - 1));
    let xf = x0 + z * step;
    for (a, &i) in free.iter().enumerate() {
        out[i] = xf[a];
    }
    out
}

/// Orthonormal basis of `{v : sum v = 0}` in `k` dimensions.
fn null_basis(k: usize) -> DMatrix<f64> {
    // Helmert contrasts.
    DMatrix::from_fn(k, k - 1, |r, c| {
        let m = (c + 1) as f64;
        let norm = (m * (m + 1.0)).sqrt();
        if r <= c {
            1.0 / norm
        } else if r == c + 1 {
            -m / norm
        } else {
            0.0
        }
    })
}

/// Bound multipliers `g_i - nu` and the largest stationarity gap on the free set.
fn multipliers(h: &DMatrix<f64>, f: &DVector<f64>, x: &DVector<f64>, active: &[bool]) -> (Vec<f64>, f64) {
    let grad = h * x - f;
    let free: Vec<f64> = (0..x.len()).filter(|i| !active[*i]).map(|i| grad[i]).collect();
    let nu = if free.is_empty() {
        grad.min()
    } else {
        free.iter().sum::<f64>() / free.len() as f64
    };
    let gap = free.iter().map(|g| (g - nu).abs()).fold(0.0, f64::max);
    ((0..x.len()).map(|i| grad[i] - nu).collect(), gap)
}

fn reduced_rank_deficient(h: &DMatrix<f64>, idx: &[usize]) -> bool {
    let k = idx.len();
    let hs = DMatrix::from_fn(k, k, |a, b| h[(idx[a], idx[b])]);
    let z = null_basis(k);
    let reduced = z.transpose() * hs * &z;
    let sv = reduced.singular_values();
    let top = h.abs().max();
    top == 0.0 || sv.min() <= RANK_TOL * top
}

/// Shares estimated over each rolling window, dated at the window's final quarter.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSeries {
    pub quarters: Vec<Quarter>,
    pub shares: Vec<SimplexShares>,
    pub sse: Vec<f64>,
    pub nonunique: Vec<bool>,
}

/// Solves every window of `window_len` consecutive observation quarters.
///
/// Loadings use the fitted equity share when given and bond returns only
/// otherwise. With `smoothing > 0` each window is anchored to the previous
/// window's solution, which makes the solves sequential; otherwise they run
/// in parallel.
pub fn rolling_optimize(
    obs: &ObservationSeries,
    returns: &ReturnPanel,
    equity: Option<&EquityShareSeries>,
    window_len: usize,
    smoothing: f64,
) -> Result<BaselineSeries> {
    if window_len < 1 {
        return Err(Error::config("baseline.window", "must be at least 1"));
    }
    if !(smoothing >= 0.0) || !smoothing.is_finite() {
        return Err(Error::config("baseline.smoothing", format!("{smoothing} must be nonnegative")));
    }
    if obs.quarters != returns.quarters {
        return Err(Error::invalid("baseline", "observations and returns are not aligned"));
    }
    if let Some(e) = equity {
        if e.quarters != obs.quarters {
            return Err(Error::invalid("baseline", "equity share is not aligned with observations"));
        }
    }
    let n = obs.len();
    if window_len > n {
        return Err(Error::config(
            "baseline.window",
            format!("window of {window_len} quarters exceeds the {n} observed"),
        ));
    }
    let loadings: Vec<Vec<f64>> =
        (0..n).map(|t| observation_loadings(equity.map_or(0.0, |e| e.x[t]), returns.row(t))).collect();
    let window = |end: usize| -> Result<WindowProblem> {
        let lo = end + 1 - window_len;
        WindowProblem::new(obs.quarters[lo..=end].to_vec(), loadings[lo..=end].to_vec(), obs.y[lo..=end].to_vec())
    };
    let ends: Vec<usize> = (window_len - 1..n).collect();
    let solutions: Vec<WindowSolution> = if smoothing == 0.0 {
        ends.par_iter().map(|&e| solve_window(&window(e)?, DEFAULT_TOL)).collect::<Result<_>>()?
    } else {
        let mut out: Vec<WindowSolution> = Vec::with_capacity(ends.len());
        for &e in &ends {
            let mut p = window(e)?;
            if let Some(prev) = out.last() {
                p = p.with_smoothing(smoothing, prev.shares.clone())?;
            }
            out.push(solve_window(&p, DEFAULT_TOL)?);
        }
        out
    };
    Ok(BaselineSeries {
        quarters: ends.iter().map(|&e| obs.quarters[e]).collect(),
        sse: solutions.iter().map(|s| s.sse).collect(),
        nonunique: solutions.iter().map(|s| s.nonunique).collect(),
        shares: solutions.into_iter().map(|s| s.shares).collect(),
    })
}

impl WindowProblem {
    /// Objective at the best vertex of the simplex.
    pub fn best_vertex_objective(&self) -> f64 {
        let n = self.n_currencies();
        (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                self.objective(&e)
            })
            .fold(f64::INFINITY, f64::min)
    }
}
