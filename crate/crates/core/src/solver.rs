//! Weighted least-squares fit of a grid distribution to noisy moments.
//!
//! Minimizes `Σ_{K≠0} ‖K‖₂^{-2k} (m̂_K − Σ_J q_J T̄_K(g_J))²` over the probability
//! simplex on the grid with accelerated projected gradient (FISTA) plus
//! backtracking and a monotone restart. The design matrix factorizes over
//! axes, so it is applied as `d` mode products with the 1-d evaluation matrix
//! and never formed densely.

use serde::{Deserialize, Serialize};

use crate::basis::{cheb_matrix, MomentIndexSet};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mechanism::MomentVector;
use crate::tensor::{dot, mode_product, mode_product_transposed};

/// Stopping rules for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Target for the simplex KKT (Frank–Wolfe) gap.
    pub tol: f64,
    /// Relative objective decrease over `stall_window` iterations treated as a stall.
    pub stall_rel: f64,
    pub stall_window: usize,
    /// Power iterations used for the initial Lipschitz estimate.
    pub power_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 5000,
            tol: 1e-8,
            stall_rel: 1e-10,
            stall_window: 10,
            power_iters: 20,
        }
    }
}

/// Probability weights on the cells of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution {
    grid: Grid,
    weights: Vec<f64>,
}

impl GridDistribution {
    /// Validates non-negativity and renormalizes to unit mass.
    pub fn new(grid: Grid, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.num_cells() {
            return Err(Error::invalid(format!(
                "{} weights for a grid of {} cells",
                weights.len(),
                grid.num_cells()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("grid weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("grid weights must have positive mass"));
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(GridDistribution { grid, weights })
    }

    pub fn uniform(grid: Grid) -> Self {
        let cells = grid.num_cells();
        GridDistribution {
            grid,
            weights: vec![1.0 / cells as f64; cells],
        }
    }

    /// Unit mass on one cell.
    pub fn point_mass(grid: Grid, cell: usize) -> Result<Self> {
        let mut weights = vec![0.0; grid.num_cells()];
        *weights
            .get_mut(cell)
            .ok_or_else(|| Error::invalid(format!("cell {cell} is outside the grid")))? = 1.0;
        Ok(GridDistribution { grid, weights })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// The map `z ↦ (‖K‖₂^{-k} Σ_J z_J T̄_K(g_J))_{K≠0}` and its adjoint.
///
/// Outputs are indexed in [`MomentIndexSet`] rank order.
#[derive(Debug, Clone)]
pub struct DesignOperator {
    d: usize,
    side: usize,
    r: usize,
    eval: Vec<f64>,
    /// `‖K‖₂^{-k}` over the full `(m+1)^d` tensor, zero at `K = 0`.
    row_weights: Vec<f64>,
}

impl DesignOperator {
    pub fn new(index_set: &MomentIndexSet, grid: &Grid, k: u32) -> Result<Self> {
        if index_set.dim() != grid.dim() {
            return Err(Error::invalid("index set and grid dimensions differ"));
        }
        let m = index_set.degree();
        let mut row_weights = Vec::with_capacity(index_set.len() + 1);
        row_weights.push(0.0);
        row_weights.extend(index_set.inverse_norm_powers(k as f64));
        Ok(DesignOperator {
            d: grid.dim(),
            side: m + 1,
            r: grid.points_per_axis(),
            eval: cheb_matrix(m, &grid.axis_points()),
            row_weights,
        })
    }

    /// Number of grid cells (input length).
    pub fn input_len(&self) -> usize {
        self.r.pow(self.d as u32)
    }

    /// Number of moments (output length).
    pub fn output_len(&self) -> usize {
        self.row_weights.len() - 1
    }

    /// Unweighted moments `Σ_J z_J T̄_K(g_J)` over the full tensor (entry 0 is `Σ z`).
    pub fn moments_full(&self, z: &[f64]) -> Vec<f64> {
        debug_assert_eq!(z.len(), self.input_len());
        let mut dims = vec![self.r; self.d];
        let mut cur = z.to_vec();
        for axis in 0..self.d {
            cur = mode_product(&cur, &dims, axis, &self.eval, self.side);
            dims[axis] = self.side;
        }
        cur
    }

    /// Unweighted moments for `K ≠ 0` in rank order.
    pub fn moments(&self, z: &[f64]) -> Vec<f64> {
        let mut full = self.moments_full(z);
        full.remove(0);
        full
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let full = self.moments_full(z);
        full[1..]
            .iter()
            .zip(&self.row_weights[1..])
            .map(|(v, w)| v * w)
            .collect()
    }

    pub fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.output_len());
        let mut cur = Vec::with_capacity(y.len() + 1);
        cur.push(0.0);
        cur.extend(y.iter().zip(&self.row_weights[1..]).map(|(v, w)| v * w));
        let mut dims = vec![self.side; self.d];
        for axis in 0..self.d {
            cur = mode_product_transposed(&cur, &dims, axis, &self.eval, self.r);
            dims[axis] = self.r;
        }
        cur
    }

    /// Weighted target `‖K‖₂^{-k} m̂_K`.
    fn weighted_target(&self, target: &[f64]) -> Vec<f64> {
        target.iter().zip(&self.row_weights[1..]).map(|(v, w)| v * w).collect()
    }
}

/// Objective value `Σ_{K≠0} ‖K‖₂^{-2k} (m̂_K − Σ_J q_J T̄_K(g_J))²`.
pub fn objective(q: &GridDistribution, target: &MomentVector, k: u32) -> Result<f64> {
    let op = DesignOperator::new(target.index_set(), q.grid(), k)?;
    let b = op.weighted_target(target.values());
    let aq = op.apply(q.weights());
    Ok(aq.iter().zip(&b).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Euclidean projection onto `{z ≥ 0, Σ z = 1}` (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Which stopping rule ended the solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Converged,
    Stalled,
    MaxIterations,
}

/// Result of [`solve`]; `distribution` is the best iterate found.
#[derive(Debug, Clone)]
pub struct Solution {
    pub distribution: GridDistribution,
    pub objective: f64,
    pub kkt_gap: f64,
    pub iterations: usize,
    pub status: SolverStatus,
    /// Objective after each accepted iteration, starting at the uniform point.
    pub trace: Vec<f64>,
}

struct Problem<'a> {
    op: &'a DesignOperator,
    b: Vec<f64>,
}

impl Problem<'_> {
    fn value_from_image(&self, image: &[f64]) -> f64 {
        image.iter().zip(&self.b).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn gradient_from_image(&self, image: &[f64]) -> Vec<f64> {
        let resid: Vec<f64> = image.iter().zip(&self.b).map(|(a, b)| 2.0 * (a - b)).collect();
        self.op.adjoint(&resid)
    }

    fn kkt_gap(&self, q: &[f64], image: &[f64]) -> f64 {
        let g = self.gradient_from_image(image);
        let min = g.iter().copied().fold(f64::INFINITY, f64::min);
        (dot(&g, q) - min).max(0.0)
    }

    /// Largest eigenvalue of `2 AᵀA` by power iteration from a fixed start.
    fn lipschitz_estimate(&self, iters: usize) -> f64 {
        let n = self.op.input_len();
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7548776662).sin()).collect();
        let mut lambda = 0.0;
        for _ in 0..iters.max(1) {
            let norm = dot(&v, &v).sqrt();
            if norm == 0.0 || !norm.is_finite() {
                break;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            let w = self.op.adjoint(&self.op.apply(&v));
            lambda = dot(&w, &w).sqrt();
            v = w;
        }
        2.0 * lambda
    }
}

/// Fits a distribution on `grid` to the noised moments `target`.
///
/// Returns `Err` only for inconsistent shapes or non-finite arithmetic; a
/// solve that hits `max_iters` is reported through [`SolverStatus`].
pub fn solve(target: &MomentVector, grid: &Grid, k: u32, opts: &SolverOptions) -> Result<Solution> {
    let op = DesignOperator::new(target.index_set(), grid, k)?;
    let problem = Problem {
        b: op.weighted_target(target.values()),
        op: &op,
    };
    let n = op.input_len();

    let mut x = vec![1.0 / n as f64; n];
    let mut ax = op.apply(&x);
    let mut fx = problem.value_from_image(&ax);
    let mut x_prev = x.clone();
    let mut ax_prev = ax.clone();
    let mut t = 1.0f64;
    let mut lip = problem.lipschitz_estimate(opts.power_iters).max(f64::MIN_POSITIVE);
    let mut trace = vec![fx];
    let mut gap = problem.kkt_gap(&x, &ax);
    if !gap.is_finite() || !fx.is_finite() {
        return Err(Error::Solver("non-finite objective at the uniform start".into()));
    }
    let mut status = if gap < opts.tol { Some(SolverStatus::Converged) } else { None };
    let mut iterations = 0;

    while status.is_none() && iterations < opts.max_iters {
        iterations += 1;
        let beta = if t > 1.0 { (t - 1.0) / ((1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0) } else { 0.0 };
        let (y, ay): (Vec<f64>, Vec<f64>) = if beta > 0.0 {
            (
                x.iter().zip(&x_prev).map(|(a, b)| a + beta * (a - b)).collect(),
                ax.iter().zip(&ax_prev).map(|(a, b)| a + beta * (a - b)).collect(),
            )
        } else {
            (x.clone(), ax.clone())
        };
        let (cand, acand, fcand) = backtrack(&problem, &y, &ay, &mut lip)?;

        if fcand > fx {
            // momentum overshot: restart with a plain projected-gradient step from x
            t = 1.0;
            let (cand, acand, fcand) = backtrack(&problem, &x, &ax, &mut lip)?;
            if fcand <= fx {
                x_prev = std::mem::replace(&mut x, cand);
                ax_prev = std::mem::replace(&mut ax, acand);
                fx = fcand;
            } else {
                x_prev.clone_from(&x);
                ax_prev.clone_from(&ax);
            }
        } else {
            x_prev = std::mem::replace(&mut x, cand);
            ax_prev = std::mem::replace(&mut ax, acand);
            fx = fcand;
            t = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        }
        trace.push(fx);

        if iterations % opts.stall_window.max(1) == 0 {
            gap = problem.kkt_gap(&x, &ax);
            if !gap.is_finite() {
                return Err(Error::Solver(format!("non-finite KKT gap at iteration {iterations}")));
            }
            if gap < opts.tol {
                status = Some(SolverStatus::Converged);
                break;
            }
            let window = opts.stall_window.max(1);
            let old = trace[trace.len() - 1 - window];
            if old - fx <= opts.stall_rel * old.max(f64::MIN_POSITIVE) {
                status = Some(SolverStatus::Stalled);
            }
        }
    }
    if iterations % opts.stall_window.max(1) != 0 {
        gap = problem.kkt_gap(&x, &ax);
        if gap < opts.tol {
            status = Some(SolverStatus::Converged);
        }
    }
    log::debug!("solver finished after {iterations} iterations, objective {fx:.3e}, gap {gap:.3e}");

    Ok(Solution {
        distribution: GridDistribution::new(grid.clone(), x)?,
        objective: fx,
        kkt_gap: gap,
        iterations,
        status: status.unwrap_or(SolverStatus::MaxIterations),
        trace,
    })
}

/// Projected gradient step from `y` with backtracking on the Lipschitz estimate.
fn backtrack(problem: &Problem<'_>, y: &[f64], ay: &[f64], lip: &mut f64) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let fy = problem.value_from_image(ay);
    let grad = problem.gradient_from_image(ay);
    for _ in 0..200 {
        let step: Vec<f64> = y.iter().zip(&grad).map(|(v, g)| v - g / *lip).collect();
        let cand = project_simplex(&step);
        let acand = problem.op.apply(&cand);
        let fcand = problem.value_from_image(&acand);
        if !fcand.is_finite() {
            return Err(Error::Solver("non-finite objective during line search".into()));
        }
        let diff: Vec<f64> = cand.iter().zip(y).map(|(a, b)| a - b).collect();
        let model = fy + dot(&grad, &diff) + 0.5 * *lip * dot(&diff, &diff);
        if fcand <= model + 1e-12 * fy.abs().max(1e-300) {
            return Ok((cand, acand, fcand));
        }
        *lip *= 2.0;
    }
    Err(Error::Solver("line search failed to find a descent step".into()))
}
