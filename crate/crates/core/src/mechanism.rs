//! Empirical Chebyshev moments and their Gaussian-mechanism release.
//!
//! Privacy is accounted on the scaled statistic `f(X)_K = ‖K‖₂^{-k/2} m_K`
//! with `m_K = (1/n) Σ_i T̄_K(x_i)`. Adding `N(0, σ²)` to each scaled
//! coordinate is the same as adding `N(0, ‖K‖₂^k σ²)` to the unscaled moment,
//! which is what [`privatize`] does.
//!
//! Sensitivity uses `sup |T̄_K| = 2^{nnz(K)/2}` for the polynomials as they are
//! evaluated here (no measure normalization), giving
//! `Δ₂² ≤ 4 · 2^d · S / n²` with `S = Σ_{K≠0} ‖K‖₂^{-k}`.

use std::f64::consts::SQRT_2;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{cheb_table, MomentIndexSet};
use crate::error::{Error, Result};
use crate::grid::Dataset;

/// An `(ε, δ)` pair with `ε > 0` and `0 < δ < 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidBudget(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::InvalidBudget(format!("delta must lie in (0, 1/2), got {delta}")));
        }
        Ok(PrivacyBudget { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Chebyshev moments indexed by a [`MomentIndexSet`] (rank order, `K ≠ 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    index_set: MomentIndexSet,
    values: Vec<f64>,
}

impl MomentVector {
    pub fn new(index_set: MomentIndexSet, values: Vec<f64>) -> Result<Self> {
        if values.len() != index_set.len() {
            return Err(Error::invalid(format!(
                "{} moment values for an index set of size {}",
                values.len(),
                index_set.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("moment values must be finite"));
        }
        Ok(MomentVector { index_set, values })
    }

    pub fn index_set(&self) -> &MomentIndexSet {
        &self.index_set
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Accumulates `Σ_i w_i T̄_K(x_i)` over the full `(m+1)^d` tensor (entry 0 is
/// the total weight). `points` is row-major with `d` columns.
pub(crate) fn weighted_moment_tensor(points: &[f64], weights: &[f64], d: usize, m: usize) -> Vec<f64> {
    let side = m + 1;
    let full = side.pow(d as u32);
    let mut acc = vec![0.0; full];
    let mut tables = vec![0.0; d * side];
    let mut prefix = vec![0.0; full];
    for (row, &w) in points.chunks_exact(d).zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (axis, &x) in row.iter().enumerate() {
            cheb_table(x.clamp(-1.0, 1.0), &mut tables[axis * side..(axis + 1) * side]);
        }
        // expand the outer product axis by axis into `prefix`
        prefix[0] = w;
        let mut len = 1;
        for axis in 0..d {
            let t = &tables[axis * side..(axis + 1) * side];
            for i in (0..len).rev() {
                let base = prefix[i];
                for (k, &tk) in t.iter().enumerate().rev() {
                    prefix[i * side + k] = base * tk;
                }
            }
            len *= side;
        }
        for (a, p) in acc.iter_mut().zip(&prefix) {
            *a += p;
        }
    }
    acc
}

/// `m_K = (1/n) Σ_i T̄_K(x̃_i)` for every `K` in `index_set`.
pub fn empirical_moments(data: &Dataset, index_set: &MomentIndexSet) -> Result<MomentVector> {
    if data.dim() != index_set.dim() {
        return Err(Error::invalid("dataset and index set dimensions differ"));
    }
    let n = data.len();
    let weights = vec![1.0 / n as f64; n];
    let full = weighted_moment_tensor(data.values(), &weights, data.dim(), index_set.degree());
    MomentVector::new(index_set.clone(), full[1..].to_vec())
}

/// `S = Σ_{K ∈ {0..m}^d \ 0} ‖K‖₂^{-k}` by direct summation.
pub fn compute_s(index_set: &MomentIndexSet, k: u32) -> f64 {
    let half = k as f64 / 2.0;
    index_set
        .norms_sq()
        .iter()
        .map(|&s| (s as f64).powf(-half))
        .sum()
}

/// Closed-form upper bound on `S` in the three regimes `k < d`, `k = d`, `k > d`.
pub fn s_upper_bound(d: usize, k: u32, m: usize) -> f64 {
    let pre = d as f64 * 2f64.powi(d as i32 - 1);
    let (df, kf, mf) = (d as f64, k as f64, m as f64);
    let tail = match (k as usize).cmp(&d) {
        std::cmp::Ordering::Less => 1.0 + (mf.powf(df - kf) - 1.0) / (df - kf),
        std::cmp::Ordering::Equal => 1.0 + mf.ln(),
        std::cmp::Ordering::Greater => 1.0 + 1.0 / (kf - df),
    };
    pre * tail
}

/// ℓ₂²-sensitivity bound `4 · 2^d · S / n²` of the scaled moment statistic.
pub fn sensitivity_bound(n: usize, d: usize, s: f64) -> f64 {
    4.0 * 2f64.powi(d as i32) * s / (n as f64 * n as f64)
}

/// Which clause of the Gaussian-mechanism calibration produced `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationBranch {
    /// `σ = Δ₂ √(2 log(1.25/δ)) / ε`, used for `ε < 1`.
    Classic,
    /// `σ = (√2 Δ₂ / ε) √(log(1/(4δ(1−δ))) + ε)`, used for `ε ≥ 1`.
    General,
    /// Noise disabled through the explicit no-privacy switch.
    Disabled,
}

/// Noise scale for the moment release.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCalibration {
    pub s: f64,
    pub k: u32,
    pub sensitivity_sq: f64,
    pub sigma: f64,
    pub sigma_sq: f64,
    pub branch: CalibrationBranch,
}

impl NoiseCalibration {
    /// Noise variance `‖K‖₂^k σ²` on the unscaled moment with `‖K‖₂² = norm_sq`.
    pub fn variance_for(&self, norm_sq: u64) -> f64 {
        (norm_sq as f64).powf(self.k as f64 / 2.0) * self.sigma_sq
    }

    /// Zero-noise calibration. Only reachable through the watermarked
    /// no-privacy path of the pipeline and from tests.
    pub fn disabled(s: f64, k: u32) -> Self {
        NoiseCalibration {
            s,
            k,
            sensitivity_sq: 0.0,
            sigma: 0.0,
            sigma_sq: 0.0,
            branch: CalibrationBranch::Disabled,
        }
    }
}

/// Calibrates `σ` for dataset size `n`, dimension `d`, smoothness `k` and `S`.
pub fn calibrate(budget: PrivacyBudget, n: usize, d: usize, k: u32, s: f64) -> Result<NoiseCalibration> {
    let budget = PrivacyBudget::new(budget.epsilon, budget.delta)?;
    if n == 0 {
        return Err(Error::invalid("dataset size must be at least 1"));
    }
    let (eps, delta) = (budget.epsilon, budget.delta);
    let sensitivity_sq = sensitivity_bound(n, d, s);
    let sens = sensitivity_sq.sqrt();
    let (sigma, branch) = if eps < 1.0 {
        (sens * (2.0 * (1.25 / delta).ln()).sqrt() / eps, CalibrationBranch::Classic)
    } else {
        let inner = (1.0 / (4.0 * delta * (1.0 - delta))).ln() + eps;
        (SQRT_2 * sens / eps * inner.sqrt(), CalibrationBranch::General)
    };
    Ok(NoiseCalibration {
        s,
        k,
        sensitivity_sq,
        sigma,
        sigma_sq: sigma * sigma,
        branch,
    })
}

/// Adds independent `N(0, ‖K‖₂^k σ²)` noise to each moment.
///
/// Draws come from a ChaCha20 stream seeded with `seed`, consumed in rank
/// order, so a fixed seed gives bit-identical output.
pub fn privatize(moments: &MomentVector, calibration: &NoiseCalibration, seed: u64) -> MomentVector {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let set = moments.index_set();
    let values = moments
        .values()
        .iter()
        .enumerate()
        .map(|(rank, &v)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + calibration.variance_for(set.norm_sq(rank)).sqrt() * z
        })
        .collect();
    MomentVector {
        index_set: set.clone(),
        values,
    }
}
