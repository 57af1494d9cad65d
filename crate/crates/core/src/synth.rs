//! The end-to-end mechanism: parameter selection, the private moment release,
//! the grid fit and integer apportionment into a synthetic dataset.
//!
//! [`release`] is the only function that reads raw data. Everything after it
//! works from a [`PrivateRelease`], which holds noised moments and public
//! sizes only, so the synthetic output is a post-processing of the release.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::basis::{MomentIndexSet, DEFAULT_MOMENT_CAP};
use crate::error::{Error, Result};
use crate::grid::{snap, Dataset, Grid, DEFAULT_GRID_CAP};
use crate::mechanism::{
    calibrate, compute_s, empirical_moments, privatize, CalibrationBranch, MomentVector, NoiseCalibration,
    PrivacyBudget,
};
use crate::solver::{solve, GridDistribution, SolverOptions, SolverStatus};

/// Default constant in the degree rule; any value above `√(8/π)` keeps the rates.
pub const DEFAULT_DEGREE_CONSTANT: f64 = 2.0 * 1.595_769_121_605_730_7;

/// Text placed in every report produced with noise disabled.
pub const NO_PRIVACY_WATERMARK: &str = "UNSAFE: noise disabled, output is not differentially private";

/// Resource limits checked before any heavy allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Caps {
    /// Maximum number of grid cells `r^d`.
    pub grid_cells: u128,
    /// Maximum number of moments `(m+1)^d − 1`.
    pub moments: u128,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            grid_cells: DEFAULT_GRID_CAP,
            moments: DEFAULT_MOMENT_CAP,
        }
    }
}

/// Parameters of one mechanism run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub d: usize,
    pub k: u32,
    pub epsilon: f64,
    pub delta: f64,
    /// Degree cap override; chosen from `n` and the budget when absent.
    pub m: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default = "default_degree_constant")]
    pub degree_constant: f64,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Skips the noise entirely. The report is watermarked.
    #[serde(default)]
    pub unsafe_no_privacy: bool,
}

fn default_degree_constant() -> f64 {
    DEFAULT_DEGREE_CONSTANT
}

impl MechanismConfig {
    pub fn new(d: usize, k: u32, epsilon: f64, delta: f64, seed: u64) -> Self {
        MechanismConfig {
            d,
            k,
            epsilon,
            delta,
            m: None,
            seed,
            caps: Caps::default(),
            degree_constant: DEFAULT_DEGREE_CONSTANT,
            solver: SolverOptions::default(),
            unsafe_no_privacy: false,
        }
    }

    pub fn budget(&self) -> Result<PrivacyBudget> {
        PrivacyBudget::new(self.epsilon, self.delta)
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 {
            return Err(Error::invalid("d and k must be at least 1"));
        }
        if self.m == Some(0) {
            return Err(Error::invalid("degree cap m must be at least 1"));
        }
        if !(self.degree_constant.is_finite() && self.degree_constant > 0.0) {
            return Err(Error::invalid("degree constant must be positive"));
        }
        self.budget().map(|_| ())
    }

    /// Degree cap for a dataset of `n` rows.
    pub fn degree_for(&self, n: usize) -> Result<usize> {
        match self.m {
            Some(m) => Ok(m),
            None => choose_m(self.d, self.k, self.budget()?, n, self.degree_constant),
        }
    }
}

/// `m = ⌈(1/c) (εn / √log(1.25/δ))^{1/max(d,k)}⌉`, at least `max(k, 1)`.
pub fn choose_m(d: usize, k: u32, budget: PrivacyBudget, n: usize, c: f64) -> Result<usize> {
    if n == 0 {
        return Err(Error::invalid("dataset size must be at least 1"));
    }
    let scale = budget.epsilon() * n as f64 / (1.25 / budget.delta()).ln().sqrt();
    let raw = (scale.powf(1.0 / d.max(k as usize) as f64) / c).ceil();
    if !raw.is_finite() || raw > u32::MAX as f64 {
        return Err(Error::invalid(format!("degree rule produced an unusable m = {raw}")));
    }
    Ok((raw as usize).max(k as usize).max(1))
}

/// `m′ = ⌈cells · (εn)^{min(1, k/d)}⌉`.
pub fn synthetic_size(cells: usize, epsilon: f64, n: usize, d: usize, k: u32) -> Result<u64> {
    let exponent = (k as f64 / d as f64).min(1.0);
    let size = (cells as f64 * (epsilon * n as f64).powf(exponent)).ceil();
    if !(size.is_finite() && size >= 1.0 && size <= (1u64 << 53) as f64) {
        return Err(Error::invalid(format!("synthetic size {size} is out of range")));
    }
    Ok(size as u64)
}

/// A multiset of grid points with integer multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    grid: Grid,
    counts: Vec<u64>,
    size: u64,
}

impl SyntheticDataset {
    pub fn new(grid: Grid, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != grid.num_cells() {
            return Err(Error::invalid("count vector does not match the grid"));
        }
        let size = counts.iter().sum();
        Ok(SyntheticDataset { grid, counts, size })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Multiplicity per grid cell.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total number of synthetic points `m′`.
    pub fn len(&self) -> u64 {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Occupied cells as `(point, multiplicity)` in cell order.
    pub fn support(&self) -> impl Iterator<Item = (Vec<f64>, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(cell, &c)| (self.grid.point(cell), c))
    }

    /// Empirical weights `a_J / m′`.
    pub fn weights(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.size as f64).collect()
    }

    /// One row per synthetic point.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let d = self.grid.dim();
        let mut values = Vec::with_capacity(self.size as usize * d);
        for (point, count) in self.support() {
            for _ in 0..count {
                values.extend_from_slice(&point);
            }
        }
        Dataset::new(d, values)
    }
}

/// Largest-remainder rounding of `m′ q` to integers summing to `m′`.
///
/// Remainders are handed out by decreasing fractional part, ties going to the
/// lower cell index.
pub fn apportion(q: &GridDistribution, size: u64) -> Result<SyntheticDataset> {
    if size == 0 {
        return Err(Error::invalid("synthetic size must be at least 1"));
    }
    let total = size as f64;
    let mut counts = Vec::with_capacity(q.weights().len());
    let mut fractions = Vec::with_capacity(q.weights().len());
    for &w in q.weights() {
        let scaled = w * total;
        let floor = scaled.floor();
        counts.push(floor as u64);
        fractions.push(scaled - floor);
    }
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| fractions[b].total_cmp(&fractions[a]).then(a.cmp(&b)));
    if assigned <= size {
        let mut remaining = size - assigned;
        for &cell in order.iter().cycle() {
            if remaining == 0 {
                break;
            }
            counts[cell] += 1;
            remaining -= 1;
        }
    } else {
        // only reachable through rounding in `w * total`; take back from the
        // smallest remainders
        let mut excess = assigned - size;
        for &cell in order.iter().rev().cycle() {
            if excess == 0 {
                break;
            }
            if counts[cell] > 0 {
                counts[cell] -= 1;
                excess -= 1;
            }
        }
    }
    SyntheticDataset::new(q.grid().clone(), counts)
}

/// Wall-clock time of each stage, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub snap: f64,
    pub moments: f64,
    pub noise: f64,
    pub solve: f64,
    pub apportion: f64,
}

/// The differentially private output of the moment stage.
///
/// Holds noised moments together with quantities treated as public (`n`, the
/// dimensions, the calibration). It owns no reference to the input rows.
#[derive(Debug, Clone)]
pub struct PrivateRelease {
    moments: MomentVector,
    n: usize,
    k: u32,
    calibration: NoiseCalibration,
    noise_disabled: bool,
    timings: Timings,
}

impl PrivateRelease {
    /// Wraps externally supplied noised moments, e.g. a previously stored release.
    pub fn from_noised_moments(moments: MomentVector, n: usize, k: u32, calibration: NoiseCalibration) -> Self {
        PrivateRelease {
            moments,
            n,
            k,
            noise_disabled: calibration.branch == CalibrationBranch::Disabled,
            calibration,
            timings: Timings::default(),
        }
    }

    pub fn moments(&self) -> &MomentVector {
        &self.moments
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.moments.index_set().dim()
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn degree(&self) -> usize {
        self.moments.index_set().degree()
    }

    pub fn calibration(&self) -> &NoiseCalibration {
        &self.calibration
    }

    pub fn noise_disabled(&self) -> bool {
        self.noise_disabled
    }
}

/// Rounds `data` onto the grid, computes its moments and adds calibrated noise.
pub fn release(data: &Dataset, cfg: &MechanismConfig) -> Result<PrivateRelease> {
    cfg.validate()?;
    if data.dim() != cfg.d {
        return Err(Error::invalid(format!(
            "dataset has {} columns but d = {}",
            data.dim(),
            cfg.d
        )));
    }
    let n = data.len();
    let m = cfg.degree_for(n)?;
    let index_set = MomentIndexSet::with_cap(cfg.d, m, cfg.caps.moments)?;
    let grid = Grid::for_mechanism(cfg.d, m, cfg.k, cfg.caps.grid_cells)?;
    let mut timings = Timings::default();

    let clock = Instant::now();
    let snapped = snap(data, &grid)?;
    timings.snap = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let raw = empirical_moments(&snapped, &index_set)?;
    drop(snapped);
    let s = compute_s(&index_set, cfg.k);
    timings.moments = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let calibration = if cfg.unsafe_no_privacy {
        log::warn!("{NO_PRIVACY_WATERMARK}");
        NoiseCalibration::disabled(s, cfg.k)
    } else {
        calibrate(cfg.budget()?, n, cfg.d, cfg.k, s)?
    };
    let moments = privatize(&raw, &calibration, cfg.seed);
    timings.noise = clock.elapsed().as_secs_f64();

    Ok(PrivateRelease {
        moments,
        n,
        k: cfg.k,
        noise_disabled: cfg.unsafe_no_privacy,
        calibration,
        timings,
    })
}

/// Solver and rounding diagnostics of [`synthesize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSummary {
    pub status: SolverStatus,
    pub kkt_gap: f64,
    pub iterations: usize,
    pub objective: f64,
    pub solve_seconds: f64,
    pub apportion_seconds: f64,
}

/// Fits a grid distribution to the release and rounds it to `m′` points.
pub fn synthesize(release: &PrivateRelease, cfg: &MechanismConfig) -> Result<(SyntheticDataset, SynthesisSummary)> {
    let (d, k, m) = (release.d(), release.k(), release.degree());
    let grid = Grid::for_mechanism(d, m, k, cfg.caps.grid_cells)?;

    let clock = Instant::now();
    let solution = solve(release.moments(), &grid, k, &cfg.solver)?;
    let solve_seconds = clock.elapsed().as_secs_f64();
    if solution.status != SolverStatus::Converged {
        log::warn!(
            "solver stopped with status {:?}, KKT gap {:.3e}",
            solution.status,
            solution.kkt_gap
        );
    }

    let clock = Instant::now();
    let size = synthetic_size(grid.num_cells(), cfg.epsilon, release.n(), d, k)?;
    let synthetic = apportion(&solution.distribution, size)?;
    let apportion_seconds = clock.elapsed().as_secs_f64();

    Ok((
        synthetic,
        SynthesisSummary {
            status: solution.status,
            kkt_gap: solution.kkt_gap,
            iterations: solution.iterations,
            objective: solution.objective,
            solve_seconds,
            apportion_seconds,
        },
    ))
}

/// Everything a run reports. Derived only from the release and public sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: MechanismConfig,
    pub n: usize,
    pub m: usize,
    pub points_per_axis: usize,
    pub grid_cells: usize,
    pub moments: usize,
    pub synthetic_size: u64,
    pub s: f64,
    pub sensitivity_sq: f64,
    pub sigma: f64,
    pub sigma_sq: f64,
    pub calibration_branch: CalibrationBranch,
    /// Root-mean-square weighted noise norm `σ √S`.
    pub noise_gamma_scale: f64,
    pub solver_status: SolverStatus,
    pub kkt_gap: f64,
    pub iterations: usize,
    pub objective: f64,
    /// Weighted moment distance between the fitted distribution and the noised moments.
    pub fit_gamma: f64,
    pub timings: Timings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub watermark: Option<String>,
}

/// Runs the full mechanism on `data`.
pub fn run(data: &Dataset, cfg: &MechanismConfig) -> Result<(SyntheticDataset, RunReport)> {
    let released = release(data, cfg)?;
    let (synthetic, summary) = synthesize(&released, cfg)?;
    let cal = released.calibration;
    let grid = synthetic.grid();
    let mut timings = released.timings;
    timings.solve = summary.solve_seconds;
    timings.apportion = summary.apportion_seconds;
    let report = RunReport {
        config: cfg.clone(),
        n: released.n,
        m: released.degree(),
        points_per_axis: grid.points_per_axis(),
        grid_cells: grid.num_cells(),
        moments: released.moments.values().len(),
        synthetic_size: synthetic.len(),
        s: cal.s,
        sensitivity_sq: cal.sensitivity_sq,
        sigma: cal.sigma,
        sigma_sq: cal.sigma_sq,
        calibration_branch: cal.branch,
        noise_gamma_scale: cal.sigma * cal.s.sqrt(),
        solver_status: summary.status,
        kkt_gap: summary.kkt_gap,
        iterations: summary.iterations,
        objective: summary.objective,
        fit_gamma: summary.objective.max(0.0).sqrt(),
        timings,
        manifest: None,
        watermark: released.noise_disabled.then(|| NO_PRIVACY_WATERMARK.to_string()),
    };
    Ok((synthetic, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degree_rule() {
        let b = PrivacyBudget::new(1.0, 1e-5).unwrap();
        let m1 = choose_m(1, 1, b, 4000, DEFAULT_DEGREE_CONSTANT).unwrap();
        let m2 = choose_m(1, 1, b, 8000, DEFAULT_DEGREE_CONSTANT).unwrap();
        assert!((m2 as i64 - 2 * m1 as i64).abs() <= 1);

        // εn / √log(1.25/δ) = 10⁴ with ε = 1 and n chosen to match
        let delta = 1e-3;
        let n = (1e4 * (1.25f64 / delta).ln().sqrt()).round() as usize;
        let scale = n as f64 / (1.25f64 / delta).ln().sqrt();
        let b = PrivacyBudget::new(1.0, delta).unwrap();
        let want = (scale.sqrt() / DEFAULT_DEGREE_CONSTANT).ceil() as usize;
        assert_eq!(choose_m(2, 1, b, n, DEFAULT_DEGREE_CONSTANT).unwrap(), want);
        assert_eq!(want, 32);

        let b = PrivacyBudget::new(0.01, 1e-5).unwrap();
        assert_eq!(choose_m(1, 3, b, 10, DEFAULT_DEGREE_CONSTANT).unwrap(), 3);
    }

    #[test]
    fn size_rule() {
        assert_eq!(synthetic_size(4, 1.0, 100, 1, 1).unwrap(), 400);
        assert_eq!(synthetic_size(16, 1.0, 100, 2, 1).unwrap(), 160);
        assert_eq!(synthetic_size(16, 0.5, 100, 2, 3).unwrap(), 800);
    }

    fn grid_dist(weights: Vec<f64>) -> GridDistribution {
        let grid = Grid::new(1, weights.len()).unwrap();
        GridDistribution::new(grid, weights).unwrap()
    }

    #[test]
    fn apportion_examples() {
        assert_eq!(apportion(&grid_dist(vec![0.5, 0.5]), 3).unwrap().counts(), &[2, 1]);
        assert_eq!(apportion(&grid_dist(vec![0.26, 0.74]), 10).unwrap().counts(), &[3, 7]);
        let s = apportion(&grid_dist(vec![0.0, 1.0, 0.0]), 17).unwrap();
        assert_eq!(s.counts(), &[0, 17, 0]);
    }

    proptest! {
        #[test]
        fn apportion_bounds(
            raw in prop::collection::vec(0.0f64..1.0, 1..40),
            size in 1u64..5000,
        ) {
            prop_assume!(raw.iter().sum::<f64>() > 0.0);
            let q = grid_dist(raw);
            let s = apportion(&q, size).unwrap();
            prop_assert_eq!(s.len(), size);
            let mut l1 = 0.0;
            for (a, w) in s.counts().iter().zip(q.weights()) {
                let dev = (*a as f64 / size as f64 - w).abs();
                prop_assert!(dev <= 1.0 / size as f64 + 1e-12);
                l1 += dev;
            }
            prop_assert!(l1 <= q.weights().len() as f64 / size as f64 + 1e-12);
        }
    }

    #[test]
    fn pipeline_identity_without_noise() {
        let mut cfg = MechanismConfig::new(1, 1, 1.0, 1e-5, 3);
        cfg.m = Some(4);
        cfg.unsafe_no_privacy = true;
        let data = Dataset::from_rows(&[[0.5]]).unwrap();
        let (syn, report) = run(&data, &cfg).unwrap();
        assert_eq!(report.watermark.as_deref(), Some(NO_PRIVACY_WATERMARK));
        assert_eq!(syn.len(), report.synthetic_size);
        let support: Vec<_> = syn.support().collect();
        assert_eq!(support, vec![(vec![0.5], report.synthetic_size)]);
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = MechanismConfig::new(2, 1, 1.0, 1e-5, 11);
        let rows: Vec<[f64; 2]> = (0..200)
            .map(|i| {
                let t = i as f64 / 200.0;
                [(6.0 * t).sin() * 0.8, (2.0 * t - 1.0) * 0.9]
            })
            .collect();
        let data = Dataset::from_rows(&rows).unwrap();
        let (a, ra) = run(&data, &cfg).unwrap();
        let (b, rb) = run(&data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.objective, rb.objective);
        assert!(ra.watermark.is_none());
        let mut other = cfg.clone();
        other.seed = 12;
        let (c, _) = run(&data, &other).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn caps_are_enforced_before_work() {
        let mut cfg = MechanismConfig::new(3, 3, 1.0, 1e-5, 0);
        cfg.m = Some(10);
        let data = Dataset::from_rows(&[[0.0, 0.0, 0.0]]).unwrap();
        let err = release(&data, &cfg).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { .. }), "{err}");
    }
}
