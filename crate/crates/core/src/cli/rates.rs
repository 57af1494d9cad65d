//! Empirical rate experiments: run the mechanism over a sweep of dataset
//! sizes and fit the log–log slope of the resulting utility metric.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::MomentIndexSet;
use crate::error::{Error, Result};
use crate::grid::Dataset;
use crate::synth::{release, synthesize, Caps, MechanismConfig, DEFAULT_DEGREE_CONSTANT};
use crate::solver::SolverOptions;
use crate::utility::{decay_constant, gamma, BumpFamily, DiscreteMeasure};

/// A sweep over dataset sizes at fixed `(d, k, ε, δ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub d: usize,
    pub k: u32,
    pub epsilon: f64,
    pub delta: f64,
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl ExperimentSpec {
    /// Sizes `2^lo, …, 2^hi`.
    pub fn powers_of_two(lo: u32, hi: u32) -> Vec<usize> {
        (lo..=hi).map(|e| 1usize << e).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.sizes.len() < 2 {
            return Err(Error::invalid("a rate sweep needs at least two sizes"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("a rate sweep needs at least one repetition"));
        }
        MechanismConfig::new(self.d, self.k, self.epsilon, self.delta, 0).budget()?;
        Ok(())
    }
}

/// Mean metrics at one sweep size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub m: usize,
    pub repetitions: usize,
    /// Mean of `√C_k · Γ(p_X, p_Y)` over repetitions.
    pub mean_metric: f64,
    pub sd_metric: f64,
    /// Mean bump-family lower estimate of `d_k(p_X, p_Y)`.
    pub mean_lower: f64,
    pub mean_seconds: f64,
}

/// Ordinary least-squares fit of `log y` on `log n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; absent with only two points.
    pub standard_error: Option<f64>,
    pub reliable: bool,
}

/// Output of [`run_rates`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesReport {
    pub spec: ExperimentSpec,
    pub points: Vec<RatePoint>,
    pub metric_fit: Option<SlopeFit>,
    pub lower_fit: Option<SlopeFit>,
    pub skipped: Vec<SkippedPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub n: usize,
    pub reason: String,
}

/// Fits `log y = a + b log x`.
pub fn fit_log_log(xs: &[f64], ys: &[f64]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let count = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / count;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let standard_error = (pts.len() > 2).then(|| {
        let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (sse / (count - 2.0) / sxx).sqrt()
    });
    Some(SlopeFit {
        slope,
        intercept,
        reliable: standard_error.is_some(),
        standard_error,
    })
}

/// Seed for `(point, repetition)`, independent of scheduling order.
pub fn derived_seed(seed: u64, point: usize, repetition: usize) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((point as u64) << 32) | repetition as u64);
    rng.random()
}

/// `n` draws from a fixed three-component Gaussian mixture, clamped to the cube.
pub fn mixture_sample(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let centers = [-0.45, 0.1, 0.55];
    let spreads = [0.2, 0.3, 0.15];
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        let c = rng.random_range(0..centers.len());
        for axis in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            // alternate the sign of the center across axes so components are not collinear
            let center = if axis % 2 == 0 { centers[c] } else { -centers[c] };
            values.push((center + spreads[c] * z).clamp(-1.0, 1.0));
        }
    }
    Dataset::new(d, values)
}

struct Trial {
    point: usize,
    m: usize,
    metric: f64,
    lower: f64,
    seconds: f64,
}

fn run_trial(spec: &ExperimentSpec, point: usize, repetition: usize) -> Result<Trial> {
    let n = spec.sizes[point];
    let seed = derived_seed(spec.seed, point, repetition);
    let data = mixture_sample(n, spec.d, seed)?;
    let mut cfg = MechanismConfig::new(spec.d, spec.k, spec.epsilon, spec.delta, seed ^ 0x9e37_79b9_7f4a_7c15);
    cfg.caps = spec.caps;
    cfg.solver = spec.solver;
    cfg.degree_constant = DEFAULT_DEGREE_CONSTANT;

    let clock = std::time::Instant::now();
    let released = release(&data, &cfg)?;
    let (synthetic, _) = synthesize(&released, &cfg)?;
    let seconds = clock.elapsed().as_secs_f64();

    let m = released.degree();
    let index_set = MomentIndexSet::with_cap(spec.d, m, spec.caps.moments)?;
    let p = DiscreteMeasure::from(&data);
    let q = DiscreteMeasure::from(&synthetic);
    let metric = decay_constant(spec.k).sqrt() * gamma(&p, &q, &index_set, spec.k)?.gamma;
    let cells = bump_cells(m, spec.d);
    let lower = BumpFamily::new(cells, spec.d, spec.k)?.signed_sum_estimate(&p, &q);
    Ok(Trial {
        point,
        m,
        metric,
        lower,
        seconds,
    })
}

/// Bump partition used for the secondary series: as fine as the degree cap
/// allows, with at most 4096 cells in total.
fn bump_cells(m: usize, d: usize) -> usize {
    let max_per_axis = (4096f64.powf(1.0 / d as f64)).floor() as usize;
    m.clamp(2, max_per_axis.max(2))
}

/// Runs every `(size, repetition)` pair as an independent task.
pub fn run_rates(spec: &ExperimentSpec) -> Result<RatesReport> {
    spec.validate()?;
    let tasks: Vec<(usize, usize)> = (0..spec.sizes.len())
        .flat_map(|p| (0..spec.repetitions).map(move |r| (p, r)))
        .collect();
    let results: Vec<(usize, Result<Trial>)> = tasks
        .par_iter()
        .map(|&(p, r)| (p, run_trial(spec, p, r)))
        .collect();

    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for (idx, &n) in spec.sizes.iter().enumerate() {
        let mut trials = Vec::new();
        let mut failure = None;
        for (p, res) in results.iter().filter(|(p, _)| *p == idx) {
            match res {
                Ok(t) => trials.push(t),
                Err(e) => failure = Some(format!("size index {p}: {e}")),
            }
        }
        if let Some(reason) = failure {
            log::warn!("skipping n = {n}: {reason}");
            skipped.push(SkippedPoint { n, reason });
            continue;
        }
        let count = trials.len() as f64;
        let mean = trials.iter().map(|t| t.metric).sum::<f64>() / count;
        let var = trials.iter().map(|t| (t.metric - mean).powi(2)).sum::<f64>() / (count - 1.0).max(1.0);
        points.push(RatePoint {
            n,
            m: trials[0].m,
            repetitions: trials.len(),
            mean_metric: mean,
            sd_metric: var.sqrt(),
            mean_lower: trials.iter().map(|t| t.lower).sum::<f64>() / count,
            mean_seconds: trials.iter().map(|t| t.seconds).sum::<f64>() / count,
        });
        debug_assert!(trials.iter().all(|t| t.point == idx));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let metric_fit = fit_log_log(&xs, &points.iter().map(|p| p.mean_metric).collect::<Vec<_>>());
    let lower_fit = fit_log_log(&xs, &points.iter().map(|p| p.mean_lower).collect::<Vec<_>>());
    if let Some(fit) = &metric_fit {
        if !fit.reliable {
            log::warn!("slope fitted from two points; its standard error is undefined");
        }
    }
    Ok(RatesReport {
        spec: spec.clone(),
        points,
        metric_fit,
        lower_fit,
        skipped,
    })
}

/// Plot data: one row per sweep point.
pub fn write_plot_csv(path: &std::path::Path, report: &RatesReport) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["n", "m", "repetitions", "mean_metric", "sd_metric", "mean_lower", "mean_seconds"])?;
    for p in &report.points {
        writer.write_record([
            p.n.to_string(),
            p.m.to_string(),
            p.repetitions.to_string(),
            p.mean_metric.to_string(),
            p.sd_metric.to_string(),
            p.mean_lower.to_string(),
            p.mean_seconds.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
