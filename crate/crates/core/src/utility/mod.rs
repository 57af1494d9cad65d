//! Utility measurement: the weighted moment distance, the certified upper
//! bound it yields on the smooth-query distance `d_k`, and finite-family
//! lower estimates of `d_k`.
//!
//! `d_k` itself is not computable. Reports carry the certified upper bound and
//! the lower estimate side by side, never a point value.

mod bumps;
mod hard;
mod queries;

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

pub use bumps::{bump_constant, plateau, BumpFamily};
pub use hard::HardInstance;
pub use queries::{finite_difference_max, QueryFamily, SmoothQuery};

use crate::basis::MomentIndexSet;
use crate::error::{Error, Result};
use crate::grid::Dataset;
use crate::mechanism::{weighted_moment_tensor, MomentVector};
use crate::solver::GridDistribution;
use crate::synth::SyntheticDataset;

/// A finitely supported probability measure on `[-1, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    d: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// `points` is row-major with `d` columns; weights are renormalized.
    pub fn new(d: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if d == 0 || points.len() != d * weights.len() || weights.is_empty() {
            return Err(Error::invalid("points and weights do not describe a measure"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("measure weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("measure must have positive mass"));
        }
        Ok(DiscreteMeasure {
            d,
            points,
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn point_mass(x: &[f64]) -> Self {
        DiscreteMeasure {
            d: x.len(),
            points: x.to_vec(),
            weights: vec![1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points.chunks_exact(self.d).zip(self.weights.iter().copied())
    }

    /// `∫ f dp`.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.points().map(|(x, w)| w * f(x)).sum()
    }

    /// Chebyshev moments `∫ T̄_K dp` for every `K` in `index_set`.
    pub fn chebyshev_moments(&self, index_set: &MomentIndexSet) -> Result<MomentVector> {
        if index_set.dim() != self.d {
            return Err(Error::invalid("measure and index set dimensions differ"));
        }
        let full = weighted_moment_tensor(&self.points, &self.weights, self.d, index_set.degree());
        MomentVector::new(index_set.clone(), full[1..].to_vec())
    }
}

impl From<&Dataset> for DiscreteMeasure {
    fn from(data: &Dataset) -> Self {
        let n = data.len();
        DiscreteMeasure {
            d: data.dim(),
            points: data.values().to_vec(),
            weights: vec![1.0 / n as f64; n],
        }
    }
}

impl From<&GridDistribution> for DiscreteMeasure {
    fn from(q: &GridDistribution) -> Self {
        support_measure(q.grid(), q.weights().iter().copied())
    }
}

impl From<&SyntheticDataset> for DiscreteMeasure {
    fn from(s: &SyntheticDataset) -> Self {
        support_measure(s.grid(), s.weights().into_iter())
    }
}

fn support_measure(grid: &crate::grid::Grid, weights: impl Iterator<Item = f64>) -> DiscreteMeasure {
    let mut points = Vec::new();
    let mut kept = Vec::new();
    for (cell, w) in weights.enumerate() {
        if w > 0.0 {
            points.extend(grid.point(cell));
            kept.push(w);
        }
    }
    DiscreteMeasure {
        d: grid.dim(),
        points,
        weights: kept,
    }
}

/// Weighted moment distance `Γ = √(Σ_{K≠0} ‖K‖₂^{-2k} (m_K(p) − m_K(q))²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentDiscrepancy {
    pub gamma: f64,
    pub degree: usize,
    pub k: u32,
}

/// `Γ` between two moment vectors on the same index set.
pub fn gamma_from_moments(a: &MomentVector, b: &MomentVector, k: u32) -> Result<MomentDiscrepancy> {
    if a.index_set() != b.index_set() {
        return Err(Error::invalid("moment vectors use different index sets"));
    }
    let set = a.index_set();
    let sum: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .zip(set.norms_sq())
        .map(|((x, y), &ns)| (x - y) * (x - y) / (ns as f64).powi(k as i32))
        .sum();
    Ok(MomentDiscrepancy {
        gamma: sum.sqrt(),
        degree: set.degree(),
        k,
    })
}

/// `Γ(p, q)` over `K ∈ {0..m}^d \ 0`.
pub fn gamma(p: &DiscreteMeasure, q: &DiscreteMeasure, index_set: &MomentIndexSet, k: u32) -> Result<MomentDiscrepancy> {
    gamma_from_moments(&p.chebyshev_moments(index_set)?, &q.chebyshev_moments(index_set)?, k)
}

/// Pinned absolute constant in the Jackson-type approximation constant
/// `C_k^Jac = (C₁)^k · k! · e^k`.
pub const JACKSON_BASE: f64 = PI;

/// `C_k = e^k · k!`, the coefficient-decay constant.
pub fn decay_constant(k: u32) -> f64 {
    E.powi(k as i32) * factorial(k)
}

/// `C_k^Jac` with the pinned base [`JACKSON_BASE`].
pub fn jackson_constant(k: u32) -> f64 {
    JACKSON_BASE.powi(k as i32) * factorial(k) * E.powi(k as i32)
}

pub(crate) fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Certified upper bound on `d_k`, split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DkBound {
    pub value: f64,
    /// `2 C_k^Jac d / m^k`.
    pub approximation_term: f64,
    /// `√C_k · Γ`.
    pub moment_term: f64,
    pub jackson_constant: f64,
    pub jackson_base: f64,
}

/// `d_k(p, q) ≤ 2 C_k^Jac d / m^k + √C_k Γ`.
pub fn dk_bound(discrepancy: &MomentDiscrepancy, d: usize) -> DkBound {
    let (m, k) = (discrepancy.degree as f64, discrepancy.k);
    let jac = jackson_constant(k);
    let approximation_term = 2.0 * jac * d as f64 / m.powi(k as i32);
    let moment_term = decay_constant(k).sqrt() * discrepancy.gamma;
    DkBound {
        value: approximation_term + moment_term,
        approximation_term,
        moment_term,
        jackson_constant: jac,
        jackson_base: JACKSON_BASE,
    }
}

/// Best lower estimate of `d_k` over a finite query family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerEstimate {
    pub value: f64,
    pub best_query: Option<String>,
}

/// `max_f |∫f dp − ∫f dq|` over `queries`, each of which must be certified in `F_k`.
pub fn dk_lower_estimate(p: &DiscreteMeasure, q: &DiscreteMeasure, queries: &[SmoothQuery]) -> Result<LowerEstimate> {
    let mut best = LowerEstimate {
        value: 0.0,
        best_query: None,
    };
    for query in queries {
        if query.certificate().is_nan() || query.certificate() > 1.0 {
            return Err(Error::invalid(format!(
                "query {} has derivative certificate {} > 1",
                query.name(),
                query.certificate()
            )));
        }
        if query.dim() != p.dim() || query.dim() != q.dim() {
            return Err(Error::invalid(format!("query {} has the wrong dimension", query.name())));
        }
        let gap = (p.integrate(|x| query.eval(x)) - q.integrate(|x| query.eval(x))).abs();
        if gap > best.value || best.best_query.is_none() {
            best = LowerEstimate {
                value: gap,
                best_query: Some(query.name().to_string()),
            };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::cheb_multi;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    fn random_measure(seed: u64, d: usize, len: usize) -> DiscreteMeasure {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let points = (0..len * d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let weights = (0..len).map(|_| rng.random::<f64>() + 0.01).collect();
        DiscreteMeasure::new(d, points, weights).unwrap()
    }

    #[test]
    fn gamma_examples() {
        let set = MomentIndexSet::new(1, 1).unwrap();
        let p = DiscreteMeasure::point_mass(&[-0.5]);
        let q = DiscreteMeasure::point_mass(&[0.5]);
        let g = gamma(&p, &q, &set, 1).unwrap().gamma;
        assert!((g - SQRT_2).abs() < 1e-14);
        assert_eq!(gamma(&p, &p, &set, 1).unwrap().gamma, 0.0);
    }

    #[test]
    fn gamma_matches_double_loop() {
        let (d, m, k) = (2, 3, 2);
        let set = MomentIndexSet::new(d, m).unwrap();
        let p = random_measure(1, d, 7);
        let q = random_measure(2, d, 5);
        let mut sum = 0.0;
        for idx in set.iter() {
            let mp = p.integrate(|x| cheb_multi(&idx, x).unwrap());
            let mq = q.integrate(|x| cheb_multi(&idx, x).unwrap());
            sum += (mp - mq).powi(2) / (idx.norm_sq() as f64).powi(k as i32);
        }
        let g = gamma(&p, &q, &set, k).unwrap().gamma;
        assert!((g - sum.sqrt()).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn gamma_is_a_pseudometric(a in 0u64..500, b in 500u64..1000, c in 1000u64..1500) {
            let set = MomentIndexSet::new(2, 4).unwrap();
            let (p, q, r) = (random_measure(a, 2, 4), random_measure(b, 2, 6), random_measure(c, 2, 3));
            let pq = gamma(&p, &q, &set, 1).unwrap().gamma;
            let qp = gamma(&q, &p, &set, 1).unwrap().gamma;
            let qr = gamma(&q, &r, &set, 1).unwrap().gamma;
            let pr = gamma(&p, &r, &set, 1).unwrap().gamma;
            prop_assert!((pq - qp).abs() < 1e-14);
            prop_assert!(pr <= pq + qr + 1e-13);
        }
    }

    #[test]
    fn bound_examples() {
        let disc = MomentDiscrepancy { gamma: 0.01, degree: 10, k: 1 };
        let b = dk_bound(&disc, 1);
        let want = 2.0 * PI * E / 10.0 + E.sqrt() * 0.01;
        assert!((b.value - want).abs() < 1e-12);
        assert_eq!(b.jackson_base, PI);

        let mut last = f64::INFINITY;
        for m in [4, 8, 16, 1 << 20] {
            let v = dk_bound(&MomentDiscrepancy { gamma: 0.0, degree: m, k: 2 }, 2).value;
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-9);
    }

    #[test]
    fn lower_estimate_examples() {
        let p = DiscreteMeasure::point_mass(&[0.3, -0.2]);
        let q = DiscreteMeasure::point_mass(&[-0.4, 0.1]);
        let linear = SmoothQuery::linear(&[1.0, 0.0]).unwrap();
        let est = dk_lower_estimate(&p, &q, std::slice::from_ref(&linear)).unwrap();
        assert!((est.value - 0.7).abs() < 1e-14);
        assert_eq!(dk_lower_estimate(&p, &p, &[linear]).unwrap().value, 0.0);

        let bad = SmoothQuery::new("steep", 2, 3.0, |x: &[f64]| 3.0 * x[0]);
        assert!(dk_lower_estimate(&p, &q, &[bad]).is_err());
    }

    #[test]
    fn sandwich_on_random_pairs() {
        let set = MomentIndexSet::new(2, 12).unwrap();
        let family = QueryFamily::standard(2, 1);
        for seed in 0..10 {
            let p = random_measure(seed, 2, 30);
            let q = random_measure(seed + 100, 2, 30);
            let disc = gamma(&p, &q, &set, 1).unwrap();
            let upper = dk_bound(&disc, 2).value;
            let lower = dk_lower_estimate(&p, &q, &family).unwrap().value;
            assert!(lower <= upper, "{lower} > {upper}");
        }
    }

    #[test]
    fn measure_conversions_agree() {
        let grid = crate::grid::Grid::new(1, 4).unwrap();
        let q = GridDistribution::new(grid.clone(), vec![0.0, 0.25, 0.25, 0.5]).unwrap();
        let from_q = DiscreteMeasure::from(&q);
        assert_eq!(from_q.len(), 3);
        let syn = SyntheticDataset::new(grid, vec![0, 1, 1, 2]).unwrap();
        assert_eq!(DiscreteMeasure::from(&syn), from_q);
        let data = syn.to_dataset().unwrap();
        let set = MomentIndexSet::new(1, 5).unwrap();
        let g = gamma(&DiscreteMeasure::from(&data), &from_q, &set, 1).unwrap().gamma;
        assert!(g < 1e-14);
    }
}
