//! Explicit smooth test queries with derivative certificates.
//!
//! Every constructor computes an upper bound on `max_{1≤|α|≤k} ‖∂^α f‖_∞` over
//! `[-1, 1]^d` and, when it exceeds one, rescales `f` so the query lies in `F_k`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::factorial;

type QueryFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A query `f : [-1, 1]^d → ℝ` with a certified derivative bound.
#[derive(Clone)]
pub struct SmoothQuery {
    name: String,
    dim: usize,
    certificate: f64,
    f: Arc<QueryFn>,
}

impl fmt::Debug for SmoothQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothQuery")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("certificate", &self.certificate)
            .finish()
    }
}

impl SmoothQuery {
    /// Wraps `f` with a caller-supplied certificate, taken as is.
    pub fn new<F>(name: impl Into<String>, dim: usize, certificate: f64, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        SmoothQuery {
            name: name.into(),
            dim,
            certificate,
            f: Arc::new(f),
        }
    }

    /// Wraps `f` and divides it by `bound` when `bound > 1`.
    pub fn normalized<F>(name: impl Into<String>, dim: usize, bound: f64, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if bound > 1.0 {
            let scale = 1.0 / bound;
            Self::new(name, dim, 1.0, move |x: &[f64]| scale * f(x))
        } else {
            Self::new(name, dim, bound, f)
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Upper bound on every derivative of order `1..=k`; at most 1 for members of `F_k`.
    pub fn certificate(&self) -> f64 {
        self.certificate
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    /// `⟨v, x⟩`.
    pub fn linear(v: &[f64]) -> Result<Self> {
        if v.is_empty() || v.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("linear query needs finite coefficients"));
        }
        let bound = v.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let coeffs = v.to_vec();
        Ok(Self::normalized(format!("linear{:?}", v), v.len(), bound, move |x| {
            coeffs.iter().zip(x).map(|(c, xi)| c * xi).sum()
        }))
    }

    /// `Π_j x_j^{α_j}`.
    pub fn monomial(exponents: &[u32], k: u32) -> Self {
        let bound = multi_indices(exponents.len(), k)
            .into_iter()
            .filter(|beta| beta.iter().zip(exponents).all(|(b, a)| b <= a))
            .map(|beta| {
                beta.iter()
                    .zip(exponents)
                    .map(|(&b, &a)| factorial(a) / factorial(a - b))
                    .product::<f64>()
            })
            .fold(0.0, f64::max);
        let alpha = exponents.to_vec();
        Self::normalized(format!("monomial{:?}", exponents), exponents.len(), bound, move |x| {
            alpha.iter().zip(x).map(|(&a, xi)| xi.powi(a as i32)).product()
        })
    }

    /// `xᵀ A x` for a row-major `d × d` matrix `A`.
    pub fn quadratic(a: &[f64], d: usize, k: u32) -> Result<Self> {
        if a.len() != d * d || a.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("quadratic query needs a finite d x d matrix"));
        }
        let sym = |i: usize, j: usize| a[i * d + j] + a[j * d + i];
        let first = (0..d)
            .map(|i| (0..d).map(|j| sym(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let second = if k >= 2 {
            (0..d * d).map(|ij| sym(ij / d, ij % d).abs()).fold(0.0, f64::max)
        } else {
            0.0
        };
        let mat = a.to_vec();
        Ok(Self::normalized("quadratic", d, first.max(second), move |x| {
            let mut total = 0.0;
            for i in 0..d {
                for j in 0..d {
                    total += x[i] * mat[i * d + j] * x[j];
                }
            }
            total
        }))
    }

    /// `exp(−‖x − c‖² / (2 s²))`.
    ///
    /// Uses `|He_j(u) e^{−u²/2}| ≤ K √(j!)` (Cramér's inequality) for the 1-d
    /// factors of each partial derivative.
    pub fn gaussian(center: &[f64], width: f64, k: u32) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::invalid("gaussian width must be positive"));
        }
        const CRAMER: f64 = 1.086_435;
        let factor = |j: u32| {
            if j == 0 {
                1.0
            } else {
                CRAMER * factorial(j).sqrt() / width.powi(j as i32)
            }
        };
        let bound = multi_indices(center.len(), k)
            .into_iter()
            .map(|beta| beta.iter().map(|&b| factor(b)).product::<f64>())
            .fold(0.0, f64::max);
        let c = center.to_vec();
        let inv = 1.0 / (2.0 * width * width);
        Ok(Self::normalized(
            format!("gaussian{:?},{width}", center),
            center.len(),
            bound,
            move |x| {
                let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                (-r2 * inv).exp()
            },
        ))
    }

    /// `1 / (1 + exp(−⟨v, x⟩ − b))`.
    pub fn logistic(v: &[f64], bias: f64, k: u32) -> Result<Self> {
        if v.is_empty() || v.iter().chain([&bias]).any(|c| !c.is_finite()) {
            return Err(Error::invalid("logistic query needs finite parameters"));
        }
        let vmax = v.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let bound = (1..=k)
            .map(|j| logistic_derivative_sup(j) * vmax.powi(j as i32))
            .fold(0.0, f64::max);
        let coeffs = v.to_vec();
        Ok(Self::normalized(format!("logistic{:?},{bias}", v), v.len(), bound, move |x| {
            let z: f64 = coeffs.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>() + bias;
            1.0 / (1.0 + (-z).exp())
        }))
    }
}

/// `sup_z |σ^{(j)}(z)|` for the logistic function, via `σ^{(j)} = P_j(σ)`.
fn logistic_derivative_sup(j: u32) -> f64 {
    // coefficients of P_j in powers of s; P_0 = s, P_{j+1} = P_j'(s) s (1 − s)
    let mut poly = vec![0.0, 1.0];
    for _ in 0..j {
        let deriv: Vec<f64> = poly.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect();
        let mut next = vec![0.0; deriv.len() + 2];
        for (i, c) in deriv.iter().enumerate() {
            next[i + 1] += c;
            next[i + 2] -= c;
        }
        poly = next;
    }
    let steps = 200_000;
    let sup = (0..=steps)
        .map(|i| {
            let s = i as f64 / steps as f64;
            poly.iter().rev().fold(0.0, |acc, c| acc * s + c).abs()
        })
        .fold(0.0, f64::max);
    sup * (1.0 + 1e-6)
}

/// All `α ∈ ℕ^d` with `1 ≤ |α| ≤ k`.
pub(crate) fn multi_indices(d: usize, k: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; d];
    fn rec(axis: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if axis == cur.len() {
            if cur.iter().any(|&a| a > 0) {
                out.push(cur.clone());
            }
            return;
        }
        for a in 0..=left {
            cur[axis] = a;
            rec(axis + 1, left - a, cur, out);
        }
        cur[axis] = 0;
    }
    rec(0, k, &mut cur, &mut out);
    out
}

/// Largest central-difference estimate of `|∂^α f|` over `1 ≤ |α| ≤ k` on a
/// uniform probe grid of `probes` points per axis inside `[-1 + kh, 1 − kh]^d`.
pub fn finite_difference_max<F: Fn(&[f64]) -> f64>(f: F, d: usize, k: u32, probes: usize, h: f64) -> f64 {
    let lo = -1.0 + k as f64 * h;
    let span = 2.0 - 2.0 * k as f64 * h;
    let coord = |i: usize| {
        if probes == 1 {
            0.0
        } else {
            lo + span * i as f64 / (probes - 1) as f64
        }
    };
    let total = probes.pow(d as u32);
    let alphas = multi_indices(d, k);
    let mut point = vec![0.0; d];
    let mut best = 0.0f64;
    for cell in 0..total {
        let mut rem = cell;
        for slot in point.iter_mut().rev() {
            *slot = coord(rem % probes);
            rem /= probes;
        }
        for alpha in &alphas {
            best = best.max(central_difference(&f, &point, alpha, h).abs());
        }
    }
    best
}

/// Tensor-product central difference `Π_j δ_h^{α_j} f(x) / h^{|α|}`.
fn central_difference<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], alpha: &[u32], h: f64) -> f64 {
    let d = x.len();
    let counts: Vec<usize> = alpha.iter().map(|&a| a as usize + 1).collect();
    let total: usize = counts.iter().product();
    let mut probe = x.to_vec();
    let mut sum = 0.0;
    for flat in 0..total {
        let mut rem = flat;
        let mut weight = 1.0;
        for axis in (0..d).rev() {
            let i = rem % counts[axis];
            rem /= counts[axis];
            let a = alpha[axis];
            weight *= binomial(a, i as u32) * if i.is_multiple_of(2) { 1.0 } else { -1.0 };
            probe[axis] = x[axis] + (a as f64 / 2.0 - i as f64) * h;
        }
        sum += weight * f(&probe);
    }
    let order: u32 = alpha.iter().sum();
    sum / h.powi(order as i32)
}

fn binomial(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Named query families selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryFamily {
    Linear,
    Monomial,
    Quadratic,
    Gaussian,
    Logistic,
    Bump,
}

impl QueryFamily {
    pub const ALL: [QueryFamily; 6] = [
        QueryFamily::Linear,
        QueryFamily::Monomial,
        QueryFamily::Quadratic,
        QueryFamily::Gaussian,
        QueryFamily::Logistic,
        QueryFamily::Bump,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QueryFamily::Linear => "linear",
            QueryFamily::Monomial => "monomial",
            QueryFamily::Quadratic => "quadratic",
            QueryFamily::Gaussian => "gaussian",
            QueryFamily::Logistic => "logistic",
            QueryFamily::Bump => "bump",
        }
    }

    /// A fixed, deterministic set of queries from this family.
    ///
    /// The bump family is handled by [`super::BumpFamily`] and yields the
    /// bumps of a two-cells-per-axis partition here.
    pub fn queries(self, d: usize, k: u32) -> Vec<SmoothQuery> {
        let axes = |scale: f64| {
            (0..d).map(move |i| {
                let mut v = vec![0.0; d];
                v[i] = scale;
                v
            })
        };
        match self {
            QueryFamily::Linear => axes(1.0)
                .chain(std::iter::once(vec![1.0; d]))
                .filter_map(|v| SmoothQuery::linear(&v).ok())
                .collect(),
            QueryFamily::Monomial => multi_indices(d, 3.min(2 * d as u32))
                .into_iter()
                .take(64)
                .map(|alpha| SmoothQuery::monomial(&alpha, k))
                .collect(),
            QueryFamily::Quadratic => {
                let identity: Vec<f64> = (0..d * d).map(|ij| f64::from(ij / d == ij % d)).collect();
                let ones = vec![1.0; d * d];
                let alternating: Vec<f64> = (0..d * d)
                    .map(|ij| if (ij / d + ij % d).is_multiple_of(2) { 1.0 } else { -1.0 })
                    .collect();
                [identity, ones, alternating]
                    .iter()
                    .filter_map(|a| SmoothQuery::quadratic(a, d, k).ok())
                    .collect()
            }
            QueryFamily::Gaussian => {
                let lattice = if d <= 3 { 3usize.pow(d as u32) } else { 1 };
                (0..lattice)
                    .flat_map(|idx| {
                        let center: Vec<f64> = if lattice == 1 {
                            vec![0.0; d]
                        } else {
                            let mut rem = idx;
                            (0..d)
                                .map(|_| {
                                    let c = (rem % 3) as f64 * 0.5 - 0.5;
                                    rem /= 3;
                                    c
                                })
                                .collect()
                        };
                        [0.3, 0.7]
                            .into_iter()
                            .filter_map(move |w| SmoothQuery::gaussian(&center, w, k).ok())
                    })
                    .collect()
            }
            QueryFamily::Logistic => axes(4.0)
                .chain(std::iter::once(vec![2.0; d]))
                .flat_map(|v| [-0.5, 0.0, 0.5].into_iter().filter_map(move |b| SmoothQuery::logistic(&v, b, k).ok()))
                .collect(),
            QueryFamily::Bump => super::BumpFamily::new(2, d, k)
                .map(|fam| (0..fam.len()).map(|t| fam.query(t)).collect())
                .unwrap_or_default(),
        }
    }

    /// Every family except the bumps.
    pub fn standard(d: usize, k: u32) -> Vec<SmoothQuery> {
        [
            QueryFamily::Linear,
            QueryFamily::Monomial,
            QueryFamily::Quadratic,
            QueryFamily::Gaussian,
            QueryFamily::Logistic,
        ]
        .into_iter()
        .flat_map(|fam| fam.queries(d, k))
        .collect()
    }
}

impl fmt::Display for QueryFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QueryFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QueryFamily::ALL
            .into_iter()
            .find(|fam| fam.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown query family {s:?}")))
    }
}
