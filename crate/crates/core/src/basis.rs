//! Normalized Chebyshev polynomials on `[-1, 1]^d`.
//!
//! `T̄_0 ≡ 1` and `T̄_n(x) = √2 cos(n arccos x)` for `n ≥ 1`; the multivariate
//! polynomial `T̄_K` is the tensor product over axes. The family is orthonormal
//! under the product arcsine measure `μ_d`, which the tensor Chebyshev–Gauss
//! rule in [`TensorQuadrature`] integrates exactly for low enough degree.
//!
//! Evaluation uses the trigonometric form rather than the three-term
//! recurrence `T_{n+1} = 2x T_n − T_{n−1}`; both agree to rounding, the
//! trigonometric form stays accurate near `x = ±1` for large `n`.

use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::mode_product;

/// Inputs within this distance outside `[-1, 1]` are clamped instead of rejected.
pub const DOMAIN_TOLERANCE: f64 = 1e-12;

/// Default cap on the number of tensor quadrature nodes `N^d`.
pub const DEFAULT_QUADRATURE_CAP: u128 = 1 << 24;

/// Default cap on the number of moments `(m+1)^d − 1`.
pub const DEFAULT_MOMENT_CAP: u128 = 1 << 20;

/// Validates `x` against the domain, clamping values inside the tolerance band.
pub fn clamp_to_domain(x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 + DOMAIN_TOLERANCE {
        return Err(Error::Domain { value: x });
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// One-dimensional normalized Chebyshev polynomial `T̄_n(x)`.
pub fn cheb_1d(n: usize, x: f64) -> Result<f64> {
    let x = clamp_to_domain(x)?;
    Ok(cheb_unchecked(n, x.acos()))
}

#[inline]
fn cheb_unchecked(n: usize, theta: f64) -> f64 {
    if n == 0 {
        1.0
    } else {
        SQRT_2 * (n as f64 * theta).cos()
    }
}

/// Fills `out[j] = T̄_j(x)` for `j < out.len()`. `x` must already be in `[-1, 1]`.
#[inline]
pub(crate) fn cheb_table(x: f64, out: &mut [f64]) {
    let theta = x.acos();
    for (j, slot) in out.iter_mut().enumerate() {
        *slot = cheb_unchecked(j, theta);
    }
}

/// Row-major `(m+1) x points.len()` matrix with entry `[k][j] = T̄_k(points[j])`.
pub(crate) fn cheb_matrix(m: usize, points: &[f64]) -> Vec<f64> {
    let cols = points.len();
    let mut mat = vec![0.0; (m + 1) * cols];
    for (j, &x) in points.iter().enumerate() {
        let theta = x.clamp(-1.0, 1.0).acos();
        for k in 0..=m {
            mat[k * cols + j] = cheb_unchecked(k, theta);
        }
    }
    mat
}

/// Multivariate normalized Chebyshev polynomial `T̄_K(x) = Π T̄_{k_i}(x_i)`.
pub fn cheb_multi(index: &MultiIndex, x: &[f64]) -> Result<f64> {
    if index.dim() != x.len() {
        return Err(Error::invalid(format!(
            "multi-index has dimension {} but point has {}",
            index.dim(),
            x.len()
        )));
    }
    let mut prod = 1.0;
    for (&k, &xi) in index.entries().iter().zip(x) {
        prod *= cheb_1d(k as usize, xi)?;
    }
    Ok(prod)
}

/// A multi-index `K = (k_1, …, k_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `‖K‖₂²` in exact integer arithmetic.
    pub fn norm_sq(&self) -> u64 {
        self.0.iter().map(|&k| u64::from(k) * u64::from(k)).sum()
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    /// Number of non-zero entries.
    pub fn nnz(&self) -> usize {
        self.0.iter().filter(|&&k| k != 0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&k| k == 0)
    }

    pub fn max_entry(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

/// Lexicographic enumeration of `{0, …, m}^d \ {0}`.
///
/// The rank of `K` is its row-major offset in the full `(m+1)^d` tensor minus
/// one, so a full coefficient tensor maps onto moment ranks by dropping entry 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentIndexSet {
    d: usize,
    m: usize,
    norm_sq: Arc<[u64]>,
}

impl MomentIndexSet {
    pub fn new(d: usize, m: usize) -> Result<Self> {
        Self::with_cap(d, m, DEFAULT_MOMENT_CAP)
    }

    pub fn with_cap(d: usize, m: usize, cap: u128) -> Result<Self> {
        if d == 0 || m == 0 {
            return Err(Error::invalid("moment index set needs d >= 1 and m >= 1"));
        }
        let full = checked_pow(m as u128 + 1, d);
        let count = full.map(|f| f - 1);
        match count {
            Some(c) if c <= cap => {}
            _ => {
                return Err(Error::CapExceeded {
                    what: "moment count (m+1)^d - 1",
                    requested: count.unwrap_or(u128::MAX),
                    cap,
                })
            }
        }
        let full = full.unwrap() as usize;
        let side = m + 1;
        let norm_sq: Vec<u64> = (1..full)
            .map(|lin| {
                let mut rem = lin;
                let mut acc = 0u64;
                for _ in 0..d {
                    let k = (rem % side) as u64;
                    rem /= side;
                    acc += k * k;
                }
                acc
            })
            .collect();
        Ok(MomentIndexSet {
            d,
            m,
            norm_sq: norm_sq.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Degree cap `m`.
    pub fn degree(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.norm_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norm_sq.is_empty()
    }

    /// Multi-index at `rank`.
    pub fn index(&self, rank: usize) -> MultiIndex {
        assert!(rank < self.len(), "rank {rank} out of range");
        let side = self.m + 1;
        let mut rem = rank + 1;
        let mut entries = vec![0u32; self.d];
        for slot in entries.iter_mut().rev() {
            *slot = (rem % side) as u32;
            rem /= side;
        }
        MultiIndex(entries)
    }

    /// Rank of `index`, or `None` if it is zero or outside the set.
    pub fn rank_of(&self, index: &MultiIndex) -> Option<usize> {
        if index.dim() != self.d || index.is_zero() || index.max_entry() as usize > self.m {
            return None;
        }
        let side = self.m + 1;
        let lin = index.entries().iter().fold(0usize, |acc, &k| acc * side + k as usize);
        Some(lin - 1)
    }

    /// `‖K‖₂²` for the index at `rank`.
    pub fn norm_sq(&self, rank: usize) -> u64 {
        self.norm_sq[rank]
    }

    pub fn norms_sq(&self) -> &[u64] {
        &self.norm_sq
    }

    /// `‖K‖₂^{-power}` for every rank.
    pub fn inverse_norm_powers(&self, power: f64) -> Vec<f64> {
        self.norm_sq
            .iter()
            .map(|&s| (s as f64).powf(-power / 2.0))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        (0..self.len()).map(move |r| self.index(r))
    }
}

pub(crate) fn checked_pow(base: u128, exp: usize) -> Option<u128> {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Tensor-product Chebyshev–Gauss rule with `N` nodes per axis.
///
/// Nodes are `x_j = cos((2j − 1)π / 2N)`, all weights equal `N^{-d}`. The rule
/// integrates every polynomial of per-axis degree below `2N` exactly under `μ_d`.
#[derive(Debug, Clone)]
pub struct TensorQuadrature {
    d: usize,
    axis_nodes: Vec<f64>,
}

/// `N` Chebyshev–Gauss nodes and `N^d` uniform weights in dimension `d`.
pub fn quadrature_nodes(n: usize, d: usize) -> Result<TensorQuadrature> {
    quadrature_nodes_with_cap(n, d, DEFAULT_QUADRATURE_CAP)
}

pub fn quadrature_nodes_with_cap(n: usize, d: usize, cap: u128) -> Result<TensorQuadrature> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("quadrature needs N >= 1 and d >= 1"));
    }
    let total = checked_pow(n as u128, d);
    match total {
        Some(t) if t <= cap => {}
        _ => {
            return Err(Error::CapExceeded {
                what: "quadrature nodes N^d",
                requested: total.unwrap_or(u128::MAX),
                cap,
            })
        }
    }
    // cos((2j-1)π/2N) written as a sine of the complementary angle keeps the
    // middle node at exactly 0 and the rule exactly antisymmetric.
    let axis_nodes = (1..=n)
        .map(|j| ((n as f64 - 2.0 * j as f64 + 1.0) * FRAC_PI_2 / n as f64).sin())
        .collect();
    Ok(TensorQuadrature { d, axis_nodes })
}

impl TensorQuadrature {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.axis_nodes.len()
    }

    pub fn axis_nodes(&self) -> &[f64] {
        &self.axis_nodes
    }

    /// Total number of nodes `N^d`.
    pub fn len(&self) -> usize {
        self.axis_nodes.len().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Node with row-major linear index `idx`.
    pub fn node(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.node_into(idx, &mut out);
        out
    }

    fn node_into(&self, idx: usize, out: &mut [f64]) {
        let n = self.axis_nodes.len();
        let mut rem = idx;
        for slot in out.iter_mut().rev() {
            *slot = self.axis_nodes[rem % n];
            rem /= n;
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    /// `∫ f dμ_d` approximated by the rule.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        let mut buf = vec![0.0; self.d];
        let mut acc = 0.0;
        for i in 0..self.len() {
            self.node_into(i, &mut buf);
            acc += f(&buf);
        }
        acc * self.weight()
    }
}

/// Chebyshev coefficients `c_K = ⟨f, T̄_K⟩_{L²(μ_d)}` for all `K ∈ {0,…,m}^d`,
/// stored as a row-major `(m+1)^d` tensor (entry 0 is `c_0`).
#[derive(Debug, Clone)]
pub struct ChebyshevExpansion {
    d: usize,
    m: usize,
    coeffs: Vec<f64>,
}

/// Computes the coefficients of `f` up to degree `m` per axis with `nodes`
/// quadrature nodes per axis, evaluating `f` in parallel.
///
/// For polynomial `f` of per-axis degree `≤ m` the result is exact when
/// `nodes > m`; otherwise coefficients carry aliasing error from degrees
/// `≥ 2·nodes − m`.
pub fn expand<F>(f: F, d: usize, m: usize, nodes: usize) -> Result<ChebyshevExpansion>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let rule = expansion_rule(d, m, nodes)?;
    let values: Vec<f64> = (0..rule.len())
        .into_par_iter()
        .map(|i| f(&rule.node(i)))
        .collect();
    finish_expansion(&rule, m, values)
}

/// Sequential variant of [`expand`] for functions that are not `Sync`.
pub fn expand_sequential<F>(f: F, d: usize, m: usize, nodes: usize) -> Result<ChebyshevExpansion>
where
    F: Fn(&[f64]) -> f64,
{
    let rule = expansion_rule(d, m, nodes)?;
    let values: Vec<f64> = rule.nodes().map(|x| f(&x)).collect();
    finish_expansion(&rule, m, values)
}

fn expansion_rule(d: usize, m: usize, nodes: usize) -> Result<TensorQuadrature> {
    if nodes <= m {
        return Err(Error::invalid(format!(
            "expansion to degree {m} needs more than {m} nodes per axis, got {nodes}"
        )));
    }
    quadrature_nodes(nodes, d)
}

fn finish_expansion(rule: &TensorQuadrature, m: usize, values: Vec<f64>) -> Result<ChebyshevExpansion> {
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "function returned a non-finite value at node {:?}",
            rule.node(pos)
        )));
    }
    let n = rule.nodes_per_axis();
    let d = rule.dim();
    let mut transform = cheb_matrix(m, rule.axis_nodes());
    for v in &mut transform {
        *v /= n as f64;
    }
    let mut dims = vec![n; d];
    let mut tensor = values;
    for axis in 0..d {
        tensor = mode_product(&tensor, &dims, axis, &transform, m + 1);
        dims[axis] = m + 1;
    }
    Ok(ChebyshevExpansion { d, m, coeffs: tensor })
}

impl ChebyshevExpansion {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.m
    }

    /// Row-major coefficient tensor of shape `(m+1)^d`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coefficient(&self, index: &MultiIndex) -> Option<f64> {
        if index.dim() != self.d || index.max_entry() as usize > self.m {
            return None;
        }
        let side = self.m + 1;
        let lin = index.entries().iter().fold(0usize, |acc, &k| acc * side + k as usize);
        Some(self.coeffs[lin])
    }

    /// `(K, c_K)` pairs in lexicographic order, including `K = 0`.
    pub fn iter(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        let side = self.m + 1;
        self.coeffs.iter().enumerate().map(move |(lin, &c)| {
            let mut rem = lin;
            let mut entries = vec![0u32; self.d];
            for slot in entries.iter_mut().rev() {
                *slot = (rem % side) as u32;
                rem /= side;
            }
            (MultiIndex(entries), c)
        })
    }

    /// `Σ_K ‖K‖₂^{2k} c_K²` over the stored coefficients.
    pub fn weighted_energy(&self, k: u32) -> f64 {
        self.iter()
            .map(|(idx, c)| (idx.norm_sq() as f64).powi(k as i32) * c * c)
            .sum()
    }

    /// Evaluates the truncated series `Σ_{K ∈ {0..deg}^d} c_K T̄_K(x)`.
    pub fn evaluate_truncated(&self, x: &[f64], deg: usize) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::invalid("point dimension does not match expansion"));
        }
        let deg = deg.min(self.m);
        let side = self.m + 1;
        let mut tables = Vec::with_capacity(self.d);
        for &xi in x {
            let xi = clamp_to_domain(xi)?;
            let mut row = vec![0.0; deg + 1];
            cheb_table(xi, &mut row);
            tables.push(row);
        }
        let mut total = 0.0;
        for (lin, &c) in self.coeffs.iter().enumerate() {
            let mut rem = lin;
            let mut prod = c;
            let mut keep = true;
            for axis in (0..self.d).rev() {
                let k = rem % side;
                rem /= side;
                if k > deg {
                    keep = false;
                    break;
                }
                prod *= tables[axis][k];
            }
            if keep {
                total += prod;
            }
        }
        Ok(total)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.evaluate_truncated(x, self.m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Algebraic Chebyshev polynomials T_n(x) for n ≤ 4, independent of arccos.
    fn t_algebraic(n: usize, x: f64) -> f64 {
        match n {
            0 => 1.0,
            1 => x,
            2 => 2.0 * x * x - 1.0,
            3 => 4.0 * x * x * x - 3.0 * x,
            4 => 8.0 * x.powi(4) - 8.0 * x * x + 1.0,
            _ => unreachable!(),
        }
    }

    fn t_bar_algebraic(n: usize, x: f64) -> f64 {
        if n == 0 {
            1.0
        } else {
            SQRT_2 * t_algebraic(n, x)
        }
    }

    #[test]
    fn cheb_1d_examples() {
        assert_eq!(cheb_1d(0, 0.37).unwrap(), 1.0);
        assert!((cheb_1d(1, 1.0).unwrap() - SQRT_2).abs() < 1e-15);
        assert!((cheb_1d(3, 0.5).unwrap() + SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn cheb_1d_matches_algebraic_form() {
        for n in 0..=4 {
            for i in 0..=40 {
                let x = -1.0 + i as f64 / 20.0;
                assert!((cheb_1d(n, x).unwrap() - t_bar_algebraic(n, x)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn domain_clamp_and_rejection() {
        assert!((cheb_1d(1, 1.0 + 5e-13).unwrap() - SQRT_2).abs() < 1e-15);
        assert!((cheb_1d(1, -1.0 - 5e-13).unwrap() + SQRT_2).abs() < 1e-15);
        assert!(matches!(cheb_1d(1, 1.0 + 1e-9), Err(Error::Domain { .. })));
        assert!(cheb_1d(2, f64::NAN).is_err());
    }

    #[test]
    fn cheb_multi_examples() {
        let k0 = MultiIndex::zero(3);
        assert_eq!(cheb_multi(&k0, &[0.1, -0.7, 0.9]).unwrap(), 1.0);
        let k11 = MultiIndex::new(vec![1, 1]);
        assert!((cheb_multi(&k11, &[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-14);
        let k21 = MultiIndex::new(vec![2, 1]);
        let expected = t_bar_algebraic(2, 0.3) * t_bar_algebraic(1, -0.4);
        assert!((expected - 0.656).abs() < 1e-12);
        assert!((cheb_multi(&k21, &[0.3, -0.4]).unwrap() - expected).abs() < 1e-14);
        assert!(cheb_multi(&k21, &[0.3]).is_err());
    }

    #[test]
    fn multi_index_metrics() {
        let k = MultiIndex::new(vec![3, 0, 4]);
        assert_eq!(k.norm_sq(), 25);
        assert_eq!(k.nnz(), 2);
        assert_eq!(k.norm(), 5.0);
    }

    #[test]
    fn index_set_enumeration() {
        let set = MomentIndexSet::new(2, 2).unwrap();
        assert_eq!(set.len(), 8);
        let listed: Vec<Vec<u32>> = set.iter().map(|k| k.entries().to_vec()).collect();
        assert_eq!(
            listed,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![1, 0],
                vec![1, 1],
                vec![1, 2],
                vec![2, 0],
                vec![2, 1],
                vec![2, 2]
            ]
        );
        for (rank, idx) in set.iter().enumerate() {
            assert_eq!(set.rank_of(&idx), Some(rank));
            assert_eq!(set.norm_sq(rank), idx.norm_sq());
        }
        assert_eq!(set.rank_of(&MultiIndex::zero(2)), None);
        assert_eq!(set, MomentIndexSet::new(2, 2).unwrap());
    }

    #[test]
    fn index_set_cap() {
        assert!(matches!(
            MomentIndexSet::with_cap(3, 10, 1000),
            Err(Error::CapExceeded { requested: 1330, .. })
        ));
        assert_eq!(MomentIndexSet::with_cap(3, 9, 999).unwrap().len(), 999);
    }

    #[test]
    fn single_node_rule() {
        let q = quadrature_nodes(1, 1).unwrap();
        assert_eq!(q.axis_nodes(), &[0.0]);
        assert_eq!(q.weight(), 1.0);
    }

    #[test]
    fn quadrature_orthonormality_1d() {
        let q = quadrature_nodes(16, 1).unwrap();
        for j in 0..=8 {
            for k in 0..=8 {
                // brute-force double loop over nodes
                let mut ip = 0.0;
                for x in q.axis_nodes() {
                    ip += cheb_1d(j, *x).unwrap() * cheb_1d(k, *x).unwrap();
                }
                ip /= 16.0;
                let target = if j == k { 1.0 } else { 0.0 };
                assert!((ip - target).abs() < 1e-12, "j={j} k={k} ip={ip}");
            }
        }
    }

    #[test]
    fn quadrature_orthonormality_2d() {
        let q = quadrature_nodes(8, 2).unwrap();
        let set: Vec<MultiIndex> = (0..16u32).map(|l| MultiIndex::new(vec![l / 4, l % 4])).collect();
        for a in &set {
            for b in &set {
                let ip = q.integrate(|x| cheb_multi(a, x).unwrap() * cheb_multi(b, x).unwrap());
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((ip - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadrature_cap() {
        assert!(matches!(
            quadrature_nodes_with_cap(100, 3, 1_000),
            Err(Error::CapExceeded { .. })
        ));
        assert!(quadrature_nodes(0, 1).is_err());
    }

    #[test]
    fn expand_constant() {
        let e = expand(|_| 1.0, 2, 4, 8).unwrap();
        for (k, c) in e.iter() {
            if k.is_zero() {
                assert!((c - 1.0).abs() < 1e-12);
            } else {
                assert!(c.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn expand_reproduces_basis_element() {
        let target = MultiIndex::new(vec![2, 1]);
        let e = expand(|x| cheb_multi(&target, x).unwrap(), 2, 4, 8).unwrap();
        for (k, c) in e.iter() {
            let want = if k == target { 1.0 } else { 0.0 };
            assert!((c - want).abs() < 1e-12);
        }
    }

    #[test]
    fn expand_bilinear() {
        // x = T̄_1/√2 on each axis, so x1·x2 = T̄_(1,1)/2.
        let e = expand_sequential(|x| x[0] * x[1], 2, 3, 6).unwrap();
        for (k, c) in e.iter() {
            let want = if k.entries() == [1, 1] { 0.5 } else { 0.0 };
            assert!((c - want).abs() < 1e-12);
        }
        assert!((e.evaluate(&[0.3, -0.8]).unwrap() + 0.24).abs() < 1e-12);
    }

    #[test]
    fn expand_rejects_too_few_nodes_and_nan() {
        assert!(expand(|_| 1.0, 1, 4, 4).is_err());
        assert!(expand(|x| if x[0] > 0.0 { f64::NAN } else { 0.0 }, 1, 2, 4).is_err());
    }

    #[test]
    fn boundedness_on_samples() {
        let set = MomentIndexSet::new(3, 4).unwrap();
        let pts = [[1.0, -1.0, 0.3], [0.0, 0.5, -0.99], [-0.2, 0.7, 1.0]];
        for k in set.iter() {
            let bound = 2f64.powf(k.nnz() as f64 / 2.0) * (1.0 + 1e-14);
            for p in &pts {
                assert!(cheb_multi(&k, p).unwrap().abs() <= bound);
            }
        }
    }

    // three-term recurrence T_{n+1} = 2x T_n − T_{n−1}, independent of arccos
    fn t_recurrence(n: usize, x: f64) -> f64 {
        let (mut prev, mut cur) = (1.0, x);
        if n == 0 {
            return prev;
        }
        for _ in 1..n {
            (prev, cur) = (cur, 2.0 * x * cur - prev);
        }
        cur
    }

    proptest::proptest! {
        #[test]
        fn univariate_matches_recurrence(n in 0usize..40, x in -1.0f64..=1.0) {
            let scale = if n == 0 { 1.0 } else { std::f64::consts::SQRT_2 };
            let got = cheb_1d(n, x).unwrap();
            proptest::prop_assert!((got - scale * t_recurrence(n, x)).abs() <= 1e-9);
        }

        #[test]
        fn rank_round_trips(d in 1usize..4, m in 1usize..6, pick in 0usize..1000) {
            let set = MomentIndexSet::new(d, m).unwrap();
            let rank = pick % set.len();
            proptest::prop_assert_eq!(set.rank_of(&set.index(rank)), Some(rank));
        }
    }
}
