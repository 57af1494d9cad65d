//! Localized bump queries on a uniform partition of the cube.
//!
//! `η` is a `C^∞` plateau equal to 1 on `[-1/8, 1/8]` and 0 outside
//! `(-1/4, 1/4)`, built from `ψ(t) = e^{-1/t}`. With `χ(u) = u₁ Π_ℓ η(u_ℓ)` and
//! cells of side `s = 2 / cells`, the bump of cell `t` is
//! `f_t(x) = (s^k / C₀) χ((x − a_t) / s)`, where `C₀` bounds every derivative
//! of `χ` of order `1..=k`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

use super::queries::{multi_indices, SmoothQuery};
use super::DiscreteMeasure;

/// Truncated Taylor series `Σ_j c_j ε^j`.
#[derive(Debug, Clone)]
struct Jet(Vec<f64>);

impl Jet {
    fn variable(x: f64, order: usize) -> Jet {
        let mut c = vec![0.0; order + 1];
        c[0] = x;
        if order > 0 {
            c[1] = 1.0;
        }
        Jet(c)
    }

    fn constant(x: f64, order: usize) -> Jet {
        let mut c = vec![0.0; order + 1];
        c[0] = x;
        Jet(c)
    }

    fn scale(&self, a: f64) -> Jet {
        Jet(self.0.iter().map(|c| a * c).collect())
    }

    fn add(&self, other: &Jet) -> Jet {
        Jet(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    fn mul(&self, other: &Jet) -> Jet {
        let n = self.0.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            for j in 0..n - i {
                out[i + j] += self.0[i] * other.0[j];
            }
        }
        Jet(out)
    }

    fn recip(&self) -> Jet {
        let n = self.0.len();
        let a0 = self.0[0];
        let mut out = vec![0.0; n];
        out[0] = 1.0 / a0;
        for i in 1..n {
            let s: f64 = (1..=i).map(|j| self.0[j] * out[i - j]).sum();
            out[i] = -s / a0;
        }
        Jet(out)
    }

    fn exp(&self) -> Jet {
        let n = self.0.len();
        let mut out = vec![0.0; n];
        out[0] = self.0[0].exp();
        for i in 1..n {
            let s: f64 = (1..=i).map(|j| j as f64 * self.0[j] * out[i - j]).sum();
            out[i] = s / i as f64;
        }
        Jet(out)
    }

    /// `j`-th derivative `j! c_j`.
    fn derivative(&self, j: usize) -> f64 {
        self.0[j] * super::factorial(j as u32)
    }
}

/// Jet of `ψ(t) = e^{-1/t}`; values of `t` this close to 0 give an identically
/// zero jet to working precision.
fn psi_jet(t: &Jet) -> Jet {
    if t.0[0] <= 1e-3 {
        return Jet::constant(0.0, t.0.len() - 1);
    }
    t.recip().scale(-1.0).exp()
}

/// Jet of the smooth step `h(t) = ψ(t) / (ψ(t) + ψ(1 − t))`.
fn step_jet(t: f64, order: usize) -> Jet {
    if t <= 1e-3 {
        return Jet::constant(0.0, order);
    }
    if t >= 1.0 - 1e-3 {
        return Jet::constant(1.0, order);
    }
    let tj = Jet::variable(t, order);
    let one_minus = Jet::constant(1.0, order).add(&tj.scale(-1.0));
    let a = psi_jet(&tj);
    let b = psi_jet(&one_minus);
    a.mul(&a.add(&b).recip())
}

/// Derivatives `η^{(j)}(u)` for `j = 0..=order`.
fn plateau_derivatives(u: f64, order: usize) -> Vec<f64> {
    let au = u.abs();
    let t = 8.0 * (0.25 - au);
    let jet = step_jet(t, order);
    // d/du = −8 sign(u) d/dt
    let chain: f64 = -8.0 * if u < 0.0 { -1.0 } else { 1.0 };
    (0..=order).map(|j| jet.derivative(j) * chain.powi(j as i32)).collect()
}

/// The plateau `η`.
pub fn plateau(u: f64) -> f64 {
    plateau_derivatives(u, 0)[0]
}

/// `sup |η^{(j)}|` and `sup |(u η)^{(j)}|` for `j = 0..=order`, from a dense
/// scan of `[0, 1/4]` (both are even in `u`).
fn derivative_sups(order: usize) -> (Vec<f64>, Vec<f64>) {
    let steps = 40_000;
    let mut plateau_sup = vec![0.0f64; order + 1];
    let mut odd_sup = vec![0.0f64; order + 1];
    for i in 0..=steps {
        let u = 0.25 * i as f64 / steps as f64;
        let eta = plateau_derivatives(u, order);
        for j in 0..=order {
            plateau_sup[j] = plateau_sup[j].max(eta[j].abs());
            let prev = if j > 0 { j as f64 * eta[j - 1] } else { 0.0 };
            odd_sup[j] = odd_sup[j].max((u * eta[j] + prev).abs());
        }
    }
    (plateau_sup, odd_sup)
}

/// Relative margin added to the scanned suprema.
const SUP_MARGIN: f64 = 1e-3;

/// `C₀ = max_{1≤|α|≤k} ‖∂^α χ‖_∞` for `χ(u) = u₁ Π η(u_ℓ)`, cached per `(d, k)`.
pub fn bump_constant(d: usize, k: u32) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u32), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&c) = cache.lock().expect("bump cache poisoned").get(&(d, k)) {
        return c;
    }
    let (plateau_sup, odd_sup) = derivative_sups(k as usize);
    let c0 = multi_indices(d, k)
        .into_iter()
        .map(|alpha| {
            odd_sup[alpha[0] as usize] * alpha[1..].iter().map(|&a| plateau_sup[a as usize]).product::<f64>()
        })
        .fold(0.0, f64::max)
        * (1.0 + SUP_MARGIN);
    cache.lock().expect("bump cache poisoned").insert((d, k), c0);
    c0
}

/// Bumps on the partition of `[-1, 1]^d` into `cells^d` cubes of side `2 / cells`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpFamily {
    d: usize,
    k: u32,
    cells: usize,
    side: f64,
    c0: f64,
}

impl BumpFamily {
    pub fn new(cells: usize, d: usize, k: u32) -> Result<Self> {
        if cells < 2 || d == 0 || k == 0 {
            return Err(Error::invalid("bump family needs cells >= 2, d >= 1, k >= 1"));
        }
        if (cells as u128).checked_pow(d as u32).is_none_or(|m| m > 1 << 24) {
            return Err(Error::invalid("bump family has too many cells"));
        }
        Ok(BumpFamily {
            d,
            k,
            cells,
            side: 2.0 / cells as f64,
            c0: bump_constant(d, k),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    /// Number of bumps `M = cells^d`.
    pub fn len(&self) -> usize {
        self.cells.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell side length.
    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Peak amplitude `s^k / (16 C₀)` reached at [`BumpFamily::peak`].
    pub fn peak_value(&self) -> f64 {
        self.side.powi(self.k as i32) / (16.0 * self.c0)
    }

    pub fn center(&self, t: usize) -> Vec<f64> {
        let mut pos = vec![0.0; self.d];
        let mut rem = t;
        for slot in pos.iter_mut().rev() {
            *slot = -1.0 + ((rem % self.cells) as f64 + 0.5) * self.side;
            rem /= self.cells;
        }
        pos
    }

    /// `x_t^max = a_t + s (1/16, 0, …, 0)`.
    pub fn peak(&self, t: usize) -> Vec<f64> {
        let mut x = self.center(t);
        x[0] += self.side / 16.0;
        x
    }

    /// Index of the cell containing `x` (upper faces belong to the lower cell at `+1`).
    pub fn cell_of(&self, x: &[f64]) -> usize {
        x.iter().fold(0, |acc, &xi| {
            let j = (((xi + 1.0) / self.side).floor() as isize).clamp(0, self.cells as isize - 1) as usize;
            acc * self.cells + j
        })
    }

    /// `f_t(x)`.
    pub fn eval(&self, t: usize, x: &[f64]) -> f64 {
        let center = self.center(t);
        let mut prod = (x[0] - center[0]) / self.side;
        for (xi, ci) in x.iter().zip(&center) {
            let u = (xi - ci) / self.side;
            if u.abs() >= 0.25 {
                return 0.0;
            }
            prod *= plateau(u);
        }
        self.side.powi(self.k as i32) / self.c0 * prod
    }

    /// Bump `t` as a certified query.
    pub fn query(&self, t: usize) -> SmoothQuery {
        let fam = self.clone();
        SmoothQuery::new(format!("bump[{t}]"), self.d, 1.0, move |x| fam.eval(t, x))
    }

    /// `∫ f_t dp` for every `t`, each point touching only its own cell.
    pub fn integrals(&self, p: &DiscreteMeasure) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (x, w) in p.points() {
            let t = self.cell_of(x);
            out[t] += w * self.eval(t, x);
        }
        out
    }

    /// `Σ_t |∫f_t dp − ∫f_t dq|`, the value of the query `Σ_t ±f_t`, which
    /// lies in `F_k` because the supports are disjoint.
    pub fn signed_sum_estimate(&self, p: &DiscreteMeasure, q: &DiscreteMeasure) -> f64 {
        self.integrals(p)
            .iter()
            .zip(self.integrals(q))
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// `max_t |∫f_t dp − ∫f_t dq|`.
    pub fn max_estimate(&self, p: &DiscreteMeasure, q: &DiscreteMeasure) -> f64 {
        self.integrals(p)
            .iter()
            .zip(self.integrals(q))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::finite_difference_max;

    #[test]
    fn jet_matches_closed_forms() {
        let x = 0.37;
        let e = Jet::variable(x, 4).exp();
        for j in 0..=4 {
            assert!((e.derivative(j) - x.exp()).abs() < 1e-12);
        }
        let r = Jet::variable(x, 3).recip();
        assert!((r.derivative(2) - 2.0 / x.powi(3)).abs() < 1e-9);
    }

    #[test]
    fn plateau_shape() {
        assert_eq!(plateau(0.0), 1.0);
        assert_eq!(plateau(0.1), 1.0);
        assert_eq!(plateau(-0.125), 1.0);
        assert_eq!(plateau(0.25), 0.0);
        assert_eq!(plateau(-0.3), 0.0);
        let mid = plateau(0.1875);
        assert!((mid - 0.5).abs() < 1e-12);
        let mut last = 1.0;
        for i in 0..=100 {
            let v = plateau(0.125 + 0.00125 * i as f64);
            assert!(v <= last + 1e-15);
            last = v;
        }
    }

    #[test]
    fn plateau_derivatives_match_differences() {
        let h = 1e-5;
        for &u in &[0.15, 0.19, 0.22, -0.17] {
            let d = plateau_derivatives(u, 2);
            let fd1 = (plateau(u + h) - plateau(u - h)) / (2.0 * h);
            let fd2 = (plateau(u + h) - 2.0 * plateau(u) + plateau(u - h)) / (h * h);
            assert!((d[1] - fd1).abs() < 1e-4 * d[1].abs().max(1.0), "u={u}");
            assert!((d[2] - fd2).abs() < 1e-2 * d[2].abs().max(1.0), "u={u}");
        }
    }

    #[test]
    fn bumps_are_certified_and_localized() {
        for (d, k, cells) in [(1, 1, 2), (1, 2, 4), (1, 3, 3), (2, 1, 2), (2, 2, 2)] {
            let fam = BumpFamily::new(cells, d, k).unwrap();
            for t in 0..fam.len() {
                let a = fam.center(t);
                assert_eq!(fam.eval(t, &a), 0.0);
                let peak = fam.eval(t, &fam.peak(t));
                assert!((peak - fam.peak_value()).abs() < 1e-15);
            }
            let h = fam.side() * 2e-3;
            let probes = if d == 1 { 2001 } else { 61 };
            let t = fam.len() / 2;
            let fd = finite_difference_max(|x| fam.eval(t, x), d, k, probes, h);
            assert!(fd <= 1.05, "d={d} k={k} cells={cells}: {fd}");
        }
    }

    #[test]
    fn signed_sum_dominates_max() {
        let fam = BumpFamily::new(3, 2, 1).unwrap();
        let p = DiscreteMeasure::new(2, fam.peak(0).into_iter().chain(fam.peak(4)).collect(), vec![1.0, 1.0]).unwrap();
        let q = DiscreteMeasure::new(2, fam.center(0).into_iter().chain(fam.center(4)).collect(), vec![1.0, 1.0]).unwrap();
        let sum = fam.signed_sum_estimate(&p, &q);
        assert!((sum - fam.peak_value()).abs() < 1e-15);
        assert!((fam.max_estimate(&p, &q) - fam.peak_value() / 2.0).abs() < 1e-15);
    }
}
