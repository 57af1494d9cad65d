//! Sign-indexed families of datasets that are hard for any private mechanism.
//!
//! Each of the `M = cells^d` cells receives `n_t` copies of its center `a_t`.
//! When `θ_t = +1`, the last `b = ⌊βn⌋` of those copies move to the bump peak
//! `x_t^max`, so flipping one sign changes exactly `b` rows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::grid::Dataset;

use super::BumpFamily;

/// One member `X^θ` of the family, with the bumps that separate its members.
#[derive(Debug, Clone)]
pub struct HardInstance {
    theta: Vec<i8>,
    cell_sizes: Vec<usize>,
    moved: usize,
    beta: f64,
    k: u32,
    epsilon: f64,
    c1: f64,
    family: BumpFamily,
    dataset: Dataset,
}

impl HardInstance {
    /// Builds `X^θ` with `β = 2 c₁ / (n ε)`.
    pub fn new(n: usize, d: usize, k: u32, cells: usize, epsilon: f64, c1: f64, theta: Vec<i8>) -> Result<Self> {
        let family = BumpFamily::new(cells, d, k)?;
        let m = family.len();
        if theta.len() != m || theta.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::invalid(format!("theta must hold {m} entries of +1 or -1")));
        }
        if !(epsilon.is_finite() && epsilon > 0.0 && c1.is_finite() && c1 > 0.0) {
            return Err(Error::invalid("epsilon and c1 must be positive"));
        }
        if n < 2 * m {
            return Err(Error::Infeasible(format!("n = {n} is below 2M = {}", 2 * m)));
        }
        let beta = 2.0 * c1 / (n as f64 * epsilon);
        // βn = 2c₁/ε; computing it directly avoids a spurious floor below an integer
        let moved = (2.0 * c1 / epsilon * (1.0 + 1e-12)).floor() as usize;
        let cell_sizes: Vec<usize> = (0..m).map(|t| n / m + usize::from(t < n % m)).collect();
        let smallest = n / m;
        if moved == 0 || moved > smallest {
            return Err(Error::Infeasible(format!(
                "floor(beta n) = {moved} must lie in 1..={smallest}"
            )));
        }

        let mut values = Vec::with_capacity(n * d);
        for (t, (&size, &sign)) in cell_sizes.iter().zip(&theta).enumerate() {
            let center = family.center(t);
            let shifted = if sign == 1 { moved } else { 0 };
            for _ in 0..size - shifted {
                values.extend_from_slice(&center);
            }
            let peak = family.peak(t);
            for _ in 0..shifted {
                values.extend_from_slice(&peak);
            }
        }
        Ok(HardInstance {
            theta,
            cell_sizes,
            moved,
            beta,
            k,
            epsilon,
            c1,
            family,
            dataset: Dataset::new(d, values)?,
        })
    }

    /// Same as [`HardInstance::new`] with signs drawn from `seed`.
    pub fn from_seed(n: usize, d: usize, k: u32, cells: usize, epsilon: f64, c1: f64, seed: u64) -> Result<Self> {
        let m = (cells as u128).pow(d as u32).min(1 << 24) as usize;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let theta = (0..m).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        Self::new(n, d, k, cells, epsilon, c1, theta)
    }

    /// The instance with `θ_t` negated.
    pub fn flipped(&self, t: usize) -> Result<Self> {
        let mut theta = self.theta.clone();
        theta[t] = -theta[t];
        let (n, d, cells) = (self.dataset.len(), self.family.dim(), self.family.cells_per_axis());
        Self::new(n, d, self.k, cells, self.epsilon, self.c1, theta)
    }

    pub fn theta(&self) -> &[i8] {
        &self.theta
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn family(&self) -> &BumpFamily {
        &self.family
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Rows moved to the peak in each `+1` cell, `⌊βn⌋`.
    pub fn moved_rows(&self) -> usize {
        self.moved
    }

    /// Cell populations `n_t`.
    pub fn cell_sizes(&self) -> &[usize] {
        &self.cell_sizes
    }

    /// `τ_t = (⌊βn⌋ / n) f_t(x_t^max)`, the shift of `∫f_t` caused by `θ_t = +1`.
    pub fn tau(&self, t: usize) -> f64 {
        self.moved as f64 / self.dataset.len() as f64 * self.family.eval(t, &self.family.peak(t))
    }
}
