//! Band-limited functions on S² stored by their harmonic coefficients.
//!
//! Coefficients are taken with respect to the *probability-orthonormal* basis
//! Ỹ_{k,j} = √(4π) · Y_{k,j}, which is orthonormal under the normalized
//! surface measure dω/4π (so Ỹ_{0,0} ≡ 1). With this convention the root sum
//! of squares of the coefficients is exactly the L²(ρ) norm for the uniform
//! design, Parseval needs no constants, and the RKHS bound ‖K_n*h‖_K ≤ ‖h‖_∞
//! holds as stated. The pointwise basis in [`crate::special`] stays
//! dω-orthonormal; [`SpectralFunction::eval`] carries the √(4π) bridge.

use crate::error::{Error, Result};
use crate::special::{flat_index, harmonic_basis_upto, SpherePoint};

/// Scale between the dω-orthonormal and probability-orthonormal bases.
pub fn basis_scale() -> f64 {
    (4.0 * std::f64::consts::PI).sqrt()
}

/// A band-limited function on S² (d = 2 basis).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFunction {
    /// Flat coefficient table in [`flat_index`] layout, length (band+1)².
    coeffs: Vec<f64>,
    band: usize,
}

impl SpectralFunction {
    /// The zero function with the given band limit.
    pub fn zero(band: usize) -> Self {
        Self { coeffs: vec![0.0; (band + 1) * (band + 1)], band }
    }

    /// Builds from a flat coefficient table of length (band+1)².
    pub fn from_flat(coeffs: Vec<f64>, band: usize) -> Result<Self> {
        if coeffs.len() != (band + 1) * (band + 1) {
            return Err(Error::Domain(format!(
                "coefficient table has length {}, band {band} needs {}",
                coeffs.len(),
                (band + 1) * (band + 1)
            )));
        }
        Ok(Self { coeffs, band })
    }

    /// A single unit coefficient at (k, j); j ∈ 0..2k+1.
    pub fn basis_vector(k: usize, j: usize) -> Self {
        let mut f = Self::zero(k);
        f.set(k, j, 1.0);
        f
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn coeffs_flat(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        if k > self.band {
            return 0.0;
        }
        self.coeffs[flat_index(k, j)]
    }

    pub fn set(&mut self, k: usize, j: usize, value: f64) {
        assert!(k <= self.band, "degree {k} beyond band {}", self.band);
        self.coeffs[flat_index(k, j)] = value;
    }

    /// Iterates (k, j, coefficient) over all stored entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=self.band).flat_map(move |k| {
            (0..2 * k + 1).map(move |j| (k, j, self.coeffs[flat_index(k, j)]))
        })
    }

    /// L² norm under the normalized surface measure (root sum of squares).
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Squared L²(ρ)-distance to another spectral function (Parseval).
    pub fn l2_distance_sq(&self, other: &SpectralFunction) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut sum = 0.0;
        for i in 0..n {
            let a = self.coeffs.get(i).copied().unwrap_or(0.0);
            let b = other.coeffs.get(i).copied().unwrap_or(0.0);
            sum += (a - b) * (a - b);
        }
        sum
    }

    /// Pointwise evaluation at x ∈ S².
    pub fn eval(&self, x: &SpherePoint) -> Result<f64> {
        let basis = harmonic_basis_upto(x, self.band)?;
        Ok(self.eval_with_basis(&basis))
    }

    /// Evaluation given precomputed dω-orthonormal basis values at the point
    /// (at least as many entries as this function's coefficient table).
    pub fn eval_with_basis(&self, basis: &[f64]) -> f64 {
        debug_assert!(basis.len() >= self.coeffs.len());
        let scale = basis_scale();
        scale
            * self
                .coeffs
                .iter()
                .zip(basis)
                .map(|(c, b)| c * b)
                .sum::<f64>()
    }

    /// Drops any trailing degrees above `band` (coefficients there are lost).
    pub fn truncated_to_band(&self, band: usize) -> Self {
        let band = band.min(self.band);
        let coeffs = self.coeffs[..(band + 1) * (band + 1)].to_vec();
        Self { coeffs, band }
    }

    /// Highest degree carrying a nonzero coefficient, or None for the zero function.
    pub fn effective_band(&self) -> Option<usize> {
        (0..=self.band)
            .rev()
            .find(|&k| (0..2 * k + 1).any(|j| self.coeffs[flat_index(k, j)] != 0.0))
    }

    /// Independent standard-normal coefficients at every (k, j) up to `band`.
    pub fn random_normal(band: usize, seed: u64) -> Self {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..(band + 1) * (band + 1))
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        Self { coeffs, band }
    }

    /// Max |f| over a θ-φ grid fine enough for the band limit (both poles included).
    pub fn sup_norm_estimate(&self) -> f64 {
        let band = self.band.max(1);
        let n_theta = (6 * band).clamp(64, 512);
        let n_phi = 2 * n_theta;
        let mut sup: f64 = 0.0;
        for it in 0..=n_theta {
            let theta = std::f64::consts::PI * it as f64 / n_theta as f64;
            let (st, ct) = theta.sin_cos();
            let n_phi_here = if st == 0.0 { 1 } else { n_phi };
            for ip in 0..n_phi_here {
                let phi = 2.0 * std::f64::consts::PI * ip as f64 / n_phi as f64;
                let x = SpherePoint::new(vec![st * phi.cos(), st * phi.sin(), ct])
                    .expect("unit by construction");
                sup = sup.max(self.eval(&x).expect("S² point").abs());
            }
        }
        sup
    }
}
