//! The needlet kernel K_n: zonal evaluation, Gram matrices, convolution,
//! RKHS inner products, and localization diagnostics.
//!
//! `K_n(x·x') = Σ_k η(k/n) (D_k^d / |S^d|) P_k^{d+1}(x·x')`. The window
//! vanishes at and beyond k = 2n, so the stored zonal coefficients run over
//! k = 0 .. 2n-1 and the kernel is band-limited to that range.

use crate::error::{Error, Result};
use crate::quadrature::SphericalQuadrature;
use crate::special::{harmonic_dim, sphere_area, SpherePoint, COS_DOMAIN_SLACK};
use crate::spectral::SpectralFunction;
use crate::window::AdmissibleWindow;
use nalgebra::DMatrix;

/// A needlet kernel of frequency n on S^d with precomputed zonal coefficients.
#[derive(Clone, Debug)]
pub struct NeedletKernel {
    n: usize,
    d: usize,
    window: AdmissibleWindow,
    /// c_k = η(k/n) D_k^d / |S^d| for k = 0 .. 2n-1.
    coeffs: Vec<f64>,
}

impl NeedletKernel {
    pub fn new(n: usize, d: usize, window: AdmissibleWindow) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("frequency n must be positive".into()));
        }
        if d == 0 {
            return Err(Error::Domain("sphere dimension d must be positive".into()));
        }
        let area = sphere_area(d);
        let coeffs = (0..2 * n)
            .map(|k| window.eval(k as f64 / n as f64) * harmonic_dim(k, d) as f64 / area)
            .collect();
        Ok(Self { n, d, window, coeffs })
    }

    pub fn frequency(&self) -> usize {
        self.n
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn window(&self) -> &AdmissibleWindow {
        &self.window
    }

    /// Highest degree with a (possibly) nonzero coefficient: 2n - 1.
    pub fn band(&self) -> usize {
        2 * self.n - 1
    }

    /// The zonal coefficients c_k, k = 0 .. 2n-1.
    pub fn zonal_coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// η(k/n), the spectral multiplier at degree k.
    pub fn window_weight(&self, k: usize) -> f64 {
        self.window.eval(k as f64 / self.n as f64)
    }

    /// K_n(1) = Σ c_k, the constant diagonal of the Gram matrix.
    pub fn diagonal(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// Evaluates K_n at t = x·x' by one fused Clenshaw pass over the
    /// three-term recurrence of `P_k^{d+1}`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t.abs() <= 1.0 + COS_DOMAIN_SLACK) {
            return Err(Error::Domain(format!("argument t = {t} outside [-1, 1]")));
        }
        Ok(self.eval_clamped(t.clamp(-1.0, 1.0)))
    }

    #[inline]
    fn eval_clamped(&self, t: f64) -> f64 {
        // Clenshaw downward recurrence: with P_{k+1} = α_k P_k + β_k P_{k-1},
        // α_k = (2k+d-1)/(k+d-1) t and β_k = -k/(k+d-1), the sum Σ c_k P_k
        // collapses to b_0 because φ_1 - α_0 φ_0 = t - t = 0.
        let d = self.d as f64;
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for k in (0..self.coeffs.len()).rev() {
            let kf = k as f64;
            let alpha = (2.0 * kf + d - 1.0) / (kf + d - 1.0) * t;
            let beta_next = -(kf + 1.0) / (kf + d);
            let b0 = self.coeffs[k] + alpha * b1 + beta_next * b2;
            b2 = b1;
            b1 = b0;
        }
        b1
    }

    /// Gram matrix A_ij = K_n(x_i·x_j); symmetric by construction, each
    /// unordered pair evaluated once. Unit norm is enforced by [`SpherePoint`].
    pub fn gram(&self, points: &[SpherePoint]) -> Result<DMatrix<f64>> {
        for p in points {
            if p.dim() != self.d {
                return Err(Error::UnsupportedDimension {
                    d: p.dim(),
                    context: "gram point dimension differs from kernel",
                });
            }
        }
        let m = points.len();
        let mut a = DMatrix::zeros(m, m);
        let diag = self.diagonal();
        for i in 0..m {
            a[(i, i)] = diag;
            for j in (i + 1)..m {
                let v = self.eval_clamped(points[i].dot(&points[j]).clamp(-1.0, 1.0));
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        Ok(a)
    }

    /// Spectral convolution: (K_n * f)^(k,j) = η(k/n) f̂_{k,j}.
    ///
    /// Exact identity on polynomials: degrees ≤ n pass through unchanged
    /// (reproducing property), degrees ≥ 2n vanish.
    pub fn convolve(&self, f: &SpectralFunction) -> SpectralFunction {
        let band = f.band().min(self.band());
        let mut g = f.truncated_to_band(band);
        for k in 0..=band {
            let w = self.window_weight(k);
            for j in 0..2 * k + 1 {
                g.set(k, j, w * f.get(k, j));
            }
        }
        g
    }

    /// Quadrature approximation of K_n * f(x) = ∫ K_n(x·x') f(x') dω(x').
    ///
    /// When the integrand's band limit is declared, the rule must be exact on
    /// Π_{band + 2n}; with f polynomial the result is then exact up to rounding.
    pub fn convolve_pointwise(
        &self,
        f: impl Fn(&SpherePoint) -> f64,
        f_band: Option<usize>,
        quad: &SphericalQuadrature,
        x: &SpherePoint,
    ) -> Result<f64> {
        if let Some(band) = f_band {
            let required = band + 2 * self.n;
            if quad.exact_degree < required {
                return Err(Error::InsufficientQuadrature {
                    available: quad.exact_degree,
                    required,
                });
            }
        }
        let mut acc = 0.0;
        for (node, &w) in quad.nodes.iter().zip(&quad.weights) {
            let t = x.dot(node).clamp(-1.0, 1.0);
            acc += w * self.eval_clamped(t) * f(node);
        }
        Ok(acc)
    }

    /// RKHS inner product ⟨f, g⟩_{K_n} = Σ η(k/n)⁻¹ f̂_{k,j} ĝ_{k,j}.
    ///
    /// Defined on the span of degrees where the window is positive; a nonzero
    /// coefficient at a degree with η(k/n) = 0 is a degenerate-degree error.
    pub fn rkhs_inner(&self, f: &SpectralFunction, g: &SpectralFunction) -> Result<f64> {
        for h in [f, g] {
            for (k, _, c) in h.iter() {
                if c != 0.0 && self.window_weight(k) == 0.0 {
                    return Err(Error::DegenerateDegree { degree: k });
                }
            }
        }
        let band = f.band().min(g.band());
        let mut acc = 0.0;
        for k in 0..=band {
            let w = self.window_weight(k);
            if w == 0.0 {
                continue;
            }
            let mut dot = 0.0;
            for j in 0..2 * k + 1 {
                dot += f.get(k, j) * g.get(k, j);
            }
            acc += dot / w;
        }
        Ok(acc)
    }

    /// Squared RKHS norm of f.
    pub fn rkhs_norm_sq(&self, f: &SpectralFunction) -> Result<f64> {
        self.rkhs_inner(f, f)
    }

    /// Measured kernel magnitudes |K_n(cos θ)| together with the decay ratio
    /// |K_n(cos θ)| (1 + nθ)^k / n^d, for checking uniformity across n.
    pub fn localization_profile(
        &self,
        thetas: &[f64],
        decay_order: u32,
    ) -> Vec<LocalizationSample> {
        let nf = self.n as f64;
        let scale = nf.powi(self.d as i32);
        thetas
            .iter()
            .map(|&theta| {
                let magnitude = self.eval_clamped(theta.cos().clamp(-1.0, 1.0)).abs();
                let bound_ratio = magnitude * (1.0 + nf * theta).powi(decay_order as i32) / scale;
                LocalizationSample { theta, magnitude, bound_ratio }
            })
            .collect()
    }

    /// Spectral representation of the kernel section K_n(x₀, ·) on S².
    pub fn section(&self, x0: &SpherePoint) -> Result<SpectralFunction> {
        if self.d != 2 {
            return Err(Error::UnsupportedDimension {
                d: self.d,
                context: "kernel sections need the S² basis",
            });
        }
        let basis = crate::special::harmonic_basis_upto(x0, self.band())?;
        let scale = crate::spectral::basis_scale();
        let mut f = SpectralFunction::zero(self.band());
        for k in 0..=self.band() {
            let w = self.window_weight(k);
            for j in 0..2 * k + 1 {
                // dω coefficient is η(k/n) Y_{k,j}(x₀); divide by √4π to store
                // in the probability-orthonormal convention.
                f.set(k, j, w * basis[crate::special::flat_index(k, j)] / scale);
            }
        }
        Ok(f)
    }
}

/// One row of a localization profile table.
#[derive(Clone, Copy, Debug)]
pub struct LocalizationSample {
    pub theta: f64,
    pub magnitude: f64,
    pub bound_ratio: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{legendre, real_harmonic_basis};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn bump_kernel(n: usize, d: usize) -> NeedletKernel {
        NeedletKernel::new(n, d, AdmissibleWindow::smooth_bump()).unwrap()
    }

    fn random_points(m: usize, seed: u64) -> Vec<SpherePoint> {
        crate::simulation::sample_design(crate::simulation::SamplingDesign::Uniform, m, seed)
    }

    // Term-by-term oracle for the zonal sum.
    fn brute_force_eval(kernel: &NeedletKernel, t: f64) -> f64 {
        kernel
            .zonal_coeffs()
            .iter()
            .enumerate()
            .map(|(k, &c)| c * legendre(k, kernel.dimension(), t).unwrap())
            .sum()
    }

    #[test]
    fn k1_closed_form() {
        // With η(0) = η(1) = 1 and η(2) = 0, K_1(t) = (1 + 3t) / (4π).
        let kernel = bump_kernel(1, 2);
        for t in [-1.0, -0.3, 0.0, 0.5, 1.0] {
            assert_abs_diff_eq!(
                kernel.eval(t).unwrap(),
                (1.0 + 3.0 * t) / (4.0 * PI),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn coefficient_invariants() {
        for (n, d) in [(1, 2), (4, 2), (8, 3), (16, 2)] {
            let kernel = bump_kernel(n, d);
            assert_eq!(kernel.zonal_coeffs().len(), 2 * n);
            assert_abs_diff_eq!(
                kernel.zonal_coeffs()[0],
                1.0 / sphere_area(d),
                epsilon = 1e-15
            );
            assert!(kernel.zonal_coeffs().iter().all(|&c| c >= 0.0));
        }
    }

    #[test]
    fn eval_at_one_is_coefficient_sum() {
        let kernel = bump_kernel(6, 2);
        assert_abs_diff_eq!(kernel.eval(1.0).unwrap(), kernel.diagonal(), epsilon = 1e-12);
    }

    #[test]
    fn eval_matches_brute_force_sum() {
        let kernel = bump_kernel(8, 2);
        let t = 0.1f64.cos();
        assert_abs_diff_eq!(kernel.eval(t).unwrap(), brute_force_eval(&kernel, t), epsilon = 1e-12);
        for t in [-0.99, -0.5, 0.0, 0.37, 0.999] {
            assert_abs_diff_eq!(
                kernel.eval(t).unwrap(),
                brute_force_eval(&kernel, t),
                epsilon = 1e-11
            );
        }
        // Also for d = 3.
        let kernel = bump_kernel(5, 3);
        for t in [-0.8, 0.2, 0.9] {
            assert_abs_diff_eq!(
                kernel.eval(t).unwrap(),
                brute_force_eval(&kernel, t),
                epsilon = 1e-11
            );
        }
    }

    #[test]
    fn eval_domain_error() {
        let kernel = bump_kernel(2, 2);
        assert!(kernel.eval(1.5).is_err());
        assert!(kernel.eval(-1.0 - 1e-10).is_err());
    }

    #[test]
    fn gram_single_point_and_antipodal() {
        let kernel = bump_kernel(4, 2);
        let p = SpherePoint::xyz(0.0, 0.0, 1.0).unwrap();
        let a = kernel.gram(std::slice::from_ref(&p)).unwrap();
        assert_eq!(a.nrows(), 1);
        assert_abs_diff_eq!(a[(0, 0)], kernel.diagonal(), epsilon = 1e-13);

        let q = SpherePoint::xyz(0.0, 0.0, -1.0).unwrap();
        let a = kernel.gram(&[p, q]).unwrap();
        let alternating: f64 = kernel
            .zonal_coeffs()
            .iter()
            .enumerate()
            .map(|(k, &c)| if k % 2 == 0 { c } else { -c })
            .sum();
        assert_abs_diff_eq!(a[(0, 1)], alternating, epsilon = 1e-12);
        assert_eq!(a[(0, 1)], a[(1, 0)]);
    }

    #[test]
    fn gram_is_positive_semidefinite() {
        let kernel = bump_kernel(4, 2);
        let points = random_points(20, 5);
        let a = kernel.gram(&points).unwrap();
        let eig = a.symmetric_eigen();
        let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &e| m.min(e));
        assert!(min >= -1e-8, "min eigenvalue {min}");
    }

    #[test]
    fn convolve_reproduces_low_degrees() {
        let kernel = bump_kernel(8, 2);
        let f = SpectralFunction::random_normal(8, 3);
        let g = kernel.convolve(&f);
        assert_eq!(g, f); // η is exactly 1 on [0, 1]
    }

    #[test]
    fn convolve_kills_and_scales_high_degrees() {
        let kernel = bump_kernel(8, 2);
        let f = SpectralFunction::basis_vector(16, 0);
        assert!(kernel.convolve(&f).effective_band().is_none());

        let f = SpectralFunction::basis_vector(12, 4);
        let g = kernel.convolve(&f);
        assert_abs_diff_eq!(g.get(12, 4), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn convolve_band_limit() {
        let kernel = bump_kernel(4, 2);
        let f = SpectralFunction::random_normal(20, 9);
        let g = kernel.convolve(&f);
        assert!(g.band() <= 7);
        assert!(g.effective_band().unwrap_or(0) <= 7);
    }

    #[test]
    fn convolve_pointwise_examples() {
        let kernel = bump_kernel(8, 2);
        let x = SpherePoint::from_unnormalized(vec![0.2, -0.7, 0.4]).unwrap();

        // Constants are reproduced.
        let quad = SphericalQuadrature::product_rule(16);
        let v = kernel.convolve_pointwise(|_| 1.0, Some(0), &quad, &x).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-10);

        // Y_{2,1} lies in Π_8, so it is reproduced.
        let quad = SphericalQuadrature::product_rule(2 + 16);
        let f = |p: &SpherePoint| real_harmonic_basis(2, p).unwrap()[0];
        let v = kernel.convolve_pointwise(f, Some(2), &quad, &x).unwrap();
        assert_abs_diff_eq!(v, f(&x), epsilon = 1e-10);

        // Y_{12,1} sits at η(1.5) = 1/2.
        let quad = SphericalQuadrature::product_rule(12 + 16);
        let f = |p: &SpherePoint| real_harmonic_basis(12, p).unwrap()[0];
        let v = kernel.convolve_pointwise(f, Some(12), &quad, &x).unwrap();
        assert_abs_diff_eq!(v, 0.5 * f(&x), epsilon = 1e-10);
    }

    #[test]
    fn convolve_pointwise_checks_quadrature_degree() {
        let kernel = bump_kernel(8, 2);
        let quad = SphericalQuadrature::product_rule(10);
        let x = SpherePoint::north_pole(2);
        assert!(matches!(
            kernel.convolve_pointwise(|_| 1.0, Some(4), &quad, &x),
            Err(Error::InsufficientQuadrature { .. })
        ));
    }

    #[test]
    fn convolve_pointwise_agrees_with_spectral() {
        let kernel = bump_kernel(4, 2);
        let f = SpectralFunction::random_normal(10, 21);
        let g = kernel.convolve(&f);
        let quad = SphericalQuadrature::product_rule(10 + 8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let x = SpherePoint::from_unnormalized(vec![
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            ])
            .unwrap();
            let pointwise = kernel
                .convolve_pointwise(|p| f.eval(p).unwrap(), Some(10), &quad, &x)
                .unwrap();
            assert_abs_diff_eq!(pointwise, g.eval(&x).unwrap(), epsilon = 1e-10);
        }
    }

    #[test]
    fn rkhs_inner_examples() {
        let kernel = bump_kernel(8, 2);
        // Unit coefficient at k ≤ n: η = 1.
        let f = SpectralFunction::basis_vector(5, 2);
        assert_abs_diff_eq!(kernel.rkhs_inner(&f, &f).unwrap(), 1.0, epsilon = 1e-15);
        // Coefficient v where η = 1/2: norm² = 2v².
        let mut g = SpectralFunction::zero(12);
        g.set(12, 3, 0.7);
        assert_abs_diff_eq!(kernel.rkhs_inner(&g, &g).unwrap(), 2.0 * 0.49, epsilon = 1e-14);
        // Degenerate degree: mass where the window vanishes.
        let h = SpectralFunction::basis_vector(16, 0);
        assert!(matches!(
            kernel.rkhs_inner(&h, &h),
            Err(Error::DegenerateDegree { degree: 16 })
        ));
    }

    #[test]
    fn rkhs_bound_for_convolved_bounded_functions() {
        // ‖K_n * h‖²_K ≤ M² for |h| ≤ M.
        let kernel = bump_kernel(8, 2);
        let m_bound = 1.7;
        for seed in 0..20u64 {
            let raw = SpectralFunction::random_normal(12, 100 + seed);
            let sup = raw.sup_norm_estimate();
            let h = SpectralFunction::from_flat(
                raw.coeffs_flat().iter().map(|c| c * m_bound / sup).collect(),
                raw.band(),
            )
            .unwrap();
            let conv = kernel.convolve(&h);
            let norm_sq = kernel.rkhs_norm_sq(&conv).unwrap();
            assert!(
                norm_sq <= m_bound * m_bound + 1e-9,
                "seed {seed}: {norm_sq} > {}",
                m_bound * m_bound
            );
        }
    }

    #[test]
    fn boundedness_constant_stable_across_frequencies() {
        // ‖K_n * f‖_∞ ≤ C ‖f‖_∞ with one C serving every n.
        let mut cs = Vec::new();
        for n in [4usize, 8, 16] {
            let kernel = bump_kernel(n, 2);
            let mut worst: f64 = 0.0;
            for seed in 0..25u64 {
                let f = SpectralFunction::random_normal(2 * n, 500 + seed);
                let ratio = kernel.convolve(&f).sup_norm_estimate() / f.sup_norm_estimate();
                worst = worst.max(ratio);
            }
            cs.push(worst);
        }
        let c_max = cs.iter().fold(0.0f64, |a, &b| a.max(b));
        let c_min = cs.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(c_max / c_min <= 2.0, "constants {cs:?} drift across n");
        assert!(c_max < 5.0, "boundedness constant suspiciously large: {cs:?}");
    }

    #[test]
    fn localization_ratio_behaviour() {
        let order = 4;
        let profile_max = |n: usize| {
            let kernel = bump_kernel(n, 2);
            let thetas: Vec<f64> = (0..=400).map(|i| PI * i as f64 / 400.0).collect();
            kernel
                .localization_profile(&thetas, order)
                .into_iter()
                .map(|s| s.bound_ratio)
                .fold(0.0f64, f64::max)
        };
        let r8 = profile_max(8);
        let r16 = profile_max(16);
        assert!(r8 / r16 <= 4.0 && r16 / r8 <= 4.0, "ratios {r8} vs {r16}");

        // θ = 0 recovers K_n(1)/n².
        let kernel = bump_kernel(8, 2);
        let sample = &kernel.localization_profile(&[0.0], order)[0];
        assert_abs_diff_eq!(sample.bound_ratio, kernel.diagonal() / 64.0, epsilon = 1e-12);

        // Far field: the ratio at θ = π shrinks as n grows (super-polynomial decay).
        let far = |n: usize| {
            let kernel = bump_kernel(n, 2);
            kernel.localization_profile(&[PI], order)[0].bound_ratio
        };
        assert!(far(16) < far(8));
        assert!(far(32) < far(16));
    }

    #[test]
    fn section_matches_pointwise_kernel() {
        let kernel = bump_kernel(4, 2);
        let x0 = SpherePoint::from_unnormalized(vec![0.1, 0.9, -0.3]).unwrap();
        let section = kernel.section(&x0).unwrap();
        let x = SpherePoint::from_unnormalized(vec![-0.5, 0.2, 0.8]).unwrap();
        assert_abs_diff_eq!(
            section.eval(&x).unwrap(),
            kernel.eval(x0.dot(&x)).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn zonal_section_respects_nikolskii_scaling() {
        // The kernel section is the worst-case candidate for ‖Q‖_∞/‖Q‖₂.
        for n in [4usize, 8] {
            let kernel = bump_kernel(n, 2);
            let section = kernel.section(&SpherePoint::north_pole(2)).unwrap();
            let sup = section.sup_norm_estimate();
            let l2_surface = section.l2_norm() * crate::spectral::basis_scale();
            let ratio = sup / l2_surface;
            // Same C·n^{d/2} envelope as the random-polynomial check, with the
            // constant from the n = 4 measurement.
            let c = 1.5 * (sup / l2_surface) / n as f64;
            assert!(ratio <= c * n as f64 + 1e-12);
        }
        // Cross-n growth is at most linear in n.
        let ratio = |n: usize| {
            let kernel = bump_kernel(n, 2);
            let s = kernel.section(&SpherePoint::north_pole(2)).unwrap();
            s.sup_norm_estimate() / (s.l2_norm() * crate::spectral::basis_scale())
        };
        assert!(ratio(16) <= 4.4 * ratio(4));
    }
}
