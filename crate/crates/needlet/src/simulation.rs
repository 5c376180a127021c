//! Ground-truth regression problems on S²: sampling designs, Sobolev-class
//! target functions, bounded noise, and design distortion.

use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::special::SpherePoint;
use crate::spectral::SpectralFunction;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Marginal distribution of the predictor variable on S².
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingDesign {
    /// Uniform surface measure.
    #[default]
    Uniform,
    /// von Mises–Fisher density ∝ exp(κ x·e₃), concentrated at the north pole.
    CapBiased { kappa: f64 },
}

/// Draws m i.i.d. points from the design; deterministic given the seed.
pub fn sample_design(design: SamplingDesign, m: usize, seed: u64) -> Vec<SpherePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match design {
        SamplingDesign::Uniform => (0..m).map(|_| uniform_point(&mut rng)).collect(),
        SamplingDesign::CapBiased { kappa } if kappa == 0.0 => {
            // κ = 0 degenerates to the uniform density; sample by inversion
            // anyway so the stream shape matches the biased case.
            (0..m)
                .map(|_| {
                    let t = 2.0 * rng.gen::<f64>() - 1.0;
                    let phi = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
                    polar_point(t, phi)
                })
                .collect()
        }
        SamplingDesign::CapBiased { kappa } => (0..m)
            .map(|_| {
                // Inverse-CDF in t = cos θ for density ∝ exp(κ t) on [-1, 1].
                let u: f64 = rng.gen();
                let t = 1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa;
                let phi = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
                polar_point(t.clamp(-1.0, 1.0), phi)
            })
            .collect(),
    }
}

fn uniform_point(rng: &mut ChaCha8Rng) -> SpherePoint {
    loop {
        let v: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm_sq: f64 = v.iter().map(|c| c * c).sum();
        if norm_sq > 1e-12 {
            return SpherePoint::from_unnormalized(v).expect("nonzero vector");
        }
    }
}

fn polar_point(t: f64, phi: f64) -> SpherePoint {
    let s = (1.0 - t * t).max(0.0).sqrt();
    SpherePoint::new(vec![s * phi.cos(), s * phi.sin(), t]).expect("unit by construction")
}

/// Operator norm of the embedding L²(ρ_X) → L² (normalized surface measure),
/// `sup (1/p)^{1/2}` over the closed-form design density p.
pub fn distortion(design: SamplingDesign) -> Result<f64> {
    match design {
        SamplingDesign::Uniform => Ok(1.0),
        SamplingDesign::CapBiased { kappa } => {
            if !kappa.is_finite() {
                return Err(Error::InfiniteDistortion);
            }
            if kappa == 0.0 {
                return Ok(1.0);
            }
            // Density w.r.t. normalized measure: p(t) = κ e^{κt} / sinh κ,
            // minimized at the antipode of the cap. Closed form below is
            // symmetric in the sign of κ.
            let k = kappa.abs();
            Ok((((2.0 * k).exp_m1()) / (2.0 * k)).sqrt())
        }
    }
}

/// Shape of the synthetic regression target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetShape {
    Zonal,
    #[default]
    Random,
}

/// A W_r-normalized band-limited regression function with recorded sup norm.
#[derive(Clone, Debug)]
pub struct SobolevTarget {
    spectral: SpectralFunction,
    r: f64,
    sup_norm: f64,
}

impl SobolevTarget {
    pub fn spectral(&self) -> &SpectralFunction {
        &self.spectral
    }

    pub fn smoothness(&self) -> f64 {
        self.r
    }

    /// Sup norm over a dense evaluation grid (recorded at construction).
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn eval(&self, x: &SpherePoint) -> Result<f64> {
        self.spectral.eval(x)
    }

    /// Squared L²(ρ) norm for the uniform design (Parseval).
    pub fn l2_norm_sq(&self) -> f64 {
        let n = self.spectral.l2_norm();
        n * n
    }
}

/// Bessel-potential Sobolev norm (Σ_{k,j} (k + 1/2)^{2r} f̂²)^{1/2} on S².
pub fn sobolev_norm(f: &SpectralFunction, r: f64) -> f64 {
    f.iter()
        .map(|(k, _, c)| (k as f64 + 0.5).powf(2.0 * r) * c * c)
        .sum::<f64>()
        .sqrt()
}

/// Builds a target with unit W_r norm and degree envelope (k + 1/2)^{-r-0.51}.
///
/// The envelope exponent puts the W_r mass nearly flat across degrees, so the
/// target sits close to the boundary of the class. Degrees run from 1 to the
/// band limit: targets are mean zero, which keeps every Sobolev weight in the
/// normalization at least (3/2)^r and hence the plain L² norm below 1.
pub fn make_target(r: f64, band: usize, seed: u64, shape: TargetShape) -> Result<SobolevTarget> {
    if !(r > 1.0) {
        return Err(Error::Domain(format!(
            "smoothness r = {r} must exceed d/2 = 1 for continuous targets"
        )));
    }
    if band < 1 {
        return Err(Error::Domain("band limit must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralFunction::zero(band);
    for k in 1..=band {
        let envelope = (k as f64 + 0.5).powf(-r - 0.51);
        match shape {
            TargetShape::Zonal => f.set(k, 0, envelope),
            TargetShape::Random => {
                for j in 0..2 * k + 1 {
                    let g: f64 = rng.sample(StandardNormal);
                    f.set(k, j, envelope * g);
                }
            }
        }
    }
    let norm = sobolev_norm(&f, r);
    if norm == 0.0 {
        return Err(Error::Domain("degenerate target draw".into()));
    }
    let coeffs: Vec<f64> = f.coeffs_flat().iter().map(|c| c / norm).collect();
    let spectral = SpectralFunction::from_flat(coeffs, band)?;
    let sup_norm = spectral.sup_norm_estimate();
    Ok(SobolevTarget { spectral, r, sup_norm })
}

/// Observation noise; bounded so that |Y| ≤ M almost surely.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    #[default]
    None,
    Uniform { sigma: f64 },
}

impl NoiseModel {
    pub fn sigma(&self) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::Uniform { sigma } => *sigma,
        }
    }
}

/// Labels y_i = f_ρ(x_i) + ξ_i with ξ uniform on [-σ, σ], plus the bound M.
///
/// M is the recorded sup norm (floored by the values actually seen at the
/// sample points) plus σ, so |y_i| ≤ M holds by construction.
pub fn generate_labels(
    target: &SobolevTarget,
    points: &[SpherePoint],
    noise: NoiseModel,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    let sigma = noise.sigma();
    if sigma < 0.0 {
        return Err(Error::Domain("noise level must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x6e6f_6973]));
    let mut y = Vec::with_capacity(points.len());
    let mut max_f: f64 = 0.0;
    for x in points {
        let f = target.eval(x)?;
        max_f = max_f.max(f.abs());
        let xi = match noise {
            NoiseModel::None => 0.0,
            NoiseModel::Uniform { sigma } => sigma * (2.0 * rng.gen::<f64>() - 1.0),
        };
        y.push(f + xi);
    }
    let m_bound = target.sup_norm().max(max_f) + sigma;
    Ok((y, m_bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_sampling_mean_is_small() {
        let pts = sample_design(SamplingDesign::Uniform, 100_000, 1);
        let mut mean = [0.0f64; 3];
        for p in &pts {
            for (m, c) in mean.iter_mut().zip(p.coords()) {
                *m += c;
            }
        }
        let norm = mean.iter().map(|m| (m / pts.len() as f64).powi(2)).sum::<f64>().sqrt();
        assert!(norm <= 0.02, "CLT bound 3/sqrt(m) violated: {norm}");
    }

    #[test]
    fn uniform_sampling_kills_harmonics() {
        // Empirical mean of Y_{2,1} over uniform points ≈ 0 within 3 SE.
        let pts = sample_design(SamplingDesign::Uniform, 100_000, 2);
        let vals: Vec<f64> = pts
            .iter()
            .map(|p| crate::special::real_harmonic_basis(2, p).unwrap()[1])
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        let se = (var / vals.len() as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn cap_biased_matches_vmf_resultant() {
        // E[x·e3] = coth κ - 1/κ for vMF(κ).
        let kappa = 2.0;
        let pts = sample_design(SamplingDesign::CapBiased { kappa }, 100_000, 3);
        let ts: Vec<f64> = pts.iter().map(|p| p.coords()[2]).collect();
        let mean = ts.iter().sum::<f64>() / ts.len() as f64;
        let expected = 1.0 / kappa.tanh() - 1.0 / kappa;
        let var = ts.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / ts.len() as f64;
        let se = (var / ts.len() as f64).sqrt();
        assert!(
            (mean - expected).abs() <= 3.0 * se,
            "mean {mean}, expected {expected}, se {se}"
        );
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_design(SamplingDesign::CapBiased { kappa: 1.5 }, 500, 7);
        let b = sample_design(SamplingDesign::CapBiased { kappa: 1.5 }, 500, 7);
        assert_eq!(a, b);
    }

    #[test]
    fn distortion_values() {
        assert_eq!(distortion(SamplingDesign::Uniform).unwrap(), 1.0);
        assert_eq!(distortion(SamplingDesign::CapBiased { kappa: 0.0 }).unwrap(), 1.0);
        // Closed form sqrt((e^{2κ}-1)/(2κ)) at κ = 2, against a grid
        // minimization of the density as an independent route.
        let d = distortion(SamplingDesign::CapBiased { kappa: 2.0 }).unwrap();
        let kappa: f64 = 2.0;
        let min_density = (0..=10_000)
            .map(|i| {
                let t = -1.0 + 2.0 * i as f64 / 10_000.0;
                kappa * (kappa * t).exp() / kappa.sinh()
            })
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(d, (1.0 / min_density).sqrt(), epsilon = 1e-6);
        assert_abs_diff_eq!(d, 3.6605378714454053, epsilon = 1e-12);
    }

    #[test]
    fn target_has_unit_sobolev_norm() {
        for shape in [TargetShape::Zonal, TargetShape::Random] {
            let t = make_target(2.0, 32, 11, shape).unwrap();
            assert_abs_diff_eq!(sobolev_norm(t.spectral(), 2.0), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn target_l2_below_one() {
        // All Sobolev weights exceed 1 (degrees start at 1), so the plain L²
        // norm is below the W_r norm.
        for shape in [TargetShape::Zonal, TargetShape::Random] {
            let t = make_target(2.0, 64, 5, shape).unwrap();
            assert!(t.spectral().l2_norm() < 1.0);
        }
    }

    #[test]
    fn sobolev_nesting() {
        // A W_3-normalized target has W_2 norm at most 1.
        let t = make_target(3.0, 32, 9, TargetShape::Random).unwrap();
        assert!(sobolev_norm(t.spectral(), 2.0) <= 1.0 + 1e-12);
    }

    #[test]
    fn sobolev_norm_examples() {
        assert_abs_diff_eq!(
            sobolev_norm(&SpectralFunction::basis_vector(0, 0), 2.0),
            0.25,
            epsilon = 1e-15
        );
        assert_eq!(sobolev_norm(&SpectralFunction::zero(4), 2.0), 0.0);
        assert_abs_diff_eq!(
            sobolev_norm(&SpectralFunction::basis_vector(3, 1), 1.0),
            3.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn normalization_is_scale_free() {
        // Doubling the envelope changes nothing after W_r normalization, so
        // two draws with the same seed agree coefficient by coefficient.
        let a = make_target(2.0, 16, 21, TargetShape::Random).unwrap();
        let b = make_target(2.0, 16, 21, TargetShape::Random).unwrap();
        assert_eq!(a.spectral(), b.spectral());
        // Idempotence: renormalizing an already unit-norm target is a no-op.
        let norm = sobolev_norm(a.spectral(), 2.0);
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn rejects_rough_targets() {
        assert!(make_target(1.0, 16, 1, TargetShape::Zonal).is_err());
        assert!(make_target(0.5, 16, 1, TargetShape::Zonal).is_err());
    }

    #[test]
    fn labels_noiseless_and_bounded() {
        let t = make_target(2.0, 16, 3, TargetShape::Random).unwrap();
        let pts = sample_design(SamplingDesign::Uniform, 200, 4);
        let (y, m) = generate_labels(&t, &pts, NoiseModel::None, 5).unwrap();
        for (x, yi) in pts.iter().zip(&y) {
            assert_abs_diff_eq!(*yi, t.eval(x).unwrap(), epsilon = 1e-14);
        }
        assert!(y.iter().all(|yi| yi.abs() <= m));

        let (y2, m2) = generate_labels(&t, &pts, NoiseModel::Uniform { sigma: 0.2 }, 5).unwrap();
        assert!(y2.iter().all(|yi| yi.abs() <= m2));
        assert_abs_diff_eq!(m2, m + 0.2, epsilon = 1e-12);
    }

    #[test]
    fn label_noise_variance() {
        let t = make_target(2.0, 8, 6, TargetShape::Zonal).unwrap();
        let x = SpherePoint::xyz(0.0, 0.0, 1.0).unwrap();
        let pts = vec![x.clone(); 100_000];
        let sigma = 0.2;
        let (y, _) = generate_labels(&t, &pts, NoiseModel::Uniform { sigma }, 8).unwrap();
        let f = t.eval(&x).unwrap();
        let noise: Vec<f64> = y.iter().map(|yi| yi - f).collect();
        let var = noise.iter().map(|n| n * n).sum::<f64>() / noise.len() as f64;
        // Var = σ²/3; SE of the sample variance ≈ var·sqrt(2/(n-1)) is ~1e-4.
        let expected = sigma * sigma / 3.0;
        assert!((var - expected).abs() <= 3.0 * expected * (2.0 / noise.len() as f64).sqrt());
    }

    #[test]
    fn conditional_mean_is_regression_function() {
        // Binning 10^6 noisy labels at a fixed point recovers f_ρ(x).
        let t = make_target(2.0, 8, 13, TargetShape::Random).unwrap();
        let x = SpherePoint::from_unnormalized(vec![1.0, 2.0, -0.5]).unwrap();
        let pts = vec![x.clone(); 1_000_000];
        let sigma = 0.3;
        let (y, _) = generate_labels(&t, &pts, NoiseModel::Uniform { sigma }, 9).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let se = sigma / (3.0 * y.len() as f64).sqrt();
        assert!((mean - t.eval(&x).unwrap()).abs() <= 3.0 * se);
    }
}
