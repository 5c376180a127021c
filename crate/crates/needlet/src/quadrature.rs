//! Quadrature on S²: deterministic product rules, least-norm cubature weights
//! on random nodes, and Marcinkiewicz–Zygmund / Nikolskii empirical checks.

use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::simulation::{sample_design, SamplingDesign};
use crate::special::{harmonic_basis_upto, LineQuadrature, SpherePoint};
use crate::spectral::basis_scale;
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Number of random test polynomials per Marcinkiewicz–Zygmund trial.
pub const MZ_TEST_POLYS: usize = 50;

/// Singular-value threshold below which a moment system is declared
/// degenerate rather than silently regularized.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// A positive-weight quadrature rule on S², exact on Π_{exact_degree}².
#[derive(Clone, Debug)]
pub struct SphericalQuadrature {
    pub nodes: Vec<SpherePoint>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl SphericalQuadrature {
    /// Gauss–Legendre nodes in cos θ crossed with a uniform azimuthal grid,
    /// sized to integrate all of Π_{exact_degree}² exactly.
    pub fn product_rule(exact_degree: usize) -> Self {
        let n_polar = exact_degree / 2 + 1;
        let n_azimuth = exact_degree + 1;
        let line = LineQuadrature::gauss_legendre(n_polar);
        let two_pi = 2.0 * std::f64::consts::PI;
        let azimuth_weight = two_pi / n_azimuth as f64;
        let mut nodes = Vec::with_capacity(n_polar * n_azimuth);
        let mut weights = Vec::with_capacity(n_polar * n_azimuth);
        for (&t, &w) in line.nodes.iter().zip(&line.weights) {
            let s = (1.0 - t * t).max(0.0).sqrt();
            for ia in 0..n_azimuth {
                let phi = two_pi * ia as f64 / n_azimuth as f64;
                nodes.push(
                    SpherePoint::new(vec![s * phi.cos(), s * phi.sin(), t])
                        .expect("unit by construction"),
                );
                weights.push(w * azimuth_weight);
            }
        }
        Self { nodes, weights, exact_degree }
    }

    /// Σ w_i f(x_i), approximating ∫ f dω.
    pub fn integrate(&self, mut f: impl FnMut(&SpherePoint) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// dω-orthonormal basis values at each point, rows = points, columns = (k, j).
pub fn basis_matrix(points: &[SpherePoint], k_max: usize) -> Result<DMatrix<f64>> {
    let dim = (k_max + 1) * (k_max + 1);
    let mut mat = DMatrix::zeros(points.len(), dim);
    for (i, x) in points.iter().enumerate() {
        let row = harmonic_basis_upto(x, k_max)?;
        for (j, v) in row.into_iter().enumerate() {
            mat[(i, j)] = v;
        }
    }
    Ok(mat)
}

/// Integration target for the cubature weight solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CubatureTarget {
    /// Match ∫ Q dω for all Q ∈ Π_n².
    SurfaceMeasure,
}

/// Least-norm cubature weights on a given node set.
#[derive(Clone, Debug)]
pub struct CubatureWeights {
    pub points: Vec<SpherePoint>,
    pub weights: Vec<f64>,
    pub degree: usize,
    /// Max moment violation over the matched basis.
    pub residual: f64,
}

impl CubatureWeights {
    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }
}

/// Solves the moment system Σ_i a_i Y_{k,j}(t_i) = ∫ Y_{k,j} dω (= √(4π) δ_{k,0})
/// for the minimum-l²-norm weights, via the normal equations of the
/// underdetermined system with a singular-value threshold of [`RANK_TOLERANCE`].
pub fn cubature_weights(
    points: &[SpherePoint],
    n: usize,
    _target: CubatureTarget,
) -> Result<CubatureWeights> {
    let dim = (n + 1) * (n + 1);
    if points.len() < dim {
        return Err(Error::InsufficientData(format!(
            "{} points cannot match {dim} moments",
            points.len()
        )));
    }
    // Pairwise-distinct precondition (exact duplicates only).
    {
        use std::collections::HashSet;
        let mut seen = HashSet::with_capacity(points.len());
        for p in points {
            let key: Vec<u64> = p.coords().iter().map(|c| c.to_bits()).collect();
            if !seen.insert(key) {
                return Err(Error::Domain("cubature points must be pairwise distinct".into()));
            }
        }
    }

    let phi = basis_matrix(points, n)?;
    // Singular values of Φ itself: the ΦᵀΦ route would bury the 1e-10
    // threshold under the eigensolver's noise floor.
    let svd = phi.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let tol = RANK_TOLERANCE * sigma_max.max(1.0);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < dim {
        return Err(Error::DegenerateConfiguration { rank, required: dim });
    }

    // Moments of the dω-orthonormal basis: √(4π) for Y_{0,0}, zero above.
    let mut b = DVector::zeros(dim);
    b[0] = basis_scale();

    // Minimum-norm solution a = (Φᵀ)⁺ b = U Σ⁻¹ Vᵀ b, polished by iterative
    // refinement (corrections stay in col Φ, so minimality is preserved).
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v requested");
    let apply_pinv = |rhs: &DVector<f64>| -> DVector<f64> {
        let scaled = (&v_t * rhs).component_div(&svd.singular_values);
        &u * scaled
    };
    let mut a = apply_pinv(&b);
    for _ in 0..4 {
        let r = &b - phi.transpose() * &a;
        if r.amax() < 1e-13 {
            break;
        }
        a += apply_pinv(&r);
    }
    let residual = (&b - phi.transpose() * &a).amax();
    Ok(CubatureWeights {
        points: points.to_vec(),
        weights: a.iter().copied().collect(),
        degree: n,
        residual,
    })
}

/// Outcome of repeated two-sided MZ inequality trials.
#[derive(Clone, Debug)]
pub struct MzReport {
    pub trials: usize,
    pub passed: usize,
    /// Fraction of trials in which all test polynomials satisfied
    /// ½‖Q‖² ≤ (1/N)Σ Q(α_i)² ≤ (3/2)‖Q‖².
    pub pass_fraction: f64,
}

/// Draws `sample_size` i.i.d. uniform points per trial and tests the
/// two-sided MZ inequality on [`MZ_TEST_POLYS`] random unit-norm polynomials
/// in Π_n² (norms under the uniform probability measure).
pub fn mz_check(n: usize, sample_size: usize, trials: usize, seed: u64) -> Result<MzReport> {
    let dim = (n + 1) * (n + 1);
    if sample_size < dim {
        return Err(Error::InsufficientData(format!(
            "MZ check needs at least dim Π_n² = {dim} samples, got {sample_size}"
        )));
    }
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    let scale_sq = basis_scale() * basis_scale();
    let mut passed = 0;
    for trial in 0..trials {
        let trial_seed = derive_seed(seed, &[0x6d7a, trial as u64]);
        let points = sample_design(SamplingDesign::Uniform, sample_size, trial_seed);
        let phi = basis_matrix(&points, n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, &[1]));
        let mut all_ok = true;
        for _ in 0..MZ_TEST_POLYS {
            let mut q = DVector::from_iterator(
                dim,
                (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)),
            );
            q /= q.norm(); // unit L²(ρ) norm in the probability-orthonormal basis
            let values = &phi * &q;
            let discrete = scale_sq * values.norm_squared() / sample_size as f64;
            if !(0.5..=1.5).contains(&discrete) {
                all_ok = false;
                break;
            }
        }
        if all_ok {
            passed += 1;
        }
    }
    Ok(MzReport { trials, passed, pass_fraction: passed as f64 / trials as f64 })
}

/// Largest observed ‖Q‖_∞ / ‖Q‖_{L²(dω)} over random Q ∈ Π_n², with the sup
/// taken on a dense θ-φ grid and the L² norm from the supplied exact rule.
pub fn nikolskii_ratio(
    n: usize,
    trials: usize,
    quad: &SphericalQuadrature,
    seed: u64,
) -> Result<f64> {
    if quad.exact_degree < 2 * n {
        return Err(Error::InsufficientQuadrature { available: quad.exact_degree, required: 2 * n });
    }
    let dim = (n + 1) * (n + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut polys = DMatrix::zeros(dim, trials);
    for c in 0..trials {
        let mut q = DVector::from_iterator(
            dim,
            (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)),
        );
        q /= q.norm();
        polys.set_column(c, &q);
    }

    // Exact L²(dω) norms via the quadrature rule.
    let node_basis = basis_matrix(&quad.nodes, n)?;
    let node_values = &node_basis * &polys; // nodes × trials, in dω basis scale
    let mut l2 = vec![0.0f64; trials];
    for (i, &w) in quad.weights.iter().enumerate() {
        for c in 0..trials {
            let v = basis_scale() * node_values[(i, c)];
            l2[c] += w * v * v;
        }
    }
    let l2: Vec<f64> = l2.into_iter().map(f64::sqrt).collect();

    // Sup norms on a dense grid (finer than the polynomial oscillation scale).
    let n_theta = (8 * n.max(1)).max(96);
    let n_phi = 2 * n_theta;
    let mut sup = vec![0.0f64; trials];
    for it in 0..=n_theta {
        let theta = std::f64::consts::PI * it as f64 / n_theta as f64;
        let (st, ct) = theta.sin_cos();
        let n_phi_here = if st == 0.0 { 1 } else { n_phi };
        for ip in 0..n_phi_here {
            let phi_angle = 2.0 * std::f64::consts::PI * ip as f64 / n_phi as f64;
            let x = SpherePoint::new(vec![st * phi_angle.cos(), st * phi_angle.sin(), ct])
                .expect("unit by construction");
            let basis = harmonic_basis_upto(&x, n)?;
            for c in 0..trials {
                let mut v = 0.0;
                for (bi, &bv) in basis.iter().enumerate() {
                    v += bv * polys[(bi, c)];
                }
                let v = (basis_scale() * v).abs();
                if v > sup[c] {
                    sup[c] = v;
                }
            }
        }
    }

    Ok(sup
        .iter()
        .zip(&l2)
        .map(|(s, l)| s / l)
        .fold(0.0f64, f64::max))
}
