//! Invariant checks behind the `validate-kernel` workflow: each check returns
//! a named pass/fail entry with its measured metric, suitable for a JSON report.

use crate::error::Result;
use crate::kernel::NeedletKernel;
use crate::quadrature::{basis_matrix, SphericalQuadrature};
use crate::seed::derive_seed;
use crate::simulation::{sample_design, SamplingDesign};
use crate::special::sphere_area;
use crate::spectral::{basis_scale, SpectralFunction};
use crate::window::{validate_window, AdmissibleWindow};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// One invariant check outcome.
#[derive(Clone, Debug, Serialize)]
pub struct KernelCheck {
    pub name: &'static str,
    pub passed: bool,
    pub metric: f64,
    pub detail: String,
}

/// Full validation report for one kernel.
#[derive(Clone, Debug, Serialize)]
pub struct KernelReport {
    pub n: usize,
    pub d: usize,
    pub checks: Vec<KernelCheck>,
}

impl KernelReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &'static str, passed: bool, metric: f64, detail: String) -> KernelCheck {
    KernelCheck { name, passed, metric, detail }
}

/// Runs the kernel invariant checks. The harmonic-basis checks (reproducing
/// property, band limit, RKHS bound, boundedness) need d = 2; for other
/// dimensions only the zonal checks run.
pub fn validate_kernel(
    n: usize,
    d: usize,
    window: AdmissibleWindow,
    seed: u64,
) -> Result<KernelReport> {
    let kernel = NeedletKernel::new(n, d, window)?;
    let mut checks = Vec::new();

    // Zonal coefficient structure.
    let c0 = kernel.zonal_coeffs()[0];
    let c0_expected = 1.0 / sphere_area(d);
    checks.push(check(
        "zonal_coeff_c0",
        (c0 - c0_expected).abs() <= 1e-14 * c0_expected,
        c0,
        format!("c_0 = {c0:.6e}, expected 1/|S^d| = {c0_expected:.6e}"),
    ));
    let min_coeff = kernel.zonal_coeffs().iter().cloned().fold(f64::INFINITY, f64::min);
    checks.push(check(
        "zonal_coeffs_nonnegative",
        min_coeff >= 0.0,
        min_coeff,
        format!("min c_k = {min_coeff:.3e} over k < 2n"),
    ));

    // Window admissibility, including the C^∞ requirement.
    let report = validate_window(window_ref(&kernel), 1000);
    checks.push(check(
        "window_admissible",
        report.is_admissible(),
        report.violations.len() as f64,
        if report.smoothness_flag {
            "window profile is not C^∞ (admissibility requires a smooth cutoff)".into()
        } else {
            format!("{} range violations on a 1000-point grid", report.violations.len())
        },
    ));

    // Localization uniformity across frequencies (zonal, any d).
    let thetas: Vec<f64> = (0..=800).map(|i| std::f64::consts::PI * i as f64 / 800.0).collect();
    let profile_max = |freq: usize| -> Result<f64> {
        let k = NeedletKernel::new(freq, d, window)?;
        Ok(k.localization_profile(&thetas, 4)
            .into_iter()
            .map(|s| s.bound_ratio)
            .fold(0.0f64, f64::max))
    };
    // Compare at two frequencies past the preasymptotic regime.
    let base = n.max(8);
    let here = profile_max(base)?;
    let double = profile_max(2 * base)?;
    let spread = (here / double).max(double / here);
    checks.push(check(
        "localization_uniformity",
        spread <= 4.0,
        spread,
        format!("max (1+nθ)⁴|K_n|/n^d ratio: {here:.3} at n = {base}, {double:.3} at 2n"),
    ));

    // Gram positive semi-definiteness on random points.
    let points = sample_design(SamplingDesign::Uniform, 25, derive_seed(seed, &[1]));
    if d == 2 {
        let gram = kernel.gram(&points)?;
        let min_eig = gram
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        checks.push(check(
            "gram_psd",
            min_eig >= -1e-8,
            min_eig,
            format!("min eigenvalue {min_eig:.3e} on 25 random points"),
        ));

        // Reproducing property through the convolution integral.
        let quad = SphericalQuadrature::product_rule(3 * n);
        let grid = sample_design(SamplingDesign::Uniform, 200, derive_seed(seed, &[2]));
        let node_basis = basis_matrix(&quad.nodes, n)?;
        let grid_basis = basis_matrix(&grid, n)?;
        let mut k_mat = DMatrix::zeros(grid.len(), quad.nodes.len());
        for (r, x) in grid.iter().enumerate() {
            for (c, node) in quad.nodes.iter().enumerate() {
                k_mat[(r, c)] = quad.weights[c] * kernel.eval(x.dot(node).clamp(-1.0, 1.0))?;
            }
        }
        let mut worst: f64 = 0.0;
        for trial in 0..10u64 {
            let p = SpectralFunction::random_normal(n, derive_seed(seed, &[3, trial]));
            let coeffs = DVector::from_column_slice(p.coeffs_flat());
            let node_vals = (&node_basis * &coeffs) * basis_scale();
            let grid_vals = (&grid_basis * &coeffs) * basis_scale();
            worst = worst.max((&k_mat * node_vals - grid_vals).amax());
        }
        checks.push(check(
            "reproducing_property",
            worst <= 1e-8,
            worst,
            format!("sup |K_n*P - P| = {worst:.2e} over 10 random P ∈ Π_n"),
        ));

        // Band limit of the spectral projection.
        let f = SpectralFunction::random_normal(2 * n + 4, derive_seed(seed, &[4]));
        let band = kernel.convolve(&f).effective_band().unwrap_or(0);
        checks.push(check(
            "projection_band_limit",
            band <= 2 * n - 1,
            band as f64,
            format!("convolution output has effective band {band}, limit {}", 2 * n - 1),
        ));

        // RKHS bound for bounded inputs.
        let m_bound = 1.0;
        let mut worst_norm: f64 = 0.0;
        for trial in 0..20u64 {
            let raw = SpectralFunction::random_normal(2 * n - 1, derive_seed(seed, &[5, trial]));
            let sup = raw.sup_norm_estimate();
            let h = SpectralFunction::from_flat(
                raw.coeffs_flat().iter().map(|c| c * m_bound / sup).collect(),
                raw.band(),
            )?;
            worst_norm = worst_norm.max(kernel.rkhs_norm_sq(&kernel.convolve(&h))?);
        }
        checks.push(check(
            "rkhs_bound",
            worst_norm <= m_bound * m_bound + 1e-9,
            worst_norm,
            format!("max ‖K_n*h‖²_K = {worst_norm:.4} for 20 random |h| ≤ 1"),
        ));

        // Sup-norm boundedness constant, stability across frequencies.
        let bound_const = |freq: usize| -> Result<f64> {
            let k = NeedletKernel::new(freq, d, window)?;
            let mut worst: f64 = 0.0;
            for trial in 0..10u64 {
                let f = SpectralFunction::random_normal(2 * freq, derive_seed(seed, &[6, trial]));
                worst = worst.max(k.convolve(&f).sup_norm_estimate() / f.sup_norm_estimate());
            }
            Ok(worst)
        };
        let c_here = bound_const(n)?;
        let c_double = bound_const(2 * n)?;
        let drift = (c_here / c_double).max(c_double / c_here);
        checks.push(check(
            "boundedness_stability",
            drift <= 2.0 && c_here.max(c_double) < 5.0,
            drift,
            format!("‖K_n*f‖_∞/‖f‖_∞ fitted constants {c_here:.3} at n, {c_double:.3} at 2n"),
        ));

        // Empirical approximation decay (Jackson-type diagnostic).
        let jackson = crate::harness::jackson_curve(
            2.0,
            (4 * n).max(16),
            &[n.max(2) / 2, n.max(2), 2 * n],
            derive_seed(seed, &[7]),
        )?;
        checks.push(check(
            "jackson_decay",
            jackson.exponent < -1.0,
            jackson.exponent,
            format!("fitted log-log slope of ‖f - K_n*f‖₂ is {:.2}", jackson.exponent),
        ));
    }

    Ok(KernelReport { n, d, checks })
}

fn window_ref(kernel: &NeedletKernel) -> &AdmissibleWindow {
    kernel.window()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_bump_kernel_passes_all_checks() {
        let report = validate_kernel(8, 2, AdmissibleWindow::smooth_bump(), 1).unwrap();
        for c in &report.checks {
            assert!(c.passed, "{} failed: {}", c.name, c.detail);
        }
        assert!(report.passed());
    }

    #[test]
    fn linear_ramp_fails_the_smoothness_check_only_there() {
        let report = validate_kernel(8, 2, AdmissibleWindow::linear_ramp(), 1).unwrap();
        assert!(!report.passed());
        let window = report.checks.iter().find(|c| c.name == "window_admissible").unwrap();
        assert!(!window.passed);
    }

    #[test]
    fn general_dimension_runs_zonal_subset() {
        let report = validate_kernel(4, 3, AdmissibleWindow::smooth_bump(), 1).unwrap();
        assert!(report.checks.iter().any(|c| c.name == "localization_uniformity"));
        assert!(report.checks.iter().all(|c| c.name != "reproducing_property"));
        assert!(report.passed());
    }
}
