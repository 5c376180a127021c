//! Learning algorithms over the sample-dependent hypothesis space spanned by
//! kernel sections at the data points: kernel ridge regression, the
//! truncation operator, and l^q coefficient-regularized least squares.
//!
//! On S² every solver works through the addition-formula factorization
//! `A = Φ diag(η(k/n)) Φᵀ` of the Gram matrix, where Φ holds the harmonic
//! basis values at the sample points. The factor has only dim Π_{2n-1}²
//! columns, so fits cost O(m r²) instead of O(m³) while solving the very same
//! linear systems; unit tests pin the results against dense solves.

use crate::error::{Error, Result};
use crate::kernel::NeedletKernel;
use crate::quadrature::{basis_matrix, SphericalQuadrature};
use crate::simulation::{sample_design, SamplingDesign};
use crate::special::SpherePoint;
use crate::spectral::{basis_scale, SpectralFunction};
use nalgebra::{DMatrix, DVector};

/// Eigenvalue threshold for rank decisions in the λ = 0 least-norm solve.
pub const EIG_THRESHOLD: f64 = 1e-10;

/// Weight floor on |a_i| inside the iteratively reweighted l² solver.
pub const IRLS_WEIGHT_FLOOR: f64 = 1e-8;

/// Iteration cap shared by the iterative solvers.
pub const MAX_SOLVER_ITERS: usize = 10_000;

/// Relative objective decrease below which an iterative solver stops.
pub const SOLVER_REL_TOL: f64 = 1e-10;

/// Coefficients below this magnitude count as zero in sparsity statistics.
pub const NONZERO_TOL: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Data and estimator types
// ---------------------------------------------------------------------------

/// A regression sample with its almost-sure label bound M.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub x: Vec<SpherePoint>,
    pub y: Vec<f64>,
    pub m_bound: f64,
}

impl Dataset {
    pub fn new(x: Vec<SpherePoint>, y: Vec<f64>, m_bound: f64) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Domain(format!(
                "dataset needs matching nonempty x ({}) and y ({})",
                x.len(),
                y.len()
            )));
        }
        if !(m_bound > 0.0) {
            return Err(Error::Domain("label bound M must be positive".into()));
        }
        if let Some(bad) = y.iter().find(|v| v.abs() > m_bound) {
            return Err(Error::Domain(format!("|y| = {} exceeds the bound M = {m_bound}", bad.abs())));
        }
        Ok(Self { x, y, m_bound })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Convergence record carried by iterative solvers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolverInfo {
    pub converged: bool,
    pub iterations: usize,
}

impl SolverInfo {
    fn closed_form() -> Self {
        Self { converged: true, iterations: 0 }
    }
}

/// An estimator f = Σ a_i K_n(x_i, ·), optionally clamped to [-M, M].
#[derive(Clone, Debug)]
pub struct KernelExpansion {
    kernel: NeedletKernel,
    centers: Vec<SpherePoint>,
    coeffs: Vec<f64>,
    truncation: Option<f64>,
    pub info: SolverInfo,
}

impl KernelExpansion {
    pub fn kernel(&self) -> &NeedletKernel {
        &self.kernel
    }

    pub fn centers(&self) -> &[SpherePoint] {
        &self.centers
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn truncation(&self) -> Option<f64> {
        self.truncation
    }

    /// Pointwise evaluation, clamped when a truncation level is set.
    pub fn eval(&self, x: &SpherePoint) -> Result<f64> {
        let raw = self.eval_raw(x)?;
        Ok(match self.truncation {
            Some(m) => raw.clamp(-m, m),
            None => raw,
        })
    }

    /// The kernel sum Σ a_i K_n(x_i·x) without clamping.
    pub fn eval_raw(&self, x: &SpherePoint) -> Result<f64> {
        let mut acc = 0.0;
        for (center, &a) in self.centers.iter().zip(&self.coeffs) {
            acc += a * self.kernel.eval(center.dot(x).clamp(-1.0, 1.0))?;
        }
        Ok(acc)
    }

    /// Harmonic representation of the (unclamped) expansion on S²:
    /// coefficients η(k/n) (Φᵀ a) in the probability-orthonormal basis.
    pub fn spectral(&self) -> Result<SpectralFunction> {
        if self.kernel.dimension() != 2 {
            return Err(Error::UnsupportedDimension {
                d: self.kernel.dimension(),
                context: "spectral representation needs the S² basis",
            });
        }
        let band = self.kernel.band();
        let phi = basis_matrix(&self.centers, band)?;
        let a = DVector::from_column_slice(&self.coeffs);
        let projected = phi.transpose() * a;
        let scale = basis_scale();
        let mut f = SpectralFunction::zero(band);
        for k in 0..=band {
            let w = self.kernel.window_weight(k);
            for j in 0..2 * k + 1 {
                f.set(k, j, w * projected[crate::special::flat_index(k, j)] / scale);
            }
        }
        Ok(f)
    }

    /// Number of coefficients exceeding [`NONZERO_TOL`] in magnitude.
    pub fn nonzero_count(&self) -> usize {
        self.coeffs.iter().filter(|a| a.abs() > NONZERO_TOL).count()
    }

    /// The same expansion with clamping disabled.
    pub fn without_truncation(&self) -> Self {
        let mut f = self.clone();
        f.truncation = None;
        f
    }
}

/// Marks the expansion so evaluation clamps to [-M, M].
pub fn truncate(f: &KernelExpansion, m_bound: f64) -> Result<KernelExpansion> {
    if !(m_bound > 0.0) {
        return Err(Error::Domain("truncation level must be positive".into()));
    }
    let mut g = f.clone();
    g.truncation = Some(m_bound);
    Ok(g)
}

/// Ω_z^q of the stored representation, Σ |a_i|^q.
///
/// The infimum over representations is not searched: for a full-rank Gram
/// matrix the representation of the fitted function is unique.
pub fn penalty_value(f: &KernelExpansion, q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::Domain("penalty exponent q must be positive".into()));
    }
    Ok(f.coeffs.iter().map(|a| a.abs().powf(q)).sum())
}

// ---------------------------------------------------------------------------
// Gram operator: dense matrix or addition-formula factor
// ---------------------------------------------------------------------------

enum GramOperator {
    /// A = G Gᵀ with G = Φ diag(√η) (S² only).
    Factor { g: DMatrix<f64> },
    /// Explicit Gram matrix (any dimension; small m).
    Dense { a: DMatrix<f64> },
}

impl GramOperator {
    fn build(kernel: &NeedletKernel, points: &[SpherePoint]) -> Result<Self> {
        if kernel.dimension() == 2 {
            let band = kernel.band();
            let mut g = basis_matrix(points, band)?;
            for k in 0..=band {
                let w = kernel.window_weight(k).max(0.0).sqrt();
                for j in 0..2 * k + 1 {
                    let col = crate::special::flat_index(k, j);
                    for i in 0..g.nrows() {
                        g[(i, col)] *= w;
                    }
                }
            }
            Ok(GramOperator::Factor { g })
        } else {
            Ok(GramOperator::Dense { a: kernel.gram(points)? })
        }
    }

    fn len(&self) -> usize {
        match self {
            GramOperator::Factor { g } => g.nrows(),
            GramOperator::Dense { a } => a.nrows(),
        }
    }

    fn matvec(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            GramOperator::Factor { g } => g * (g.transpose() * v),
            GramOperator::Dense { a } => a * v,
        }
    }

    /// Nonzero part of the eigendecomposition A = U Λ Uᵀ (Λ ≥ 0 for the
    /// factor path; the dense path returns the full symmetric eigensystem).
    fn eigensystem(&self) -> (DMatrix<f64>, DVector<f64>) {
        match self {
            GramOperator::Factor { g } => {
                let svd = g.clone().svd(true, false);
                let u = svd.u.expect("u requested");
                let eig = DVector::from_iterator(
                    svd.singular_values.len(),
                    svd.singular_values.iter().map(|s| s * s),
                );
                (u, eig)
            }
            GramOperator::Dense { a } => {
                let eigen = a.clone().symmetric_eigen();
                (eigen.eigenvectors, eigen.eigenvalues)
            }
        }
    }

    /// λ_max(A) estimated by power iteration (A is PSD).
    fn lambda_max(&self) -> f64 {
        let m = self.len();
        let mut v = DVector::from_element(m, 1.0 / (m as f64).sqrt());
        let mut lambda = 0.0;
        for _ in 0..200 {
            let w = self.matvec(&v);
            let norm = w.norm();
            if norm == 0.0 {
                return 0.0;
            }
            let next = w / norm;
            let new_lambda = next.dot(&self.matvec(&next));
            let done = (new_lambda - lambda).abs() <= 1e-12 * new_lambda.abs().max(1.0);
            v = next;
            lambda = new_lambda;
            if done {
                break;
            }
        }
        lambda
    }

    /// H with A²/m = H Hᵀ, for the reweighted-l² inner solves.
    fn squared_factor(&self) -> DMatrix<f64> {
        match self {
            GramOperator::Factor { g } => {
                let m = g.nrows() as f64;
                let n_small = (g.transpose() * g) / m;
                let eigen = n_small.symmetric_eigen();
                let mut v = eigen.eigenvectors;
                for (c, &e) in eigen.eigenvalues.iter().enumerate() {
                    let s = e.max(0.0).sqrt();
                    for r in 0..v.nrows() {
                        v[(r, c)] *= s;
                    }
                }
                g * v
            }
            GramOperator::Dense { a } => {
                let m = a.nrows() as f64;
                let eigen = (a / m.sqrt()).symmetric_eigen();
                let mut v = eigen.eigenvectors;
                for (c, &e) in eigen.eigenvalues.iter().enumerate() {
                    // A²/m = (A/√m)² has eigenvalues e² ≥ 0.
                    let s = e.abs();
                    for r in 0..v.nrows() {
                        v[(r, c)] *= s;
                    }
                }
                v
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Kernel ridge regression
// ---------------------------------------------------------------------------

/// Solves (A + mλI) a = y; for λ = 0 the least-norm least-squares solution via
/// the eigensystem with eigenvalues below [`EIG_THRESHOLD`] dropped.
pub fn krr_fit(data: &Dataset, kernel: &NeedletKernel, lambda: f64) -> Result<KernelExpansion> {
    if lambda < 0.0 {
        return Err(Error::Domain("KRR regularization parameter must be nonnegative".into()));
    }
    let op = GramOperator::build(kernel, &data.x)?;
    let y = DVector::from_column_slice(&data.y);
    let (u, eig) = op.eigensystem();
    let uty = u.transpose() * &y;
    let m_lambda = data.len() as f64 * lambda;

    let coeffs = if lambda > 0.0 {
        let scaled = DVector::from_iterator(
            uty.len(),
            uty.iter().zip(eig.iter()).map(|(v, &e)| v / (e + m_lambda)),
        );
        let in_range = &u * scaled;
        // Component of y orthogonal to the range of A is divided by mλ,
        // exactly as in the dense solve of (A + mλI) a = y.
        let residual = &y - &u * uty;
        in_range + residual / m_lambda
    } else {
        let scaled = DVector::from_iterator(
            uty.len(),
            uty.iter()
                .zip(eig.iter())
                .map(|(v, &e)| if e > EIG_THRESHOLD { v / e } else { 0.0 }),
        );
        &u * scaled
    };

    Ok(KernelExpansion {
        kernel: kernel.clone(),
        centers: data.x.clone(),
        coeffs: coeffs.iter().copied().collect(),
        truncation: None,
        info: SolverInfo::closed_form(),
    })
}

// ---------------------------------------------------------------------------
// l^q coefficient regularization
// ---------------------------------------------------------------------------

fn lq_objective(op: &GramOperator, y: &DVector<f64>, a: &DVector<f64>, lambda: f64, q: f64) -> f64 {
    let m = y.len() as f64;
    let r = op.matvec(a) - y;
    r.norm_squared() / m + lambda * a.iter().map(|v| v.abs().powf(q)).sum::<f64>()
}

/// Approximate minimizer of (1/m) Σ (f(x_i) - y_i)² + λ Σ |a_i|^q.
///
/// q = 2 is solved in closed form through the eigensystem; q = 1 by monotone
/// accelerated proximal gradient (soft thresholding); other q by iteratively
/// reweighted l² with a weight floor. For q < 1 the problem is non-convex and
/// the result is a stationary point, not a certified global minimum.
pub fn lq_fit(
    data: &Dataset,
    kernel: &NeedletKernel,
    lambda: f64,
    q: f64,
) -> Result<KernelExpansion> {
    if !(lambda > 0.0) {
        return Err(Error::Domain("l^q regularization parameter must be positive".into()));
    }
    if !(q > 0.0 && q <= 2.0) {
        return Err(Error::Domain(format!("penalty exponent q = {q} outside (0, 2]")));
    }
    let op = GramOperator::build(kernel, &data.x)?;
    let y = DVector::from_column_slice(&data.y);
    let m = data.len() as f64;

    let (coeffs, info) = if q == 2.0 {
        // (A²/m + λI) a = A y / m on the range of A.
        let (u, eig) = op.eigensystem();
        let uty = u.transpose() * &y;
        let scaled = DVector::from_iterator(
            uty.len(),
            uty.iter()
                .zip(eig.iter())
                .map(|(v, &e)| v * e / (e * e + m * lambda)),
        );
        (&u * scaled, SolverInfo::closed_form())
    } else if q == 1.0 {
        fista_l1(&op, &y, lambda)
    } else {
        irls(&op, &y, lambda, q)
    };

    Ok(KernelExpansion {
        kernel: kernel.clone(),
        centers: data.x.clone(),
        coeffs: coeffs.iter().copied().collect(),
        truncation: None,
        info,
    })
}

/// Monotone FISTA on the lasso objective; step from the gradient Lipschitz
/// constant 2 λ_max(A²)/m (power iteration plus a 5% safety margin).
fn fista_l1(op: &GramOperator, y: &DVector<f64>, lambda: f64) -> (DVector<f64>, SolverInfo) {
    let m = y.len() as f64;
    let lam_a = op.lambda_max();
    let lipschitz = 2.0 * lam_a * lam_a / m * 1.05;
    let step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };
    let threshold = step * lambda;

    let mut x = DVector::zeros(y.len());
    let mut x_prev = x.clone();
    let mut momentum = x.clone();
    let mut t = 1.0f64;
    let mut obj = lq_objective(op, y, &x, lambda, 1.0);

    for iter in 0..MAX_SOLVER_ITERS {
        let grad = op.matvec(&(op.matvec(&momentum) - y)) * (2.0 / m);
        let z = DVector::from_iterator(
            y.len(),
            momentum
                .iter()
                .zip(grad.iter())
                .map(|(&mi, &gi)| soft_threshold(mi - step * gi, threshold)),
        );
        let obj_z = lq_objective(op, y, &z, lambda, 1.0);
        // Monotone variant: keep the better of the proximal point and the
        // previous iterate, so the objective never increases.
        let (x_next, obj_next) = if obj_z <= obj { (z.clone(), obj_z) } else { (x.clone(), obj) };
        debug_assert!(obj_next <= obj + 1e-12 * obj.abs().max(1.0));

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        momentum = &x_next + (&z - &x_next) * (t / t_next) + (&x_next - &x_prev) * ((t - 1.0) / t_next);

        let decrease = obj - obj_next;
        x_prev = x;
        x = x_next;
        t = t_next;
        let stop = decrease < SOLVER_REL_TOL * obj.abs().max(1.0);
        obj = obj_next;
        if stop {
            return (x, SolverInfo { converged: true, iterations: iter + 1 });
        }
    }
    (x, SolverInfo { converged: false, iterations: MAX_SOLVER_ITERS })
}

#[inline]
fn soft_threshold(v: f64, threshold: f64) -> f64 {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        0.0
    }
}

/// Iteratively reweighted l² for q ∈ (0,1) ∪ (1,2): each step solves
/// (A²/m + (λq/2) diag(max(|a_i|, δ)^{q-2})) a = A y / m,
/// the minimizer of the quadratic majorizer of the penalty at the iterate.
fn irls(op: &GramOperator, y: &DVector<f64>, lambda: f64, q: f64) -> (DVector<f64>, SolverInfo) {
    let m = y.len() as f64;
    let rhs = op.matvec(y) / m;
    let h = op.squared_factor();

    // Warm start from the q = 2 closed form with the same λ.
    let (u, eig) = op.eigensystem();
    let uty = u.transpose() * y;
    let scaled = DVector::from_iterator(
        uty.len(),
        uty.iter().zip(eig.iter()).map(|(v, &e)| v * e / (e * e + m * lambda)),
    );
    let mut a = &u * scaled;
    let mut obj = lq_objective(op, y, &a, lambda, q);

    for iter in 0..MAX_SOLVER_ITERS {
        let weights = DVector::from_iterator(
            a.len(),
            a.iter().map(|v| 0.5 * lambda * q * v.abs().max(IRLS_WEIGHT_FLOOR).powf(q - 2.0)),
        );
        let a_next = solve_diag_plus_low_rank(&weights, &h, &rhs);
        let obj_next = lq_objective(op, y, &a_next, lambda, q);
        // MM step: non-increasing up to the weight-floor perturbation.
        debug_assert!(obj_next <= obj + 1e-9 * obj.abs().max(1.0));
        let decrease = obj - obj_next;
        a = a_next;
        let stop = decrease < SOLVER_REL_TOL * obj.abs().max(1.0);
        obj = obj_next;
        if stop {
            return (a, SolverInfo { converged: true, iterations: iter + 1 });
        }
    }
    (a, SolverInfo { converged: false, iterations: MAX_SOLVER_ITERS })
}

/// Solves (diag(d) + H Hᵀ) x = rhs with d > 0 via the Woodbury identity.
fn solve_diag_plus_low_rank(
    d: &DVector<f64>,
    h: &DMatrix<f64>,
    rhs: &DVector<f64>,
) -> DVector<f64> {
    let d_inv = DVector::from_iterator(d.len(), d.iter().map(|&v| 1.0 / v));
    let u = d_inv.component_mul(rhs);
    let mut hd = h.clone();
    for r in 0..hd.nrows() {
        let s = d_inv[r];
        for c in 0..hd.ncols() {
            hd[(r, c)] *= s;
        }
    }
    let small = DMatrix::identity(h.ncols(), h.ncols()) + h.transpose() * &hd;
    let chol = small.cholesky().expect("I + HᵀD⁻¹H is positive definite");
    let w = chol.solve(&(h.transpose() * &u));
    &u - &hd * w
}

// ---------------------------------------------------------------------------
// Generalization error
// ---------------------------------------------------------------------------

/// A product rule sized to integrate products of two band-`band` functions
/// exactly, with cached harmonic values at the nodes.
#[derive(Debug)]
pub struct EvaluationGrid {
    quad: SphericalQuadrature,
    basis: DMatrix<f64>,
    band: usize,
}

impl EvaluationGrid {
    pub fn new(band: usize) -> Result<Self> {
        let quad = SphericalQuadrature::product_rule(2 * band);
        let basis = basis_matrix(&quad.nodes, band)?;
        Ok(Self { quad, basis, band })
    }

    pub fn band(&self) -> usize {
        self.band
    }

    /// Node values of a band-limited function.
    fn values(&self, f: &SpectralFunction) -> Result<DVector<f64>> {
        if f.band() > self.band {
            return Err(Error::InsufficientQuadrature {
                available: 2 * self.band,
                required: 2 * f.band(),
            });
        }
        let mut padded = DVector::zeros(self.basis.ncols());
        for (i, &c) in f.coeffs_flat().iter().enumerate() {
            padded[i] = c;
        }
        Ok((&self.basis * padded) * basis_scale())
    }

    /// ‖f - g‖²_ρ under the uniform design (exact for band-limited inputs).
    pub fn l2_distance_sq(&self, f: &SpectralFunction, g: &SpectralFunction) -> Result<f64> {
        let fv = self.values(f)?;
        let gv = self.values(g)?;
        let area = 4.0 * std::f64::consts::PI;
        Ok(self
            .quad
            .weights
            .iter()
            .zip(fv.iter().zip(gv.iter()))
            .map(|(&w, (&a, &b))| w * (a - b) * (a - b))
            .sum::<f64>()
            / area)
    }
}

/// How to estimate ‖f - f_ρ‖²_ρ.
pub enum ErrorMethod<'a> {
    /// Exact quadrature; valid when ρ_X is uniform and both functions are
    /// band-limited within the grid's capacity.
    Quadrature(&'a EvaluationGrid),
    /// Monte Carlo over uniform test points with a reported standard error.
    MonteCarlo { samples: usize, seed: u64 },
}

/// A generalization-error estimate; `std_error` is set on the Monte Carlo path.
#[derive(Clone, Copy, Debug)]
pub struct ErrorEstimate {
    pub value: f64,
    pub std_error: Option<f64>,
}

/// ‖f - f_ρ‖²_ρ for the fitted expansion against a spectral target. Respects
/// the expansion's truncation level.
pub fn generalization_error(
    f: &KernelExpansion,
    target: &SpectralFunction,
    method: ErrorMethod<'_>,
) -> Result<ErrorEstimate> {
    match method {
        ErrorMethod::Quadrature(grid) => {
            let (truncated, untruncated) = paired_errors(f, target, grid)?;
            let value = if f.truncation().is_some() { truncated } else { untruncated };
            Ok(ErrorEstimate { value, std_error: None })
        }
        ErrorMethod::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::Domain("Monte Carlo needs at least one sample".into()));
            }
            let points = sample_design(SamplingDesign::Uniform, samples, seed);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for x in &points {
                let diff = f.eval(x)? - target.eval(x)?;
                let sq = diff * diff;
                sum += sq;
                sum_sq += sq * sq;
            }
            let n = samples as f64;
            let mean = sum / n;
            let var = (sum_sq / n - mean * mean).max(0.0);
            Ok(ErrorEstimate { value: mean, std_error: Some((var / n).sqrt()) })
        }
    }
}

/// Truncated and untruncated squared errors of the same fit, evaluated with
/// one shared positive-weight rule. Because |f_ρ| ≤ M pointwise, clamping can
/// only shrink each node residual, so the first component never exceeds the
/// second beyond rounding.
pub fn paired_errors(
    f: &KernelExpansion,
    target: &SpectralFunction,
    grid: &EvaluationGrid,
) -> Result<(f64, f64)> {
    let f_spec = f.spectral()?;
    let fv = grid.values(&f_spec)?;
    let tv = grid.values(target)?;
    let area = 4.0 * std::f64::consts::PI;
    let clamp = f.truncation();
    let mut err_trunc = 0.0;
    let mut err_raw = 0.0;
    for ((&w, &fi), &ti) in grid.quad.weights.iter().zip(fv.iter()).zip(tv.iter()) {
        let raw = fi - ti;
        err_raw += w * raw * raw;
        let clamped = match clamp {
            Some(m) => fi.clamp(-m, m) - ti,
            None => raw,
        };
        err_trunc += w * clamped * clamped;
    }
    Ok((err_trunc / area, err_raw / area))
}
