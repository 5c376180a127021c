//! Spherical harmonic dimensions, Gegenbauer/Legendre polynomials, sphere
//! surface areas, and the real orthonormal harmonic basis on S².
//!
//! Conventions: `legendre(k, d, t)` evaluates the Legendre polynomial
//! `P_k^{d+1}` normalized so that `P_k^{d+1}(1) = 1`. The real harmonics
//! returned by [`real_harmonic_basis`] are orthonormal with respect to the
//! (unnormalized) surface measure `dω`, so the addition formula reads
//! `Σ_j Y_{k,j}(x) Y_{k,j}(y) = (D_k / |S²|) P_k³(x·y)`.

use crate::error::{Error, Result};

/// Tolerance on the unit-norm invariant of [`SpherePoint`].
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Slack accepted on `|t| <= 1` arguments before declaring a domain error.
pub const COS_DOMAIN_SLACK: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Points on the sphere
// ---------------------------------------------------------------------------

/// A point on the unit sphere S^d, stored as its d+1 Cartesian coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    /// Wraps coordinates that are already unit norm (within [`UNIT_NORM_TOL`]).
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Domain("a sphere point needs at least 2 coordinates".into()));
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        let deviation = (norm - 1.0).abs();
        if deviation > UNIT_NORM_TOL {
            return Err(Error::NotUnitNorm { deviation });
        }
        Ok(Self { coords })
    }

    /// Normalizes arbitrary coordinates onto the sphere.
    pub fn from_unnormalized(coords: Vec<f64>) -> Result<Self> {
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Domain("cannot normalize a zero or non-finite vector".into()));
        }
        let coords = coords.into_iter().map(|c| c / norm).collect();
        Ok(Self { coords })
    }

    /// Convenience constructor for S².
    pub fn xyz(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::new(vec![x, y, z])
    }

    /// The pole (0, …, 0, 1) of S^d.
    pub fn north_pole(d: usize) -> Self {
        let mut coords = vec![0.0; d + 1];
        coords[d] = 1.0;
        Self { coords }
    }

    /// Sphere dimension d (the point lives in R^{d+1}).
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Euclidean inner product x·y.
    pub fn dot(&self, other: &SpherePoint) -> f64 {
        debug_assert_eq!(self.coords.len(), other.coords.len());
        self.coords.iter().zip(&other.coords).map(|(a, b)| a * b).sum()
    }
}

// ---------------------------------------------------------------------------
// Harmonic space dimensions (exact integer arithmetic)
// ---------------------------------------------------------------------------

/// Binomial coefficient as exact integer arithmetic.
fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // Exact at every step: acc holds C(n, i) and C(n, i+1) is an integer.
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Dimension D_k^d of the degree-k spherical harmonics on S^d.
///
/// Computed as dim of homogeneous harmonic polynomials,
/// `C(k+d, k) - C(k+d-2, k-2)`, which equals the quotient form
/// `(2k+d-1)/(k+d-1) · C(k+d-1, k)` for k ≥ 1 and is 1 at k = 0.
pub fn harmonic_dim(k: usize, d: usize) -> u64 {
    assert!(d >= 1, "sphere dimension must be positive");
    let (k, d) = (k as u64, d as u64);
    let total = binomial(k + d, k);
    let lower = if k >= 2 { binomial(k + d - 2, k - 2) } else { 0 };
    u64::try_from(total - lower).expect("harmonic dimension overflows u64")
}

/// Dimension of Π_n^d, the polynomials of degree ≤ n on S^d.
///
/// Equals `Σ_{k=0}^n D_k^d = D_n^{d+1}`.
pub fn cumulative_dim(n: usize, d: usize) -> u64 {
    harmonic_dim(n, d + 1)
}

/// Surface area |S^d| = 2 π^{(d+1)/2} / Γ((d+1)/2).
pub fn sphere_area(d: usize) -> f64 {
    assert!(d >= 1, "sphere dimension must be positive");
    use std::f64::consts::PI;
    if d % 2 == 1 {
        // (d+1)/2 is an integer n: |S^d| = 2 π^n / (n-1)!
        let n = (d + 1) / 2;
        let mut fact = 1.0;
        for i in 1..n {
            fact *= i as f64;
        }
        2.0 * PI.powi(n as i32) / fact
    } else {
        // (d+1)/2 = n + 1/2 with n = d/2: |S^d| = 2 π^n 4^n n! / (2n)!
        let n = d / 2;
        let mut ratio = 1.0; // 4^n n! / (2n)!
        for i in 1..=n {
            ratio *= 4.0 * i as f64;
        }
        for i in 1..=2 * n {
            ratio /= i as f64;
        }
        2.0 * PI.powi(n as i32) * ratio
    }
}

// ---------------------------------------------------------------------------
// Legendre / Gegenbauer polynomials, P_k^{d+1}(1) = 1 normalization
// ---------------------------------------------------------------------------

fn check_cos_domain(t: f64) -> Result<f64> {
    if !(t.abs() <= 1.0 + COS_DOMAIN_SLACK) {
        return Err(Error::Domain(format!("argument t = {t} outside [-1, 1]")));
    }
    Ok(t.clamp(-1.0, 1.0))
}

/// Legendre polynomial `P_k^{d+1}(t)` via the three-term recurrence
/// `(k+d-1) P_{k+1} = (2k+d-1) t P_k - k P_{k-1}`, `P_0 = 1`, `P_1 = t`.
pub fn legendre(k: usize, d: usize, t: f64) -> Result<f64> {
    let t = check_cos_domain(t)?;
    let mut values = LegendreIter::new(d, t);
    Ok(values.nth(k).expect("iterator is infinite"))
}

/// Iterator over `P_0^{d+1}(t), P_1^{d+1}(t), …` sharing one recurrence pass.
pub struct LegendreIter {
    d: f64,
    t: f64,
    k: usize,
    prev: f64, // P_{k-1}
    cur: f64,  // P_k
}

impl LegendreIter {
    pub fn new(d: usize, t: f64) -> Self {
        Self { d: d as f64, t, k: 0, prev: 0.0, cur: 1.0 }
    }
}

impl Iterator for LegendreIter {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let out = self.cur;
        let k = self.k as f64;
        // Seed P_1 = t directly: at k = 0 and d = 1 the recurrence
        // denominator k + d - 1 vanishes.
        let next = if self.k == 0 {
            self.t
        } else {
            ((2.0 * k + self.d - 1.0) * self.t * self.cur - k * self.prev) / (k + self.d - 1.0)
        };
        self.prev = self.cur;
        self.cur = next;
        self.k += 1;
        Some(out)
    }
}

// ---------------------------------------------------------------------------
// Line quadrature on [-1, 1]
// ---------------------------------------------------------------------------

/// Weight function implicit in a [`LineQuadrature`] rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LineWeight {
    /// Plain Lebesgue measure dt.
    Unit,
    /// Gegenbauer weight √(1-t²) dt.
    SqrtOneMinusT2,
}

/// A quadrature rule for ∫ f(t) w(t) dt over [-1, 1], exact for polynomial
/// integrands f up to `exact_degree`.
#[derive(Clone, Debug)]
pub struct LineQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
    pub weight: LineWeight,
}

impl LineQuadrature {
    /// Gauss–Legendre rule with `n` nodes (weight 1, exact to degree 2n-1).
    ///
    /// Nodes are roots of P_n found by Newton iteration from the Chebyshev
    /// initial guess; converges to machine precision in a few steps.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 1);
        use std::f64::consts::PI;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // p = P_n(x), dp = P_n'(x) from the classical recurrence.
                let (mut p_prev, mut p) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
                    p_prev = p;
                    p = p_next;
                }
                dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
                let step = p / dp;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        // A Newton start at cos(…) descends from +1, so order ascending for tidiness.
        nodes.reverse();
        weights.reverse();
        Self { nodes, weights, exact_degree: 2 * n - 1, weight: LineWeight::Unit }
    }

    /// Gauss–Chebyshev rule of the second kind with `n` nodes
    /// (weight √(1-t²), exact to degree 2n-1). Nodes and weights are closed form.
    pub fn gauss_chebyshev2(n: usize) -> Self {
        assert!(n >= 1);
        use std::f64::consts::PI;
        let m = (n + 1) as f64;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 1..=n {
            let angle = i as f64 * PI / m;
            nodes.push(angle.cos());
            weights.push(PI / m * angle.sin().powi(2));
        }
        Self { nodes, weights, exact_degree: 2 * n - 1, weight: LineWeight::SqrtOneMinusT2 }
    }

    /// Σ w_i f(t_i), approximating ∫ f(t) w(t) dt.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }
}

/// Residual of the Legendre orthogonality relation
/// `∫ P_k P_j (1-t²)^{(d-2)/2} dt = δ_{kj} |S^d| / (|S^{d-1}| D_k^d)`,
/// evaluated with the supplied line rule. Test-support oracle.
pub fn legendre_orthogonality_residual(
    k: usize,
    j: usize,
    d: usize,
    quad: &LineQuadrature,
) -> Result<f64> {
    if d < 2 {
        return Err(Error::UnsupportedDimension { d, context: "orthogonality residual needs d >= 2" });
    }
    let required = k + j + d;
    if quad.exact_degree < required {
        return Err(Error::InsufficientQuadrature { available: quad.exact_degree, required });
    }
    // Split (1-t²)^{(d-2)/2} into the rule's implicit weight and a polynomial part.
    let (expected_weight, extra_power) = if d % 2 == 0 {
        (LineWeight::Unit, (d - 2) / 2)
    } else {
        (LineWeight::SqrtOneMinusT2, (d - 3) / 2)
    };
    if quad.weight != expected_weight {
        return Err(Error::Domain(format!(
            "line rule weight {:?} does not match dimension d={d}",
            quad.weight
        )));
    }
    let integral = quad.integrate(|t| {
        let pk = legendre(k, d, t).expect("node in domain");
        let pj = legendre(j, d, t).expect("node in domain");
        pk * pj * (1.0 - t * t).powi(extra_power as i32)
    });
    let expected = if k == j {
        sphere_area(d) / (sphere_area(d - 1) * harmonic_dim(k, d) as f64)
    } else {
        0.0
    };
    Ok((integral - expected).abs())
}

// ---------------------------------------------------------------------------
// Real orthonormal spherical harmonics on S²
// ---------------------------------------------------------------------------

/// Flat index of the basis function (k, j), j ∈ 0..2k+1, in a table holding
/// all degrees 0..=k_max: degree k occupies positions k² .. (k+1)².
#[inline]
pub fn flat_index(k: usize, j: usize) -> usize {
    debug_assert!(j < 2 * k + 1);
    k * k + j
}

/// Evaluates all real orthonormal harmonics Y_{k,j}(x) for 0 ≤ k ≤ k_max on S².
///
/// Layout per degree k: [m=0, cos(1φ), sin(1φ), cos(2φ), sin(2φ), …].
/// Orthonormal with respect to dω; uses the fully normalized associated
/// Legendre recurrence (no Condon–Shortley phase), stable to high degree.
pub fn harmonic_basis_upto(x: &SpherePoint, k_max: usize) -> Result<Vec<f64>> {
    if x.dim() != 2 {
        return Err(Error::UnsupportedDimension { d: x.dim(), context: "harmonic basis is S²-only" });
    }
    let c = x.coords();
    let (ct, st) = (c[2], (c[0] * c[0] + c[1] * c[1]).sqrt());
    // Azimuthal direction; the m>0 terms carry a sinθ^m factor so the pole is safe.
    let (cos_phi, sin_phi) = if st > 0.0 { (c[0] / st, c[1] / st) } else { (1.0, 0.0) };

    let dim = (k_max + 1) * (k_max + 1);
    let mut out = vec![0.0; dim];

    use std::f64::consts::PI;
    // nbar[k] holds the normalized associated Legendre value for the current m.
    let mut diag = (1.0 / (4.0 * PI)).sqrt(); // N̄_m^m, starting at m = 0
    let (mut cos_m, mut sin_m) = (1.0, 0.0); // cos(mφ), sin(mφ), starting at m = 0

    for m in 0..=k_max {
        if m > 0 {
            diag *= st * ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
            let (c_new, s_new) = (
                cos_m * cos_phi - sin_m * sin_phi,
                sin_m * cos_phi + cos_m * sin_phi,
            );
            cos_m = c_new;
            sin_m = s_new;
        }
        // Upward recurrence in k at fixed m.
        let mut prev = 0.0;
        let mut cur = diag;
        for k in m..=k_max {
            if k > m {
                let kf = k as f64;
                let mf = m as f64;
                let a = ((4.0 * kf * kf - 1.0) / (kf * kf - mf * mf)).sqrt();
                let b = (((kf - 1.0) * (kf - 1.0) - mf * mf)
                    / (4.0 * (kf - 1.0) * (kf - 1.0) - 1.0))
                    .sqrt();
                let next = a * (ct * cur - b * prev);
                prev = cur;
                cur = next;
            }
            if m == 0 {
                out[flat_index(k, 0)] = cur;
            } else {
                let sqrt2 = std::f64::consts::SQRT_2;
                out[flat_index(k, 2 * m - 1)] = sqrt2 * cur * cos_m;
                out[flat_index(k, 2 * m)] = sqrt2 * cur * sin_m;
            }
        }
    }
    Ok(out)
}

/// The 2k+1 real orthonormal spherical harmonics of degree k at x ∈ S².
pub fn real_harmonic_basis(k: usize, x: &SpherePoint) -> Result<Vec<f64>> {
    let all = harmonic_basis_upto(x, k)?;
    Ok(all[k * k..(k + 1) * (k + 1)].to_vec())
}
