//! Admissible cutoff functions η shaping the needlet kernel's frequency profile.
//!
//! An admissible window is C^∞ on [0, ∞) with η = 1 on [0, 1], supp η ⊂ [0, 2]
//! and 0 ≤ η ≤ 1 on [1, 2]. The default [`WindowProfile::SmoothBump`] is the
//! standard partition-of-unity bump, chosen for its symmetry η(1.5) = 0.5 and
//! genuine C^∞ regularity; [`WindowProfile::LinearRamp`] is continuous but not
//! smooth and exists for tests and contrast experiments.

use serde::{Deserialize, Serialize};

/// Supported window shapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowProfile {
    #[default]
    SmoothBump,
    LinearRamp,
}

/// A concrete admissible (or test-grade) window function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct AdmissibleWindow {
    pub profile: WindowProfile,
}

/// h(s) = exp(-1/s) for s > 0, else 0; the C^∞ gluing seed.
fn bump_seed(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

pub fn make_window(profile: WindowProfile) -> AdmissibleWindow {
    AdmissibleWindow { profile }
}

impl AdmissibleWindow {
    pub fn smooth_bump() -> Self {
        make_window(WindowProfile::SmoothBump)
    }

    pub fn linear_ramp() -> Self {
        make_window(WindowProfile::LinearRamp)
    }

    /// η(t) for t ≥ 0 (negative arguments are treated as 0, where η = 1).
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 1.0 {
            return 1.0;
        }
        if t >= 2.0 {
            return 0.0;
        }
        match self.profile {
            WindowProfile::SmoothBump => {
                let a = bump_seed(2.0 - t);
                let b = bump_seed(t - 1.0);
                a / (a + b)
            }
            WindowProfile::LinearRamp => 2.0 - t,
        }
    }

    /// Whether the profile is C^∞ (the admissibility smoothness condition).
    pub fn is_smooth(&self) -> bool {
        matches!(self.profile, WindowProfile::SmoothBump)
    }
}

/// One grid point violating a window range condition.
#[derive(Clone, Debug)]
pub struct WindowViolation {
    pub t: f64,
    pub value: f64,
    pub condition: &'static str,
}

/// Outcome of checking the admissibility range conditions on a grid.
#[derive(Clone, Debug, Default)]
pub struct WindowReport {
    pub violations: Vec<WindowViolation>,
    /// Raised when the profile is not C^∞ (range conditions may still hold).
    pub smoothness_flag: bool,
}

impl WindowReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty() && !self.smoothness_flag
    }
}

/// Checks the three range conditions for an arbitrary window function on a
/// grid over [0, 3]: η = 1 on [0, 1], η ∈ [0, 1] on [1, 2], η = 0 on [2, 3].
pub fn validate_window_fn(
    eval: impl Fn(f64) -> f64,
    smooth: bool,
    grid_size: usize,
) -> WindowReport {
    assert!(grid_size >= 100, "grid too coarse to be meaningful");
    let mut report = WindowReport { violations: Vec::new(), smoothness_flag: !smooth };
    for i in 0..=grid_size {
        let t = 3.0 * i as f64 / grid_size as f64;
        let v = eval(t);
        let condition = if t <= 1.0 && (v - 1.0).abs() > 1e-12 {
            Some("eta(t) = 1 on [0,1]")
        } else if t >= 2.0 && v.abs() > 1e-12 {
            Some("eta(t) = 0 for t >= 2")
        } else if t > 1.0 && t < 2.0 && !(-1e-12..=1.0 + 1e-12).contains(&v) {
            Some("0 <= eta(t) <= 1 on [1,2]")
        } else {
            None
        };
        if let Some(condition) = condition {
            report.violations.push(WindowViolation { t, value: v, condition });
        }
    }
    report
}

/// Grid validation of a constructed window.
pub fn validate_window(window: &AdmissibleWindow, grid_size: usize) -> WindowReport {
    validate_window_fn(|t| window.eval(t), window.is_smooth(), grid_size)
}
