//! Problem and solver configuration.

use crate::error::{CapcmError, Result};

/// Which continuation family drives the solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomotopyMode {
    /// Single Newton solve at the target data (manufactured problems).
    Direct,
    /// `phi_t = (1 - t + t phi^{-1/k})^{-k}`, k < n, even data.
    Even,
    /// `phi_t = ((1-t) ell + t phi^{-1/k} - <zeta, z_t>)^{-k}`, k < n,
    /// with the translation point solved at every step.
    Translated,
    /// `phi_t = 1 - t + t phi`, k = n (prescribed reciprocal Gauss
    /// curvature).
    Minkowski,
}

impl HomotopyMode {
    pub fn name(&self) -> &'static str {
        match self {
            HomotopyMode::Direct => "direct",
            HomotopyMode::Even => "even",
            HomotopyMode::Translated => "translated",
            HomotopyMode::Minkowski => "minkowski",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    None,
    /// Invariance under horizontal antipody, enforced by solving on the
    /// half angular range.
    EvenClass,
}

/// Entropy weight for the translation-point functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiChoice {
    /// k-linked default: `-log` for k = 1, `x^{-(k-1)}` for k > 1.
    Auto,
    Quadratic,
    Log,
    Power(f64),
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub k: usize,
    pub homotopy: HomotopyMode,
    pub symmetry: Symmetry,
    pub psi: PsiChoice,
}

impl ProblemSpec {
    pub fn new(k: usize, homotopy: HomotopyMode) -> Self {
        ProblemSpec {
            k,
            homotopy,
            symmetry: Symmetry::None,
            psi: PsiChoice::Auto,
        }
    }

    pub fn with_symmetry(mut self, s: Symmetry) -> Self {
        self.symmetry = s;
        self
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Residual max-norm target.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Backtracking line-search floor (steps halve down to this).
    pub min_step: f64,
    /// Initial continuation step.
    pub dt_init: f64,
    /// Continuation stalls below this step size.
    pub dt_floor: f64,
    /// Minimum admissible smallest eigenvalue of `tau` along the path.
    pub convexity_floor: f64,
    /// Relative tolerance for capillary-hypothesis checks (Robin deficit
    /// against the field scale).
    pub boundary_tol: f64,
    /// Slack allowed in the spherical-convexity hypothesis
    /// `tau[phi^{-1/k}] >= -hypothesis_tol`.
    pub hypothesis_tol: f64,
    /// Translation-point gradient tolerance (relative to scale).
    pub z_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-10,
            max_newton_iters: 30,
            min_step: 1.0 / 4096.0,
            dt_init: 0.1,
            dt_floor: 1e-4,
            convexity_floor: 1e-8,
            boundary_tol: 1e-3,
            hypothesis_tol: 1e-8,
            z_tol: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("newton_tol", self.newton_tol),
            ("min_step", self.min_step),
            ("dt_init", self.dt_init),
            ("dt_floor", self.dt_floor),
            ("boundary_tol", self.boundary_tol),
            ("z_tol", self.z_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(CapcmError::InvalidParameter(format!(
                    "solver.{name} must be positive, got {v}"
                )));
            }
        }
        if self.dt_floor >= self.dt_init {
            return Err(CapcmError::InvalidParameter(format!(
                "continuation floor {} must be below the initial step {}",
                self.dt_floor, self.dt_init
            )));
        }
        Ok(())
    }
}
