//! Discretization of the spherical cap in geodesic polar coordinates.
//!
//! A point of the cap is `zeta(rho, omega) = (sin(rho) omega, cos(rho) - cos(theta))`
//! with `omega` on the unit (n-1)-sphere and `rho in [0, theta]`. The induced
//! metric is the round one, `g = d rho^2 + sin^2(rho) d omega^2`, and the area
//! element is `sin^{n-1}(rho) d rho d omega`.
//!
//! The radial grid is staggered (`rho_j = (j + 1/2) h`) so the coordinate
//! singularity at the pole is never a node; stencils reaching past the pole
//! use the parity identification `f(-rho, phi) = f(rho, phi + pi)`. Nodes are
//! ordered angle-major (`p = i * nr + j`), which keeps the stencil couplings
//! banded except for the angular wrap and the pole partners.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use crate::error::{CapcmError, Result};
use crate::hessian_ops::SmallSymMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    /// Fields depend on `rho` only; any `n >= 2`.
    Axisym,
    /// Full angular resolution, `n = 2` only.
    Full2d,
}

#[derive(Debug, Clone)]
pub struct CapDomain {
    pub n: usize,
    pub theta: f64,
    pub mode: GridMode,
    pub nr: usize,
    /// Angular node count (1 in axisym mode).
    pub nphi: usize,
    /// Angular period: `2 pi` for full grids, `pi` when the even class
    /// (invariance under horizontal antipody) is enforced by construction.
    pub angular_period: f64,
    /// Ring-0 angular shift of the pole parity partner (`nphi / 2` on full
    /// grids, `0` on even-reduced grids where `phi + pi ~ phi`).
    pub pole_offset: usize,
    pub h: f64,
    pub dphi: f64,
    pub rho: Vec<f64>,
    /// Quadrature weight per node (midpoint in `rho`, trapezoid in `phi`).
    pub weights: Vec<f64>,
    /// Area of the unit (n-1)-sphere.
    pub sphere_area: f64,
}

/// Area of the unit m-sphere `S^m`.
pub fn sphere_area(m: usize) -> f64 {
    match m {
        0 => 2.0,
        1 => TAU,
        _ => TAU / (m as f64 - 1.0) * sphere_area(m - 2),
    }
}

/// `int_0^theta sin^m(rho) d rho` by the standard reduction.
pub fn sin_power_integral(m: usize, theta: f64) -> f64 {
    match m {
        0 => theta,
        1 => 1.0 - theta.cos(),
        _ => {
            (-theta.cos() * theta.sin().powi(m as i32 - 1)
                + (m as f64 - 1.0) * sin_power_integral(m - 2, theta))
                / m as f64
        }
    }
}

impl CapDomain {
    pub fn build(n: usize, theta: f64, mode: GridMode, nr: usize, nphi: usize) -> Result<Arc<Self>> {
        Self::build_inner(n, theta, mode, nr, nphi, false)
    }

    /// Grid over the half angular range `[0, pi)` with period `pi`,
    /// representing fields invariant under horizontal antipody.
    pub fn build_even(n: usize, theta: f64, nr: usize, nphi_half: usize) -> Result<Arc<Self>> {
        Self::build_inner(n, theta, GridMode::Full2d, nr, nphi_half, true)
    }

    fn build_inner(
        n: usize,
        theta: f64,
        mode: GridMode,
        nr: usize,
        nphi: usize,
        even_reduced: bool,
    ) -> Result<Arc<Self>> {
        if !(theta > 0.0 && theta <= PI / 2.0 + 1e-15) {
            return Err(CapcmError::InvalidParameter(format!(
                "contact angle theta = {theta} outside (0, pi/2]"
            )));
        }
        if n < 2 || n > crate::hessian_ops::MAX_N {
            return Err(CapcmError::InvalidParameter(format!(
                "hypersurface dimension n = {n} outside [2, {}]",
                crate::hessian_ops::MAX_N
            )));
        }
        if mode == GridMode::Full2d && n != 2 {
            return Err(CapcmError::InvalidParameter(format!(
                "full2d grids require n = 2, got n = {n}"
            )));
        }
        if nr < 8 {
            return Err(CapcmError::InvalidParameter(format!(
                "radial node count Nr = {nr} too small (need >= 8)"
            )));
        }
        let nphi = if mode == GridMode::Axisym { 1 } else { nphi };
        if mode == GridMode::Full2d {
            if nphi < 8 || nphi % 2 != 0 {
                return Err(CapcmError::InvalidParameter(format!(
                    "angular node count Nphi = {nphi} must be even and >= 8"
                )));
            }
        }
        let h = theta / nr as f64;
        let rho: Vec<f64> = (0..nr).map(|j| (j as f64 + 0.5) * h).collect();
        let angular_period = if even_reduced { PI } else { TAU };
        let dphi = if mode == GridMode::Axisym {
            0.0
        } else {
            angular_period / nphi as f64
        };
        let pole_offset = if mode == GridMode::Axisym || even_reduced {
            0
        } else {
            nphi / 2
        };
        let area = sphere_area(n - 1);
        let mut weights = Vec::with_capacity(nr * nphi);
        for i in 0..nphi {
            let _ = i;
            for j in 0..nr {
                let ring = rho[j].sin().powi(n as i32 - 1) * h;
                let w = match mode {
                    GridMode::Axisym => area * ring,
                    // even-reduced grids carry the full measure: each node
                    // stands for itself and its antipodal image
                    GridMode::Full2d => ring * dphi * if even_reduced { 2.0 } else { 1.0 },
                };
                weights.push(w);
            }
        }
        Ok(Arc::new(CapDomain {
            n,
            theta,
            mode,
            nr,
            nphi,
            angular_period,
            pole_offset,
            h,
            dphi,
            rho,
            weights,
            sphere_area: area,
        }))
    }

    pub fn even_reduced(&self) -> bool {
        self.mode == GridMode::Full2d && self.angular_period < PI * 1.5
    }

    pub fn node_count(&self) -> usize {
        self.nr * self.nphi
    }

    #[inline]
    pub fn idx(&self, j: usize, i: usize) -> usize {
        i * self.nr + j
    }

    #[inline]
    pub fn split(&self, p: usize) -> (usize, usize) {
        (p % self.nr, p / self.nr)
    }

    #[inline]
    pub fn rho_of(&self, p: usize) -> f64 {
        self.rho[p % self.nr]
    }

    #[inline]
    pub fn phi_of(&self, p: usize) -> f64 {
        (p / self.nr) as f64 * self.dphi
    }

    pub fn phi_at(&self, i: usize) -> f64 {
        i as f64 * self.dphi
    }

    /// Ambient coordinates of the cap point at `(rho, omega)`.
    pub fn polar_to_ambient(&self, rho: f64, omega: &[f64]) -> Vec<f64> {
        assert_eq!(omega.len(), self.n);
        let mut zeta = Vec::with_capacity(self.n + 1);
        let sr = rho.sin();
        for w in omega {
            zeta.push(sr * w);
        }
        zeta.push(rho.cos() - self.theta.cos());
        zeta
    }

    /// Deterministic quadrature: midpoint in `rho`, trapezoid in `phi`.
    pub fn quadrature(&self, f: &ScalarField) -> Result<f64> {
        self.check_same(&f.domain)?;
        // sequential accumulation keeps results bit-identical across thread counts
        Ok(self
            .weights
            .iter()
            .zip(&f.values)
            .map(|(w, v)| w * v)
            .sum())
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Exact cap area `|S^{n-1}| int_0^theta sin^{n-1}`.
    pub fn cap_area_exact(&self) -> f64 {
        self.sphere_area * sin_power_integral(self.n - 1, self.theta)
    }

    pub fn check_same(&self, other: &CapDomain) -> Result<()> {
        let same = self.n == other.n
            && self.theta == other.theta
            && self.mode == other.mode
            && self.nr == other.nr
            && self.nphi == other.nphi
            && self.angular_period == other.angular_period;
        if same {
            Ok(())
        } else {
            Err(CapcmError::DomainMismatch(format!(
                "(n={}, theta={}, {:?}, {}x{}) vs (n={}, theta={}, {:?}, {}x{})",
                self.n,
                self.theta,
                self.mode,
                self.nr,
                self.nphi,
                other.n,
                other.theta,
                other.mode,
                other.nr,
                other.nphi
            )))
        }
    }

    /// Horizontal coordinate function `zeta_i = sin(rho) omega_i` (full
    /// grids with `n = 2` only; these are odd under antipody and therefore
    /// not representable on even-reduced or axisymmetric grids).
    pub fn zeta_field(self: &Arc<Self>, i: usize) -> Result<ScalarField> {
        if self.mode != GridMode::Full2d || self.even_reduced() {
            return Err(CapcmError::InvalidParameter(
                "zeta coordinate fields require a full (non-reduced) 2d grid".into(),
            ));
        }
        if i >= self.n {
            return Err(CapcmError::InvalidParameter(format!(
                "zeta index {i} out of range for n = {}",
                self.n
            )));
        }
        Ok(ScalarField::from_fn(self.clone(), |rho, phi| {
            rho.sin() * if i == 0 { phi.cos() } else { phi.sin() }
        }))
    }
}

/// Grid function on the cap.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub domain: Arc<CapDomain>,
    pub values: Vec<f64>,
    /// Set by constructors that guarantee the Robin boundary condition
    /// `d_mu f = cot(theta) f` analytically.
    pub capillary: bool,
}

impl ScalarField {
    pub fn from_values(domain: Arc<CapDomain>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), domain.node_count());
        ScalarField {
            domain,
            values,
            capillary: false,
        }
    }

    pub fn from_fn(domain: Arc<CapDomain>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..domain.node_count())
            .map(|p| f(domain.rho_of(p), domain.phi_of(p)))
            .collect();
        ScalarField {
            domain,
            values,
            capillary: false,
        }
    }

    pub fn constant(domain: Arc<CapDomain>, c: f64) -> Self {
        let values = vec![c; domain.node_count()];
        ScalarField {
            domain,
            values,
            capillary: false,
        }
    }

    pub fn mark_capillary(mut self) -> Self {
        self.capillary = true;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// self + c * other
    pub fn add_scaled(&self, c: f64, other: &ScalarField) -> ScalarField {
        self.domain.check_same(&other.domain).expect("domain mismatch");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        ScalarField {
            domain: self.domain.clone(),
            values,
            capillary: self.capillary && other.capillary,
        }
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        ScalarField {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            capillary: self.capillary,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
            capillary: false,
        }
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Per-node symmetric 2-tensor in the orthonormal frame
/// `{e_rho, angular frame}`.
#[derive(Debug, Clone)]
pub struct SymTensorField {
    pub domain: Arc<CapDomain>,
    pub mats: Vec<SmallSymMat>,
    /// Optional per-node eigenvalue cache (ascending).
    pub eigenvalues: Option<Vec<[f64; crate::hessian_ops::MAX_N]>>,
}

impl SymTensorField {
    pub fn new(domain: Arc<CapDomain>, mats: Vec<SmallSymMat>) -> Self {
        assert_eq!(mats.len(), domain.node_count());
        SymTensorField {
            domain,
            mats,
            eigenvalues: None,
        }
    }

    pub fn with_eigenvalues(mut self) -> Self {
        let ev = crate::par::map_indexed(self.mats.len(), |p| self.mats[p].eigenvalues());
        self.eigenvalues = Some(ev);
        self
    }

    pub fn min_lambda_min(&self) -> f64 {
        match &self.eigenvalues {
            Some(ev) => ev.iter().map(|e| e[0]).fold(f64::INFINITY, f64::min),
            None => self
                .mats
                .iter()
                .map(|m| m.lambda_min())
                .fold(f64::INFINITY, f64::min),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(CapDomain::build(2, 0.0, GridMode::Full2d, 64, 128).is_err());
        assert!(CapDomain::build(2, 2.0, GridMode::Full2d, 64, 128).is_err()); // > pi/2
        assert!(CapDomain::build(3, 1.0, GridMode::Full2d, 64, 128).is_err()); // full2d needs n=2
        assert!(CapDomain::build(2, 1.0, GridMode::Full2d, 64, 127).is_err()); // odd Nphi
        assert!(CapDomain::build(1, 1.0, GridMode::Axisym, 64, 0).is_err());
        assert!(CapDomain::build(3, PI / 3.0, GridMode::Axisym, 200, 0).is_ok());
    }

    #[test]
    fn hemisphere_measure() {
        // n=2, theta=pi/2: area 2*pi
        let d = CapDomain::build(2, PI / 2.0, GridMode::Full2d, 64, 128).unwrap();
        assert_eq!(d.node_count(), 64 * 128);
        let err = (d.total_measure() - TAU).abs();
        assert!(err < 2e-4 * TAU, "err = {err}");
        // refined grid hits the tight tolerance
        let d2 = CapDomain::build(2, PI / 2.0, GridMode::Axisym, 2000, 0).unwrap();
        assert!((d2.total_measure() - TAU).abs() < 1e-6);
    }

    #[test]
    fn quadrature_examples() {
        // odd integrand is annihilated exactly by the angular trapezoid
        let d = CapDomain::build(2, PI / 2.0, GridMode::Full2d, 48, 96).unwrap();
        let z1 = d.zeta_field(0).unwrap();
        assert!(d.quadrature(&z1).unwrap().abs() < 1e-12);
        // ell = 1 at theta = pi/2, so its integral is the hemisphere area
        let ell = ScalarField::constant(d.clone(), 1.0);
        let err = (d.quadrature(&ell).unwrap() - TAU).abs();
        assert!(err < 1e-3);
    }

    #[test]
    fn quadrature_second_order_in_nr() {
        let exact = |n: usize, theta: f64| sphere_area(n - 1) * sin_power_integral(n - 1, theta);
        let theta = PI / 3.0;
        let mut prev_err = f64::NAN;
        for nr in [50usize, 100, 200] {
            let d = CapDomain::build(3, theta, GridMode::Axisym, nr, 0).unwrap();
            let err = (d.total_measure() - exact(3, theta)).abs();
            if !prev_err.is_nan() {
                let order = (prev_err / err).log2();
                assert!(order > 1.8 && order < 2.2, "order = {order}");
            }
            prev_err = err;
        }
    }

    #[test]
    fn ambient_map_examples() {
        let theta = PI / 3.0;
        let d = CapDomain::build(2, theta, GridMode::Full2d, 16, 16).unwrap();
        let pole = d.polar_to_ambient(0.0, &[1.0, 0.0]);
        assert!((pole[0]).abs() < 1e-15 && pole[1].abs() < 1e-15);
        assert!((pole[2] - (1.0 - theta.cos())).abs() < 1e-15);
        let rim = d.polar_to_ambient(theta, &[0.6, 0.8]);
        assert!((rim[2]).abs() < 1e-15);
        assert!((rim[0] - theta.sin() * 0.6).abs() < 1e-15);
        // theta = pi/3, rho = pi/3, omega = E1 -> (sqrt(3)/2, 0, 0)
        let p = d.polar_to_ambient(PI / 3.0, &[1.0, 0.0]);
        assert!((p[0] - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(p[1].abs() < 1e-15 && p[2].abs() < 1e-15);
        // |zeta + cos(theta) E3| = 1 and height >= 0 on a sample
        for &(r, w0, w1) in &[(0.3, 1.0, 0.0), (0.9, 0.0, 1.0), (theta, -0.28, 0.96)] {
            let z = d.polar_to_ambient(r, &[w0, w1]);
            let norm =
                (z[0] * z[0] + z[1] * z[1] + (z[2] + theta.cos()) * (z[2] + theta.cos())).sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            assert!(z[2] >= -1e-15);
        }
    }

    #[test]
    fn even_reduced_grid_carries_full_measure() {
        let theta = PI / 3.0;
        let full = CapDomain::build(2, theta, GridMode::Full2d, 64, 128).unwrap();
        let even = CapDomain::build_even(2, theta, 64, 64).unwrap();
        assert!((full.total_measure() - even.total_measure()).abs() < 1e-12);
        assert_eq!(even.pole_offset, 0);
        assert_eq!(full.pole_offset, 64);
    }

    #[test]
    fn domain_mismatch_detected() {
        let a = CapDomain::build(2, PI / 3.0, GridMode::Full2d, 16, 16).unwrap();
        let b = CapDomain::build(2, PI / 3.0, GridMode::Full2d, 16, 32).unwrap();
        let f = ScalarField::constant(b, 1.0);
        assert!(a.quadrature(&f).is_err());
    }
}
