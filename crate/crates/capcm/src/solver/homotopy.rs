//! Homotopy schedules connecting the cap problem to the target data, and
//! the admissibility checks behind them.

use crate::diffops;
use crate::domain::{GridMode, ScalarField};
use crate::error::{CapcmError, Result};
use crate::geometry::ell;
use crate::hessian_ops::lambda_min_field;

use super::config::{HomotopyMode, ProblemSpec, SolverConfig, Symmetry};
use super::translate::{find_translation_point, Psi};

/// One evaluated point of a homotopy path.
pub struct PathPoint {
    pub phi: ScalarField,
    pub z: Option<Vec<f64>>,
    /// Smallest eigenvalue of `tau[phi_t^{-1/k}]` along translated paths:
    /// whether the recentered data stays spherically convex at discrete
    /// level is monitored and reported, not enforced.
    pub data_min_lambda: Option<f64>,
}

pub enum Path {
    /// `phi_t = (1 - t + t phi^{-1/k})^{-k}` (k < n).
    Even { phi: ScalarField, k: usize },
    /// `phi_t = 1 - t + t phi` (k = n).
    Minkowski { phi: ScalarField },
    /// `phi_t = ((1-t) ell + t phi^{-1/k} - <zeta, z_t>)^{-k}` with the
    /// translation point recomputed at every step.
    Translated {
        h_target: ScalarField,
        k: usize,
        psi: Psi,
        z_tol: f64,
    },
}

impl Path {
    pub fn at(&self, t: f64) -> Result<PathPoint> {
        match self {
            Path::Even { phi, k } => {
                let e = -1.0 / *k as f64;
                let ki = *k as i32;
                let vals: Vec<f64> = phi
                    .values
                    .iter()
                    .map(|p| (1.0 - t + t * p.powf(e)).powi(-ki))
                    .collect();
                Ok(PathPoint {
                    phi: ScalarField::from_values(phi.domain.clone(), vals),
                    z: None,
                    data_min_lambda: None,
                })
            }
            Path::Minkowski { phi } => Ok(PathPoint {
                phi: phi.map(|p| 1.0 - t + t * p),
                z: None,
                data_min_lambda: None,
            }),
            Path::Translated {
                h_target,
                k,
                psi,
                z_tol,
            } => {
                let d = &h_target.domain;
                let ht = ell(d).scale(1.0 - t).add_scaled(t, h_target);
                let ht = ht.mark_capillary();
                let z = find_translation_point(&ht, *psi, *z_tol)?;
                let ki = *k as i32;
                let vals: Vec<f64> = (0..d.node_count())
                    .map(|p| {
                        let (sr, phi_c) = (d.rho_of(p).sin(), d.phi_of(p));
                        let dot = if d.mode == GridMode::Full2d {
                            sr * (z[0] * phi_c.cos() + z[1] * phi_c.sin())
                        } else {
                            0.0 // axisymmetric: z = 0 by symmetry
                        };
                        (ht.values[p] - dot).powi(-ki)
                    })
                    .collect();
                // recentering subtracts a discrete-kernel field, so the
                // convexity of the path data equals that of h_t
                let data_min_lambda =
                    Some(lambda_min_field(&crate::geometry::tau(&ht)).min());
                Ok(PathPoint {
                    phi: ScalarField::from_values(d.clone(), vals),
                    z: Some(z),
                    data_min_lambda,
                })
            }
        }
    }

    /// Start scale: `s_0 = c ell` solves the path's `t = 0` problem
    /// analytically for the even and Minkowski families. (The translated
    /// family starts at the solution of `sigma_k = ell^{-k}`, supplied by
    /// a prelude continuation.)
    pub fn start_scale(&self, n: usize) -> Option<f64> {
        match self {
            Path::Even { k, .. } => {
                Some(crate::hessian_ops::binom(n, *k).powf(-1.0 / *k as f64))
            }
            Path::Minkowski { .. } => Some(1.0),
            Path::Translated { .. } => None,
        }
    }
}

/// Mode-dependent admissibility of the data. Violations are hard errors in
/// the homotopy modes and warnings in direct mode.
pub fn check_hypotheses(
    spec: &ProblemSpec,
    phi: &ScalarField,
    config: &SolverConfig,
) -> Result<Vec<String>> {
    let d = &phi.domain;
    let n = d.n;
    let k = spec.k;
    let mut issues: Vec<String> = Vec::new();

    if k < 1 || k > n {
        return Err(CapcmError::InvalidParameter(format!(
            "k = {k} out of range for n = {n}"
        )));
    }
    if !phi.all_finite() || phi.min() <= 0.0 {
        return Err(CapcmError::HypothesisViolation(format!(
            "phi must be finite and positive (min = {:.3e})",
            phi.min()
        )));
    }
    match spec.symmetry {
        Symmetry::EvenClass => {
            if d.mode == GridMode::Full2d && !d.even_reduced() {
                return Err(CapcmError::InvalidParameter(
                    "even-class symmetry is enforced on the half-range grid; \
                     build the domain with the even reduction"
                        .into(),
                ));
            }
        }
        Symmetry::None => {}
    }

    match spec.homotopy {
        HomotopyMode::Direct => {}
        HomotopyMode::Even | HomotopyMode::Translated => {
            if k >= n {
                return Err(CapcmError::InvalidParameter(format!(
                    "homotopy mode {} requires k < n",
                    spec.homotopy.name()
                )));
            }
            if d.theta > std::f64::consts::FRAC_PI_2 - 1e-3 {
                return Err(CapcmError::HypothesisViolation(format!(
                    "k < n continuation requires theta <= pi/2 - 1e-3, got {}",
                    d.theta
                )));
            }
        }
        HomotopyMode::Minkowski => {
            if k != n {
                return Err(CapcmError::InvalidParameter(format!(
                    "minkowski mode means k = n, got k = {k}, n = {n}"
                )));
            }
        }
    }

    let scale = phi.max_abs().max(1.0);
    let f_root = phi.map(|p| p.powf(-1.0 / k as f64));
    let root_scale = f_root.max_abs().max(1e-30);

    // Direct mode runs the sufficient-condition diagnostics of the
    // continuation theory for the report, but does not enforce them:
    // manufactured data need not satisfy them to be solvable.
    if spec.homotopy == HomotopyMode::Direct && k < n {
        let min_l = lambda_min_field(&crate::geometry::tau(&f_root)).min();
        if min_l < -config.hypothesis_tol * root_scale - 1e-10 {
            issues.push(format!(
                "tau[phi^(-1/k)] not nonnegative: min eigenvalue {min_l:.3e}"
            ));
        }
        let deficit = diffops::robin_deficit_max(&f_root);
        let slack = config.boundary_tol.max(5.0 * d.h * d.h) * root_scale;
        if deficit > slack {
            issues.push(format!(
                "phi^(-1/k) is not capillary: Robin deficit {deficit:.3e} > {slack:.3e}"
            ));
        }
    }

    // spherical convexity of phi^{-1/k} and the Robin side condition
    if spec.homotopy == HomotopyMode::Even || spec.homotopy == HomotopyMode::Translated {
        let min_l = lambda_min_field(&crate::geometry::tau(&f_root)).min();
        if min_l < -config.hypothesis_tol * root_scale - 1e-10 {
            issues.push(format!(
                "tau[phi^(-1/k)] not nonnegative: min eigenvalue {min_l:.3e}"
            ));
        }
        let cot = d.theta.cos() / d.theta.sin();
        let vals = diffops::boundary_value(&f_root);
        let ders = diffops::boundary_radial_deriv(&f_root);
        // the one-sided trace of an exactly capillary function carries an
        // O(h^2) deficit; keep the slack above that floor
        let slack = config.boundary_tol.max(5.0 * d.h * d.h) * root_scale;
        match spec.homotopy {
            HomotopyMode::Even => {
                // inequality d_mu f <= cot(theta) f
                let worst = ders
                    .iter()
                    .zip(&vals)
                    .map(|(dv, v)| dv - cot * v)
                    .fold(f64::NEG_INFINITY, f64::max);
                if worst > slack {
                    issues.push(format!(
                        "Robin inequality violated: max(d_mu - cot theta) phi^(-1/k) = {worst:.3e}"
                    ));
                }
                // evenness of phi under horizontal antipody
                if d.mode == GridMode::Full2d && !d.even_reduced() {
                    let mut dev = 0.0f64;
                    for i in 0..d.nphi / 2 {
                        for j in 0..d.nr {
                            dev = dev.max(
                                (phi.values[d.idx(j, i)]
                                    - phi.values[d.idx(j, i + d.nphi / 2)])
                                .abs(),
                            );
                        }
                    }
                    if dev > 1e-12 * scale {
                        issues.push(format!(
                            "phi is not even under horizontal antipody: max deviation {dev:.3e}"
                        ));
                    }
                }
            }
            HomotopyMode::Translated => {
                let worst = diffops::robin_deficit_max(&f_root);
                if worst > slack {
                    issues.push(format!(
                        "phi^(-1/k) is not capillary: Robin deficit {worst:.3e} > {slack:.3e}"
                    ));
                }
            }
            _ => unreachable!(),
        }
    }

    // horizontal moments of phi must vanish for the translated and
    // Minkowski families
    if spec.homotopy == HomotopyMode::Translated || spec.homotopy == HomotopyMode::Minkowski {
        if d.mode == GridMode::Full2d && !d.even_reduced() {
            for i in 0..2 {
                let z = d.zeta_field(i)?;
                let m: f64 = d
                    .weights
                    .iter()
                    .zip(phi.values.iter().zip(&z.values))
                    .map(|(w, (p, zv))| w * p * zv)
                    .sum();
                let tol = 1e-8 * scale * d.total_measure();
                if m.abs() > tol {
                    issues.push(format!(
                        "int phi zeta_{} dsigma = {m:.6e} exceeds {tol:.3e}",
                        i + 1
                    ));
                }
            }
        }
        // axisymmetric and even-reduced grids carry the moments
        // identically to zero
    }

    if spec.homotopy == HomotopyMode::Direct {
        Ok(issues)
    } else if issues.is_empty() {
        Ok(issues)
    } else {
        Err(CapcmError::HypothesisViolation(issues.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::CapDomain;
    use crate::solver::PsiChoice;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn full(nr: usize) -> Arc<CapDomain> {
        CapDomain::build(2, PI / 3.0, GridMode::Full2d, nr, 2 * nr).unwrap()
    }

    #[test]
    fn even_path_endpoints_and_monotonicity() {
        let d = full(16);
        let phi = ScalarField::constant(d.clone(), 4.0);
        let path = Path::Even { phi: phi.clone(), k: 1 };
        let p0 = path.at(0.0).unwrap();
        assert!(p0.phi.max_abs_diff(&ScalarField::constant(d.clone(), 1.0)) < 1e-15);
        let p1 = path.at(1.0).unwrap();
        assert!(p1.phi.max_abs_diff(&phi) < 1e-12);
        // phi_t = (1 - t + t c^{-1/k})^{-k} is monotone in t for c > 1
        let mut prev = 1.0;
        for i in 1..=10 {
            let t = i as f64 / 10.0;
            let v = path.at(t).unwrap().phi.values[0];
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn minkowski_path_is_linear() {
        let d = full(16);
        let phi = ScalarField::from_fn(d.clone(), |r, _| 1.0 + 0.3 * r.cos());
        let path = Path::Minkowski { phi: phi.clone() };
        let mid = path.at(0.5).unwrap().phi;
        for p in 0..d.node_count() {
            assert!((mid.values[p] - (0.5 + 0.5 * phi.values[p])).abs() < 1e-15);
        }
    }

    #[test]
    fn translated_path_fixed_point() {
        // phi = ell^{-k}: h_t = ell for all t, z_t = 0, phi_t = ell^{-k}
        let d = full(32);
        let k = 1usize;
        let l = ell(&d);
        let path = Path::Translated {
            h_target: l.clone(),
            k,
            psi: Psi::from_choice(PsiChoice::Auto, k).unwrap(),
            z_tol: 1e-12,
        };
        for t in [0.0, 0.4, 1.0] {
            let p = path.at(t).unwrap();
            let z = p.z.unwrap();
            assert!(z[0].abs() < 1e-10 && z[1].abs() < 1e-10);
            assert!(p.phi.max_abs_diff(&l.map(|v| 1.0 / v)) < 1e-9);
        }
    }

    #[test]
    fn hypothesis_checks_catch_bad_data() {
        let d = full(24);
        let cfg = SolverConfig::default();
        // non-even data in even mode
        let spec = ProblemSpec::new(1, HomotopyMode::Even);
        let skew = ScalarField::from_fn(d.clone(), |r, p| 1.0 + 0.2 * r.sin() * p.cos());
        assert!(matches!(
            check_hypotheses(&spec, &skew, &cfg),
            Err(CapcmError::HypothesisViolation(_))
        ));
        // nonzero first moment in translated mode
        let spec = ProblemSpec::new(1, HomotopyMode::Translated);
        let zeta_shift = ell(&d).add_scaled(0.2, &d.zeta_field(0).unwrap());
        let phi_bad = zeta_shift.map(|v| 1.0 / v);
        assert!(matches!(
            check_hypotheses(&spec, &phi_bad, &cfg),
            Err(CapcmError::HypothesisViolation(_))
        ));
        // the same data passes in direct mode with warnings
        let spec = ProblemSpec::new(1, HomotopyMode::Direct);
        let warnings = check_hypotheses(&spec, &phi_bad, &cfg).unwrap();
        assert!(warnings.is_empty()); // direct mode skips the moment check entirely
        // admissible translated data passes
        let spec = ProblemSpec::new(1, HomotopyMode::Translated);
        let good = ell(&d).map(|v| 1.0 / v);
        assert!(check_hypotheses(&spec, &good, &cfg).unwrap().is_empty());
        // k = n rejected outside minkowski; k < n rejected in minkowski
        let spec = ProblemSpec::new(2, HomotopyMode::Even);
        assert!(check_hypotheses(&spec, &good, &cfg).is_err());
        let spec = ProblemSpec::new(1, HomotopyMode::Minkowski);
        assert!(check_hypotheses(&spec, &good, &cfg).is_err());
    }
}
