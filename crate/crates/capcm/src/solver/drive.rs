//! Continuation driver: marches the homotopy parameter with adaptive
//! steps, warm-starting Newton from the previous accepted solution and
//! monitoring strict convexity along the way.

use std::time::Instant;

use crate::domain::{GridMode, ScalarField};
use crate::error::{CapcmError, Result};
use crate::geometry::ell;
use crate::hessian_ops::binom;

use super::config::{HomotopyMode, ProblemSpec, SolverConfig};
use super::homotopy::{check_hypotheses, Path};
use super::newton::{kernel_constraints, newton_solve, newton_solve_carry};
use super::residual::Discretization;
use super::translate::Psi;

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub stage: &'static str,
    pub t: f64,
    pub newton_iters: usize,
    pub residual: f64,
    pub min_lambda: f64,
    pub z: Option<Vec<f64>>,
    /// `max_i |int phi_t zeta_i dsigma|` when kernel constraints are active.
    pub phi_moment: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub mode: &'static str,
    pub steps: Vec<StepRecord>,
    pub final_residual: f64,
    /// Max-node round-off floor of the residual evaluation at the returned
    /// solution; the meaningful convergence measure is
    /// `final_residual - final_residual_floor`.
    pub final_residual_floor: f64,
    pub final_min_lambda: f64,
    pub multipliers: Vec<f64>,
    pub warnings: Vec<String>,
    pub newton_iters_total: usize,
    pub wall_seconds: f64,
}

impl SolveReport {
    /// Structured text report. Timing is optional so that byte-compared
    /// artifacts can omit it.
    pub fn write_text(&self, w: &mut impl std::io::Write, include_timing: bool) -> std::io::Result<()> {
        writeln!(w, "mode {}", self.mode)?;
        for s in &self.steps {
            write!(
                w,
                "step stage={} t={:.6} iters={} residual={:.6e} min_lambda={:.6e}",
                s.stage, s.t, s.newton_iters, s.residual, s.min_lambda
            )?;
            if let Some(z) = &s.z {
                let zs: Vec<String> = z.iter().map(|v| format!("{:.6e}", v)).collect();
                write!(w, " z=({})", zs.join(","))?;
            }
            if let Some(m) = s.phi_moment {
                write!(w, " phi_moment={:.6e}", m)?;
            }
            writeln!(w)?;
        }
        writeln!(w, "final_residual {:.17e}", self.final_residual)?;
        writeln!(w, "final_residual_floor {:.17e}", self.final_residual_floor)?;
        writeln!(w, "final_min_lambda {:.17e}", self.final_min_lambda)?;
        if !self.multipliers.is_empty() {
            let ms: Vec<String> = self.multipliers.iter().map(|v| format!("{:.6e}", v)).collect();
            writeln!(w, "multipliers {}", ms.join(","))?;
        }
        for msg in &self.warnings {
            writeln!(w, "warning {msg}")?;
        }
        writeln!(w, "newton_iters_total {}", self.newton_iters_total)?;
        if include_timing {
            writeln!(w, "wall_seconds {:.3}", self.wall_seconds)?;
        }
        Ok(())
    }

    pub fn to_text(&self, include_timing: bool) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf, include_timing).unwrap();
        String::from_utf8(buf).unwrap()
    }
}

pub struct SolveOutcome {
    pub s: ScalarField,
    pub report: SolveReport,
    /// The endpoint right-hand side actually solved (differs from the
    /// input only in translated mode, by the `t = 1` recentering).
    pub endpoint_phi: ScalarField,
}

/// Solve `sigma_k(tau[s]) = phi` by the mode requested in `spec`.
/// `phi` lives on the solve grid; the returned `s` does too.
pub fn solve_cm(spec: &ProblemSpec, phi: &ScalarField, config: &SolverConfig) -> Result<SolveOutcome> {
    config.validate()?;
    let t0 = Instant::now();
    let d = &phi.domain;
    let n = d.n;
    let k = spec.k;

    let warnings = check_hypotheses(spec, phi, config)?;

    let disc = Discretization::new(d);
    // The horizontal coordinate functions are an exact kernel of every
    // linearization on a full (non-reduced) 2d grid, whatever the mode:
    // without the bordered constraints the Newton systems are singular.
    // Axisymmetric and even-reduced grids cannot represent the kernel.
    let needs_kernel = d.mode == GridMode::Full2d && !d.even_reduced();
    let constraints = if needs_kernel {
        Some(kernel_constraints(&disc)?)
    } else {
        None
    };
    let cons_ref = constraints.as_deref();

    let mut report = SolveReport {
        mode: spec.homotopy.name(),
        steps: Vec::new(),
        final_residual: f64::NAN,
        final_residual_floor: 0.0,
        final_min_lambda: f64::NAN,
        multipliers: Vec::new(),
        warnings,
        newton_iters_total: 0,
        wall_seconds: 0.0,
    };

    let s_final = match spec.homotopy {
        HomotopyMode::Direct => {
            // start from the cap matching the mean of phi
            let mean = d.quadrature(phi)? / d.total_measure();
            let c = (mean.max(1e-12) / binom(n, k)).powf(1.0 / k as f64);
            let s0 = ell(d).scale(c);
            let res = newton_solve(&disc, &s0, phi, k, config, cons_ref)?;
            let min_l = disc.min_lambda(&res.s.values);
            report.newton_iters_total += res.iters;
            report.multipliers = res.multipliers.clone();
            report.steps.push(StepRecord {
                stage: "direct",
                t: 1.0,
                newton_iters: res.iters,
                residual: res.residual_norm,
                min_lambda: min_l,
                z: None,
                phi_moment: None,
            });
            if min_l < config.convexity_floor {
                return Err(CapcmError::ConvexityLoss {
                    min_lambda: min_l,
                    t: 1.0,
                });
            }
            res.s
        }
        HomotopyMode::Even => {
            let path = Path::Even {
                phi: phi.clone(),
                k,
            };
            let c = path.start_scale(n).unwrap();
            let s0 = ell(d).scale(c);
            drive_path(
                &disc, &path, &s0, "main", k, spec, config, cons_ref, &mut report,
            )?
        }
        HomotopyMode::Minkowski => {
            let path = Path::Minkowski { phi: phi.clone() };
            let s0 = ell(d).scale(path.start_scale(n).unwrap());
            drive_path(
                &disc, &path, &s0, "main", k, spec, config, cons_ref, &mut report,
            )?
        }
        HomotopyMode::Translated => {
            // prelude: continuation from the constant problem to
            // sigma_k = ell^{-k}, whose solution starts the paper path
            let l = ell(d);
            let phi_pre = l.map(|v| v.powi(-(k as i32)));
            let pre_path = Path::Even {
                phi: phi_pre,
                k,
            };
            let s0 = ell(d).scale(pre_path.start_scale(n).unwrap());
            let s_pre = drive_path(
                &disc, &pre_path, &s0, "prelude", k, spec, config, cons_ref, &mut report,
            )?;
            let psi = Psi::from_choice(spec.psi, k)?;
            let path = Path::Translated {
                h_target: phi.map(|v| v.powf(-1.0 / k as f64)).mark_capillary(),
                k,
                psi,
                z_tol: config.z_tol,
            };
            drive_path(
                &disc, &path, &s_pre, "main", k, spec, config, cons_ref, &mut report,
            )?
        }
    };

    // final residual recomputed from the returned field against the
    // endpoint data
    let endpoint = match spec.homotopy {
        HomotopyMode::Direct => phi.clone(),
        HomotopyMode::Even => Path::Even { phi: phi.clone(), k }.at(1.0)?.phi,
        HomotopyMode::Minkowski => phi.clone(),
        HomotopyMode::Translated => {
            let psi = Psi::from_choice(spec.psi, k)?;
            Path::Translated {
                h_target: phi.map(|v| v.powf(-1.0 / k as f64)).mark_capillary(),
                k,
                psi,
                z_tol: config.z_tol,
            }
            .at(1.0)?
            .phi
        }
    };
    report.final_residual = disc.residual_norm(&s_final.values, &endpoint.values, k);
    report.final_residual_floor = disc
        .residual_floor(&s_final.values, k)
        .iter()
        .fold(0.0f64, |m, v| m.max(*v));
    report.final_min_lambda = disc.min_lambda(&s_final.values);
    report.wall_seconds = t0.elapsed().as_secs_f64();
    Ok(SolveOutcome {
        s: s_final,
        report,
        endpoint_phi: endpoint,
    })
}

#[allow(clippy::too_many_arguments)]
fn drive_path(
    disc: &Discretization,
    path: &Path,
    s0: &ScalarField,
    stage: &'static str,
    k: usize,
    spec: &ProblemSpec,
    config: &SolverConfig,
    constraints: Option<&[Vec<f64>]>,
    report: &mut SolveReport,
) -> Result<ScalarField> {
    let d = &disc.domain;
    let moment_probe = |phi_t: &ScalarField| -> Option<f64> {
        if constraints.is_some() {
            let mut worst = 0.0f64;
            for i in 0..2 {
                let z = d.zeta_field(i).ok()?;
                let m: f64 = d
                    .weights
                    .iter()
                    .zip(phi_t.values.iter().zip(&z.values))
                    .map(|(w, (p, zv))| w * p * zv)
                    .sum();
                worst = worst.max(m.abs());
            }
            Some(worst)
        } else {
            None
        }
    };

    let accept = |t: f64,
                      res: &super::newton::NewtonResult,
                      z: Option<Vec<f64>>,
                      moment: Option<f64>,
                      report: &mut SolveReport|
     -> Result<()> {
        let min_l = disc.min_lambda(&res.s.values);
        report.newton_iters_total += res.iters;
        report.multipliers = res.multipliers.clone();
        report.steps.push(StepRecord {
            stage,
            t,
            newton_iters: res.iters,
            residual: res.residual_norm,
            min_lambda: min_l,
            z,
            phi_moment: moment,
        });
        if min_l < config.convexity_floor {
            return Err(CapcmError::ConvexityLoss { min_lambda: min_l, t });
        }
        Ok(())
    };

    // anchor the path start; the factorization slot persists across
    // continuation steps so gentle steps reuse the previous linearization
    let mut carry = None;
    let p0 = path.at(0.0)?;
    let res0 = newton_solve_carry(disc, s0, &p0.phi, k, config, constraints, &mut carry)?;
    accept(0.0, &res0, p0.z, moment_probe(&p0.phi), report)?;
    let mut s = res0.s;

    let mut t = 0.0f64;
    let mut dt = config.dt_init;
    let mut fast_streak = 0usize;
    while t < 1.0 - 1e-14 {
        let t_next = if t + dt >= 1.0 - config.dt_floor {
            1.0
        } else {
            t + dt
        };
        let attempt = path.at(t_next).and_then(|pt| {
            newton_solve_carry(disc, &s, &pt.phi, k, config, constraints, &mut carry)
                .map(|res| (pt, res))
        });
        match attempt {
            Ok((pt, res)) => {
                if let Some(v) = pt.data_min_lambda {
                    if v < -1e-8 {
                        report.warnings.push(format!(
                            "path data lost spherical convexity at t = {t_next:.6}: \
                             min eigenvalue {v:.3e}"
                        ));
                    }
                }
                accept(t_next, &res, pt.z, moment_probe(&pt.phi), report)?;
                s = res.s;
                t = t_next;
                // an easy step: few full Newton iterations, or a single
                // factorization carrying a short frozen-Jacobian tail
                let easy = res.iters <= 3 || (res.jacobian_builds <= 1 && res.iters <= 12);
                if easy {
                    fast_streak += 1;
                    if fast_streak >= 2 {
                        dt = (dt * 2.0).min(0.5);
                        fast_streak = 0;
                    }
                } else {
                    fast_streak = 0;
                }
            }
            Err(CapcmError::ConvexityLoss { min_lambda, t }) => {
                return Err(CapcmError::ConvexityLoss { min_lambda, t })
            }
            Err(err) => {
                dt *= 0.5;
                fast_streak = 0;
                if dt < config.dt_floor {
                    let trace: Vec<String> = report
                        .steps
                        .iter()
                        .map(|r| format!("(stage={} t={:.4} iters={})", r.stage, r.t, r.newton_iters))
                        .collect();
                    return Err(CapcmError::ContinuationStall(format!(
                        "{} mode, stage {stage}: step below floor {} at t = {t:.6} (last error: {err}); \
                         accepted steps: {}",
                        spec.homotopy.name(),
                        config.dt_floor,
                        trace.join(" ")
                    )));
                }
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::CapDomain;
    use crate::solver::Symmetry;
    use std::f64::consts::PI;

    #[test]
    fn constant_phi_recovers_scaled_cap() {
        // phi = binom(n,k) r^k -> s = r ell
        for &(n, k, r) in &[(3usize, 2usize, 1.0f64), (3, 2, 1.5), (2, 1, 2.0)] {
            let d = CapDomain::build(n, PI / 3.0, GridMode::Axisym, 100, 0).unwrap();
            let phi = ScalarField::constant(d.clone(), binom(n, k) * r.powi(k as i32));
            let spec = ProblemSpec::new(k, HomotopyMode::Even);
            let out = solve_cm(&spec, &phi, &SolverConfig::default()).unwrap();
            let expect = ell(&d).scale(r);
            let err = out.s.max_abs_diff(&expect);
            assert!(err < 1e-5, "n={n} k={k} r={r}: {err}");
            assert!(out.report.final_residual <= 1e-10);
            for step in &out.report.steps {
                assert!(step.min_lambda > 1e-8);
            }
        }
    }

    /// Solving in the even class on the half-range grid agrees with the
    /// full-grid solve of the same even data.
    #[test]
    fn even_class_reduction_matches_full_grid() {
        use crate::validate::Family;
        let theta = PI / 3.0;
        let nr = 32;
        let full = CapDomain::build(2, theta, GridMode::Full2d, nr, 2 * nr).unwrap();
        let even = CapDomain::build_even(2, theta, nr, nr).unwrap();
        let cfg = SolverConfig::default();
        let k = 1usize;
        // admissible even data: phi = (ell + eps g2)^{-k}
        let inv_cap = |d: &std::sync::Arc<CapDomain>| {
            ell(d)
                .add_scaled(0.05, &Family::G2.field(d).unwrap())
                .map(|v| v.powi(-(k as i32)))
        };
        let phi_full = inv_cap(&full);
        let phi_even = inv_cap(&even);
        let a = solve_cm(&ProblemSpec::new(k, HomotopyMode::Even), &phi_full, &cfg).unwrap();
        let b = solve_cm(
            &ProblemSpec::new(k, HomotopyMode::Even).with_symmetry(Symmetry::EvenClass),
            &phi_even,
            &cfg,
        )
        .unwrap();
        let b_full = crate::geometry::expand_even(&b.s).unwrap();
        let err = a.s.max_abs_diff(&b_full);
        assert!(err < 1e-8, "even-class reduction mismatch {err:.3e}");
        // even-class data on a plain full grid is rejected with guidance
        let spec =
            ProblemSpec::new(k, HomotopyMode::Even).with_symmetry(Symmetry::EvenClass);
        assert!(solve_cm(&spec, &phi_full, &cfg).is_err());
    }

    /// Discrete forward data is inverted back to the generating field at
    /// solver accuracy (same-grid round trip).
    #[test]
    fn discrete_forward_round_trip() {
        use crate::solver::forward;
        use crate::validate::{manufactured_family, Family};
        let d = CapDomain::build(3, PI / 3.0, GridMode::Axisym, 64, 0).unwrap();
        let s_star = manufactured_family(Family::GAxi, 0.1, &d).unwrap();
        let phi = forward(&s_star, 2).unwrap();
        let disc = super::super::Discretization::new(&d);
        let res = super::super::newton_solve(
            &disc,
            &ell(&d),
            &phi,
            2,
            &SolverConfig::default(),
            None,
        )
        .unwrap();
        let err = res.s.max_abs_diff(&s_star);
        assert!(err < 1e-9, "inverse-crime round trip {err:.3e}");
    }

    #[test]
    fn direct_mode_matches_even_mode_on_constants() {
        let d = CapDomain::build(3, PI / 3.0, GridMode::Axisym, 64, 0).unwrap();
        let phi = ScalarField::constant(d.clone(), 3.0);
        let cfg = SolverConfig::default();
        let a = solve_cm(&ProblemSpec::new(2, HomotopyMode::Direct), &phi, &cfg).unwrap();
        let b = solve_cm(&ProblemSpec::new(2, HomotopyMode::Even), &phi, &cfg).unwrap();
        assert!(a.s.max_abs_diff(&b.s) < 1e-9);
        assert!(!a.report.to_text(false).is_empty());
    }
}
