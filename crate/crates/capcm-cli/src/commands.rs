//! Subcommand pipelines.

use std::fs;
use std::io::Write;
use std::path::Path;

use capcm::diffops;
use capcm::domain::GridMode;
use capcm::error::{CapcmError, Result};
use capcm::geometry;
use capcm::hessian_ops::lambda_min_field;
use capcm::solver::{self, Discretization};
use capcm::validate;

use crate::config::RunConfig;

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn cmd_solve(cfg: &RunConfig, out_dir: &Path, grid_scale: f64) -> Result<()> {
    ensure_dir(out_dir)?;
    let domain = cfg.domain(grid_scale)?;
    let phi = cfg.phi(&domain)?;
    let spec = cfg.spec()?;
    let solver_cfg = cfg.solver_config()?;
    let outcome = solver::solve_cm(&spec, &phi, &solver_cfg)?;

    let emit = cfg.emit()?;
    if emit.iter().any(|e| e == "csv") {
        let disc = Discretization::new(&domain);
        let lam = lambda_min_field(&geometry::tau(&outcome.s));
        let res = disc.residual(&outcome.s.values, &outcome.endpoint_phi.values, spec.k);
        let mut f = fs::File::create(out_dir.join("solution.csv"))?;
        capcm::io::write_solution_csv(&mut f, &outcome.s, &lam.values, &res)?;
    }
    if emit.iter().any(|e| e == "report") {
        let mut f = fs::File::create(out_dir.join("report.txt"))?;
        outcome.report.write_text(&mut f, true)?;
        let pass = outcome.report.final_residual
            <= solver_cfg.newton_tol * 10.0 + outcome.report.final_residual_floor;
        writeln!(f, "status {}", if pass { "PASS" } else { "FAIL" })?;
    }
    if emit.iter().any(|e| e == "obj") {
        if domain.n != 2 {
            return Err(CapcmError::InvalidParameter(
                "mesh export needs an n = 2 solution (no 3-manifold export)".into(),
            ));
        }
        let mesh = geometry::reconstruct(&outcome.s)?;
        let mut f = fs::File::create(out_dir.join("mesh.obj"))?;
        mesh.write_obj(&mut f)?;
    }
    println!(
        "solve: mode={} residual={:.3e} min_lambda={:.3e} steps={} -> {}",
        outcome.report.mode,
        outcome.report.final_residual,
        outcome.report.final_min_lambda,
        outcome.report.steps.len(),
        out_dir.display()
    );
    Ok(())
}

pub fn cmd_forward(cfg: &RunConfig, out_dir: &Path, grid_scale: f64) -> Result<()> {
    ensure_dir(out_dir)?;
    let domain = cfg.domain(grid_scale)?;
    let s = cfg.s_field(&domain)?;
    let k = cfg.k()?;
    let phi = solver::forward(&s, k)?;
    if phi.min() <= 0.0 {
        return Err(CapcmError::HypothesisViolation(format!(
            "forward data not positive (min {:.3e}); reduce the perturbation",
            phi.min()
        )));
    }
    let mut f = fs::File::create(out_dir.join("phi.csv"))?;
    capcm::io::write_sampled_csv(&mut f, &phi)?;
    println!(
        "forward: k={k} phi in [{:.6}, {:.6}] -> {}",
        phi.min(),
        phi.max(),
        out_dir.join("phi.csv").display()
    );
    Ok(())
}

pub fn cmd_validate(cfg: &RunConfig, out_dir: &Path, seed: u64) -> Result<()> {
    ensure_dir(out_dir)?;
    let theta = cfg.theta()?;
    let nr = cfg.validate_nr()?;
    let inject = cfg.validate_inject()?;
    let reports = validate::run_suite(theta, nr, seed, inject);

    let mut report = fs::File::create(out_dir.join("report.txt"))?;
    let mut csv = fs::File::create(out_dir.join("checks.csv"))?;
    writeln!(csv, "name,grid,pass,tolerance,measured")?;
    let mut failed = 0usize;
    for r in &reports {
        let status = if r.pass { "PASS" } else { "FAIL" };
        let measured: Vec<String> = r
            .measured
            .iter()
            .map(|v| geometry::fmt_g17(*v))
            .collect();
        writeln!(
            report,
            "{status} {} [{}] tol={} measured={}",
            r.name,
            r.grid,
            geometry::fmt_g17(r.tolerance),
            measured.join(" ")
        )?;
        writeln!(
            csv,
            "{},{},{},{},{}",
            r.name,
            r.grid,
            status,
            geometry::fmt_g17(r.tolerance),
            measured.join(";")
        )?;
        println!("{status} {}", r.name);
        if !r.pass {
            failed += 1;
        }
    }
    writeln!(report, "total {} failed {}", reports.len(), failed)?;
    if failed > 0 {
        return Err(CapcmError::InvalidParameter(format!(
            "{failed} verification check(s) failed; see {}",
            out_dir.join("report.txt").display()
        )));
    }
    println!("validate: {} checks passed", reports.len());
    Ok(())
}

pub fn cmd_export_mesh(cfg: &RunConfig, out_dir: &Path, grid_scale: f64) -> Result<()> {
    ensure_dir(out_dir)?;
    let domain = cfg.domain(grid_scale)?;
    if domain.n != 2 {
        return Err(CapcmError::InvalidParameter(
            "mesh export needs an n = 2 solution (no 3-manifold export)".into(),
        ));
    }
    let path = cfg.solution_csv()?;
    let file = fs::File::open(&path)?;
    let s = capcm::io::read_solution_csv(std::io::BufReader::new(file), &domain)?;
    let mesh = geometry::reconstruct(&s.mark_capillary())?;
    let out = out_dir.join("mesh.obj");
    let mut f = fs::File::create(&out)?;
    mesh.write_obj(&mut f)?;
    println!(
        "export-mesh: {} vertices, {} faces -> {}",
        mesh.vertices.len(),
        mesh.faces.len(),
        out.display()
    );
    Ok(())
}

/// Quick internal consistency pass: domain quadrature, symmetric-function
/// algebra, a banded solve, Robin traces and a small solve.
pub fn cmd_selftest() -> Result<()> {
    use capcm::domain::CapDomain;
    use capcm::hessian_ops::{binom, sigma_k, SmallSymMat};
    use capcm::solver::{solve_cm, HomotopyMode, ProblemSpec, SolverConfig};
    use std::f64::consts::PI;

    let mut ok = true;
    let mut check = |name: &str, pass: bool| {
        println!("{} {name}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    };

    let d = CapDomain::build(2, PI / 2.0, GridMode::Axisym, 512, 0)?;
    check(
        "hemisphere_area",
        (d.total_measure() - std::f64::consts::TAU).abs() < 1e-4,
    );

    let m = SmallSymMat::diag(&[1.0, 2.0, 3.0]);
    check("sigma_2_diag123", (sigma_k(&m, 2)? - 11.0).abs() < 1e-12);
    check("sigma_3_diag123", (sigma_k(&m, 3)? - 6.0).abs() < 1e-12);

    let d = CapDomain::build(3, PI / 3.0, GridMode::Axisym, 64, 0)?;
    let l = geometry::ell(&d);
    check(
        "robin_trace_cap",
        diffops::robin_deficit_max(&l) < 10.0 * d.h * d.h,
    );
    let phi = capcm::domain::ScalarField::constant(d.clone(), binom(3, 2));
    let out = solve_cm(
        &ProblemSpec::new(2, HomotopyMode::Even),
        &phi,
        &SolverConfig::default(),
    )?;
    check(
        "cap_recovery_small",
        out.s.max_abs_diff(&l) < 1e-4 && out.report.final_residual < 1e-9,
    );

    if ok {
        println!("selftest: all checks passed");
        Ok(())
    } else {
        Err(CapcmError::InvalidParameter("selftest failed".into()))
    }
}
