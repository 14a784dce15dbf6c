//! CSV field formats and sampled-data interpolation.
//!
//! Two formats are exchanged with the front end:
//! - solution fields: header `rho,phi,s,lambda_min,residual`, one row per
//!   node (axisymmetric grids write `phi = 0`);
//! - sampled data: header `rho,phi,value` (full 2d tensor grids) or
//!   `rho,value` (axisymmetric), interpolated bilinearly onto the solve
//!   grid, so data resolution and solve resolution are independent.
//!
//! All floating-point output carries 17 significant digits and round-trips
//! bit-exactly.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::domain::{CapDomain, GridMode, ScalarField};
use crate::error::{CapcmError, Result};
use crate::geometry::fmt_g17;

/// Write a solution field with its convexity and residual diagnostics.
pub fn write_solution_csv(
    w: &mut impl Write,
    s: &ScalarField,
    lambda_min: &[f64],
    residual: &[f64],
) -> Result<()> {
    let d = &s.domain;
    writeln!(w, "rho,phi,s,lambda_min,residual")?;
    for p in 0..d.node_count() {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_g17(d.rho_of(p)),
            fmt_g17(d.phi_of(p)),
            fmt_g17(s.values[p]),
            fmt_g17(lambda_min[p]),
            fmt_g17(residual[p]),
        )?;
    }
    Ok(())
}

/// Read a solution CSV back onto its grid (column `s`).
pub fn read_solution_csv(r: impl BufRead, domain: &Arc<CapDomain>) -> Result<ScalarField> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| CapcmError::Format("empty solution CSV".into()))??;
    if header.trim() != "rho,phi,s,lambda_min,residual" {
        return Err(CapcmError::Format(format!(
            "unexpected solution header '{header}'"
        )));
    }
    let mut values = Vec::with_capacity(domain.node_count());
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(CapcmError::Format(format!("bad solution row '{line}'")));
        }
        values.push(parse_f64(cols[2])?);
    }
    if values.len() != domain.node_count() {
        return Err(CapcmError::Format(format!(
            "solution CSV has {} rows, grid has {} nodes",
            values.len(),
            domain.node_count()
        )));
    }
    Ok(ScalarField::from_values(domain.clone(), values))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| CapcmError::Format(format!("bad float '{s}': {e}")))
}

/// Write sampled data in the exchange format.
pub fn write_sampled_csv(w: &mut impl Write, f: &ScalarField) -> Result<()> {
    let d = &f.domain;
    match d.mode {
        GridMode::Axisym => {
            writeln!(w, "rho,value")?;
            for p in 0..d.node_count() {
                writeln!(w, "{},{}", fmt_g17(d.rho_of(p)), fmt_g17(f.values[p]))?;
            }
        }
        GridMode::Full2d => {
            writeln!(w, "rho,phi,value")?;
            for p in 0..d.node_count() {
                writeln!(
                    w,
                    "{},{},{}",
                    fmt_g17(d.rho_of(p)),
                    fmt_g17(d.phi_of(p)),
                    fmt_g17(f.values[p])
                )?;
            }
        }
    }
    Ok(())
}

/// Sampled data on a tensor grid, ready for interpolation.
#[derive(Debug, Clone)]
pub struct SampledField {
    pub rhos: Vec<f64>,
    /// Empty for axisymmetric data.
    pub phis: Vec<f64>,
    /// Row-major over `(phi, rho)`, matching the solution layout.
    pub values: Vec<f64>,
    /// Angular period of the samples (2 pi unless stated otherwise).
    pub period: f64,
}

pub fn read_sampled_csv(r: impl BufRead) -> Result<SampledField> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| CapcmError::Format("empty sampled CSV".into()))??;
    let axisym = match header.trim() {
        "rho,value" => true,
        "rho,phi,value" => false,
        other => {
            return Err(CapcmError::Format(format!(
                "unexpected sampled header '{other}'"
            )))
        }
    };
    let mut triples: Vec<(f64, f64, f64)> = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if axisym {
            if cols.len() != 2 {
                return Err(CapcmError::Format(format!("bad sampled row '{line}'")));
            }
            triples.push((parse_f64(cols[0])?, 0.0, parse_f64(cols[1])?));
        } else {
            if cols.len() != 3 {
                return Err(CapcmError::Format(format!("bad sampled row '{line}'")));
            }
            triples.push((parse_f64(cols[0])?, parse_f64(cols[1])?, parse_f64(cols[2])?));
        }
    }
    if triples.is_empty() {
        return Err(CapcmError::Format("sampled CSV has no rows".into()));
    }
    let mut rhos: Vec<f64> = triples.iter().map(|t| t.0).collect();
    rhos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    rhos.dedup();
    let mut phis: Vec<f64> = if axisym {
        Vec::new()
    } else {
        let mut p: Vec<f64> = triples.iter().map(|t| t.1).collect();
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        p.dedup();
        p
    };
    let np = phis.len().max(1);
    if rhos.len() * np != triples.len() {
        return Err(CapcmError::Format(format!(
            "sampled CSV is not a tensor grid: {} rho x {} phi != {} rows",
            rhos.len(),
            np,
            triples.len()
        )));
    }
    let find = |v: f64, xs: &[f64]| xs.binary_search_by(|x| x.partial_cmp(&v).unwrap()).unwrap();
    let mut values = vec![f64::NAN; triples.len()];
    for (r, p, v) in &triples {
        let jr = find(*r, &rhos);
        let ip = if axisym { 0 } else { find(*p, &phis) };
        values[ip * rhos.len() + jr] = *v;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(CapcmError::Format(
            "sampled CSV has duplicate or missing tensor-grid entries".into(),
        ));
    }
    if phis.is_empty() {
        phis = Vec::new();
    }
    Ok(SampledField {
        rhos,
        phis,
        values,
        period: std::f64::consts::TAU,
    })
}

impl SampledField {
    fn bracket(xs: &[f64], x: f64) -> (usize, usize, f64) {
        // linear inside, linearly extrapolated past the staggered ends
        let n = xs.len();
        if n == 1 {
            return (0, 0, 0.0);
        }
        let hi = xs.partition_point(|v| *v <= x).clamp(1, n - 1);
        let lo = hi - 1;
        let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
        (lo, hi, t)
    }

    /// Bilinear interpolation onto a solve grid (`rho` clamped at the
    /// staggered ends, `phi` periodic).
    pub fn interpolate(&self, domain: &Arc<CapDomain>) -> Result<ScalarField> {
        if domain.mode == GridMode::Full2d && self.phis.is_empty() {
            // axisymmetric data on a 2d grid: constant in phi
        } else if domain.mode == GridMode::Axisym && !self.phis.is_empty() {
            return Err(CapcmError::InvalidParameter(
                "full 2d samples cannot drive an axisymmetric solve".into(),
            ));
        }
        let nr = self.rhos.len();
        let values = (0..domain.node_count())
            .map(|p| {
                let rho = domain.rho_of(p);
                let (jlo, jhi, tr) = Self::bracket(&self.rhos, rho);
                if self.phis.is_empty() {
                    (1.0 - tr) * self.values[jlo] + tr * self.values[jhi]
                } else {
                    let phi = domain.phi_of(p).rem_euclid(self.period);
                    let np = self.phis.len();
                    // periodic bracket in phi
                    let (ilo, ihi, tp) = if phi <= self.phis[0] || phi >= self.phis[np - 1] {
                        let span = self.period - self.phis[np - 1] + self.phis[0];
                        let dist = (phi - self.phis[np - 1]).rem_euclid(self.period);
                        (np - 1, 0, dist / span)
                    } else {
                        Self::bracket(&self.phis, phi)
                    };
                    let at = |i: usize, j: usize| self.values[i * nr + j];
                    let lo = (1.0 - tr) * at(ilo, jlo) + tr * at(ilo, jhi);
                    let hi = (1.0 - tr) * at(ihi, jlo) + tr * at(ihi, jhi);
                    (1.0 - tp) * lo + tp * hi
                }
            })
            .collect();
        Ok(ScalarField::from_values(domain.clone(), values))
    }
}
