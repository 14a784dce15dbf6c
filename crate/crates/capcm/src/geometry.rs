//! Capillary support-function geometry.
//!
//! The hypersurface with capillary support function `s` is recovered from
//! `X(zeta) = grad s(zeta) + s(zeta) (zeta + cos(theta) E3)`; the analytic
//! outer normal at `X(zeta)` is `nu = zeta + cos(theta) E3`, and the
//! eigenvalues of `tau[s] = Hess s + s g` are the principal radii of
//! curvature. Boundary diagnostics check the two defining features of a
//! capillary surface: the boundary sits on the plane `x3 = 0`, and the
//! contact angle with that plane is `theta`.

use std::io::Write as IoWrite;
use std::sync::Arc;

use crate::diffops::{self, BoundaryGhost, TauOp};
use crate::domain::{CapDomain, GridMode, ScalarField, SymTensorField};
use crate::error::{CapcmError, Result};
use crate::hessian_ops::sigma_all;

/// Capillary support function of the unit cap:
/// `ell(rho) = 1 - cos(theta) cos(rho)`, equivalently
/// `sin^2(theta) - cos(theta) <zeta, E3>`.
pub fn ell(domain: &Arc<CapDomain>) -> ScalarField {
    let ct = domain.theta.cos();
    ScalarField::from_fn(domain.clone(), |rho, _| 1.0 - ct * rho.cos()).mark_capillary()
}

/// The tensor `tau[s] = Hess s + s g` with the Robin boundary condition
/// embedded in the boundary-ring stencil (the solver's tensor).
pub fn tau(s: &ScalarField) -> SymTensorField {
    TauOp::build(&s.domain, BoundaryGhost::Robin).apply(s)
}

/// Expand an even-reduced field (angular period pi) onto the full grid.
pub fn expand_even(s: &ScalarField) -> Result<ScalarField> {
    let d = &s.domain;
    if !d.even_reduced() {
        return Err(CapcmError::InvalidParameter(
            "expand_even expects an even-reduced grid".into(),
        ));
    }
    let full = CapDomain::build(d.n, d.theta, GridMode::Full2d, d.nr, 2 * d.nphi)?;
    let mut values = vec![0.0; full.node_count()];
    for i in 0..full.nphi {
        let ie = i % d.nphi;
        for j in 0..d.nr {
            values[full.idx(j, i)] = s.values[d.idx(j, ie)];
        }
    }
    let mut out = ScalarField::from_values(full, values);
    out.capillary = s.capillary;
    Ok(out)
}

/// Reconstructed capillary hypersurface: one vertex per grid node plus a
/// closing ring on the boundary plane.
#[derive(Debug, Clone)]
pub struct CapMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[u32; 3]>,
    /// Analytic outer unit normals `nu = zeta + cos(theta) E3` per vertex.
    pub normals: Vec<[f64; 3]>,
    pub nr: usize,
    pub nphi: usize,
    pub theta: f64,
    /// Nodes where `tau[s]` failed positive-definiteness (lenient
    /// reconstruction keeps going and records them).
    pub non_convex_nodes: usize,
}

impl CapMesh {
    pub fn grid_vertex(&self, j: usize, i: usize) -> [f64; 3] {
        self.vertices[i * self.nr + j]
    }

    pub fn ring_start(&self) -> usize {
        self.nr * self.nphi
    }

    /// Per-vertex normals recomputed from the faces (area-weighted), as an
    /// independent geometric check against the analytic ones.
    pub fn discrete_vertex_normals(&self) -> Vec<[f64; 3]> {
        let mut acc = vec![[0.0f64; 3]; self.vertices.len()];
        for f in &self.faces {
            let a = self.vertices[f[0] as usize];
            let b = self.vertices[f[1] as usize];
            let c = self.vertices[f[2] as usize];
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            let n = [
                u[1] * v[2] - u[2] * v[1],
                u[2] * v[0] - u[0] * v[2],
                u[0] * v[1] - u[1] * v[0],
            ];
            for &vi in f {
                for t in 0..3 {
                    acc[vi as usize][t] += n[t];
                }
            }
        }
        for n in &mut acc {
            let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            if len > 0.0 {
                for t in 0..3 {
                    n[t] /= len;
                }
            }
        }
        acc
    }

    /// Wavefront OBJ: `v x y z` then `f i j k` with 1-based indices.
    pub fn write_obj(&self, w: &mut impl IoWrite) -> std::io::Result<()> {
        for v in &self.vertices {
            writeln!(
                w,
                "v {} {} {}",
                fmt_g17(v[0]),
                fmt_g17(v[1]),
                fmt_g17(v[2])
            )?;
        }
        for f in &self.faces {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        Ok(())
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_g17(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Reconstruct the hypersurface from a capillary support function.
/// Non-convex nodes are reported on the mesh, not rejected.
pub fn reconstruct(s: &ScalarField) -> Result<CapMesh> {
    reconstruct_impl(s, None)
}

/// Strict variant: rejects inputs whose Robin deficit exceeds `boundary_tol`.
pub fn reconstruct_strict(s: &ScalarField, boundary_tol: f64) -> Result<CapMesh> {
    reconstruct_impl(s, Some(boundary_tol))
}

fn reconstruct_impl(s: &ScalarField, strict_tol: Option<f64>) -> Result<CapMesh> {
    let d0 = &s.domain;
    if d0.n != 2 {
        return Err(CapcmError::InvalidParameter(format!(
            "mesh reconstruction is for n = 2 hypersurfaces in R^3, got n = {}",
            d0.n
        )));
    }
    if let Some(tol) = strict_tol {
        let deficit = diffops::robin_deficit_max(s);
        if deficit > tol {
            return Err(CapcmError::HypothesisViolation(format!(
                "support function is not capillary: Robin deficit {deficit:.3e} > {tol:.3e}"
            )));
        }
    }
    // axisymmetric profiles are swept; even-reduced grids are expanded
    let expanded;
    let swept;
    let s = if d0.even_reduced() {
        expanded = expand_even(s)?;
        &expanded
    } else if d0.mode == GridMode::Axisym {
        let full = CapDomain::build(2, d0.theta, GridMode::Full2d, d0.nr, 2 * d0.nr)?;
        let mut values = vec![0.0; full.node_count()];
        for i in 0..full.nphi {
            for j in 0..d0.nr {
                values[full.idx(j, i)] = s.values[j];
            }
        }
        swept = ScalarField {
            domain: full,
            values,
            capillary: s.capillary,
        };
        &swept
    } else {
        s
    };
    let d = s.domain.clone();
    let theta = d.theta;
    let ct = theta.cos();

    let non_convex = {
        let t = tau(s);
        t.mats.iter().filter(|m| m.lambda_min() <= 0.0).count()
    };

    // capillary-consistent radial derivative so that the reconstruction is
    // exact on the horizontal-translation family
    let grad = diffops::gradient_with(s, BoundaryGhost::Robin);

    let (nr, nphi) = (d.nr, d.nphi);
    let mut vertices = Vec::with_capacity(nr * nphi + nphi);
    let mut normals = Vec::with_capacity(nr * nphi + nphi);
    for i in 0..nphi {
        let phi = d.phi_at(i);
        let (sp, cp) = phi.sin_cos();
        for j in 0..nr {
            let rho = d.rho[j];
            let (sr, cr) = rho.sin_cos();
            let p = d.idx(j, i);
            let e_rho = [cr * cp, cr * sp, -sr];
            let e_phi = [-sp, cp, 0.0];
            let u = [sr * cp, sr * sp, cr];
            let mut x = [0.0; 3];
            for t in 0..3 {
                x[t] = grad.d_rho[p] * e_rho[t] + grad.d_ang[p] * e_phi[t] + s.values[p] * u[t];
            }
            vertices.push(x);
            normals.push(u);
        }
    }
    // boundary ring on the plane x3 = 0: planar support function
    // h(omega) = s(theta, omega) / sin(theta), point = h w + h' w_perp.
    // The trace goes through the capillary ghost so the ring respects
    // translation covariance exactly.
    let st = theta.sin();
    let (trace, _) = diffops::capillary_boundary_trace(s);
    let hvals: Vec<f64> = trace.iter().map(|v| v / st).collect();
    let dp1 = 2.0 * d.dphi.sin();
    for i in 0..nphi {
        let phi = d.phi_at(i);
        let (sp, cp) = phi.sin_cos();
        let hp = (hvals[(i + 1) % nphi] - hvals[(i + nphi - 1) % nphi]) / dp1;
        vertices.push([hvals[i] * cp - hp * sp, hvals[i] * sp + hp * cp, 0.0]);
        normals.push([st * cp, st * sp, ct]);
    }

    let mut faces = Vec::with_capacity(2 * nr * nphi);
    let idx = |j: usize, i: usize| (i % nphi) as u32 * nr as u32 + j as u32;
    for i in 0..nphi {
        for j in 0..nr - 1 {
            let p00 = idx(j, i);
            let p10 = idx(j + 1, i);
            let p01 = idx(j, i + 1);
            let p11 = idx(j + 1, i + 1);
            faces.push([p00, p10, p11]);
            faces.push([p00, p11, p01]);
        }
        // strip closing onto the boundary ring
        let a = idx(nr - 1, i);
        let dnext = idx(nr - 1, i + 1);
        let b = (nr * nphi + i) as u32;
        let c = (nr * nphi + (i + 1) % nphi) as u32;
        faces.push([a, b, c]);
        faces.push([a, c, dnext]);
    }

    Ok(CapMesh {
        vertices,
        faces,
        normals,
        nr,
        nphi,
        theta,
        non_convex_nodes: non_convex,
    })
}

/// Contact-angle deviation `<nu, E3> - cos(theta)` per boundary-ring
/// vertex, with normals recomputed from the faces.
pub fn contact_angle(mesh: &CapMesh) -> Vec<f64> {
    let discrete = mesh.discrete_vertex_normals();
    let ct = mesh.theta.cos();
    (mesh.ring_start()..mesh.vertices.len())
        .map(|v| discrete[v][2] - ct)
        .collect()
}

/// Boundary height `X3(theta) = -d_rho s sin(theta) + s cos(theta)` per
/// boundary angle; vanishes exactly when `s` is capillary.
pub fn boundary_height(s: &ScalarField) -> Vec<f64> {
    let d = &s.domain;
    let st = d.theta.sin();
    let ct = d.theta.cos();
    let vals = diffops::boundary_value(s);
    let ders = diffops::boundary_radial_deriv(s);
    ders.iter()
        .zip(&vals)
        .map(|(dv, v)| -dv * st + v * ct)
        .collect()
}

/// Planar support function of the boundary body:
/// `h(omega) = s(theta, omega) / sin(theta)`.
pub fn boundary_body_support(s: &ScalarField) -> Vec<f64> {
    let st = s.domain.theta.sin();
    diffops::boundary_value(s).iter().map(|v| v / st).collect()
}

/// Density of the capillary area measure, `ell * sigma_n(tau[s])`, and the
/// nodes where `tau[s]` is not positive-definite.
pub fn area_measure_density(s: &ScalarField) -> (ScalarField, Vec<usize>) {
    let d = &s.domain;
    let t = tau(s);
    let lref = ell(d);
    let n = d.n;
    let mut bad = Vec::new();
    let mut values = vec![0.0; d.node_count()];
    for p in 0..d.node_count() {
        let sig = sigma_all(&t.mats[p]);
        values[p] = lref.values[p] * sig[n];
        if t.mats[p].lambda_min() <= 0.0 {
            bad.push(p);
        }
    }
    (ScalarField::from_values(d.clone(), values), bad)
}

/// Least-squares fit of a horizontal-translation field `<zeta, b>` to
/// `diff` (quadrature-weighted); returns the coefficients and the max-norm
/// of the post-fit residual.
pub fn fit_horizontal_translation(diff: &ScalarField) -> Result<(Vec<f64>, f64)> {
    let d = &diff.domain;
    if d.mode != GridMode::Full2d || d.even_reduced() {
        return Err(CapcmError::InvalidParameter(
            "translation fit requires a full 2d grid".into(),
        ));
    }
    let z: Vec<ScalarField> = (0..2).map(|i| d.zeta_field(i).unwrap()).collect();
    let mut m = [[0.0f64; 2]; 2];
    let mut v = [0.0f64; 2];
    for a in 0..2 {
        for b in 0..2 {
            m[a][b] = d
                .weights
                .iter()
                .zip(z[a].values.iter().zip(&z[b].values))
                .map(|(w, (za, zb))| w * za * zb)
                .sum();
        }
        v[a] = d
            .weights
            .iter()
            .zip(z[a].values.iter().zip(&diff.values))
            .map(|(w, (za, dv))| w * za * dv)
            .sum();
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let b = vec![
        (v[0] * m[1][1] - v[1] * m[0][1]) / det,
        (m[0][0] * v[1] - m[1][0] * v[0]) / det,
    ];
    let mut resid = 0.0f64;
    for p in 0..d.node_count() {
        let fit = b[0] * z[0].values[p] + b[1] * z[1].values[p];
        resid = resid.max((diff.values[p] - fit).abs());
    }
    Ok((b, resid))
}
