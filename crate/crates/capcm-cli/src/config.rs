//! Run configuration: flat structured key-value text with dotted sections
//! (`problem.n = 3`), comments with `#`. Unknown keys are rejected, as are
//! out-of-range values and missing referenced files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use capcm::domain::{CapDomain, GridMode, ScalarField};
use capcm::error::{CapcmError, Result};
use capcm::hessian_ops::binom;
use capcm::solver::{HomotopyMode, ProblemSpec, PsiChoice, SolverConfig, Symmetry};
use capcm::validate::Family;

const KNOWN_KEYS: &[&str] = &[
    "problem.n",
    "problem.k",
    "problem.theta",
    "problem.mode",
    "problem.symmetry",
    "problem.homotopy",
    "problem.phi.preset",
    "problem.phi.csv",
    "problem.phi.value",
    "problem.phi.radius",
    "problem.phi.eps",
    "problem.phi.family",
    "problem.s.preset",
    "problem.s.csv",
    "problem.s.radius",
    "problem.s.eps",
    "problem.s.family",
    "problem.s.ax",
    "problem.s.ay",
    "grid.nr",
    "grid.nphi",
    "solver.newton_tol",
    "solver.max_newton_iters",
    "solver.dt_init",
    "solver.dt_floor",
    "solver.convexity_floor",
    "solver.boundary_tol",
    "solver.psi",
    "solver.psi_power",
    "validate.nr",
    "validate.inject",
    "output.dir",
    "output.emit",
    "output.seed",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    map: BTreeMap<String, String>,
    base_dir: PathBuf,
}

fn bad(msg: String) -> CapcmError {
    CapcmError::InvalidParameter(msg)
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<RunConfig> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected 'key = value'", lineno + 1)))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(bad(format!("line {}: unknown key '{key}'", lineno + 1)));
            }
            if map.insert(key.clone(), value).is_some() {
                return Err(bad(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
        }
        Ok(RunConfig {
            map,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|e| bad(format!("{key}: bad number '{v}' ({e})"))),
        }
    }

    fn usize_opt(&self, key: &str) -> Result<Option<usize>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|e| bad(format!("{key}: bad integer '{v}' ({e})"))),
        }
    }

    fn f64_req(&self, key: &str) -> Result<f64> {
        self.f64_opt(key)?
            .ok_or_else(|| bad(format!("missing required key '{key}'")))
    }

    fn path_opt(&self, key: &str) -> Result<Option<PathBuf>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                let p = self.base_dir.join(v);
                if !p.exists() {
                    return Err(bad(format!("{key}: file '{}' does not exist", p.display())));
                }
                Ok(Some(p))
            }
        }
    }

    pub fn n(&self) -> Result<usize> {
        Ok(self.usize_opt("problem.n")?.unwrap_or(2))
    }

    pub fn k(&self) -> Result<usize> {
        self.usize_opt("problem.k")?
            .ok_or_else(|| bad("missing required key 'problem.k'".into()))
    }

    pub fn theta(&self) -> Result<f64> {
        self.f64_req("problem.theta")
    }

    pub fn mode(&self) -> Result<GridMode> {
        match self.get("problem.mode") {
            None => Ok(if self.n()? == 2 {
                GridMode::Full2d
            } else {
                GridMode::Axisym
            }),
            Some("axisym") => Ok(GridMode::Axisym),
            Some("full2d") => Ok(GridMode::Full2d),
            Some(other) => Err(bad(format!(
                "problem.mode: '{other}' (expected axisym | full2d)"
            ))),
        }
    }

    pub fn symmetry(&self) -> Result<Symmetry> {
        match self.get("problem.symmetry") {
            None | Some("none") => Ok(Symmetry::None),
            Some("even") | Some("even-class") => Ok(Symmetry::EvenClass),
            Some(other) => Err(bad(format!(
                "problem.symmetry: '{other}' (expected none | even)"
            ))),
        }
    }

    pub fn homotopy(&self) -> Result<HomotopyMode> {
        match self.get("problem.homotopy") {
            None | Some("direct") => Ok(HomotopyMode::Direct),
            Some("even") => Ok(HomotopyMode::Even),
            Some("translated") => Ok(HomotopyMode::Translated),
            Some("minkowski") => Ok(HomotopyMode::Minkowski),
            Some(other) => Err(bad(format!(
                "problem.homotopy: '{other}' (expected direct | even | translated | minkowski)"
            ))),
        }
    }

    /// Grid with the `--grid-scale` multiplier applied.
    pub fn domain(&self, grid_scale: f64) -> Result<Arc<CapDomain>> {
        let nr0 = self
            .usize_opt("grid.nr")?
            .ok_or_else(|| bad("missing required key 'grid.nr'".into()))?;
        let nphi0 = self.usize_opt("grid.nphi")?.unwrap_or(2 * nr0);
        if !(grid_scale > 0.0) {
            return Err(bad(format!("grid scale must be positive, got {grid_scale}")));
        }
        let nr = ((nr0 as f64 * grid_scale).round() as usize).max(8);
        let mut nphi = ((nphi0 as f64 * grid_scale).round() as usize).max(8);
        if nphi % 2 == 1 {
            nphi += 1;
        }
        let mode = self.mode()?;
        match (mode, self.symmetry()?) {
            (GridMode::Full2d, Symmetry::EvenClass) => {
                CapDomain::build_even(self.n()?, self.theta()?, nr, nphi / 2)
            }
            _ => CapDomain::build(self.n()?, self.theta()?, mode, nr, nphi),
        }
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        let psi = match self.get("solver.psi") {
            None | Some("auto") => PsiChoice::Auto,
            Some("quadratic") => PsiChoice::Quadratic,
            Some("log") => PsiChoice::Log,
            Some("power") => {
                let p = self.f64_req("solver.psi_power")?;
                PsiChoice::Power(p)
            }
            Some(other) => {
                return Err(bad(format!(
                    "solver.psi: '{other}' (expected auto | quadratic | log | power)"
                )))
            }
        };
        Ok(ProblemSpec {
            k: self.k()?,
            homotopy: self.homotopy()?,
            symmetry: self.symmetry()?,
            psi,
        })
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let mut c = SolverConfig::default();
        if let Some(v) = self.f64_opt("solver.newton_tol")? {
            c.newton_tol = v;
        }
        if let Some(v) = self.usize_opt("solver.max_newton_iters")? {
            c.max_newton_iters = v;
        }
        if let Some(v) = self.f64_opt("solver.dt_init")? {
            c.dt_init = v;
        }
        if let Some(v) = self.f64_opt("solver.dt_floor")? {
            c.dt_floor = v;
        }
        if let Some(v) = self.f64_opt("solver.convexity_floor")? {
            c.convexity_floor = v;
        }
        if let Some(v) = self.f64_opt("solver.boundary_tol")? {
            c.boundary_tol = v;
        }
        c.validate()?;
        Ok(c)
    }

    fn family(&self, key: &str, default: Family) -> Result<Family> {
        match self.get(key) {
            None => Ok(default),
            Some("zeta1") => Err(bad(format!(
                "{key}: 'zeta1' is only valid for the inverse-capillary preset"
            ))),
            Some(name) => Family::parse(name),
        }
    }

    /// Realize the right-hand side on the solve grid.
    pub fn phi(&self, domain: &Arc<CapDomain>) -> Result<ScalarField> {
        let k = self.k()?;
        let n = domain.n;
        let default_family = if domain.mode == GridMode::Axisym {
            Family::GAxi
        } else {
            Family::G2
        };
        if let Some(path) = self.path_opt("problem.phi.csv")? {
            if self.get("problem.phi.preset").is_some() {
                return Err(bad(
                    "problem.phi.preset and problem.phi.csv are mutually exclusive".into(),
                ));
            }
            let file = std::fs::File::open(&path)?;
            let sampled = capcm::io::read_sampled_csv(std::io::BufReader::new(file))?;
            return sampled.interpolate(domain);
        }
        match self.get("problem.phi.preset").unwrap_or("constant") {
            "constant" => {
                let v = self
                    .f64_opt("problem.phi.value")?
                    .unwrap_or_else(|| binom(n, k));
                Ok(ScalarField::constant(domain.clone(), v))
            }
            "cap" => {
                let r = self.f64_opt("problem.phi.radius")?.unwrap_or(1.0);
                Ok(ScalarField::constant(
                    domain.clone(),
                    binom(n, k) * r.powi(k as i32),
                ))
            }
            "perturbed-even" => {
                let eps = self.f64_opt("problem.phi.eps")?.unwrap_or(0.1);
                let fam = self.family("problem.phi.family", default_family)?;
                capcm::validate::manufactured_phi(fam, eps, k, domain)
            }
            "inverse-capillary" => {
                let eps = self.f64_opt("problem.phi.eps")?.unwrap_or(0.1);
                let base = capcm::geometry::ell(domain);
                let pert = match self.get("problem.phi.family") {
                    Some("zeta1") => {
                        ScalarField::from_fn(domain.clone(), |r, p| r.sin() * p.cos())
                    }
                    _ => self
                        .family("problem.phi.family", default_family)?
                        .field(domain)?,
                };
                let h = base.add_scaled(eps, &pert);
                if h.min() <= 0.0 {
                    return Err(bad(format!(
                        "inverse-capillary data not positive (min {:.3e})",
                        h.min()
                    )));
                }
                Ok(h.map(|v| v.powi(-(k as i32))))
            }
            other => Err(bad(format!(
                "problem.phi.preset: '{other}' (expected constant | cap | perturbed-even | inverse-capillary)"
            ))),
        }
    }

    /// Realize a support-function field (forward and export pipelines).
    pub fn s_field(&self, domain: &Arc<CapDomain>) -> Result<ScalarField> {
        let default_family = if domain.mode == GridMode::Axisym {
            Family::GAxi
        } else {
            Family::G2
        };
        match self.get("problem.s.preset").unwrap_or("cap") {
            "cap" => {
                let r = self.f64_opt("problem.s.radius")?.unwrap_or(1.0);
                Ok(capcm::geometry::ell(domain).scale(r))
            }
            "perturbed" => {
                let eps = self.f64_opt("problem.s.eps")?.unwrap_or(0.1);
                let fam = self.family("problem.s.family", default_family)?;
                capcm::validate::manufactured_family(fam, eps, domain)
            }
            "translated-cap" => {
                let ax = self.f64_opt("problem.s.ax")?.unwrap_or(0.1);
                let ay = self.f64_opt("problem.s.ay")?.unwrap_or(0.0);
                if domain.mode != GridMode::Full2d || domain.even_reduced() {
                    return Err(bad(
                        "translated-cap needs a full (non-reduced) 2d grid".into(),
                    ));
                }
                let shift = ScalarField::from_fn(domain.clone(), move |r, p| {
                    r.sin() * (ax * p.cos() + ay * p.sin())
                });
                Ok(capcm::geometry::ell(domain)
                    .add_scaled(1.0, &shift)
                    .mark_capillary())
            }
            other => Err(bad(format!(
                "problem.s.preset: '{other}' (expected cap | perturbed | translated-cap)"
            ))),
        }
    }

    pub fn solution_csv(&self) -> Result<PathBuf> {
        self.path_opt("problem.s.csv")?
            .ok_or_else(|| bad("missing required key 'problem.s.csv'".into()))
    }

    pub fn validate_nr(&self) -> Result<usize> {
        let nr = self.usize_opt("validate.nr")?.unwrap_or(32);
        if nr < 8 || nr > 4096 {
            return Err(bad(format!("validate.nr = {nr} outside [8, 4096]")));
        }
        Ok(nr)
    }

    pub fn validate_inject(&self) -> Result<bool> {
        match self.get("validate.inject") {
            None | Some("false") => Ok(false),
            Some("true") => Ok(true),
            Some(other) => Err(bad(format!("validate.inject: '{other}' (true | false)"))),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir
            .join(self.get("output.dir").unwrap_or("out"))
    }

    pub fn seed(&self) -> Result<u64> {
        match self.get("output.seed") {
            None => Ok(0),
            Some(v) => v
                .parse::<u64>()
                .map_err(|e| bad(format!("output.seed: bad integer '{v}' ({e})"))),
        }
    }

    pub fn emit(&self) -> Result<Vec<String>> {
        let raw = self.get("output.emit").unwrap_or("csv,report");
        let mut out = Vec::new();
        for item in raw.split(',') {
            let item = item.trim();
            match item {
                "csv" | "report" | "obj" => out.push(item.to_string()),
                other => return Err(bad(format!("output.emit: unknown artifact '{other}'"))),
            }
        }
        Ok(out)
    }
}
