//! Scenario configuration: a TOML file (or JSON, by extension) with nested tables.
//!
//! Every key is optional at the serde level so that validation can name the
//! exact missing or invalid key.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::converge::Quantity;
use super::fixtures;
use super::suite::Profile;
use crate::error::{Error, Result};
use crate::field::FieldConfig;
use crate::geometry::TargetGeometry;
use crate::green::GreenKind;
use crate::lattice::LorentzianLattice;
use crate::observables::{ActionFunctional, Functional, PointPolynomial};
use crate::variational::GeneralizedLagrangian;
use crate::wavemaps::{bump_weights, geodesic_background, wavy_background};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    #[serde(default)]
    pub target: TargetSpec,
    #[serde(default)]
    pub lagrangian: LagrangianSpec,
    #[serde(default)]
    pub background: BackgroundSpec,
    #[serde(default)]
    pub functionals: Vec<FunctionalSpec>,
    #[serde(default)]
    pub run: RunSpec,
    /// Directory of the config file; relative file references resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_x: Option<usize>,
    /// Defaults to `length / n_x`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
    /// Defaults to `dx / 2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Spatial period, used when `dx` is absent. Defaults to 2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    /// Per-column `g_tt` (negative) and `g_xx` (positive); Minkowski when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_tt: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_xx: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(default = "default_target")]
    pub name: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_target() -> String {
    "flat".into()
}

fn default_dim() -> usize {
    1
}

impl Default for TargetSpec {
    fn default() -> Self {
        TargetSpec {
            name: default_target(),
            dim: default_dim(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianSpec {
    /// `free_scalar`, `kg_mass` or `wave_map`.
    #[serde(default = "default_lagrangian")]
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
}

fn default_lagrangian() -> String {
    "free_scalar".into()
}

impl Default for LagrangianSpec {
    fn default() -> Self {
        LagrangianSpec {
            name: default_lagrangian(),
            mass: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSpec {
    /// `zero`, `constant`, `plane_wave`, `geodesic`, `wavy` or `random`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// JSON file holding the site-major values, either as an array or as `{"values": [...]}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Point value for `constant`, base point for `geodesic`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Vec<f64>>,
    /// Initial velocity for `geodesic`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSpec {
    pub name: String,
    /// `linear`, `quadratic`, `polynomial` or `action`.
    pub kind: String,
    /// Bump center `[t, x]` in physical units.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Fiber direction of the bump; all ones when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    /// Coefficients of `phi`, `phi^2`, `phi^3` for `polynomial`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<[f64; 3]>,
    /// Overrides the bump with explicit site-major weights from a JSON file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights_file: Option<PathBuf>,
}

fn default_radius() -> f64 {
    0.2
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it, so it is not echoed.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    /// Output directory; not echoed so reports do not depend on where they are written.
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolutions: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantity: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    /// Names of the two functionals to bracket.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket: Option<[String; 2]>,
    /// Green operator kind for `green`: `retarded`, `advanced` or `causal`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// Source site `[it, ix]` for `green`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<[usize; 2]>,
    #[serde(default)]
    pub dense_kernel: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criteria: Option<Vec<u8>>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg = if is_json {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text)
            .map_err(|e| Error::config(toml_key(&e), e.to_string().trim_end().to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("<json>", e.to_string()))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn seed(&self) -> u64 {
        self.run.seed.unwrap_or(0)
    }

    pub fn profile(&self) -> Profile {
        self.run.profile.unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = &self.lattice {
            for (key, v) in [("lattice.n_t", l.n_t), ("lattice.n_x", l.n_x)] {
                match v {
                    None => return Err(Error::config(key, "missing required key")),
                    Some(0) => return Err(Error::config(key, "must be positive")),
                    Some(_) => {}
                }
            }
            for (key, v) in [
                ("lattice.dt", l.dt),
                ("lattice.dx", l.dx),
                ("lattice.length", l.length),
            ] {
                if let Some(v) = v {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(Error::config(key, "must be positive"));
                    }
                }
            }
            if l.g_tt.is_some() != l.g_xx.is_some() {
                return Err(Error::config(
                    "lattice.g_xx",
                    "g_tt and g_xx must be given together",
                ));
            }
        }
        if let Some(t) = self.run.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::config("run.tolerance", "must be positive"));
            }
        }
        if let Some(r) = &self.run.resolutions {
            if r.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config(
                    "run.resolutions",
                    "must be strictly increasing",
                ));
            }
            if r.contains(&0) {
                return Err(Error::config("run.resolutions", "must be positive"));
            }
        }
        if self.run.threads == Some(0) {
            return Err(Error::config("run.threads", "must be at least 1"));
        }
        if let Some(c) = &self.run.criteria {
            if let Some(bad) = c.iter().find(|id| !(1..=11).contains(*id)) {
                return Err(Error::config(
                    "run.criteria",
                    format!("no criterion {bad}; valid ids are 1 to 11"),
                ));
            }
        }
        if let Some(k) = &self.run.kind {
            parse_kind(k)?;
        }
        if self.background.builtin.is_some() && self.background.file.is_some() {
            return Err(Error::config(
                "background",
                "give either `builtin` or `file`, not both",
            ));
        }
        if let Some(f) = &self.background.file {
            self.require_file("background.file", f)?;
        }
        for (i, f) in self.functionals.iter().enumerate() {
            if self.functionals[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::config(
                    format!("functionals[{i}].name"),
                    format!("duplicate name `{}`", f.name),
                ));
            }
            if !matches!(
                f.kind.as_str(),
                "linear" | "quadratic" | "polynomial" | "action"
            ) {
                return Err(Error::config(
                    format!("functionals[{i}].kind"),
                    format!(
                        "unknown kind `{}` (linear, quadratic, polynomial, action)",
                        f.kind
                    ),
                ));
            }
            if !(f.radius > 0.0 && f.radius.is_finite()) {
                return Err(Error::config(
                    format!("functionals[{i}].radius"),
                    "must be positive",
                ));
            }
            match &f.weights_file {
                Some(w) => self.require_file(&format!("functionals[{i}].weights_file"), w)?,
                None if f.center.is_none() => {
                    return Err(Error::config(
                        format!("functionals[{i}].center"),
                        "missing required key",
                    ))
                }
                None => {}
            }
        }
        if let Some([a, b]) = &self.run.bracket {
            for name in [a, b] {
                if !self.functionals.iter().any(|f| &f.name == name) {
                    return Err(Error::config(
                        "run.bracket",
                        format!("no functional named `{name}`"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn require_file(&self, key: &str, p: &Path) -> Result<()> {
        if self.resolve(p).is_file() {
            Ok(())
        } else {
            Err(Error::config(
                key,
                format!("file not found: {}", p.display()),
            ))
        }
    }

    pub fn build_lattice(&self) -> Result<Arc<LorentzianLattice>> {
        let l = self
            .lattice
            .as_ref()
            .ok_or_else(|| Error::config("lattice", "missing required table"))?;
        let (n_t, n_x) = (l.n_t.unwrap_or(0), l.n_x.unwrap_or(0));
        let dx = l.dx.unwrap_or_else(|| l.length.unwrap_or(2.0) / n_x as f64);
        let dt = l.dt.unwrap_or(0.5 * dx);
        let lat = match (&l.g_tt, &l.g_xx) {
            (Some(gtt), Some(gxx)) => {
                LorentzianLattice::with_metric(n_t, n_x, dt, dx, gtt.clone(), gxx.clone())
            }
            _ => LorentzianLattice::minkowski(n_t, n_x, dt, dx),
        }
        .map_err(|e| Error::config("lattice", e.to_string()))?;
        Ok(Arc::new(lat))
    }

    pub fn build_target(&self) -> Result<Arc<TargetGeometry>> {
        TargetGeometry::builtin(&self.target.name, self.target.dim)
            .map(Arc::new)
            .map_err(|e| Error::config("target.name", e.to_string()))
    }

    pub fn build_lagrangian(&self, target: &TargetGeometry) -> Result<GeneralizedLagrangian> {
        let name = match (self.lagrangian.name.as_str(), self.lagrangian.mass) {
            ("kg_mass", Some(m)) => format!("kg_mass({m})"),
            ("kg_mass", None) => {
                return Err(Error::config(
                    "lagrangian.mass",
                    "missing required key for kg_mass",
                ))
            }
            (other, _) => other.to_string(),
        };
        GeneralizedLagrangian::builtin(&name, target)
            .map_err(|e| Error::config("lagrangian.name", e.to_string()))
    }

    pub fn build_background(
        &self,
        lat: Arc<LorentzianLattice>,
        target: Arc<TargetGeometry>,
        rng: &mut ChaCha8Rng,
    ) -> Result<FieldConfig> {
        let b = &self.background;
        let n = target.dim();
        if let Some(file) = &b.file {
            let values = read_values(&self.resolve(file), "background.file")?;
            return FieldConfig::new(lat, target, values)
                .map_err(|e| Error::config("background.file", e.to_string()));
        }
        let key = "background.builtin";
        let point = |key: &str, v: &Option<Vec<f64>>| -> Result<Vec<f64>> {
            let v = v.clone().unwrap_or_else(|| vec![0.0; n]);
            if v.len() != n {
                return Err(Error::config(
                    key,
                    format!("expected {n} components, got {}", v.len()),
                ));
            }
            Ok(v)
        };
        let phi = match b.builtin.as_deref().unwrap_or("zero") {
            "zero" => FieldConfig::constant(lat, target, &vec![0.0; n]),
            "constant" => FieldConfig::constant(lat, target, &point("background.value", &b.value)?),
            "plane_wave" => {
                let amp = b.amplitude.unwrap_or(1.0);
                let k = 2.0 * std::f64::consts::PI * b.mode.unwrap_or(1) as f64
                    / fixtures::length(&lat);
                FieldConfig::from_fn(lat, target, move |t, x| vec![amp * (k * (x - t)).sin(); n])
            }
            "geodesic" => {
                if !matches!(*target, TargetGeometry::Sphere2Stereographic) {
                    return Err(Error::config(
                        key,
                        "geodesic backgrounds need the sphere target",
                    ));
                }
                let v = b.velocity.clone().unwrap_or_else(|| vec![0.3, 0.2]);
                geodesic_background(
                    lat,
                    &point("background.value", &b.value)?,
                    &point("background.velocity", &Some(v))?,
                )
            }
            "wavy" => {
                if n != 2 {
                    return Err(Error::config(
                        key,
                        "wavy backgrounds need a two-dimensional target",
                    ));
                }
                wavy_background(lat, (*target).clone())
            }
            "random" => match *target {
                TargetGeometry::Sphere2Stereographic => {
                    fixtures::random_sphere_background(lat, rng)
                }
                TargetGeometry::Flat { dim: 1 } => fixtures::random_scalar_background(lat, rng),
                _ => {
                    return Err(Error::config(
                        key,
                        "random backgrounds need flat(1) or the sphere",
                    ))
                }
            },
            other => return Err(Error::config(key, format!("unknown background `{other}`"))),
        };
        phi.map_err(|e| Error::config(key, e.to_string()))
    }

    pub fn build_functional(
        &self,
        name: &str,
        lat: &LorentzianLattice,
        gl: &GeneralizedLagrangian,
        n: usize,
    ) -> Result<Functional> {
        let (i, spec) = self
            .functionals
            .iter()
            .enumerate()
            .find(|(_, f)| f.name == name)
            .ok_or_else(|| Error::config("functionals", format!("no functional named `{name}`")))?;
        let key = |k: &str| format!("functionals[{i}].{k}");
        let comps = if spec.kind == "action" { 1 } else { n };
        let weights = match &spec.weights_file {
            Some(p) => {
                let w = read_values(&self.resolve(p), &key("weights_file"))?;
                if w.len() != lat.n_sites() * comps {
                    return Err(Error::config(
                        key("weights_file"),
                        format!("expected {} values, got {}", lat.n_sites() * comps, w.len()),
                    ));
                }
                w
            }
            None => {
                let [t0, x0] = spec.center.expect("validated");
                let dir = spec.direction.clone().unwrap_or_else(|| vec![1.0; comps]);
                if dir.len() != comps {
                    return Err(Error::config(
                        key("direction"),
                        format!("expected {comps} components, got {}", dir.len()),
                    ));
                }
                bump_weights(lat, comps, t0, x0, spec.radius, &dir)
            }
        };
        if weights.iter().all(|w| *w == 0.0) {
            return Err(Error::config(
                key("center"),
                "smearing function vanishes on the lattice",
            ));
        }
        let mut f = match spec.kind.as_str() {
            "linear" => PointPolynomial::linear(lat, n, weights),
            "quadratic" => PointPolynomial::quadratic(lat, n, weights),
            "polynomial" => {
                PointPolynomial::polynomial(lat, n, weights, spec.coeffs.unwrap_or([1.0, 0.0, 0.0]))
            }
            _ => ActionFunctional::functional(gl.clone(), lat, weights),
        };
        f.name = spec.name.clone();
        Ok(f)
    }

    pub fn green_kind(&self) -> Result<GreenKind> {
        parse_kind(self.run.kind.as_deref().unwrap_or("retarded"))
    }
}

fn parse_kind(s: &str) -> Result<GreenKind> {
    match s {
        "retarded" => Ok(GreenKind::Retarded),
        "advanced" => Ok(GreenKind::Advanced),
        "causal" => Ok(GreenKind::Causal),
        other => Err(Error::config(
            "run.kind",
            format!("unknown kind `{other}` (retarded, advanced, causal)"),
        )),
    }
}

/// Best-effort dotted key from a TOML error message.
fn toml_key(e: &toml::de::Error) -> String {
    let msg = e.message();
    if let Some(rest) = msg.split('`').nth(1) {
        if msg.starts_with("missing field") || msg.starts_with("unknown field") {
            return rest.to_string();
        }
    }
    "<toml>".into()
}

fn read_values(path: &Path, key: &str) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Values {
        Bare(Vec<f64>),
        Wrapped { values: Vec<f64> },
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(key, format!("{}: {e}", path.display())))?;
    let v: Values = serde_json::from_str(&text)
        .map_err(|e| Error::config(key, format!("{}: {e}", path.display())))?;
    let v = match v {
        Values::Bare(v) | Values::Wrapped { values: v } => v,
    };
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::config(key, "non-finite value"));
    }
    Ok(v)
}
