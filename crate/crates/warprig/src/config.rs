//! Run configuration: JSON schema, validation, and dotted-path overrides.
//!
//! Validation collects every violation before reporting, and unknown keys
//! are rejected at every level. The schema string is
//! `warprig-config/1`.

use crate::ambient::{AmbientSpace, Preset};
use crate::error::{Error, Result};
use crate::geometry::Immersion;
use crate::rigidity::OperatorMode;
use crate::sphere::{HarmonicTerm, QuadratureGrid, Rotation, SurfaceSpec};
use crate::weight::{Direction, WeightIc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const CONFIG_SCHEMA: &str = "warprig-config/1";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbientConfig {
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    pub interval: [f64; 2],
}

fn default_dimension() -> usize {
    2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationConfig {
    pub axis: [f64; 3],
    pub angle: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicConfig {
    pub l: usize,
    pub m: i32,
    pub c: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub base_radius: f64,
    #[serde(default)]
    pub harmonics: Vec<HarmonicConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<RotationConfig>,
}

/// Companion surface: either a full spec or a rotation of surface A
/// sharing the parametrization domain.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceBConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub harmonics: Vec<HarmonicConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<RotationConfig>,
    /// When set, surface B is the ambient rotation of surface A's image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_of_a: Option<RotationConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lat: usize,
    pub lon: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { lat: 32, lon: 64 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformationConfig {
    pub degree: usize,
}

impl Default for DeformationConfig {
    fn default() -> Self {
        DeformationConfig { degree: 4 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IcConfig {
    Auto(String),
    Explicit { w0: f64, wu0: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub ic: IcConfig,
    #[serde(default = "default_direction")]
    pub direction: String,
}

fn default_direction() -> String {
    "forward".to_string()
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            ic: IcConfig::Auto("auto".to_string()),
            direction: default_direction(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub kernel_rel: f64,
    pub gap_min: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            kernel_rel: 1e-8,
            gap_min: 1e3,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub seed: u64,
    pub perturbation: f64,
    pub restarts: usize,
    #[serde(default = "default_search_mode")]
    pub mode: String,
}

fn default_search_mode() -> String {
    "mean_curvature".to_string()
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            seed: 1,
            perturbation: 0.01,
            restarts: 5,
            mode: default_search_mode(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_format")]
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

fn default_format() -> String {
    "json".to_string()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            format: default_format(),
            path: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub ambient: AmbientConfig,
    pub surface: SurfaceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface_b: Option<SurfaceBConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub deformation: DeformationConfig,
    #[serde(default)]
    pub weight: WeightConfig,
    #[serde(default)]
    pub thresholds: ThresholdConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

// ---------------------------------------------------------------------------
// Validation (collects every violation)
// ---------------------------------------------------------------------------

struct Validator {
    errors: Vec<String>,
}

impl Validator {
    fn keys(&mut self, obj: &Value, path: &str, allowed: &[&str], required: &[&str]) {
        let Some(map) = obj.as_object() else {
            self.errors.push(format!("{path}: expected an object"));
            return;
        };
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                self.errors.push(format!("{path}.{key}: unknown key"));
            }
        }
        for key in required {
            if !map.contains_key(*key) {
                self.errors
                    .push(format!("{path}.{key}: missing required key"));
            }
        }
    }

    fn number(&mut self, v: Option<&Value>, path: &str, pred: impl Fn(f64) -> bool, msg: &str) {
        if let Some(v) = v {
            match v.as_f64() {
                Some(x) if pred(x) => {}
                Some(x) => self.errors.push(format!("{path}: {msg} (got {x})")),
                None => self.errors.push(format!("{path}: expected a number")),
            }
        }
    }

    fn integer(&mut self, v: Option<&Value>, path: &str, pred: impl Fn(i64) -> bool, msg: &str) {
        if let Some(v) = v {
            match v.as_i64() {
                Some(x) if pred(x) => {}
                Some(x) => self.errors.push(format!("{path}: {msg} (got {x})")),
                None => self.errors.push(format!("{path}: expected an integer")),
            }
        }
    }
}

/// Validate a raw config value, reporting all violations at once, then
/// produce the typed configuration.
pub fn validate(raw: &Value) -> Result<RunConfig> {
    let mut v = Validator { errors: Vec::new() };
    v.keys(
        raw,
        "config",
        &[
            "schema",
            "ambient",
            "surface",
            "surface_b",
            "grid",
            "deformation",
            "weight",
            "thresholds",
            "search",
            "output",
        ],
        &["ambient", "surface"],
    );

    if let Some(schema) = raw.get("schema") {
        if schema.as_str() != Some(CONFIG_SCHEMA) {
            v.errors
                .push(format!("config.schema: expected \"{CONFIG_SCHEMA}\""));
        }
    }

    if let Some(amb) = raw.get("ambient") {
        v.keys(
            amb,
            "ambient",
            &[
                "preset",
                "mass",
                "kappa",
                "coefficients",
                "dimension",
                "interval",
            ],
            &["preset", "interval"],
        );
        if let Some(preset) = amb.get("preset") {
            let known = [
                "euclidean",
                "hyperbolic",
                "space_form",
                "schwarzschild",
                "ads_schwarzschild",
                "cubic_warp",
                "custom_radial",
            ];
            match preset.as_str() {
                Some(p) if known.contains(&p) => {
                    if (p == "schwarzschild" || p == "ads_schwarzschild")
                        && amb.get("mass").is_none()
                    {
                        v.errors
                            .push("ambient.mass: required for this preset".into());
                    }
                    if p == "custom_radial" && amb.get("coefficients").is_none() {
                        v.errors
                            .push("ambient.coefficients: required for custom_radial".into());
                    }
                }
                Some(p) => v.errors.push(format!(
                    "ambient.preset: unknown preset \"{p}\" (expected one of {known:?})"
                )),
                None => v.errors.push("ambient.preset: expected a string".into()),
            }
        }
        if let Some(interval) = amb.get("interval") {
            match interval.as_array() {
                Some(arr) if arr.len() == 2 => {
                    let lo = arr[0].as_f64();
                    let hi = arr[1].as_f64();
                    match (lo, hi) {
                        (Some(lo), Some(hi)) if lo > 0.0 && hi > lo => {}
                        _ => v
                            .errors
                            .push("ambient.interval: expected 0 < r_lo < r_hi".into()),
                    }
                }
                _ => v
                    .errors
                    .push("ambient.interval: expected [r_lo, r_hi]".into()),
            }
        }
        v.integer(
            amb.get("dimension"),
            "ambient.dimension",
            |n| n >= 2,
            "must be >= 2",
        );
    }

    if let Some(surf) = raw.get("surface") {
        validate_surface(&mut v, surf, "surface");
    }
    if let Some(surf) = raw.get("surface_b") {
        v.keys(
            surf,
            "surface_b",
            &["base_radius", "harmonics", "rotation", "rotation_of_a"],
            &[],
        );
        let has_full = surf.get("base_radius").is_some();
        let has_rot = surf.get("rotation_of_a").is_some();
        if has_full == has_rot {
            v.errors
                .push("surface_b: specify either base_radius/harmonics or rotation_of_a".into());
        }
        v.number(
            surf.get("base_radius"),
            "surface_b.base_radius",
            |x| x > 0.0,
            "must be positive",
        );
        if let Some(h) = surf.get("harmonics") {
            validate_harmonics(&mut v, h, "surface_b.harmonics");
        }
    }

    if let Some(grid) = raw.get("grid") {
        v.keys(grid, "grid", &["lat", "lon"], &["lat", "lon"]);
        v.integer(grid.get("lat"), "grid.lat", |n| n >= 8, "must be >= 8");
        v.integer(
            grid.get("lon"),
            "grid.lon",
            |n| n >= 16 && n % 2 == 0,
            "must be even and >= 16",
        );
    }
    if let Some(d) = raw.get("deformation") {
        v.keys(d, "deformation", &["degree"], &["degree"]);
        v.integer(
            d.get("degree"),
            "deformation.degree",
            |n| (1..=16).contains(&n),
            "must be in 1..=16",
        );
    }
    if let Some(w) = raw.get("weight") {
        v.keys(w, "weight", &["ic", "direction"], &["ic"]);
        if let Some(ic) = w.get("ic") {
            let ok_auto = ic.as_str() == Some("auto");
            let ok_explicit = ic
                .as_object()
                .map(|m| m.len() == 2 && m.contains_key("w0") && m.contains_key("wu0"))
                .unwrap_or(false);
            if !ok_auto && !ok_explicit {
                v.errors
                    .push("weight.ic: expected \"auto\" or {w0, wu0}".into());
            }
        }
        if let Some(dir) = w.get("direction") {
            if !matches!(dir.as_str(), Some("forward") | Some("backward")) {
                v.errors
                    .push("weight.direction: expected \"forward\" or \"backward\"".into());
            }
        }
    }
    if let Some(t) = raw.get("thresholds") {
        v.keys(t, "thresholds", &["kernel_rel", "gap_min"], &[]);
        v.number(
            t.get("kernel_rel"),
            "thresholds.kernel_rel",
            |x| x > 0.0 && x < 1.0,
            "must be in (0, 1)",
        );
        v.number(
            t.get("gap_min"),
            "thresholds.gap_min",
            |x| x > 1.0,
            "must be > 1",
        );
    }
    if let Some(s) = raw.get("search") {
        v.keys(
            s,
            "search",
            &["seed", "perturbation", "restarts", "mode"],
            &[],
        );
        v.integer(s.get("seed"), "search.seed", |n| n >= 0, "must be >= 0");
        v.number(
            s.get("perturbation"),
            "search.perturbation",
            |x| x >= 0.0,
            "must be >= 0",
        );
        v.integer(
            s.get("restarts"),
            "search.restarts",
            |n| n >= 1,
            "must be >= 1",
        );
        if let Some(mode) = s.get("mode") {
            if !matches!(mode.as_str(), Some("mean_curvature") | Some("sigma2")) {
                v.errors
                    .push("search.mode: expected \"mean_curvature\" or \"sigma2\"".into());
            }
        }
    }
    if let Some(o) = raw.get("output") {
        v.keys(o, "output", &["format", "path"], &[]);
        if let Some(fmt) = o.get("format") {
            if !matches!(fmt.as_str(), Some("json")) {
                v.errors.push("output.format: expected \"json\"".into());
            }
        }
    }

    if !v.errors.is_empty() {
        return Err(Error::Config(v.errors));
    }
    serde_json::from_value(raw.clone())
        .map_err(|e| Error::Config(vec![format!("config deserialization: {e}")]))
}

fn validate_surface(v: &mut Validator, surf: &Value, path: &str) {
    v.keys(
        surf,
        path,
        &["base_radius", "harmonics", "rotation"],
        &["base_radius"],
    );
    v.number(
        surf.get("base_radius"),
        &format!("{path}.base_radius"),
        |x| x > 0.0,
        "must be positive",
    );
    if let Some(h) = surf.get("harmonics") {
        validate_harmonics(v, h, &format!("{path}.harmonics"));
    }
    if let Some(rot) = surf.get("rotation") {
        v.keys(
            rot,
            &format!("{path}.rotation"),
            &["axis", "angle"],
            &["axis", "angle"],
        );
    }
}

fn validate_harmonics(v: &mut Validator, h: &Value, path: &str) {
    let Some(arr) = h.as_array() else {
        v.errors.push(format!("{path}: expected an array"));
        return;
    };
    for (k, term) in arr.iter().enumerate() {
        v.keys(
            term,
            &format!("{path}[{k}]"),
            &["l", "m", "c"],
            &["l", "m", "c"],
        );
        if let (Some(l), Some(m)) = (
            term.get("l").and_then(Value::as_i64),
            term.get("m").and_then(Value::as_i64),
        ) {
            if !(0..=16).contains(&l) || m.abs() > l {
                v.errors
                    .push(format!("{path}[{k}]: invalid harmonic (l={l}, m={m})"));
            }
        }
    }
}

/// Apply `key.path=value` overrides to a raw config value. Values parse as
/// JSON first and fall back to strings.
pub fn apply_override(raw: &mut Value, assignment: &str) -> Result<()> {
    let Some((path, text)) = assignment.split_once('=') else {
        return Err(Error::Config(vec![format!(
            "override \"{assignment}\": expected key.path=value"
        )]));
    };
    let value: Value = serde_json::from_str(text).unwrap_or(Value::String(text.to_string()));
    let mut cursor = raw;
    let parts: Vec<&str> = path.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        if !cursor.is_object() {
            *cursor = Value::Object(serde_json::Map::new());
        }
        let map = cursor.as_object_mut().expect("object ensured");
        if k + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        cursor = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(serde_json::Map::new()));
    }
    unreachable!("non-empty path");
}

// ---------------------------------------------------------------------------
// Domain object construction
// ---------------------------------------------------------------------------

impl RunConfig {
    pub fn ambient_space(&self) -> Result<AmbientSpace> {
        let a = &self.ambient;
        let preset = match a.preset.as_str() {
            "euclidean" => Preset::euclidean(),
            "hyperbolic" => Preset::hyperbolic(),
            "space_form" => Preset::SpaceForm {
                kappa: a.kappa.unwrap_or(0.0),
            },
            "schwarzschild" => Preset::Schwarzschild {
                mass: a
                    .mass
                    .ok_or_else(|| Error::Config(vec!["ambient.mass: required".into()]))?,
            },
            "ads_schwarzschild" => Preset::AdsSchwarzschild {
                mass: a
                    .mass
                    .ok_or_else(|| Error::Config(vec!["ambient.mass: required".into()]))?,
                kappa: a.kappa.unwrap_or(1.0),
            },
            "cubic_warp" => Preset::CubicWarp,
            "custom_radial" => Preset::CustomRadial {
                coefficients: a
                    .coefficients
                    .clone()
                    .ok_or_else(|| Error::Config(vec!["ambient.coefficients: required".into()]))?,
            },
            other => {
                return Err(Error::Config(vec![format!(
                    "ambient.preset: unknown preset \"{other}\""
                )]))
            }
        };
        AmbientSpace::new(preset, a.interval, a.dimension)
    }

    pub fn surface_spec(&self) -> Result<SurfaceSpec> {
        surface_from_config(&self.surface)
    }

    pub fn grid(&self) -> Result<QuadratureGrid> {
        QuadratureGrid::build(self.grid.lat, self.grid.lon)
    }

    pub fn weight_ic(&self) -> WeightIc {
        match &self.weight.ic {
            IcConfig::Auto(_) => WeightIc::Auto,
            IcConfig::Explicit { w0, wu0 } => WeightIc::Explicit { w0: *w0, wu0: *wu0 },
        }
    }

    pub fn weight_direction(&self) -> Direction {
        match self.weight.direction.as_str() {
            "backward" => Direction::Backward,
            _ => Direction::Forward,
        }
    }

    pub fn search_mode(&self) -> OperatorMode {
        match self.search.mode.as_str() {
            "sigma2" => OperatorMode::Sigma2,
            _ => OperatorMode::MeanCurvature,
        }
    }

    /// Companion immersion for pair experiments.
    pub fn immersion_b(&self) -> Result<Immersion> {
        let Some(b) = &self.surface_b else {
            return Err(Error::Config(vec![
                "surface_b: required for pair experiments".into(),
            ]));
        };
        if let Some(rot) = &b.rotation_of_a {
            let rotation = Rotation::from_axis_angle(rot.axis, rot.angle)?;
            return Ok(Immersion::RotatedImage {
                spec: self.surface_spec()?,
                rotation,
            });
        }
        let spec = SurfaceSpec::new(
            b.base_radius.expect("validated"),
            b.harmonics
                .iter()
                .map(|h| HarmonicTerm {
                    l: h.l,
                    m: h.m,
                    c: h.c,
                })
                .collect(),
            match &b.rotation {
                Some(r) => Rotation::from_axis_angle(r.axis, r.angle)?,
                None => Rotation::identity(),
            },
        )?;
        Ok(Immersion::graph(spec))
    }
}

fn surface_from_config(s: &SurfaceConfig) -> Result<SurfaceSpec> {
    SurfaceSpec::new(
        s.base_radius,
        s.harmonics
            .iter()
            .map(|h| HarmonicTerm {
                l: h.l,
                m: h.m,
                c: h.c,
            })
            .collect(),
        match &s.rotation {
            Some(r) => Rotation::from_axis_angle(r.axis, r.angle)?,
            None => Rotation::identity(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base_config() -> Value {
        json!({
            "ambient": {"preset": "schwarzschild", "mass": 0.5, "interval": [1.05, 6.0]},
            "surface": {"base_radius": 2.0, "harmonics": [{"l": 2, "m": 2, "c": 0.08}]},
            "grid": {"lat": 16, "lon": 32}
        })
    }

    #[test]
    fn valid_config_roundtrip() {
        let cfg = validate(&base_config()).unwrap();
        assert!(cfg.ambient_space().is_ok());
        assert!(cfg.surface_spec().is_ok());
        assert!(cfg.grid().is_ok());
        assert_eq!(cfg.thresholds.kernel_rel, 1e-8);
    }

    #[test]
    fn all_violations_reported_at_once() {
        let raw = json!({
            "ambient": {"preset": "nonsense", "interval": [2.0, 1.0]},
            "surface": {"base_radius": -1.0},
            "grid": {"lat": 4, "lon": 33},
            "bogus": 1
        });
        match validate(&raw) {
            Err(Error::Config(errors)) => {
                assert!(errors.len() >= 5, "errors: {errors:?}");
                assert!(errors.iter().any(|e| e.contains("bogus")));
                assert!(errors.iter().any(|e| e.contains("grid.lat")));
                assert!(errors.iter().any(|e| e.contains("grid.lon")));
                assert!(errors.iter().any(|e| e.contains("preset")));
                assert!(errors.iter().any(|e| e.contains("base_radius")));
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn overrides_apply_dotted_paths() {
        let mut raw = base_config();
        apply_override(&mut raw, "ambient.mass=0.1").unwrap();
        apply_override(&mut raw, "grid.lat=24").unwrap();
        apply_override(&mut raw, "output.path=out.json").unwrap();
        let cfg = validate(&raw).unwrap();
        assert_eq!(cfg.ambient.mass, Some(0.1));
        assert_eq!(cfg.grid.lat, 24);
        assert_eq!(cfg.output.path.as_deref(), Some("out.json"));
    }

    #[test]
    fn rotation_pair_config() {
        let mut raw = base_config();
        apply_override(&mut raw, "surface_b.rotation_of_a.axis=[0,0,1]").unwrap();
        apply_override(&mut raw, "surface_b.rotation_of_a.angle=0.8").unwrap();
        let cfg = validate(&raw).unwrap();
        assert!(matches!(
            cfg.immersion_b().unwrap(),
            Immersion::RotatedImage { .. }
        ));
    }
}
