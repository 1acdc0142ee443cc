//! Experiment configuration: JSON on disk, validated into core types.

use std::path::Path;

use anosov_core::dimensions::{GapTheoremParams, GrowthParams, ShadowParams, WalkInput};
use anosov_core::walks::{WalkMeasure, DEFAULT_SUPPORT_CAP};
use anosov_core::{GeneratorSet, Representation, Signature, UnimodularMatrix, Word};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub d: usize,
    /// Generator `x` pairs with its inverse `x'`.
    pub generators: Vec<GeneratorSpec>,
    pub signature: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
    #[serde(default)]
    pub pressure: PressureConfig,
    #[serde(default = "SampleConfig::limit_default")]
    pub limit_set: SampleConfig,
    #[serde(default = "SampleConfig::omega_default")]
    pub omega: SampleConfig,
    #[serde(default)]
    pub box_count: BoxCountConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow: Option<ShadowConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthConfig>,
    #[serde(default)]
    pub walks: Vec<WalkConfig>,
    #[serde(default)]
    pub duality: DualityConfig,
}

fn default_gap_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub name: char,
    /// Row-major.
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PressureConfig {
    pub n_min: usize,
    pub n_max: usize,
    /// Parameters at which the pressure curve is tabulated; defaults to steps of 0.25 over `[0, #S(P)]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Vec<f64>>,
}

impl Default for PressureConfig {
    fn default() -> Self {
        Self { n_min: 6, n_max: 12, r_grid: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub depth: usize,
    pub count: usize,
}

impl SampleConfig {
    fn limit_default() -> Self {
        Self { depth: 12, count: 2000 }
    }

    fn omega_default() -> Self {
        Self { depth: 8, count: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoxCountConfig {
    pub min_count: usize,
    pub max_fraction: f64,
}

impl Default for BoxCountConfig {
    fn default() -> Self {
        Self { min_count: 2, max_fraction: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub minkowski: f64,
    pub falconer: f64,
    pub lyapunov: f64,
    pub omega: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { minkowski: 0.2, falconer: 0.05, lyapunov: 0.2, omega: 0.2 }
    }
}

/// A ray `prefix period period ...` truncated at `depth` letters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayConfig {
    #[serde(default)]
    pub prefix: String,
    pub period: String,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowConfig {
    pub ray: RayConfig,
    pub eps: f64,
    pub samples: usize,
    pub extra_depth: usize,
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Root index of the stopping rule; defaults to `ceil` of the Falconer estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
}

fn default_slack() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthConfig {
    pub half_angle: f64,
    pub t_grid: Vec<f64>,
    pub max_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureSpec {
    /// `"uniform-on-generators"`.
    Named(String),
    /// Word -> probability.
    Atoms(std::collections::BTreeMap<String, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkConfig {
    pub name: String,
    pub measure: MeasureSpec,
    /// User assertion that the walk is non-elementary; recorded, not certified.
    #[serde(default)]
    pub non_elementary: bool,
    #[serde(default = "default_entropy_n")]
    pub entropy_n_max: usize,
    #[serde(default = "default_support_cap")]
    pub support_cap: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_entropy_n() -> usize {
    10
}
fn default_support_cap() -> usize {
    DEFAULT_SUPPORT_CAP
}
fn default_horizon() -> usize {
    64
}
fn default_trials() -> usize {
    200
}

impl WalkConfig {
    pub fn uniform() -> Self {
        Self {
            name: "uniform".into(),
            measure: MeasureSpec::Named("uniform-on-generators".into()),
            non_elementary: false,
            entropy_n_max: default_entropy_n(),
            support_cap: default_support_cap(),
            horizon: default_horizon(),
            trials: default_trials(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualityConfig {
    pub samples: usize,
    pub grid_points: usize,
}

impl Default for DualityConfig {
    fn default() -> Self {
        Self { samples: 200, grid_points: 101 }
    }
}

/// Parses a config, reporting the failing field path and position.
pub fn parse(text: &str, origin: &str) -> CliResult<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("{origin}: field `{path}`: {}", e.into_inner()))
    })?;
    cfg.validate().map_err(|msg| CliError::Config(format!("{origin}: {msg}")))?;
    Ok(cfg)
}

pub fn load(path: &Path) -> CliResult<(ExperimentConfig, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((parse(text, &path.display().to_string())?, bytes))
}

fn positive(name: &str, x: f64) -> Result<(), String> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(format!("`{name}` must be positive, got {x}"))
    }
}

fn nonzero(name: &str, n: usize) -> Result<(), String> {
    if n > 0 {
        Ok(())
    } else {
        Err(format!("`{name}` must be positive"))
    }
}

impl ExperimentConfig {
    /// Stable JSON with every default spelled out; `parse` inverts it.
    pub fn to_canonical_json(&self) -> String {
        crate::output::stable_json(&serde_json::to_value(self).expect("config serializes"))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.d < 2 {
            return Err(format!("`d` must be at least 2, got {}", self.d));
        }
        self.signature_checked()?;
        self.representation_checked()?;
        positive("gap_tol", self.gap_tol)?;
        nonzero("pressure.n_min", self.pressure.n_min)?;
        if self.pressure.n_max < self.pressure.n_min + 1 {
            return Err("`pressure.n_max` must exceed `pressure.n_min`".into());
        }
        if let Some(grid) = &self.pressure.r_grid {
            if grid.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return Err("`pressure.r_grid` entries must be non-negative".into());
            }
        }
        nonzero("limit_set.depth", self.limit_set.depth)?;
        nonzero("limit_set.count", self.limit_set.count)?;
        nonzero("omega.depth", self.omega.depth)?;
        nonzero("omega.count", self.omega.count)?;
        nonzero("box_count.min_count", self.box_count.min_count)?;
        positive("box_count.max_fraction", self.box_count.max_fraction)?;
        let t = &self.tolerances;
        for (name, x) in [("minkowski", t.minkowski), ("falconer", t.falconer), ("lyapunov", t.lyapunov), ("omega", t.omega)] {
            positive(&format!("tolerances.{name}"), x)?;
        }
        if let Some(s) = &self.shadow {
            positive("shadow.eps", s.eps)?;
            positive("shadow.slack", s.slack)?;
            nonzero("shadow.samples", s.samples)?;
            nonzero("shadow.extra_depth", s.extra_depth)?;
            nonzero("shadow.ray.depth", s.ray.depth)?;
            if let Some(q) = s.q {
                nonzero("shadow.q", q)?;
            }
            self.ray()?;
        }
        if let Some(g) = &self.growth {
            positive("growth.half_angle", g.half_angle)?;
            nonzero("growth.max_len", g.max_len)?;
            if g.t_grid.len() < 2 || g.t_grid.iter().any(|x| !(*x > 0.0)) {
                return Err("`growth.t_grid` needs at least two positive values".into());
            }
        }
        for (k, w) in self.walks.iter().enumerate() {
            nonzero(&format!("walks[{k}].entropy_n_max"), w.entropy_n_max)?;
            nonzero(&format!("walks[{k}].support_cap"), w.support_cap)?;
            nonzero(&format!("walks[{k}].horizon"), w.horizon)?;
            nonzero(&format!("walks[{k}].trials"), w.trials)?;
            self.measure(w).map_err(|e| format!("walks[{k}]: {e}"))?;
        }
        nonzero("duality.samples", self.duality.samples)?;
        if self.duality.grid_points < 2 {
            return Err("`duality.grid_points` must be at least 2".into());
        }
        Ok(())
    }

    fn signature_checked(&self) -> Result<Signature, String> {
        Signature::new(self.d, self.signature.clone()).map_err(|e| format!("`signature`: {e}"))
    }

    pub fn signature(&self) -> Signature {
        self.signature_checked().expect("validated config")
    }

    pub fn generator_set(&self) -> Result<GeneratorSet, String> {
        GeneratorSet::new(self.generators.iter().map(|g| g.name)).map_err(|e| format!("`generators`: {e}"))
    }

    fn representation_checked(&self) -> Result<Representation, String> {
        if self.generators.is_empty() {
            return Err("`generators` is empty".into());
        }
        let set = self.generator_set()?;
        let mut images = Vec::with_capacity(self.generators.len());
        for g in &self.generators {
            let rows = &g.matrix;
            if rows.len() != self.d || rows.iter().any(|r| r.len() != self.d) {
                return Err(format!("generator '{}' is not {}x{}", g.name, self.d, self.d));
            }
            let m = nalgebra::DMatrix::from_fn(self.d, self.d, |i, j| rows[i][j]);
            let det = m.determinant();
            if !(det > 0.0) {
                return Err(format!("generator '{}' has determinant {det} <= 0", g.name));
            }
            let u = UnimodularMatrix::from_rows(rows).map_err(|e| format!("generator '{}': {e}", g.name))?;
            images.push(u);
        }
        Representation::new(set, images).map_err(|e| e.to_string())
    }

    pub fn representation(&self) -> Representation {
        self.representation_checked().expect("validated config")
    }

    pub fn ray(&self) -> Result<Word, String> {
        let s = self.shadow.as_ref().ok_or("no `shadow` section")?;
        let set = self.generator_set()?;
        let prefix = set.parse(&s.ray.prefix).map_err(|e| format!("`shadow.ray.prefix`: {e}"))?;
        let period = set.parse(&s.ray.period).map_err(|e| format!("`shadow.ray.period`: {e}"))?;
        prefix.eventually_periodic(&period, s.ray.depth).map_err(|e| format!("`shadow.ray`: {e}"))
    }

    pub fn measure(&self, w: &WalkConfig) -> Result<WalkMeasure, String> {
        let set = self.generator_set()?;
        let mu = match &w.measure {
            MeasureSpec::Named(n) if n == "uniform-on-generators" => WalkMeasure::uniform_on_generators(set.rank()),
            MeasureSpec::Named(n) => return Err(format!("unknown measure {n:?}")),
            MeasureSpec::Atoms(atoms) => {
                let parsed = atoms
                    .iter()
                    .map(|(k, &p)| set.parse(k).map(|w| (w, p)))
                    .collect::<anosov_core::Result<Vec<_>>>()
                    .map_err(|e| e.to_string())?;
                WalkMeasure::new(parsed).map_err(|e| e.to_string())?
            }
        };
        Ok(mu.with_non_elementary(w.non_elementary))
    }

    pub fn r_grid(&self) -> Vec<f64> {
        self.pressure.r_grid.clone().unwrap_or_else(|| {
            let top = anosov_core::SeparatedPairs::new(&self.signature()).len();
            (0..=4 * top).map(|k| k as f64 * 0.25).collect()
        })
    }

    pub fn theorem_params(&self, seed: u64) -> GapTheoremParams {
        GapTheoremParams {
            n_min: self.pressure.n_min,
            n_max: self.pressure.n_max,
            limit_depth: self.limit_set.depth,
            limit_count: self.limit_set.count,
            omega_depth: self.omega.depth,
            omega_count: self.omega.count,
            gap_tol: self.gap_tol,
            min_count: self.box_count.min_count,
            max_fraction: self.box_count.max_fraction,
            tol_minkowski: self.tolerances.minkowski,
            tol_falconer: self.tolerances.falconer,
            tol_lyapunov: self.tolerances.lyapunov,
            tol_omega: self.tolerances.omega,
            growth: self.growth.as_ref().map(|g| GrowthParams {
                half_angle: g.half_angle,
                t_grid: g.t_grid.clone(),
                max_len: g.max_len,
            }),
            seed,
        }
    }

    /// Configured walks, or the simple random walk when none are given.
    pub fn walk_inputs(&self) -> Vec<WalkInput> {
        let walks = if self.walks.is_empty() { vec![WalkConfig::uniform()] } else { self.walks.clone() };
        walks
            .iter()
            .map(|w| WalkInput {
                name: w.name.clone(),
                measure: self.measure(w).expect("validated config"),
                entropy_n_max: w.entropy_n_max,
                support_cap: w.support_cap,
                horizon: w.horizon,
                trials: w.trials,
            })
            .collect()
    }

    pub fn shadow_params(&self, q: usize, seed: u64) -> Option<ShadowParams> {
        self.shadow.as_ref().map(|s| ShadowParams {
            eps: s.eps,
            q: s.q.unwrap_or(q),
            samples: s.samples,
            extra_depth: s.extra_depth,
            slack: s.slack,
            seed,
            gap_tol: self.gap_tol,
        })
    }
}
