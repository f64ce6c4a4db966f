//! JSON run configuration: unknown keys are rejected and every constraint violation is reported.

use std::path::PathBuf;

use catbranch_core::coefficients::{CoefficientModel, Family, GrowthSampling, LipschitzSampling};
use catbranch_core::experiments::{ContinuityParams, GronwallParams};
use catbranch_core::modulus::{CheckTolerances, Domain, ModulusFamily, ModulusSpec};
use catbranch_core::sde::{SimConfig, TrapMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    Cyclic {
        gamma: Vec<f64>,
    },
    SinSeries {
        theta: Vec<f64>,
        #[serde(default = "default_terms")]
        terms: usize,
    },
    Constant {
        values: Vec<f64>,
    },
    Radial {
        scale: f64,
        exponent: f64,
    },
}

fn default_terms() -> usize {
    10_000
}

impl FamilyConfig {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyConfig::Cyclic { .. } => "cyclic",
            FamilyConfig::SinSeries { .. } => "sin_series",
            FamilyConfig::Constant { .. } => "constant",
            FamilyConfig::Radial { .. } => "radial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    pub family: FamilyConfig,
}

impl ModelConfig {
    pub fn alpha(&self) -> Vec<f64> {
        self.alpha.clone().unwrap_or_else(|| vec![0.0; self.d])
    }

    pub fn build(&self) -> catbranch_core::Result<CoefficientModel<f64>> {
        let family = match &self.family {
            FamilyConfig::Cyclic { gamma } => Family::Cyclic { gamma: gamma.clone() },
            FamilyConfig::SinSeries { theta, terms } => Family::SinSeries {
                theta: theta.clone(),
                terms: *terms,
            },
            FamilyConfig::Constant { values } => Family::Constant { values: values.clone() },
            FamilyConfig::Radial { scale, exponent } => Family::Radial {
                scale: *scale,
                exponent: *exponent,
            },
        };
        CoefficientModel::new(self.alpha(), family)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusConfig {
    #[serde(default = "default_modulus_family")]
    pub family: ModulusFamily<f64>,
    /// Defaults to 0.05 for `log_log` and 0.1 otherwise.
    #[serde(default)]
    pub c0: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_modulus_family() -> ModulusFamily<f64> {
    ModulusFamily::Log
}
fn default_delta() -> f64 {
    1e-2
}
fn default_epsilon() -> f64 {
    0.1
}

impl Default for ModulusConfig {
    fn default() -> Self {
        Self {
            family: default_modulus_family(),
            c0: None,
            delta: default_delta(),
            epsilon: default_epsilon(),
        }
    }
}

impl ModulusConfig {
    pub fn c0(&self) -> f64 {
        self.c0.unwrap_or(match self.family {
            ModulusFamily::LogLog => 0.05,
            _ => 0.1,
        })
    }

    pub fn build(&self) -> catbranch_core::Result<ModulusSpec<f64>> {
        ModulusSpec::new(self.family.clone(), Domain::Origin { c0: self.c0() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthConfig {
    #[serde(default = "default_modulus_family")]
    pub family: ModulusFamily<f64>,
    #[serde(default = "default_growth_start")]
    pub start: f64,
    /// Constant `C` of the growth bound.
    #[serde(default = "default_growth_c")]
    pub c: f64,
    #[serde(default)]
    pub shell: GrowthSampling,
}

fn default_growth_start() -> f64 {
    std::f64::consts::E
}
fn default_growth_c() -> f64 {
    10.0
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self {
            family: default_modulus_family(),
            start: default_growth_start(),
            c: default_growth_c(),
            shell: GrowthSampling::default(),
        }
    }
}

impl GrowthConfig {
    pub fn build(&self) -> catbranch_core::Result<ModulusSpec<f64>> {
        ModulusSpec::new(self.family.clone(), Domain::Infinity { start: self.start })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimBlock {
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(rename = "M")]
    pub explosion_threshold: f64,
    pub record_stride: usize,
    pub trap_mode: TrapMode,
}

impl Default for SimBlock {
    fn default() -> Self {
        let s = SimConfig::<f64>::default();
        Self {
            dt: s.dt,
            horizon: s.horizon,
            n_paths: s.n_paths,
            seed: s.seed,
            explosion_threshold: s.explosion_threshold,
            record_stride: s.record_stride,
            trap_mode: s.trap_mode,
        }
    }
}

impl SimBlock {
    pub fn build(&self) -> SimConfig<f64> {
        SimConfig {
            dt: self.dt,
            horizon: self.horizon,
            trap_mode: self.trap_mode,
            explosion_threshold: self.explosion_threshold,
            seed: self.seed,
            n_paths: self.n_paths,
            record_stride: self.record_stride,
        }
    }
}

/// Per-experiment parameters; each subcommand reads the keys it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentBlock {
    /// `Y_0 - X_0`; defaults to `(1e-3, 0, …, 0)`.
    pub gap: Option<Vec<f64>>,
    /// Martingale evaluation time; defaults to `T`.
    pub t: Option<f64>,
    pub gaps: Vec<f64>,
    pub n_grid: usize,
    pub lipschitz: LipschitzSampling,
    pub c_inflation: f64,
    pub resample_factor: usize,
    pub max_violations: usize,
    pub growth: GrowthConfig,
    pub tolerances: CheckTolerances,
    /// Coupled path used by `couple` and `cascade`. `cascade` searches `0..n_paths` when unset.
    pub path_index: Option<u64>,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        let g = GronwallParams::<f64>::default();
        Self {
            gap: None,
            t: None,
            gaps: ContinuityParams::<f64>::default().gaps,
            n_grid: g.n_grid,
            lipschitz: g.lipschitz,
            c_inflation: g.c_inflation,
            resample_factor: g.resample_factor,
            max_violations: g.max_violations,
            growth: GrowthConfig::default(),
            tolerances: CheckTolerances::default(),
            path_index: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub plot: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            plot: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Name used in output file names; defaults to the model family.
    #[serde(default)]
    pub fixture: Option<String>,
    pub model: ModelConfig,
    /// Initial state `a` (`X_0`); defaults to all ones.
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub modulus: ModulusConfig,
    #[serde(default)]
    pub sim: SimBlock,
    #[serde(default)]
    pub experiment: ExperimentBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

impl RunConfig {
    pub fn fixture(&self) -> String {
        self.fixture.clone().unwrap_or_else(|| self.model.family.name().to_string())
    }

    pub fn initial(&self) -> Vec<f64> {
        self.initial.clone().unwrap_or_else(|| vec![1.0; self.model.d])
    }

    pub fn gap(&self) -> Vec<f64> {
        self.experiment.gap.clone().unwrap_or_else(|| {
            let mut g = vec![0.0; self.model.d];
            if let Some(first) = g.first_mut() {
                *first = 1e-3;
            }
            g
        })
    }

    pub fn gronwall_params(&self) -> GronwallParams<f64> {
        GronwallParams {
            delta: self.modulus.delta,
            epsilon: self.modulus.epsilon,
            n_grid: self.experiment.n_grid,
            lipschitz: self.experiment.lipschitz,
            c_inflation: self.experiment.c_inflation,
            resample_factor: self.experiment.resample_factor,
            max_violations: self.experiment.max_violations,
        }
    }

    pub fn continuity_params(&self) -> ContinuityParams<f64> {
        ContinuityParams {
            epsilon: self.modulus.epsilon,
            gaps: self.experiment.gaps.clone(),
        }
    }

    /// Every constraint violation, in document order.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        let d = self.model.d;
        need(d >= 1, "model.d must be at least 1".into());
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if let Some(alpha) = &self.model.alpha {
            need(alpha.len() == d, format!("model.alpha has {} entries, expected d = {d}", alpha.len()));
            need(finite(alpha), "model.alpha entries must be finite".into());
        }
        match &self.model.family {
            FamilyConfig::Cyclic { gamma } => {
                need(gamma.len() == d, format!("gamma has {} entries, expected d = {d}", gamma.len()));
                for (i, g) in gamma.iter().enumerate() {
                    need(*g > 0.0 && g.is_finite(), format!("gamma[{i}] = {g} must be positive"));
                }
            }
            FamilyConfig::SinSeries { theta, terms } => {
                need(d == 2, format!("sin_series requires d = 2, got {d}"));
                need(theta.len() == d, format!("theta has {} entries, expected d = {d}", theta.len()));
                for (i, t) in theta.iter().enumerate() {
                    need(*t > 0.0 && t.is_finite(), format!("theta[{i}] = {t} must be positive"));
                }
                need(*terms >= 1, "sin_series terms must be at least 1".into());
            }
            FamilyConfig::Constant { values } => {
                need(values.len() == d, format!("values has {} entries, expected d = {d}", values.len()));
                for (i, v) in values.iter().enumerate() {
                    need(*v >= 0.0 && v.is_finite(), format!("values[{i}] = {v} must be nonnegative"));
                }
            }
            FamilyConfig::Radial { scale, exponent } => {
                need(*scale >= 0.0 && scale.is_finite(), format!("radial scale = {scale} must be nonnegative"));
                need(exponent.is_finite(), "radial exponent must be finite".into());
            }
        }
        let a = self.initial();
        need(a.len() == d, format!("initial has {} entries, expected d = {d}", a.len()));
        for (i, v) in a.iter().enumerate() {
            need(*v >= 0.0 && v.is_finite(), format!("initial[{i}] = {v} must be nonnegative"));
        }

        let m = &self.modulus;
        need(m.c0() > 0.0 && m.c0().is_finite(), format!("modulus.c0 = {} must be positive", m.c0()));
        need(m.delta > 0.0 && m.delta.is_finite(), format!("modulus.delta = {} must be positive", m.delta));
        need(
            m.epsilon > 0.0 && m.epsilon < 1.0,
            format!("modulus.epsilon = {} must lie in (0, 1)", m.epsilon),
        );
        if m.c0() > 0.0 {
            if let Err(e) = m.build() {
                need(false, format!("modulus: {e}"));
            }
        }

        let s = &self.sim;
        need(s.dt > 0.0 && s.dt.is_finite(), format!("sim.dt = {} must be positive", s.dt));
        need(s.horizon > 0.0 && s.horizon.is_finite(), format!("sim.T = {} must be positive", s.horizon));
        need(s.dt <= s.horizon, format!("sim.dt = {} must not exceed sim.T = {}", s.dt, s.horizon));
        need(s.n_paths >= 1, "sim.n_paths must be at least 1".into());
        need(s.record_stride >= 1, "sim.record_stride must be at least 1".into());
        let amax = a.iter().copied().fold(0.0, f64::max);
        need(
            s.explosion_threshold > amax,
            format!("sim.M = {} must exceed the largest initial coordinate {amax}", s.explosion_threshold),
        );

        let e = &self.experiment;
        let gap = self.gap();
        need(gap.len() == d, format!("experiment.gap has {} entries, expected d = {d}", gap.len()));
        for (i, (g, x)) in gap.iter().zip(&a).enumerate() {
            need(
                g.is_finite() && x + g >= 0.0,
                format!("experiment.gap[{i}] = {g} puts the second start outside the orthant"),
            );
        }
        if let Some(t) = e.t {
            need(t > 0.0 && t <= s.horizon, format!("experiment.t = {t} must lie in (0, sim.T = {}]", s.horizon));
        }
        need(!e.gaps.is_empty(), "experiment.gaps must not be empty".into());
        for (i, g) in e.gaps.iter().enumerate() {
            need(*g >= 0.0 && g.is_finite(), format!("experiment.gaps[{i}] = {g} must be nonnegative"));
        }
        need(e.n_grid >= 1, "experiment.n_grid must be at least 1".into());
        need(e.lipschitz.n_pairs >= 1, "experiment.lipschitz.n_pairs must be at least 1".into());
        need(e.lipschitz.box_size > 0.0, "experiment.lipschitz.box_size must be positive".into());
        need(e.lipschitz.radius_decades >= 0.0, "experiment.lipschitz.radius_decades must be nonnegative".into());
        need(e.c_inflation >= 1.0, format!("experiment.c_inflation = {} must be at least 1", e.c_inflation));
        need(e.resample_factor >= 1, "experiment.resample_factor must be at least 1".into());
        let g = &e.growth;
        need(g.c > 0.0, format!("experiment.growth.c = {} must be positive", g.c));
        need(
            g.shell.radius_min > 0.0 && g.shell.radius_min <= g.shell.radius_max,
            format!(
                "experiment.growth.shell needs 0 < radius_min ({}) <= radius_max ({})",
                g.shell.radius_min, g.shell.radius_max
            ),
        );
        need(
            g.shell.radius_min * g.shell.radius_min >= g.start,
            format!(
                "experiment.growth.shell.radius_min² = {} lies below the growth modulus start {}",
                g.shell.radius_min * g.shell.radius_min,
                g.start
            ),
        );
        if g.start > 0.0 {
            if let Err(err) = g.build() {
                need(false, format!("experiment.growth: {err}"));
            }
        } else {
            need(false, format!("experiment.growth.start = {} must be positive", g.start));
        }
        if let Some(p) = e.path_index {
            need((p as usize) < s.n_paths, format!("experiment.path_index = {p} must be below sim.n_paths"));
        }
        errs
    }
}

/// Parses and validates a JSON document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_json::from_str(text)?;
    let errs = cfg.validate();
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(errs))
    }
}
