use std::path::{Path, PathBuf};

use morphofilter::ensemble::{SamplingParams, Spacing, ThermostatTemplate};
use morphofilter::optimizer::OcSettings;
use morphofilter::problem::{ProblemJson, ProblemSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Everything one run directory is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemJson,
    #[serde(default)]
    pub thermostat: ThermostatTemplate,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub sampling: SamplingParams,
    #[serde(default)]
    pub anneal: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub optimizer: OcSettings,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub render: RenderConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    Explicit(Vec<f64>),
    Range {
        t_hi: f64,
        t_lo: f64,
        count: usize,
        #[serde(default)]
        spacing: Spacing,
    },
    Auto { auto: AutoSchedule },
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self::Auto {
            auto: AutoSchedule::default(),
        }
    }
}

/// Top temperature found by probing for `⟨C⟩/C_min ≥ target_ratio`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoSchedule {
    pub target_ratio: f64,
    /// `t_hi` is this multiple of the first probed temperature that reached
    /// the target, so the full-length run keeps a margin over it.
    pub headroom: f64,
    /// `t_lo = low_fraction · t_hi`.
    pub low_fraction: f64,
    pub count: usize,
    pub spacing: Spacing,
    pub probe: SamplingParams,
}

impl Default for AutoSchedule {
    fn default() -> Self {
        Self {
            target_ratio: 3.0,
            headroom: 2.0,
            low_fraction: 0.05,
            count: 24,
            spacing: Spacing::Log,
            probe: SamplingParams {
                n_equil: 5_000,
                n_samples: 200,
                stride: 10,
                bins: morphofilter::ensemble::DEFAULT_BINS,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub temperature: f64,
    /// Falls back to the sweep sampling when absent.
    pub sampling: Option<SamplingParams>,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            sampling: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub max_segments: usize,
    pub bootstrap_reps: usize,
    pub threshold: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            max_segments: 6,
            bootstrap_reps: 64,
            threshold: morphofilter::analysis::CONDENSATION_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Pixels per element edge.
    pub scale: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { scale: 8 }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn spec(&self) -> CliResult<ProblemSpec> {
        Ok(self.problem.clone().into_spec()?)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.spec()?;
        self.sampling.validate()?;
        if let Some(s) = &self.reference.sampling {
            s.validate()?;
        }
        if self.reference.temperature.is_nan() || self.reference.temperature <= 0.0 {
            return Err(CliError::Config("reference.temperature must be positive".into()));
        }
        if self.analysis.max_segments == 0 {
            return Err(CliError::Config("analysis.max_segments must be at least 1".into()));
        }
        if self.render.scale == 0 {
            return Err(CliError::Config("render.scale must be at least 1".into()));
        }
        match &self.schedule {
            ScheduleSpec::Explicit(t) => morphofilter::ensemble::validate_schedule(t)?,
            ScheduleSpec::Range {
                t_hi,
                t_lo,
                count,
                spacing,
            } => {
                morphofilter::ensemble::schedule(*t_hi, *t_lo, *count, *spacing)?;
            }
            ScheduleSpec::Auto { auto } => {
                if auto.target_ratio.is_nan() || auto.target_ratio <= 1.0 {
                    return Err(CliError::Config("schedule.auto.target_ratio must exceed 1".into()));
                }
                if !(auto.headroom >= 1.0 && auto.headroom.is_finite()) {
                    return Err(CliError::Config("schedule.auto.headroom must be at least 1".into()));
                }
                if !(auto.low_fraction > 0.0 && auto.low_fraction < 1.0) {
                    return Err(CliError::Config("schedule.auto.low_fraction must lie in (0, 1)".into()));
                }
                if auto.count == 0 {
                    return Err(CliError::Config("schedule.auto.count must be at least 1".into()));
                }
                auto.probe.validate()?;
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON (output directory excluded).
    pub fn hash(&self) -> String {
        crate::store::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn reference_sampling(&self) -> SamplingParams {
        self.reference.sampling.unwrap_or(self.sampling)
    }
}
