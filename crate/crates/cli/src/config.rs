//! Declarative run configuration: one optional section per command.

use std::path::{Path, PathBuf};

use jamleg_core::scenarios::{CollisionSpec, DropSpec, GaitCase, PerturbMode, PerturbSpec, WalkSpec};
use jamleg_core::tendon::JAMMED_KPA;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub tendon: TendonJob,
    pub drop: DropJob,
    pub collide: CollideJob,
    pub perturb: PerturbJob,
    pub walk: WalkJob,
    pub analyze: AnalyzeJob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TendonState {
    Unjammed,
    Jammed,
}

impl TendonState {
    pub fn as_str(self) -> &'static str {
        match self {
            TendonState::Unjammed => "unjammed",
            TendonState::Jammed => "jammed",
        }
    }

    pub fn pressure_kpa(self) -> f64 {
        match self {
            TendonState::Unjammed => 0.0,
            TendonState::Jammed => JAMMED_KPA,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TendonJob {
    /// Bundle id such as `2.0mm_hex4`.
    pub spec: String,
    pub states: Vec<TendonState>,
    pub cycles: usize,
}

impl Default for TendonJob {
    fn default() -> Self {
        Self {
            spec: "2.0mm_hex4".into(),
            states: vec![TendonState::Unjammed, TendonState::Jammed],
            cycles: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DropJob {
    pub rig: DropSpec,
    pub pressures_kpa: Vec<f64>,
}

impl Default for DropJob {
    fn default() -> Self {
        Self {
            rig: DropSpec::default(),
            pressures_kpa: vec![0.0, JAMMED_KPA],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollideJob {
    pub rig: CollisionSpec,
    pub modes: Vec<PerturbMode>,
}

impl Default for CollideJob {
    fn default() -> Self {
        Self {
            rig: CollisionSpec::default(),
            modes: PerturbMode::BOTH.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbJob {
    pub rig: PerturbSpec,
    pub modes: Vec<PerturbMode>,
    pub repeats: usize,
    /// Gaussian noise on recorded peaks, N; seeded by `--seed`.
    pub noise_sd_n: f64,
    /// Skip simulation and analyse the published table instead.
    pub analysis_only: bool,
    /// File name inside the fixture directory.
    pub fixture: String,
}

impl Default for PerturbJob {
    fn default() -> Self {
        Self {
            rig: PerturbSpec::default(),
            modes: PerturbMode::BOTH.to_vec(),
            repeats: 5,
            noise_sd_n: 0.0,
            analysis_only: false,
            fixture: "table3.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkJob {
    pub rig: WalkSpec,
    pub cases: Vec<GaitCase>,
}

impl Default for WalkJob {
    fn default() -> Self {
        Self {
            rig: WalkSpec::default(),
            cases: GaitCase::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeJob {
    /// Walking records; relative paths resolve against the config file.
    pub inputs: Vec<PathBuf>,
    pub cycle_duration_s: f64,
}

impl Default for AnalyzeJob {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            cycle_duration_s: 10.0,
        }
    }
}

/// Reads `path`, or the defaults when no file is given.
pub fn load(path: Option<&Path>) -> CliResult<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let err = |message: String| CliError::Config {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    if text.trim().is_empty() {
        return Err(err("file is empty".into()));
    }
    let mut cfg: ConfigFile = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for p in &mut cfg.analyze.inputs {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}
