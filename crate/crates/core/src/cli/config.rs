//! Experiment configuration: presets, JSON files and flag overrides.
//!
//! Resolution order is preset, then file, then flags; later layers win.
//! Files are parsed straight into [`PartialConfig`], so syntax and type
//! errors carry the line and column reported by `serde_json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dither::DitherSpec;
use crate::dynamics::{AlgoParams, FirstOrderParams, System};
use crate::ensemble::{EnsembleConfig, InitSpec};
use crate::error::{invalid, Result};
use crate::objectives::{make_paper_objective, multidim_center, multidim_hessian, Objective, ObjectiveId, ObjectiveParams};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Adaptive1d,
    Nonadaptive1d,
    Firstorder,
    Multidim,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub preset: Option<String>,
    pub objective: ObjectiveId,
    pub center: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hessian: Option<Vec<Vec<f64>>>,
    pub system: SystemKind,
    pub rho: f64,
    pub beta: f64,
    pub eps: f64,
    pub chi: f64,
    pub psi: f64,
    /// First-order system only: shrink the exploration like `1 / sqrt(k)`.
    pub decay: bool,
    pub x0: InitSpec,
    pub y0: InitSpec,
    pub n_traj: usize,
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
}

/// Any subset of [`ExperimentConfig`]. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub version: Option<u32>,
    pub preset: Option<String>,
    pub objective: Option<ObjectiveId>,
    pub center: Option<Vec<f64>>,
    pub hessian: Option<Vec<Vec<f64>>>,
    pub system: Option<SystemKind>,
    pub rho: Option<f64>,
    pub beta: Option<f64>,
    pub eps: Option<f64>,
    pub chi: Option<f64>,
    pub psi: Option<f64>,
    pub decay: Option<bool>,
    pub x0: Option<InitSpec>,
    pub y0: Option<InitSpec>,
    pub n_traj: Option<usize>,
    pub n_steps: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    /// Run summary written into sidecars; ignored on input.
    pub run: Option<serde_json::Value>,
}

/// Errors from reading a configuration file.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl PartialConfig {
    pub fn from_json(text: &str, origin: &str) -> std::result::Result<Self, ConfigError> {
        let cfg: PartialConfig =
            serde_json::from_str(text).map_err(|e| ConfigError(format!("{origin}: {e}")))?;
        match cfg.version {
            Some(CONFIG_VERSION) => Ok(cfg),
            Some(v) => Err(ConfigError(format!(
                "{origin}: unsupported config version {v} (expected {CONFIG_VERSION})"
            ))),
            None => Err(ConfigError(format!("{origin}: missing `version` field"))),
        }
    }

    pub fn from_file(path: &Path) -> std::result::Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Overlays `other` on `self`; fields set in `other` win.
    pub fn overlay(mut self, other: PartialConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            version, preset, objective, center, hessian, system, rho, beta, eps, chi, psi, decay, x0, y0, n_traj,
            n_steps, seed, threads, output, run
        );
        self
    }

    pub fn resolve(self) -> Result<ExperimentConfig> {
        let base = match &self.preset {
            Some(name) => preset(name)?,
            None => PartialConfig::default(),
        };
        let merged = base.overlay(self);
        macro_rules! need {
            ($f:ident) => {
                merged
                    .$f
                    .clone()
                    .ok_or_else(|| invalid(stringify!($f), "not set by preset, file or flag"))?
            };
        }
        let cfg = ExperimentConfig {
            version: CONFIG_VERSION,
            preset: merged.preset.clone(),
            objective: need!(objective),
            center: need!(center),
            hessian: merged.hessian.clone(),
            system: merged.system.unwrap_or(SystemKind::Adaptive1d),
            rho: need!(rho),
            beta: need!(beta),
            eps: merged.eps.unwrap_or(1e-7),
            chi: need!(chi),
            psi: need!(psi),
            decay: merged.decay.unwrap_or(false),
            x0: need!(x0),
            y0: need!(y0),
            n_traj: need!(n_traj),
            n_steps: need!(n_steps),
            seed: merged.seed.unwrap_or(DEFAULT_SEED),
            threads: merged.threads,
            output: merged.output.clone(),
        };
        cfg.system()?;
        cfg.objective()?;
        Ok(cfg)
    }
}

pub const DEFAULT_SEED: u64 = 20_240_917;

impl ExperimentConfig {
    pub fn objective(&self) -> Result<Objective> {
        make_paper_objective(
            self.objective,
            &ObjectiveParams {
                center: self.center.clone(),
                hessian: self.hessian.clone(),
            },
        )
    }

    pub fn algo_params(&self) -> Result<AlgoParams> {
        AlgoParams::new(self.rho, self.beta, self.eps, DitherSpec::new(self.chi, self.psi)?)
    }

    pub fn system(&self) -> Result<System> {
        Ok(match self.system {
            SystemKind::Adaptive1d => System::Adaptive1d(self.algo_params()?),
            SystemKind::Nonadaptive1d => System::Nonadaptive1d(self.algo_params()?),
            SystemKind::Multidim => System::Multidim(self.algo_params()?),
            SystemKind::Firstorder => System::FirstOrder(FirstOrderParams {
                dither: DitherSpec::new(self.chi, self.psi)?,
                decay: self.decay,
            }),
        })
    }

    pub fn ensemble(&self) -> Result<EnsembleConfig> {
        Ok(EnsembleConfig {
            n_traj: self.n_traj,
            n_steps: self.n_steps,
            seed: self.seed,
            x0: self.x0.clone(),
            y0: self.y0.clone(),
            system: self.system()?,
            threads: self.threads,
        })
    }

    pub fn to_partial(&self) -> PartialConfig {
        let v = serde_json::to_value(self).expect("config serializes");
        serde_json::from_value(v).expect("resolved config is a valid partial config")
    }
}

fn fixed(v: f64) -> Option<InitSpec> {
    Some(InitSpec::Fixed { value: vec![v] })
}

fn shared_y0() -> Option<InitSpec> {
    Some(InitSpec::Uniform { low: -5.0, high: 10.0 })
}

fn quad_base() -> PartialConfig {
    PartialConfig {
        objective: Some(ObjectiveId::Quad1d),
        center: Some(vec![25.0]),
        system: Some(SystemKind::Adaptive1d),
        rho: Some(0.12),
        chi: Some(121.0 / 4.0),
        psi: Some(0.01),
        beta: Some(0.75),
        eps: Some(1e-7),
        decay: Some(false),
        x0: fixed(-40.0),
        y0: shared_y0(),
        n_traj: Some(DESK_TRAJ),
        n_steps: Some(60),
        seed: Some(DEFAULT_SEED),
        ..Default::default()
    }
}

/// Trajectories used by the one-dimensional presets.
pub const DESK_TRAJ: usize = 20_000;
/// Trajectories used by the multidimensional preset.
pub const DESK_TRAJ_MULTIDIM: usize = 10_000;

/// Names accepted by [`preset`]. Figures follow the order in which the
/// experiments are presented; aliases name the experiment.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig1", "quadratic, x0 = -40, x* = 25"),
    ("fig2", "same run as fig1; use with `analyze`"),
    ("fig3", "same run as fig1; sample paths of x"),
    ("fig4", "same run as fig1; sample paths of y"),
    ("fig5", "quadratic at global scale, x0 = -4e5, x* = 2.5e5"),
    ("fig6a", "x^2 cos(0.2x) near 0, x0 = -2"),
    ("fig6b", "x^2 cos(0.2x) near 48.15, x0 = 40"),
    ("fig7", "non-adaptive step size"),
    ("fig8", "first-order delayed-dither system"),
    ("fig9", "logistic objective, x0 = -240, x* = 350"),
    ("fig10", "three-dimensional quadratic"),
];

const ALIASES: &[(&str, &str)] = &[
    ("quadratic", "fig1"),
    ("global", "fig5"),
    ("fig6", "fig6a"),
    ("x2cos-local", "fig6a"),
    ("x2cos-far", "fig6b"),
    ("nonadaptive", "fig7"),
    ("firstorder", "fig8"),
    ("logistic", "fig9"),
    ("multidim", "fig10"),
];

pub fn preset(name: &str) -> Result<PartialConfig> {
    let key = ALIASES.iter().find(|(a, _)| *a == name).map(|(_, f)| *f).unwrap_or(name);
    let mut p = quad_base();
    match key {
        "fig1" | "fig2" | "fig3" | "fig4" => {}
        "fig5" => {
            p.x0 = fixed(-4e5);
            p.center = Some(vec![2.5e5]);
        }
        "fig6a" => {
            p.objective = Some(ObjectiveId::X2cos);
            p.center = Some(vec![0.0]);
            p.x0 = fixed(-2.0);
        }
        "fig6b" => {
            p.objective = Some(ObjectiveId::X2cos);
            p.center = Some(vec![48.15]);
            p.x0 = fixed(40.0);
            p.rho = Some(0.05);
            p.chi = Some(0.09);
            p.n_steps = Some(200);
        }
        "fig7" => {
            p.system = Some(SystemKind::Nonadaptive1d);
            p.rho = Some(0.05);
            p.chi = Some(0.81);
            p.beta = Some(0.4);
            // From x0 = -40 almost every trajectory of this system diverges.
            p.x0 = fixed(20.0);
            p.n_steps = Some(1000);
        }
        "fig8" => {
            p.system = Some(SystemKind::Firstorder);
            p.chi = Some(1e-6);
            p.psi = Some(81.0);
            p.n_steps = Some(1000);
        }
        "fig9" => {
            p.objective = Some(ObjectiveId::Logistic);
            p.center = Some(vec![350.0]);
            p.x0 = fixed(-240.0);
            p.rho = Some(0.55);
            p.chi = Some(100.0);
            p.psi = Some(0.36);
            p.beta = Some(0.5);
            p.n_steps = Some(200);
        }
        "fig10" => {
            p.objective = Some(ObjectiveId::Quadnd);
            p.center = Some(multidim_center());
            p.hessian = Some(multidim_hessian());
            p.system = Some(SystemKind::Multidim);
            p.x0 = Some(InitSpec::Fixed { value: vec![0.0; 3] });
            p.rho = Some(0.25);
            p.chi = Some(0.2025);
            p.psi = Some(0.01);
            p.beta = Some(0.93);
            p.n_traj = Some(DESK_TRAJ_MULTIDIM);
            p.n_steps = Some(5000);
        }
        other => return Err(invalid("preset", format!("unknown preset `{other}`"))),
    }
    p.preset = Some(name.to_string());
    Ok(p)
}

/// Trajectory count used in the original experiments for a preset.
pub fn paper_scale_traj(cfg: &ExperimentConfig) -> usize {
    if cfg.system == SystemKind::Multidim {
        100_000
    } else {
        200_000
    }
}
