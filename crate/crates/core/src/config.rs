//! Run description files.
//!
//! A config is a TOML document with the sections `[domain]`, `[kernel]`,
//! `[scheme]`, `[initial]`, `[output]` and, for convergence studies,
//! `[convergence]`:
//!
//! ```toml
//! [domain]
//! length = 1.0
//! dispersion = 1.0
//!
//! [kernel]
//! family = "exponential"   # exponential | polynomial | none
//! amplitude = 10000.0
//! decay = 1.0              # rate (exponential) or exponent (polynomial)
//!
//! [scheme]
//! equation = "zeroth-order" # zeroth-order | laplacian | none
//! modes = 16
//! dt = 0.05
//! steps = 4000
//! history = 4000           # optional, defaults to `steps`
//!
//! [initial]
//! profile = "soliton"      # soliton | mode | csv | zero
//! amplitude = 4.0
//! wavenumber = 7.0
//! center = 0.4
//!
//! [output]
//! stride = 100
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::scalar::Cplx;
use crate::solver::{
    EquationVariant, MemoryRule, MemorySumStrategy, SimulationConfig, DEFAULT_QUADRATURE_POINTS,
};
use crate::spectral::InitialHistorySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub domain: DomainSection,
    pub kernel: KernelSection,
    pub scheme: SchemeSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub length: f64,
    #[serde(default = "one")]
    pub dispersion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Exponential,
    Polynomial,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub family: KernelFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquationName {
    Laplacian,
    ZerothOrder,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    Trapezoid,
    Rectangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SumName {
    Auto,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub equation: EquationName,
    pub modes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_mode: Option<usize>,
    pub dt: f64,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_rule: Option<RuleName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_sum: Option<SumName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileName {
    Soliton,
    Mode,
    Csv,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub profile: ProfileName,
    /// Soliton peak amplitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavenumber: Option<f64>,
    /// Soliton width; defaults to `1/(2A√λ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    /// Basis index for `profile = "mode"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<f64>,
    /// CSV of `x, re, im` rows, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Points in the reconstructed profiles.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Upper bound on space-time frames written.
    #[serde(default = "default_frames")]
    pub frames: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            stride: default_stride(),
            samples: default_samples(),
            frames: default_frames(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub halvings: usize,
    /// End time of every run in the study.
    pub horizon: f64,
}

fn one() -> f64 {
    1.0
}

fn default_stride() -> usize {
    100
}

fn default_samples() -> usize {
    257
}

fn default_frames() -> usize {
    200
}

fn config_error(detail: impl Into<String>) -> Error {
    Error::Config(detail.into())
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_error(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.into(),
            detail: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec<f64>> {
        let k = &self.kernel;
        let need = |v: Option<f64>, what: &str| {
            v.ok_or_else(|| config_error(format!("[kernel] {what} is required for this family")))
        };
        match k.family {
            KernelFamily::None => Ok(KernelSpec::None),
            KernelFamily::Exponential => {
                KernelSpec::exponential(need(k.amplitude, "amplitude")?, need(k.decay, "decay")?)
            }
            KernelFamily::Polynomial => {
                KernelSpec::polynomial(need(k.amplitude, "amplitude")?, need(k.decay, "decay")?)
            }
        }
    }

    pub fn equation(&self) -> EquationVariant {
        match self.scheme.equation {
            EquationName::Laplacian => EquationVariant::LaplacianMemory,
            EquationName::ZerothOrder => EquationVariant::ZerothOrderMemory,
            EquationName::None => EquationVariant::NoMemory,
        }
    }

    /// Builds the initial history; relative CSV paths resolve against
    /// `base_dir`.
    pub fn initial_history(&self, base_dir: &Path) -> Result<InitialHistorySpec<f64>> {
        let init = &self.initial;
        Ok(match init.profile {
            ProfileName::Soliton => {
                let amplitude = init.amplitude.unwrap_or(4.0);
                let wavenumber = init.wavenumber.unwrap_or(7.0);
                let center = init.center.unwrap_or(0.4);
                if !(amplitude > 0.0 && wavenumber > 0.0) {
                    return Err(config_error(
                        "soliton amplitude and wavenumber must be positive",
                    ));
                }
                match init.width {
                    Some(width) if width > 0.0 => {
                        InitialHistorySpec::soliton(amplitude, wavenumber, width, center)
                    }
                    Some(width) => {
                        return Err(config_error(format!(
                            "soliton width must be positive, got {width}"
                        )))
                    }
                    None => {
                        InitialHistorySpec::soliton_default_width(amplitude, wavenumber, center)
                    }
                }
            }
            ProfileName::Mode => {
                let k = init.mode.unwrap_or(1);
                if k == 0 {
                    return Err(config_error("[initial] mode indices start at 1"));
                }
                let amplitude = Cplx::new(init.re.unwrap_or(1.0), init.im.unwrap_or(0.0));
                InitialHistorySpec::mode(k, amplitude, self.domain.length)
            }
            ProfileName::Zero => InitialHistorySpec::zero(),
            ProfileName::Csv => {
                let path = init
                    .path
                    .as_ref()
                    .ok_or_else(|| config_error("[initial] path is required for csv profiles"))?;
                let resolved = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                InitialHistorySpec::from_csv(&resolved)?
            }
        })
    }

    pub fn to_simulation(&self, base_dir: &Path) -> Result<SimulationConfig<f64>> {
        let s = &self.scheme;
        let mut config = SimulationConfig::new(
            self.domain.length,
            self.domain.dispersion,
            self.equation(),
            self.kernel_spec()?,
            s.modes,
            s.dt,
            s.steps,
            self.initial_history(base_dir)?,
        );
        if let Some(first) = s.first_mode {
            config.first_mode = first;
        }
        if let Some(history) = s.history {
            config.history_steps = history;
        }
        config.memory_rule = match s.memory_rule {
            Some(RuleName::Rectangle) => MemoryRule::Rectangle,
            Some(RuleName::Trapezoid) | None => MemoryRule::Trapezoid,
        };
        config.memory_sum = match s.memory_sum {
            Some(SumName::Direct) => MemorySumStrategy::Direct,
            Some(SumName::Auto) | None => MemorySumStrategy::Auto,
        };
        let highest = config.first_mode + config.modes;
        config.quadrature_points = s
            .quadrature_points
            .unwrap_or_else(|| DEFAULT_QUADRATURE_POINTS.max(8 * highest));
        config.energy_stride = self.output.stride;
        config.validate()?;
        Ok(config)
    }
}

/// Bundled configurations.
pub const PRESETS: &[(&str, &str)] = &[
    ("no-memory", include_str!("../presets/no-memory.toml")),
    (
        "zeroth-exponential",
        include_str!("../presets/zeroth-exponential.toml"),
    ),
    (
        "zeroth-polynomial",
        include_str!("../presets/zeroth-polynomial.toml"),
    ),
    (
        "laplacian-exponential",
        include_str!("../presets/laplacian-exponential.toml"),
    ),
    (
        "laplacian-polynomial",
        include_str!("../presets/laplacian-polynomial.toml"),
    ),
    ("paper-scale", include_str!("../presets/paper-scale.toml")),
    (
        "convergence-exponential",
        include_str!("../presets/convergence-exponential.toml"),
    ),
    (
        "convergence-no-memory",
        include_str!("../presets/convergence-no-memory.toml"),
    ),
];

/// Alternative preset names.
pub const PRESET_ALIASES: &[(&str, &str)] = &[("figure2-exponential", "zeroth-exponential")];

/// The four desk-scale memory presets.
pub const QUARTET: [&str; 4] = [
    "zeroth-exponential",
    "zeroth-polynomial",
    "laplacian-exponential",
    "laplacian-polynomial",
];

pub fn preset(name: &str) -> Result<FileConfig> {
    let canonical = PRESET_ALIASES
        .iter()
        .find(|(alias, _)| *alias == name)
        .map_or(name, |(_, target)| target);
    let text = PRESETS
        .iter()
        .find(|(preset, _)| *preset == canonical)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
            config_error(format!(
                "unknown preset `{name}`; available: {}",
                names.join(", ")
            ))
        })?;
    FileConfig::parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_builds() {
        for (name, _) in PRESETS {
            let cfg = preset(name).unwrap();
            if cfg.scheme.steps <= 4000 {
                cfg.to_simulation(Path::new(".")).unwrap();
            }
        }
        assert_eq!(
            preset("figure2-exponential").unwrap(),
            preset("zeroth-exponential").unwrap()
        );
        assert!(preset("nope").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = include_str!("../presets/no-memory.toml").to_string();
        text.push_str("\n[extra]\nx = 1\n");
        assert!(FileConfig::parse(&text).is_err());
    }

    #[test]
    fn missing_kernel_parameters() {
        let mut cfg = preset("zeroth-exponential").unwrap();
        cfg.kernel.decay = None;
        assert!(matches!(
            cfg.to_simulation(Path::new(".")),
            Err(Error::Config(_))
        ));
    }
}
