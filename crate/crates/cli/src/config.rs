//! Run configuration: a sectioned `key = value` TOML file, validated in full
//! at load time.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sdwave_core::integrator::{StepControl, Thresholds};
use sdwave_core::model::{make_profile, Coefficients, ProfileKind, ProfilePair};
use sdwave_core::spectral::{DomainSpec, SpectralBasis};
use sdwave_core::sweep::AmplitudeGrid;
use sdwave_core::theory::DEFAULT_STARTS;
use sdwave_core::Error as CoreError;

use crate::error::{CliError, CliResult};
use crate::io::read_profile_file;

/// A length given as a number or as `"pi"`, `"2pi"`, `"0.5*pi"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Length {
    Number(f64),
    Text(String),
}

impl Length {
    pub fn value(&self) -> CliResult<f64> {
        match self {
            Length::Number(v) => Ok(*v),
            Length::Text(s) => parse_length(s)
                .ok_or_else(|| CliError::Config(format!("cannot parse length {s:?}"))),
        }
    }
}

fn parse_length(s: &str) -> Option<f64> {
    let t = s.trim().to_ascii_lowercase();
    match t.strip_suffix("pi") {
        Some(head) => {
            let head = head.trim().trim_end_matches('*').trim();
            let k = if head.is_empty() {
                1.0
            } else {
                head.parse::<f64>().ok()?
            };
            Some(k * PI)
        }
        None => t.parse().ok(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub dim: usize,
    pub length: Length,
    pub length_y: Option<Length>,
    pub n_grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSection {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    /// `first-mode`, `mode`, `gaussian` or `file`
    pub kind: String,
    pub kx: Option<usize>,
    pub ky: Option<usize>,
    pub center_x: Option<f64>,
    pub center_y: Option<f64>,
    pub width: Option<f64>,
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeSection {
    pub rho: Option<f64>,
    pub rho_min: Option<f64>,
    pub factor: Option<f64>,
    pub count: Option<usize>,
    #[serde(default = "default_true")]
    pub fit_upper_half: bool,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub dt0: f64,
    pub dt_min: f64,
    pub growth_ratio: f64,
    pub t_max: f64,
    pub sample_interval: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        let c = StepControl::default();
        TimeSection {
            dt0: c.dt0,
            dt_min: c.dt_min,
            growth_ratio: c.growth_ratio,
            t_max: c.t_max,
            sample_interval: c.sample_interval,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    pub base_factor: f64,
    pub count: usize,
    pub level_factor: f64,
    pub fit_window: usize,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        let t = Thresholds::default();
        ThresholdSection {
            base_factor: t.base_factor,
            count: t.count,
            level_factor: t.level_factor,
            fit_window: t.fit_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsSection {
    pub budget: usize,
    pub starts: usize,
    pub seed: u64,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        ConstantsSection {
            budget: 200,
            starts: DEFAULT_STARTS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    #[serde(default = "default_true")]
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            svg: true,
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_jobs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub coefficients: CoefficientSection,
    pub profile: ProfileSection,
    pub amplitude: AmplitudeSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub thresholds: ThresholdSection,
    #[serde(default)]
    pub constants: ConstantsSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amplitude {
    Single(f64),
    Grid(AmplitudeGrid),
}

/// A configuration with every model and integrator object constructed.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: RunConfig,
    pub basis: SpectralBasis,
    pub coeffs: Coefficients,
    pub profiles: ProfilePair,
    pub control: StepControl,
    pub thresholds: Thresholds,
    pub amplitude: Amplitude,
}

impl Setup {
    /// Validate `config`; relative profile paths resolve against `base_dir`.
    pub fn build(config: RunConfig, base_dir: &Path) -> CliResult<Self> {
        let d = &config.domain;
        let domain = match d.dim {
            1 => {
                if d.length_y.is_some() {
                    return Err(CliError::Config(
                        "length_y is only valid for dim = 2".into(),
                    ));
                }
                DomainSpec::interval(d.length.value()?, d.n_grid)
            }
            2 => {
                let ly = d.length_y.as_ref().unwrap_or(&d.length).value()?;
                DomainSpec::rectangle(d.length.value()?, ly, d.n_grid)
            }
            n => return Err(CoreError::InvalidDimension(n).into()),
        };
        let basis = SpectralBasis::new(domain)?;
        let c = &config.coefficients;
        let coeffs = Coefficients::for_basis(c.a, c.b, c.p, &basis)?;
        let profiles = build_profile(&config.profile, &basis, base_dir)?;
        let t = &config.time;
        let control = StepControl {
            dt0: t.dt0,
            dt_min: t.dt_min,
            growth_ratio: t.growth_ratio,
            t_max: t.t_max,
            sample_interval: t.sample_interval,
        };
        control.validate()?;
        let th = &config.thresholds;
        let thresholds = Thresholds {
            base_factor: th.base_factor,
            count: th.count,
            level_factor: th.level_factor,
            fit_window: th.fit_window,
        };
        thresholds.validate()?;
        let amplitude = build_amplitude(&config.amplitude)?;
        if config.amplitude.jobs == 0 {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        if config.constants.budget == 0 || config.constants.starts == 0 {
            return Err(CliError::Config(
                "constants budget and starts must be at least 1".into(),
            ));
        }
        Ok(Setup {
            config,
            basis,
            coeffs,
            profiles,
            control,
            thresholds,
            amplitude,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Self::build(RunConfig::load(path)?, &base)
    }

    pub fn single_rho(&self) -> CliResult<f64> {
        match self.amplitude {
            Amplitude::Single(rho) => Ok(rho),
            Amplitude::Grid(_) => Err(CliError::Config(
                "this command needs a single amplitude: set amplitude.rho".into(),
            )),
        }
    }

    pub fn grid(&self) -> AmplitudeGrid {
        match self.amplitude {
            Amplitude::Single(rho) => AmplitudeGrid {
                rho_min: rho,
                factor: 2.0,
                count: 1,
            },
            Amplitude::Grid(g) => g,
        }
    }
}

fn build_amplitude(a: &AmplitudeSection) -> CliResult<Amplitude> {
    let grid_keys = a.rho_min.is_some() || a.factor.is_some() || a.count.is_some();
    match (a.rho, grid_keys) {
        (Some(_), true) => Err(CliError::Config(
            "set either amplitude.rho or rho_min/factor/count, not both".into(),
        )),
        (Some(rho), false) => {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(CoreError::NonpositiveAmplitude(rho).into());
            }
            Ok(Amplitude::Single(rho))
        }
        (None, true) => {
            let (Some(rho_min), Some(count)) = (a.rho_min, a.count) else {
                return Err(CliError::Config(
                    "amplitude grid needs rho_min and count".into(),
                ));
            };
            let grid = AmplitudeGrid {
                rho_min,
                factor: a.factor.unwrap_or(2.0),
                count,
            };
            grid.validate()?;
            Ok(Amplitude::Grid(grid))
        }
        (None, false) => Err(CliError::Config(
            "amplitude section needs rho or rho_min/factor/count".into(),
        )),
    }
}

fn build_profile(
    p: &ProfileSection,
    basis: &SpectralBasis,
    base_dir: &Path,
) -> CliResult<ProfilePair> {
    let need = |v: Option<f64>, key: &str| {
        v.ok_or_else(|| CliError::Config(format!("profile.{key} is required")))
    };
    let kind = match p.kind.as_str() {
        "first-mode" => ProfileKind::FirstMode,
        "mode" => ProfileKind::Mode {
            kx: p
                .kx
                .ok_or_else(|| CliError::Config("profile.kx is required".into()))?,
            ky: p.ky.unwrap_or(1),
        },
        "gaussian" => {
            let dom = basis.domain();
            let cx = p.center_x.unwrap_or(0.5 * dom.lengths[0]);
            let cy = p.center_y.unwrap_or(if dom.dim == 2 {
                0.5 * dom.lengths[1]
            } else {
                0.0
            });
            ProfileKind::Gaussian {
                center: [cx, cy],
                width: need(p.width, "width")?,
            }
        }
        "file" => {
            let rel = p
                .path
                .as_ref()
                .ok_or_else(|| CliError::Config("profile.path is required".into()))?;
            return read_profile_file(&base_dir.join(rel), basis);
        }
        other => return Err(CliError::Config(format!("unknown profile kind {other:?}"))),
    };
    Ok(make_profile(&kind, basis)?)
}
