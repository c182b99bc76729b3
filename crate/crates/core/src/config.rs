//! Project configuration: one TOML file describing the device, detection chains,
//! measured inputs, simulation scenarios and analysis settings. Every physical
//! quantity carries a unit suffix (`"796 nm"`, `"3.5 mm"`, `"90 ns"`); bare
//! numbers are accepted only for dimensionless values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer};

use crate::cascade::{rescale_efficiency, DetectionChain, LossFactor, Measured};
use crate::coincidence::{AnalysisConfig, PairingMode};
use crate::dispersion::{qpm_period, DispersionLibrary, ModeSet, ParasiticSearch};
use crate::error::{Error, Result};
use crate::sim::{ChannelConfig, ChannelRole, ScenarioConfig};
use crate::spdc::{conjugate_wavelength, BrightnessModel, FilterCurve, SpdcStage};
use crate::units::{self, Brightness, Dimension, Hz, HzPerMw, MilliWatt, Nm, PmPerV, Ps, Um2};

/// Keyword selecting the data shipped with the library instead of a file.
pub const BUNDLED: &str = "bundled";

/// A dimensionless number written either bare (`0.138`) or as text (`"13.8 %"`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio(pub f64);

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Ratio(v)),
            Raw::Text(s) => units::parse(&s, Dimension::Dimensionless)
                .map(Ratio)
                .map_err(serde::de::Error::custom),
        }
    }
}

/// `value` with an optional 1σ `sigma` in the same unit.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawMeasured<T> {
    value: T,
    sigma: Option<T>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub(crate) enum MaybeMeasured<T> {
    Plain(T),
    WithSigma(RawMeasured<T>),
}

impl<T: Copy + Into<f64>> MaybeMeasured<T> {
    pub(crate) fn resolve(self) -> Measured {
        match self {
            MaybeMeasured::Plain(v) => Measured::exact(v.into()),
            MaybeMeasured::WithSigma(m) => Measured::new(m.value.into(), m.sigma.map_or(0.0, Into::into)),
        }
    }
}

macro_rules! into_f64 {
    ($($t:ty),*) => {$(impl From<$t> for f64 { fn from(v: $t) -> f64 { v.0 } })*};
}
into_f64!(Ratio, Hz, HzPerMw, MilliWatt, Nm, Ps, Brightness);

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProject {
    #[serde(default = "default_bundled")]
    dispersion: String,
    #[serde(default = "default_output")]
    output_dir: String,
    #[serde(default)]
    stage: Vec<RawStage>,
    parasitic: Option<RawParasitic>,
    broadband: Option<RawBroadband>,
    #[serde(default)]
    chain: Vec<RawChain>,
    measurements: Option<RawMeasurements>,
    #[serde(default)]
    scenario: Vec<RawScenario>,
    analysis: Option<RawAnalysis>,
}

fn default_bundled() -> String {
    BUNDLED.into()
}

fn default_output() -> String {
    "out".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStage {
    label: String,
    length: Nm,
    /// `"solve"` or a length such as `"2.1 um"`.
    period: String,
    #[serde(default = "one")]
    order: u32,
    pump_mode: String,
    signal_mode: String,
    idler_mode: String,
    design_pump: Nm,
    design_signal: Nm,
    /// Optional; checked against energy conservation when given.
    design_idler: Option<Nm>,
    brightness: RawBrightness,
    spectrum: Option<RawSpectrum>,
    acceptance: Option<RawAcceptance>,
    pair_band: Option<[Nm; 2]>,
}

fn one() -> u32 {
    1
}

#[derive(Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
enum RawBrightness {
    Calibrated { anchor: Nm, anchor_pump: Nm, value: Brightness },
    Theory { d_eff: PmPerV, area: Um2 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpectrum {
    pump: Option<Nm>,
    range: [Nm; 2],
    step: Nm,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAcceptance {
    pump_range: [Nm; 2],
    step: Nm,
    band: [Nm; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParasitic {
    stage: String,
    pump_modes: Vec<String>,
    signal_modes: Vec<String>,
    idler_modes: Vec<String>,
    signal_range: Option<[Nm; 2]>,
    step: Option<Nm>,
    tolerance: Option<Ratio>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBroadband {
    stage: String,
    #[serde(default = "default_bundled")]
    herald_filter: String,
    herald_pump: Nm,
    band: [Nm; 2],
    pump_range: [Nm; 2],
    step: Nm,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFactor {
    label: String,
    efficiency: Ratio,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChain {
    label: String,
    role: String,
    calibrated: Ratio,
    #[serde(default)]
    removed: Vec<RawFactor>,
    #[serde(default)]
    added: Vec<RawFactor>,
    /// Known loss contributions in the experiment, for reporting only.
    #[serde(default)]
    losses: Vec<RawFactor>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasurements {
    pump_power: MaybeMeasured<MilliWatt>,
    pump: Nm,
    coincidence_rate: MaybeMeasured<Hz>,
    herald_singles: MaybeMeasured<Hz>,
    granddaughter_singles: Hz,
    herald_singles_slope: HzPerMw,
    granddaughter_singles_slope: HzPerMw,
    /// `"filter"` to integrate the herald filter curve, or a length.
    herald_bandwidth: String,
    granddaughter_bandwidth: Nm,
    window: Ps,
    acquisition: Ps,
    #[serde(default = "unit_ratio")]
    interstage_coupling: Ratio,
    stated: Option<RawStated>,
}

fn unit_ratio() -> Ratio {
    Ratio(1.0)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStated {
    first_stage_brightness: Option<Brightness>,
    second_stage_probability: Option<Ratio>,
    broadband_factor: Option<Ratio>,
    herald_efficiency: Option<MaybeMeasured<Ratio>>,
    granddaughter_efficiency: Option<MaybeMeasured<Ratio>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    id: u8,
    role: String,
    efficiency: Ratio,
    #[serde(default)]
    dark_rate: Hz,
    #[serde(default)]
    background_rate: Hz,
    #[serde(default)]
    jitter: Ps,
    #[serde(default)]
    dead_time: Ps,
    #[serde(default)]
    optical_delay: Ps,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    triplet_generation_rate: Hz,
    #[serde(default)]
    herald_singles_rate: Hz,
    duration: Ps,
    #[serde(default)]
    seed: u64,
    tag_resolution: Option<Ps>,
    channel: Vec<RawChannel>,
    analysis: Option<RawAnalysis>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    start_channel: Option<u8>,
    stop_channel: Option<u8>,
    base_bin: Option<Ps>,
    rebin: Option<usize>,
    range: Option<[Ps; 2]>,
    peak_search: Option<[Ps; 2]>,
    floor_window: Option<[Ps; 2]>,
    window_bins: Option<usize>,
    /// Enables start–stop pairing with this histogrammer dead time.
    histogrammer_dead_time: Option<Ps>,
}

impl RawAnalysis {
    fn resolve(&self, base: &AnalysisConfig) -> Result<AnalysisConfig> {
        let ps = |p: Ps| -> Result<i64> {
            if p.0.fract().abs() > 1e-6 {
                return Err(Error::invalid("analysis", format!("{} ps is not a whole number of picoseconds", p.0)));
            }
            Ok(p.0.round() as i64)
        };
        let pair = |p: Option<[Ps; 2]>, d: (i64, i64)| -> Result<(i64, i64)> {
            match p {
                Some([a, b]) => Ok((ps(a)?, ps(b)?)),
                None => Ok(d),
            }
        };
        let base_bin = match self.base_bin {
            Some(b) if b.0 >= 1.0 => ps(b)? as u64,
            Some(b) => return Err(Error::invalid("analysis", format!("base bin {} ps is below 1 ps", b.0))),
            None => base.base_bin_ps,
        };
        let mode = match self.histogrammer_dead_time {
            Some(d) => PairingMode::StartStopDeadTime {
                dead_time_ps: ps(d)?.max(0) as u64,
            },
            None => base.mode,
        };
        Ok(AnalysisConfig {
            start_channel: self.start_channel.unwrap_or(base.start_channel),
            stop_channel: self.stop_channel.unwrap_or(base.stop_channel),
            base_bin_ps: base_bin,
            rebin: self.rebin.unwrap_or(base.rebin),
            range_ps: pair(self.range, base.range_ps)?,
            peak_search_ps: pair(self.peak_search, base.peak_search_ps)?,
            floor_window_ps: pair(self.floor_window, base.floor_window_ps)?,
            window_bins: self.window_bins.unwrap_or(base.window_bins),
            mode,
        })
    }
}

/// Wavelength grid for a brightness spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumGrid {
    pub pump_nm: f64,
    pub lo_nm: f64,
    pub hi_nm: f64,
    pub step_nm: f64,
}

/// Pump scan for an acceptance curve into a fixed detection band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptanceScan {
    pub pump_lo_nm: f64,
    pub pump_hi_nm: f64,
    pub step_nm: f64,
    pub band_nm: (f64, f64),
}

impl AcceptanceScan {
    pub fn pump_grid(&self) -> Vec<f64> {
        crate::numeric::grid(self.pump_lo_nm, self.pump_hi_nm, self.step_nm)
    }
}

#[derive(Debug, Clone)]
pub struct StageSetup {
    pub stage: SpdcStage,
    /// (pump, signal, idler) of the design point, nm.
    pub design_nm: (f64, f64, f64),
    pub period_solved: bool,
    pub spectrum: Option<SpectrumGrid>,
    pub acceptance: Option<AcceptanceScan>,
    /// Signal-side interval integrated (and doubled) for the pair efficiency.
    pub pair_band_nm: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct ParasiticSetup {
    pub stage: String,
    pub search: ParasiticSearch,
    pub modes: ModeSet,
}

/// Broadband-pump reduction: the herald filter seen through the first-stage pump
/// becomes the lineshape pumping the second stage.
#[derive(Debug, Clone)]
pub struct BroadbandSetup {
    pub stage: String,
    pub herald_filter: FilterCurve,
    pub herald_pump_nm: f64,
    pub scan: AcceptanceScan,
}

/// A calibrated detection probability moved to a different optical setup.
#[derive(Debug, Clone)]
pub struct ChainSetup {
    pub label: String,
    pub role: ChannelRole,
    pub calibrated: f64,
    pub removed: DetectionChain,
    pub added: DetectionChain,
    pub losses: DetectionChain,
}

impl ChainSetup {
    pub fn efficiency(&self) -> Result<f64> {
        rescale_efficiency(self.calibrated, &self.removed, &self.added)
    }
}

/// Values published alongside the measurement, used as direct inputs when present.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StatedValues {
    pub first_stage_brightness: Option<f64>,
    pub second_stage_probability: Option<f64>,
    pub broadband_factor: Option<f64>,
    pub herald_efficiency: Option<Measured>,
    pub granddaughter_efficiency: Option<Measured>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeraldBandwidth {
    FromFilter,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub pump_power_mw: Measured,
    pub pump_nm: f64,
    pub coincidence_rate: Measured,
    pub herald_singles: Measured,
    pub granddaughter_singles_hz: f64,
    pub herald_singles_slope: f64,
    pub granddaughter_singles_slope: f64,
    pub herald_bandwidth: HeraldBandwidth,
    pub granddaughter_bandwidth_nm: f64,
    pub window_ns: f64,
    pub acquisition_s: f64,
    /// Fraction of daughter photons that reach the second converter.
    pub interstage_coupling: f64,
    pub stated: StatedValues,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub config: ScenarioConfig,
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone)]
pub struct ProjectConfig {
    pub output_dir: PathBuf,
    pub library: DispersionLibrary,
    pub stages: Vec<StageSetup>,
    pub parasitic: Option<ParasiticSetup>,
    pub broadband: Option<BroadbandSetup>,
    pub chains: Vec<ChainSetup>,
    pub measurements: Option<Measurements>,
    pub scenarios: Vec<Scenario>,
    pub analysis: AnalysisConfig,
}

fn resolve_path(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn role(s: &str, what: &str) -> Result<ChannelRole> {
    match s.to_ascii_lowercase().as_str() {
        "herald" => Ok(ChannelRole::Herald),
        "granddaughter" => Ok(ChannelRole::Granddaughter),
        _ => Err(Error::invalid(what, format!("role {s:?} is neither herald nor granddaughter"))),
    }
}

fn chain(label: &str, factors: &[RawFactor]) -> Result<DetectionChain> {
    DetectionChain::new(
        label,
        factors.iter().map(|f| LossFactor::new(f.label.clone(), f.efficiency.0)).collect(),
    )
}

impl ProjectConfig {
    /// Parse a project file; relative paths inside it resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawProject = toml::from_str(text).map_err(|e| Error::Parse(format!("project file: {e}")))?;
        let library = if raw.dispersion == BUNDLED {
            DispersionLibrary::bundled()
        } else {
            DispersionLibrary::load(resolve_path(base_dir, &raw.dispersion))?
        };

        let mut stages = Vec::new();
        for s in &raw.stage {
            if stages.iter().any(|x: &StageSetup| x.stage.label == s.label) {
                return Err(Error::invalid(format!("stage {}", s.label), "duplicate label"));
            }
            stages.push(Self::build_stage(&library, s)?);
        }
        let find_stage = |label: &str, what: &str| {
            stages
                .iter()
                .find(|s| s.stage.label == label)
                .ok_or_else(|| Error::invalid(what.to_string(), format!("no stage labelled {label:?}")))
        };

        let parasitic = match &raw.parasitic {
            None => None,
            Some(p) => {
                let st = find_stage(&p.stage, "parasitic search")?;
                let pick = |labels: &[String]| -> Result<Vec<_>> {
                    labels.iter().map(|l| library.mode(l).cloned()).collect()
                };
                let mut search = ParasiticSearch::new(st.design_nm.0, st.stage.period_um);
                search.order = st.stage.order;
                if let Some([a, b]) = p.signal_range {
                    search.signal_range_nm = (a.0, b.0);
                }
                if let Some(step) = p.step {
                    search.step_nm = step.0;
                }
                if let Some(t) = p.tolerance {
                    search.tolerance = t.0;
                }
                Some(ParasiticSetup {
                    stage: p.stage.clone(),
                    search,
                    modes: ModeSet {
                        pump: pick(&p.pump_modes)?,
                        signal: pick(&p.signal_modes)?,
                        idler: pick(&p.idler_modes)?,
                    },
                })
            }
        };

        let broadband = match &raw.broadband {
            None => None,
            Some(b) => {
                find_stage(&b.stage, "broadband")?;
                let herald_filter = if b.herald_filter == BUNDLED {
                    crate::bundled::herald_filter()
                } else {
                    FilterCurve::load(resolve_path(base_dir, &b.herald_filter))?
                };
                Some(BroadbandSetup {
                    stage: b.stage.clone(),
                    herald_filter,
                    herald_pump_nm: b.herald_pump.0,
                    scan: AcceptanceScan {
                        pump_lo_nm: b.pump_range[0].0,
                        pump_hi_nm: b.pump_range[1].0,
                        step_nm: b.step.0,
                        band_nm: (b.band[0].0, b.band[1].0),
                    },
                })
            }
        };

        let mut chains = Vec::new();
        for c in &raw.chain {
            let what = format!("chain {}", c.label);
            let setup = ChainSetup {
                label: c.label.clone(),
                role: role(&c.role, &what)?,
                calibrated: c.calibrated.0,
                removed: chain(&format!("{} removed", c.label), &c.removed)?,
                added: chain(&format!("{} added", c.label), &c.added)?,
                losses: chain(&format!("{} losses", c.label), &c.losses)?,
            };
            setup.efficiency().map_err(|e| Error::invalid(what, e.to_string()))?;
            chains.push(setup);
        }

        let measurements = raw.measurements.as_ref().map(Self::build_measurements).transpose()?;

        let analysis = match &raw.analysis {
            Some(a) => a.resolve(&AnalysisConfig::default())?,
            None => AnalysisConfig::default(),
        };

        let mut scenarios = Vec::new();
        for s in &raw.scenario {
            if scenarios.iter().any(|x: &Scenario| x.name == s.name) {
                return Err(Error::invalid(format!("scenario {}", s.name), "duplicate name"));
            }
            scenarios.push(Self::build_scenario(s, &analysis)?);
        }

        Ok(ProjectConfig {
            output_dir: resolve_path(base_dir, &raw.output_dir),
            library,
            stages,
            parasitic,
            broadband,
            chains,
            measurements,
            scenarios,
            analysis,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    /// The reference device and experiment.
    pub fn bundled() -> Self {
        Self::from_toml_str(crate::bundled::PROJECT_TOML, Path::new(".")).expect("bundled project file is valid")
    }

    pub fn stage(&self, label: &str) -> Result<&StageSetup> {
        self.stages
            .iter()
            .find(|s| s.stage.label == label)
            .ok_or_else(|| Error::invalid("stage", format!("no stage labelled {label:?}")))
    }

    pub fn chain(&self, role: ChannelRole) -> Result<&ChainSetup> {
        self.chains
            .iter()
            .find(|c| c.role == role)
            .ok_or_else(|| Error::invalid("detection chain", format!("no {role:?} chain configured")))
    }

    pub fn scenario(&self, name: &str) -> Result<&Scenario> {
        self.scenarios
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::invalid("scenario", format!("no scenario named {name:?}")))
    }

    fn build_stage(library: &DispersionLibrary, s: &RawStage) -> Result<StageSetup> {
        let what = format!("stage {}", s.label);
        let wrap = |e: Error| Error::invalid(what.clone(), e.to_string());
        let (pump, signal) = (s.design_pump.0, s.design_signal.0);
        let idler = match s.design_idler {
            Some(i) => i.0,
            None => conjugate_wavelength(pump, signal).map_err(wrap)?,
        };
        let brightness = match s.brightness {
            RawBrightness::Calibrated { anchor, anchor_pump, value } => BrightnessModel::Calibrated {
                anchor_nm: anchor.0,
                anchor_pump_nm: anchor_pump.0,
                value: value.0,
            },
            RawBrightness::Theory { d_eff, area } => BrightnessModel::Theory {
                d_eff_pm_per_v: d_eff.0,
                area_um2: area.0,
            },
        };
        let mut stage = SpdcStage {
            label: s.label.clone(),
            length_mm: s.length.0 * 1e-6,
            period_um: 1.0,
            order: s.order,
            pump: library.mode(&s.pump_mode).map_err(wrap)?.clone(),
            signal: library.mode(&s.signal_mode).map_err(wrap)?.clone(),
            idler: library.mode(&s.idler_mode).map_err(wrap)?.clone(),
            brightness,
        };
        // Solving checks energy conservation of the design triple even when the period is fixed.
        let solved = qpm_period((&stage.pump, pump), (&stage.signal, signal), (&stage.idler, idler), stage.order).map_err(wrap)?;
        let period_solved = s.period.trim().eq_ignore_ascii_case("solve");
        stage.period_um = if period_solved {
            solved
        } else {
            units::parse(&s.period, Dimension::Length).map_err(wrap)? * 1e-3
        };
        stage.validate()?;
        let spectrum = s.spectrum.as_ref().map(|g| SpectrumGrid {
            pump_nm: g.pump.map_or(pump, |p| p.0),
            lo_nm: g.range[0].0,
            hi_nm: g.range[1].0,
            step_nm: g.step.0,
        });
        let acceptance = s.acceptance.as_ref().map(|a| AcceptanceScan {
            pump_lo_nm: a.pump_range[0].0,
            pump_hi_nm: a.pump_range[1].0,
            step_nm: a.step.0,
            band_nm: (a.band[0].0, a.band[1].0),
        });
        for (name, step) in [
            ("spectrum step", spectrum.map(|g| g.step_nm)),
            ("acceptance step", acceptance.map(|a| a.step_nm)),
        ] {
            if let Some(v) = step {
                if !(v > 0.0) {
                    return Err(Error::invalid(what, format!("{name} must be positive")));
                }
            }
        }
        Ok(StageSetup {
            stage,
            design_nm: (pump, signal, idler),
            period_solved,
            spectrum,
            acceptance,
            pair_band_nm: s.pair_band.map(|[a, b]| (a.0, b.0)),
        })
    }

    fn build_measurements(m: &RawMeasurements) -> Result<Measurements> {
        let herald_bandwidth = if m.herald_bandwidth.trim().eq_ignore_ascii_case("filter") {
            HeraldBandwidth::FromFilter
        } else {
            HeraldBandwidth::Fixed(units::parse(&m.herald_bandwidth, Dimension::Length)?)
        };
        let stated = m.stated.as_ref().map_or(StatedValues::default(), |s| StatedValues {
            first_stage_brightness: s.first_stage_brightness.map(|b| b.0),
            second_stage_probability: s.second_stage_probability.map(|r| r.0),
            broadband_factor: s.broadband_factor.map(|r| r.0),
            herald_efficiency: s.herald_efficiency.map(MaybeMeasured::resolve),
            granddaughter_efficiency: s.granddaughter_efficiency.map(MaybeMeasured::resolve),
        });
        Ok(Measurements {
            pump_power_mw: m.pump_power.resolve(),
            pump_nm: m.pump.0,
            coincidence_rate: m.coincidence_rate.resolve(),
            herald_singles: m.herald_singles.resolve(),
            granddaughter_singles_hz: m.granddaughter_singles.0,
            herald_singles_slope: m.herald_singles_slope.0,
            granddaughter_singles_slope: m.granddaughter_singles_slope.0,
            herald_bandwidth,
            granddaughter_bandwidth_nm: m.granddaughter_bandwidth.0,
            window_ns: m.window.0 * 1e-3,
            acquisition_s: m.acquisition.0 * 1e-12,
            interstage_coupling: m.interstage_coupling.0,
            stated,
        })
    }

    fn build_scenario(s: &RawScenario, analysis: &AnalysisConfig) -> Result<Scenario> {
        let what = format!("scenario {}", s.name);
        let channels = s
            .channel
            .iter()
            .map(|c| {
                Ok(ChannelConfig {
                    id: c.id,
                    role: role(&c.role, &what)?,
                    efficiency: c.efficiency.0,
                    dark_rate_hz: c.dark_rate.0,
                    background_rate_hz: c.background_rate.0,
                    jitter_sigma_ps: c.jitter.0,
                    dead_time_ns: c.dead_time.0 * 1e-3,
                    optical_delay_ps: c.optical_delay.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let resolution = s.tag_resolution.map_or(4.0, |p| p.0);
        if !(resolution >= 1.0) || resolution.fract() != 0.0 {
            return Err(Error::invalid(what, format!("tag resolution {resolution} ps must be a whole number ≥ 1")));
        }
        let config = ScenarioConfig {
            triplet_generation_rate_hz: s.triplet_generation_rate.0,
            herald_singles_rate_hz: s.herald_singles_rate.0,
            channels,
            duration_s: s.duration.0 * 1e-12,
            seed: s.seed,
            tag_resolution_ps: resolution as u64,
            periodic: Vec::new(),
        };
        config.validate().map_err(|e| Error::invalid(what.clone(), e.to_string()))?;
        let analysis = match &s.analysis {
            Some(a) => a.resolve(analysis)?,
            None => analysis.clone(),
        };
        Ok(Scenario {
            name: s.name.clone(),
            config,
            analysis,
        })
    }
}
