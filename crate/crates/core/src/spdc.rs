//! Phase matching, spectral brightness, bandwidths, pump acceptance and pair
//! efficiencies of a single poled down-converter.

use std::fmt;
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::constants::{C_NM_THZ, EPSILON_0, HC_J_M};
use crate::dispersion::{qpm_period, ModeDispersion};
use crate::error::{Error, Result};
use crate::numeric::{grid, interp_linear, trapezoid, trapezoid_between};

/// Phase-matching intensity below which a calibration anchor counts as a null.
pub const ANCHOR_NULL_THRESHOLD: f64 = 1e-9;

/// Default integration step across a detection band.
pub const BAND_STEP_NM: f64 = 0.5;

/// Idler wavelength from energy conservation, 1/λ_i = 1/λ_p − 1/λ_s.
pub fn conjugate_wavelength(pump_nm: f64, signal_nm: f64) -> Result<f64> {
    if !(pump_nm > 0.0) || !(signal_nm > pump_nm) || !signal_nm.is_finite() {
        return Err(Error::invalid(
            "wavelength pair",
            format!("signal {signal_nm} nm must be longer than pump {pump_nm} nm"),
        ));
    }
    Ok(1.0 / (1.0 / pump_nm - 1.0 / signal_nm))
}

/// sin(x)/x, continuous at 0.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Pump photons per second carried by 1 mW at `pump_nm`.
pub fn pump_photon_rate_per_mw(pump_nm: f64) -> f64 {
    1e-3 / (HC_J_M / (pump_nm * 1e-9))
}

/// Pairs per pump photon for a pair efficiency in Hz/mW.
pub fn photon_probability(efficiency_hz_per_mw: f64, pump_nm: f64) -> f64 {
    efficiency_hz_per_mw / pump_photon_rate_per_mw(pump_nm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpectralUnit {
    /// Dimensionless, arbitrary normalization.
    Relative,
    /// Hz/(nm·mW)
    Brightness,
    /// Hz/(THz·mW)
    BrightnessPerThz,
    /// Hz/mW, e.g. band-integrated flux vs pump wavelength
    Efficiency,
    Transmission,
}

impl SpectralUnit {
    pub fn label(self) -> &'static str {
        match self {
            SpectralUnit::Relative => "relative",
            SpectralUnit::Brightness => "Hz/(nm·mW)",
            SpectralUnit::BrightnessPerThz => "Hz/(THz·mW)",
            SpectralUnit::Efficiency => "Hz/mW",
            SpectralUnit::Transmission => "transmission",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            SpectralUnit::Relative,
            SpectralUnit::Brightness,
            SpectralUnit::BrightnessPerThz,
            SpectralUnit::Efficiency,
            SpectralUnit::Transmission,
        ]
        .into_iter()
        .find(|u| u.label() == s.trim())
        .ok_or_else(|| Error::Parse(format!("unknown spectral unit {s:?}")))
    }
}

impl fmt::Display for SpectralUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Sampled spectral density on a strictly increasing wavelength grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid_nm: Vec<f64>,
    pub values: Vec<f64>,
    pub unit: SpectralUnit,
    pub pump_nm: Option<f64>,
    pub stage: Option<String>,
}

fn check_grid(what: &str, grid: &[f64], values: &[f64]) -> Result<()> {
    if grid.len() != values.len() {
        return Err(Error::invalid(what, "grid and values differ in length"));
    }
    if grid.is_empty() {
        return Err(Error::invalid(what, "empty grid"));
    }
    if let Some(i) = grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(what, format!("grid not strictly increasing at index {}", i + 1)));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::invalid(what, format!("value {v} is negative or not finite")));
    }
    Ok(())
}

impl Spectrum {
    pub fn new(grid_nm: Vec<f64>, values: Vec<f64>, unit: SpectralUnit) -> Result<Self> {
        check_grid("spectrum", &grid_nm, &values)?;
        Ok(Spectrum {
            grid_nm,
            values,
            unit,
            pump_nm: None,
            stage: None,
        })
    }

    pub fn with_pump(mut self, pump_nm: f64) -> Self {
        self.pump_nm = Some(pump_nm);
        self
    }

    pub fn len(&self) -> usize {
        self.grid_nm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid_nm.is_empty()
    }

    /// (wavelength, value) of the largest sample.
    pub fn peak(&self) -> (f64, f64) {
        let (i, v) = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("spectrum is never empty");
        (self.grid_nm[i], *v)
    }

    pub fn value_at(&self, lambda_nm: f64) -> Option<f64> {
        interp_linear(&self.grid_nm, &self.values, lambda_nm)
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid_nm, &self.values)
    }

    pub fn scaled(&self, k: f64) -> Spectrum {
        let mut s = self.clone();
        s.values.iter_mut().for_each(|v| *v *= k);
        s
    }

    /// Density per unit optical frequency (per THz) on the same wavelength grid: S_ν = S_λ·λ²/c.
    pub fn to_per_frequency(&self) -> Spectrum {
        let mut s = self.clone();
        for (v, l) in s.values.iter_mut().zip(&self.grid_nm) {
            *v *= l * l / C_NM_THZ;
        }
        s.unit = match self.unit {
            SpectralUnit::Brightness => SpectralUnit::BrightnessPerThz,
            _ => SpectralUnit::Relative,
        };
        s
    }

    /// Extend a signal-side spectrum to the idler side by energy conservation.
    /// The density transforms as S_i(λ_i) = S_s(λ_s)·(λ_s/λ_i)².
    pub fn with_reflected_idler(&self, pump_nm: f64) -> Result<Spectrum> {
        let degenerate = 2.0 * pump_nm;
        if *self.grid_nm.last().unwrap() > degenerate * (1.0 + 1e-12) {
            return Err(Error::invalid("reflection", "signal grid extends past the degenerate wavelength"));
        }
        let mut pts: Vec<(f64, f64)> = self.grid_nm.iter().copied().zip(self.values.iter().copied()).collect();
        for (&ls, &v) in self.grid_nm.iter().zip(&self.values).rev() {
            let li = conjugate_wavelength(pump_nm, ls)?;
            if li > degenerate * (1.0 + 1e-9) {
                pts.push((li, v * (ls / li).powi(2)));
            }
        }
        let (g, v): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let mut s = Spectrum::new(g, v, self.unit)?;
        s.pump_nm = Some(pump_nm);
        s.stage = self.stage.clone();
        Ok(s)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# unit={}", self.unit)?;
        if let Some(p) = self.pump_nm {
            writeln!(w, "# pump_nm={p}")?;
        }
        if let Some(s) = &self.stage {
            writeln!(w, "# stage={s}")?;
        }
        writeln!(w, "wavelength_nm,value")?;
        for (l, v) in self.grid_nm.iter().zip(&self.values) {
            writeln!(w, "{l:.4},{v:.9e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Spectrum> {
        let (meta, grid, values) = read_two_columns(r)?;
        let unit = meta
            .iter()
            .find(|(k, _)| k == "unit")
            .map(|(_, v)| SpectralUnit::parse(v))
            .transpose()?
            .ok_or_else(|| Error::Parse("spectrum CSV lacks a `# unit=` header".into()))?;
        let mut s = Spectrum::new(grid, values, unit)?;
        for (k, v) in meta {
            match k.as_str() {
                "pump_nm" => s.pump_nm = Some(v.parse().map_err(|_| Error::Parse(format!("bad pump_nm {v:?}")))?),
                "stage" => s.stage = Some(v),
                _ => {}
            }
        }
        Ok(s)
    }
}

type Columns = (Vec<(String, String)>, Vec<f64>, Vec<f64>);

fn read_two_columns<R: BufRead>(r: R) -> Result<Columns> {
    let mut meta = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        let mut cols = line.split(',');
        let (a, b) = (cols.next(), cols.next());
        let parsed = match (a.map(|s| s.trim().parse::<f64>()), b.map(|s| s.trim().parse::<f64>())) {
            (Some(Ok(x)), Some(Ok(y))) => (x, y),
            _ if xs.is_empty() => continue, // column header
            _ => return Err(Error::Parse(format!("line {}: expected two numbers, got {line:?}", n + 1))),
        };
        xs.push(parsed.0);
        ys.push(parsed.1);
    }
    Ok((meta, xs, ys))
}

/// Half-maximum edges and widths of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bandwidth {
    pub lo_nm: f64,
    pub hi_nm: f64,
    pub width_nm: f64,
    pub width_thz: f64,
}

impl Bandwidth {
    fn from_edges(lo_nm: f64, hi_nm: f64) -> Self {
        Bandwidth {
            lo_nm,
            hi_nm,
            width_nm: hi_nm - lo_nm,
            width_thz: C_NM_THZ / lo_nm - C_NM_THZ / hi_nm,
        }
    }
}

/// Outermost half-maximum crossings, linearly interpolated between samples.
fn half_max_edges(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(Error::Numeric("spectrum has no positive values".into()));
    }
    let half = 0.5 * max;
    let first = ys.iter().position(|&v| v >= half).unwrap();
    let last = ys.iter().rposition(|&v| v >= half).unwrap();
    let n = xs.len();
    if first == 0 || last == n - 1 {
        let (lo, hi) = (xs[0], xs[n - 1]);
        return Err(Error::UnboundedBandwidth {
            lo_nm: lo,
            hi_nm: hi,
            width_thz: C_NM_THZ / lo - C_NM_THZ / hi,
        });
    }
    let cross = |i: usize, j: usize| xs[i] + (half - ys[i]) * (xs[j] - xs[i]) / (ys[j] - ys[i]);
    Ok((cross(first - 1, first), cross(last, last + 1)))
}

/// Full width at half maximum of whatever density the spectrum carries.
/// Use [`Spectrum::to_per_frequency`] first for a width in optical frequency of a per-frequency density.
pub fn bandwidth_3db(spectrum: &Spectrum) -> Result<Bandwidth> {
    let (lo, hi) = half_max_edges(&spectrum.grid_nm, &spectrum.values)?;
    Ok(Bandwidth::from_edges(lo, hi))
}

/// Pair generation efficiency (Hz/mW) from a signal-side brightness spectrum:
/// the integral over [lo, hi] doubled for the idler partners. The interval must not
/// pass the degenerate wavelength, or pairs would be counted twice.
pub fn integrate_pair_efficiency(spectrum: &Spectrum, lo_nm: f64, hi_nm: f64, degenerate_nm: f64) -> Result<f64> {
    if hi_nm < lo_nm {
        return Err(Error::invalid("integration interval", format!("[{lo_nm}, {hi_nm}] is reversed")));
    }
    if hi_nm > degenerate_nm * (1.0 + 1e-12) {
        return Err(Error::invalid(
            "integration interval",
            format!("upper limit {hi_nm} nm passes the degenerate wavelength {degenerate_nm} nm"),
        ));
    }
    let (g0, g1) = (spectrum.grid_nm[0], *spectrum.grid_nm.last().unwrap());
    if hi_nm > lo_nm && (lo_nm < g0 - 1e-9 || hi_nm > g1 + 1e-9) {
        return Err(Error::invalid("integration interval", format!("[{lo_nm}, {hi_nm}] leaves the spectrum grid [{g0}, {g1}]")));
    }
    Ok(2.0 * trapezoid_between(&spectrum.grid_nm, &spectrum.values, lo_nm, hi_nm))
}

/// How a stage's absolute brightness is fixed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BrightnessModel {
    /// Scale the theoretical shape so that pumping at `anchor_pump_nm` gives `value` Hz/(nm·mW) at `anchor_nm`.
    Calibrated { anchor_nm: f64, anchor_pump_nm: f64, value: f64 },
    /// Absolute low-gain waveguide formula with an effective nonlinearity and mode overlap area.
    Theory { d_eff_pm_per_v: f64, area_um2: f64 },
}

/// One poled down-converter.
#[derive(Debug, Clone)]
pub struct SpdcStage {
    pub label: String,
    pub length_mm: f64,
    pub period_um: f64,
    pub order: u32,
    pub pump: ModeDispersion,
    pub signal: ModeDispersion,
    pub idler: ModeDispersion,
    pub brightness: BrightnessModel,
}

impl SpdcStage {
    pub fn validate(&self) -> Result<()> {
        let what = format!("stage {}", self.label);
        if !(self.length_mm > 0.0) {
            return Err(Error::invalid(what, format!("length must be positive, got {} mm", self.length_mm)));
        }
        if !(self.period_um > 0.0) {
            return Err(Error::invalid(what, format!("poling period must be positive, got {} um", self.period_um)));
        }
        if self.order == 0 {
            return Err(Error::invalid(what, "QPM order must be at least 1"));
        }
        match self.brightness {
            BrightnessModel::Calibrated { anchor_nm, anchor_pump_nm, value } => {
                if !(value >= 0.0) || !(anchor_nm > anchor_pump_nm) || !(anchor_pump_nm > 0.0) {
                    return Err(Error::invalid(what, "calibration anchor must be a non-negative brightness at a wavelength longer than its pump"));
                }
            }
            BrightnessModel::Theory { d_eff_pm_per_v, area_um2 } => {
                if !(d_eff_pm_per_v > 0.0 && area_um2 > 0.0) {
                    return Err(Error::invalid(what, "theory mode needs positive d_eff and effective area"));
                }
            }
        }
        Ok(())
    }

    /// Poling period that phase matches `pump_nm → signal_nm + idler` for these modes.
    pub fn solve_period(&self, pump_nm: f64, signal_nm: f64) -> Result<f64> {
        let idler = conjugate_wavelength(pump_nm, signal_nm)?;
        qpm_period((&self.pump, pump_nm), (&self.signal, signal_nm), (&self.idler, idler), self.order)
    }

    pub fn with_length(&self, length_mm: f64) -> SpdcStage {
        SpdcStage {
            length_mm,
            ..self.clone()
        }
    }

    /// Δk′ in rad/mm.
    pub fn phase_mismatch(&self, pump_nm: f64, signal_nm: f64) -> Result<f64> {
        let idler_nm = conjugate_wavelength(pump_nm, signal_nm)?;
        let k = self.pump.refractive_index(pump_nm)? / pump_nm
            - self.signal.refractive_index(signal_nm)? / signal_nm
            - self.idler.refractive_index(idler_nm)? / idler_nm;
        let grating = self.order as f64 / (self.period_um * 1e3);
        Ok(2.0 * std::f64::consts::PI * (k - grating) * 1e6)
    }

    /// sinc²(Δk′L/2) ∈ [0, 1].
    pub fn pm_intensity(&self, pump_nm: f64, signal_nm: f64) -> Result<f64> {
        let x = self.phase_mismatch(pump_nm, signal_nm)? * self.length_mm / 2.0;
        Ok(sinc(x).powi(2))
    }

    /// Spectral shape per unit signal wavelength: sinc² / (λ_s³ λ_i), with λ in μm.
    fn shape(&self, pump_nm: f64, signal_nm: f64) -> Result<f64> {
        let idler_nm = conjugate_wavelength(pump_nm, signal_nm)?;
        let (ls, li) = (signal_nm * 1e-3, idler_nm * 1e-3);
        Ok(self.pm_intensity(pump_nm, signal_nm)? / (ls.powi(3) * li))
    }

    /// Factor turning `shape` into Hz/(nm·mW) for a given pump.
    fn prefactor(&self, pump_nm: f64, signal_nm: f64) -> Result<f64> {
        match self.brightness {
            BrightnessModel::Calibrated { anchor_nm, anchor_pump_nm, value } => {
                if value == 0.0 {
                    return Ok(0.0);
                }
                // Anchoring on (or numerically at) a sinc² null would blow up the scale.
                if !(self.pm_intensity(anchor_pump_nm, anchor_nm)? > ANCHOR_NULL_THRESHOLD) {
                    return Err(Error::Calibration(format!(
                        "stage {}: phase-matching shape vanishes at the {anchor_nm} nm anchor",
                        self.label
                    )));
                }
                Ok(value / self.shape(anchor_pump_nm, anchor_nm)?)
            }
            BrightnessModel::Theory { d_eff_pm_per_v, area_um2 } => {
                let idler_nm = conjugate_wavelength(pump_nm, signal_nm)?;
                let n = self.pump.refractive_index(pump_nm)?
                    * self.signal.refractive_index(signal_nm)?
                    * self.idler.refractive_index(idler_nm)?;
                let d = d_eff_pm_per_v * 1e-12;
                let l = self.length_mm * 1e-3;
                let area = area_um2 * 1e-12;
                // 8π² d² L² P / (ε0 n_p n_s n_i A λ_s³ λ_i), per metre of λ_s per W; shape carries λ in μm.
                let si = 8.0 * std::f64::consts::PI.powi(2) * d * d * l * l / (EPSILON_0 * n * area) * 1e24;
                Ok(si * 1e-12)
            }
        }
    }

    /// Spectral brightness dR/dλ_s in Hz/(nm·mW).
    pub fn brightness_at(&self, pump_nm: f64, signal_nm: f64) -> Result<f64> {
        Ok(self.prefactor(pump_nm, signal_nm)? * self.shape(pump_nm, signal_nm)?)
    }

    pub fn brightness_spectrum(&self, pump_nm: f64, grid_nm: &[f64]) -> Result<Spectrum> {
        let values = grid_nm
            .iter()
            .map(|&l| self.brightness_at(pump_nm, l))
            .collect::<Result<Vec<_>>>()?;
        let mut s = Spectrum::new(grid_nm.to_vec(), values, SpectralUnit::Brightness)?;
        s.pump_nm = Some(pump_nm);
        s.stage = Some(self.label.clone());
        Ok(s)
    }

    /// Pair flux into `band` (Hz/mW, either photon of a pair landing in the band) for each pump wavelength.
    pub fn pump_acceptance(&self, pump_grid_nm: &[f64], band_nm: (f64, f64)) -> Result<Acceptance> {
        self.pump_acceptance_with_step(pump_grid_nm, band_nm, BAND_STEP_NM)
    }

    pub fn pump_acceptance_with_step(&self, pump_grid_nm: &[f64], band_nm: (f64, f64), step_nm: f64) -> Result<Acceptance> {
        let (lo, hi) = band_nm;
        if !(hi > lo) {
            return Err(Error::invalid("detection band", format!("[{lo}, {hi}] nm is empty")));
        }
        let mut band = grid(lo, hi, step_nm);
        if hi - band.last().unwrap() > 1e-9 {
            band.push(hi);
        }
        let values = pump_grid_nm
            .iter()
            .map(|&lp| {
                let s = band
                    .iter()
                    .map(|&ls| self.brightness_at(lp, ls))
                    .collect::<Result<Vec<_>>>()?;
                Ok(trapezoid(&band, &s))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut curve = Spectrum::new(pump_grid_nm.to_vec(), values, SpectralUnit::Efficiency)?;
        curve.stage = Some(self.label.clone());
        let (lo_edge, hi_edge) = half_max_edges(&curve.grid_nm, &curve.values)?;
        Ok(Acceptance {
            peak_nm: curve.peak().0,
            fwhm_nm: hi_edge - lo_edge,
            curve,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Acceptance {
    pub curve: Spectrum,
    pub fwhm_nm: f64,
    pub peak_nm: f64,
}

/// Filter transmission T(λ) ∈ [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCurve {
    pub grid_nm: Vec<f64>,
    pub transmission: Vec<f64>,
}

impl FilterCurve {
    pub fn new(grid_nm: Vec<f64>, transmission: Vec<f64>) -> Result<Self> {
        check_grid("filter curve", &grid_nm, &transmission)?;
        if let Some(t) = transmission.iter().find(|&&t| t > 1.0) {
            return Err(Error::invalid("filter curve", format!("transmission {t} exceeds 1")));
        }
        Ok(FilterCurve { grid_nm, transmission })
    }

    /// Flat-top passband of transmission `t` on [lo, hi] sampled at `step`, with zero shoulders one step outside.
    pub fn flat_top(lo_nm: f64, hi_nm: f64, t: f64, step_nm: f64) -> Result<Self> {
        let mut g = vec![lo_nm - step_nm];
        g.extend(grid(lo_nm, hi_nm, step_nm));
        let top = *g.last().unwrap();
        g.push(top + step_nm);
        let n = g.len();
        let v = (0..n).map(|i| if i == 0 || i == n - 1 { 0.0 } else { t }).collect();
        FilterCurve::new(g, v)
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let (_, g, v) = read_two_columns(r)?;
        FilterCurve::new(g, v)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        FilterCurve::new(self.grid_nm.clone(), self.transmission.iter().map(|t| t * k).collect())
    }

    /// Pump lineshape implied by heralding through this filter: each passband wavelength
    /// λ_h maps to its partner λ = conj(λ_pump, λ_h), density carried with (λ_h/λ)².
    pub fn conjugated_lineshape(&self, pump_nm: f64) -> Result<Spectrum> {
        let mut pts = self
            .grid_nm
            .iter()
            .zip(&self.transmission)
            .map(|(&lh, &t)| {
                let l = conjugate_wavelength(pump_nm, lh)?;
                Ok((l, t * (lh / l).powi(2)))
            })
            .collect::<Result<Vec<_>>>()?;
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (g, v) = pts.into_iter().unzip();
        Spectrum::new(g, v, SpectralUnit::Relative)
    }
}

/// Width of the unity-transmission flat-top filter with the same integrated area.
pub fn effective_filter_bandwidth(filter: &FilterCurve) -> f64 {
    trapezoid(&filter.grid_nm, &filter.transmission)
}

/// Efficiency of a broadband pump relative to a monochromatic pump at the acceptance optimum
/// with the same power: ∫S·A / (∫S · max A). The acceptance is taken as zero outside its grid.
pub fn broadband_pump_factor(pump: &Spectrum, acceptance: &Spectrum) -> Result<f64> {
    let total = pump.integral();
    if !(total > 0.0) {
        return Err(Error::ZeroDenominator("pump lineshape integrates to zero"));
    }
    let a_max = acceptance.peak().1;
    if !(a_max > 0.0) {
        return Err(Error::ZeroDenominator("acceptance curve is identically zero"));
    }
    let weighted: Vec<f64> = pump
        .grid_nm
        .iter()
        .zip(&pump.values)
        .map(|(&l, &s)| s * acceptance.value_at(l).unwrap_or(0.0))
        .collect();
    Ok(trapezoid(&pump.grid_nm, &weighted) / (total * a_max))
}

/// c/λ for λ in nm, THz.
pub fn frequency_thz(lambda_nm: f64) -> f64 {
    C_NM_THZ / lambda_nm
}
