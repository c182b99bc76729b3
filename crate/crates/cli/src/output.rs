//! Rendering of command results. Fixed precision everywhere so reruns are byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cspdc::coincidence::{AccidentalFloor, Analysis, CoincidenceHistogram, CoincidenceResult};
use cspdc::report::{DesignReport, Prediction, PredictionInputs, StageSpectrum};
use cspdc::spdc::{Acceptance, Bandwidth};
use cspdc::{Error, ErrorKind, Result};
use serde::Serialize;

/// Destination of the primary output: a file, or stdout.
pub struct Sink {
    path: Option<PathBuf>,
}

impl Sink {
    pub fn new(path: Option<PathBuf>) -> Self {
        Sink { path }
    }

    pub fn text(&self, s: &str) -> Result<()> {
        match &self.path {
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                }
                std::fs::write(p, s).map_err(|e| Error::io(p, e))
            }
            None => {
                stdout(s);
                Ok(())
            }
        }
    }

    pub fn json<T: Serialize>(&self, value: &T) -> Result<()> {
        self.text(&(to_json(value) + "\n"))
    }
}

/// Print to stdout; a closed pipe (e.g. `| head`) is not an error.
pub fn stdout(s: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(s.as_bytes()).and_then(|_| out.flush());
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output types serialize")
}

pub fn report_error(code: &str, kind: ErrorKind, message: &str) {
    #[derive(Serialize)]
    struct Body<'a> {
        error: &'a str,
        kind: &'a str,
        message: &'a str,
    }
    let kind = match kind {
        ErrorKind::Validation => "validation",
        ErrorKind::Numeric => "numeric",
    };
    let body = Body { error: code, kind, message };
    eprintln!("{}", serde_json::to_string(&body).expect("error body serializes"));
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Error::Numeric(format!("rendering CSV: {e}")))?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

/// Three CSV tables separated by blank lines, each introduced by a `# table=` line.
pub fn design_csv(d: &DesignReport) -> String {
    let mut s = String::from("# table=stages\n");
    s.push_str("label,pump_nm,signal_nm,idler_nm,period_um,period_solved,length_mm,group_index_pump,group_index_signal,gvd_signal_fs2_per_mm\n");
    for st in &d.stages {
        let _ = writeln!(
            s,
            "{},{:.4},{:.4},{:.4},{:.6},{},{:.4},{:.6},{:.6},{:.4}",
            st.label,
            st.pump_nm,
            st.signal_nm,
            st.idler_nm,
            st.period_um,
            st.period_solved,
            st.length_mm,
            st.group_index_pump,
            st.group_index_signal,
            st.gvd_signal_fs2_per_mm
        );
    }
    let stage = d.stages.last().map_or("", |s| s.label.as_str());
    let _ = write!(s, "\n# table=gvd stage={stage}\nwavelength_nm,gvd_fs2_per_mm\n");
    for (l, g) in &d.gvd_curve {
        let _ = writeln!(s, "{l:.2},{g:.4}");
    }
    s.push_str("\n# table=parasitic\npump_mode,signal_mode,idler_mode,signal_nm,idler_nm,period_um,relative_deviation\n");
    for m in &d.parasitic {
        let _ = writeln!(
            s,
            "{},{},{},{:.3},{:.3},{:.6},{:.3e}",
            m.pump_mode, m.signal_mode, m.idler_mode, m.signal_nm, m.idler_nm, m.period_um, m.relative_deviation
        );
    }
    s
}

pub fn spectrum_csv(s: &StageSpectrum) -> Result<String> {
    let mut head = String::new();
    if let Some(b) = s.bandwidth {
        let _ = writeln!(head, "# bandwidth_thz={:.4}", b.width_thz);
        let _ = writeln!(head, "# half_maximum_nm={:.4},{:.4}", b.lo_nm, b.hi_nm);
    }
    if let Some(e) = s.pair_efficiency_hz_per_mw {
        let _ = writeln!(head, "# pair_efficiency_hz_per_mw={e:.6e}");
    }
    Ok(head + &csv_bytes(|w| s.spectrum.write_csv(w))?)
}

pub fn acceptance_csv(a: &Acceptance) -> Result<String> {
    let head = format!("# fwhm_nm={:.4}\n# peak_nm={:.4}\n", a.fwhm_nm, a.peak_nm);
    Ok(head + &csv_bytes(|w| a.curve.write_csv(w))?)
}

pub fn histogram_csv(h: &CoincidenceHistogram) -> Result<String> {
    csv_bytes(|w| h.write_csv(w))
}

#[derive(Serialize)]
pub struct SpectrumJson<'a> {
    stage: Option<&'a str>,
    pump_nm: Option<f64>,
    unit: &'static str,
    bandwidth: Option<Bandwidth>,
    pair_efficiency_hz_per_mw: Option<f64>,
    wavelength_nm: &'a [f64],
    value: &'a [f64],
}

impl<'a> SpectrumJson<'a> {
    pub fn new(s: &'a StageSpectrum) -> Self {
        SpectrumJson {
            stage: s.spectrum.stage.as_deref(),
            pump_nm: s.spectrum.pump_nm,
            unit: s.spectrum.unit.label(),
            bandwidth: s.bandwidth,
            pair_efficiency_hz_per_mw: s.pair_efficiency_hz_per_mw,
            wavelength_nm: &s.spectrum.grid_nm,
            value: &s.spectrum.values,
        }
    }
}

#[derive(Serialize)]
pub struct AcceptanceJson<'a> {
    stage: Option<&'a str>,
    fwhm_nm: f64,
    peak_nm: f64,
    pump_nm: &'a [f64],
    value: &'a [f64],
}

impl<'a> AcceptanceJson<'a> {
    pub fn new(a: &'a Acceptance) -> Self {
        AcceptanceJson {
            stage: a.curve.stage.as_deref(),
            fwhm_nm: a.fwhm_nm,
            peak_nm: a.peak_nm,
            pump_nm: &a.curve.grid_nm,
            value: &a.curve.values,
        }
    }
}

#[derive(Serialize)]
pub struct AnalysisJson<'a> {
    histogram: Option<&'a Path>,
    bin_width_ps: u64,
    acquisition_time_s: f64,
    total_counts: u64,
    floor: &'a AccidentalFloor,
    result: &'a CoincidenceResult,
}

impl<'a> AnalysisJson<'a> {
    pub fn new(a: &'a Analysis, histogram: Option<&'a Path>) -> Self {
        AnalysisJson {
            histogram,
            bin_width_ps: a.hist.bin_width_ps,
            acquisition_time_s: a.hist.acquisition_time_s,
            total_counts: a.hist.total(),
            floor: &a.floor,
            result: &a.result,
        }
    }
}

fn inputs_line(s: &mut String, name: &str, p: &PredictionInputs) {
    let _ = writeln!(
        s,
        "{name:<38}{:>10.1} kHz/mW   (B = {:.3e} Hz/(nm·mW), BW = {:.3} nm, E2 = {:.3e}, eta = {:.4})",
        p.predicted_efficiency_hz_per_mw * 1e-3,
        p.first_stage_brightness,
        p.herald_bandwidth_nm,
        p.second_stage_probability,
        p.broadband_factor
    );
}

pub fn prediction_text(p: &Prediction) -> String {
    let mut s = String::new();
    if let Some(st) = &p.stated {
        inputs_line(&mut s, "predicted efficiency, stated inputs", st);
    }
    if let Some(m) = &p.model {
        inputs_line(&mut s, "predicted efficiency, model inputs", m);
    }
    let rescaled = |x: Option<f64>| x.map_or(String::new(), |v| format!("   (chain rescale {v:.4})"));
    let mut row = |name: &str, value: String| {
        let _ = writeln!(s, "{name:<38}{value}");
    };
    row("herald efficiency", format!("{:>10.4}{}", p.herald_efficiency, rescaled(p.herald_efficiency_rescaled)));
    row(
        "granddaughter efficiency",
        format!("{:>10.4}{}", p.granddaughter_efficiency, rescaled(p.granddaughter_efficiency_rescaled)),
    );
    row(
        "triplet efficiency",
        format!(
            "{:>10.1} ± {:.1} kHz/mW",
            p.triplet_efficiency_hz_per_mw.value * 1e-3,
            p.triplet_efficiency_hz_per_mw.sigma * 1e-3
        ),
    );
    row(
        "generation rate",
        format!("{:>10.2} ± {:.2} Hz", p.generation_rate_hz.value, p.generation_rate_hz.sigma),
    );
    if let Some(g) = p.generation_rate_rescaled_hz {
        row("generation rate, rescaled chain", format!("{:>10.2} ± {:.2} Hz", g.value, g.sigma));
    }
    row("herald brightness", format!("{:>10.4e} Hz/(nm·mW)", p.herald_brightness));
    row("granddaughter brightness", format!("{:>10.4e} Hz/(nm·mW)", p.granddaughter_brightness));
    row("threefold rate", format!("{:>10.4e} Hz", p.threefold_rate_hz));
    row("threefold accidentals", format!("{:>10.4e} Hz", p.threefold_accidentals_hz));
    row("twofold accidentals", format!("{:>10.4e} Hz", p.twofold_accidentals_hz));
    row("windowed accidentals", format!("{:>10.0}", p.windowed_accidentals));
    row("coincidence CAR", format!("{:>10.3e}", p.coincidence_car));
    row("heralding probability, coincidences", format!("{:>10.3e}", p.heralding_probability_coincidences));
    row("heralding probability, generation", format!("{:>10.3e}", p.heralding_probability_generation));
    row("granddaughter rate per arm", format!("{:>10.3} Hz", p.granddaughter_rate_per_arm_hz));
    row("background to signal, per arm", format!("{:>10.0}", p.background_ratio));
    let r = &p.row;
    let _ = writeln!(
        s,
        "\n{:<12}{:<12}{:<12}{:<14}{:<16}\n{:<12.3}{:<12.2e}{:<12.2e}{:<14.2}{:<16.3e}",
        "interstage",
        "stage 2",
        "product",
        "rate (Hz)",
        "eff. (Hz/mW)",
        r.interstage,
        r.second_stage,
        r.product,
        r.triplet_rate_hz,
        r.efficiency_hz_per_mw
    );
    s
}
