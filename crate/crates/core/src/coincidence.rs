//! Start–stop coincidence histograms and the windowed-subtraction analysis:
//! accidental floor from an off-peak window, accidental-subtracted rate,
//! Poisson and floor uncertainties in quadrature, SNR and CAR.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::{TagBatch, TimeTagStream};

/// How stop tags are paired with start tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairingMode {
    /// Every stop within range of every start.
    MultiStop,
    /// Classic start–stop: each stop belongs to the latest accepted start, and a
    /// start is only accepted once `dead_time_ps` has passed since the previous
    /// accepted one. Produces a loss of counts at delays beyond the dead time.
    StartStopDeadTime { dead_time_ps: u64 },
}

/// Delay histogram; delay = stop − start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoincidenceHistogram {
    pub bin_width_ps: u64,
    pub range_min_ps: i64,
    pub counts: Vec<u64>,
    pub acquisition_time_s: f64,
    pub start_channel: u8,
    pub stop_channel: u8,
}

impl CoincidenceHistogram {
    pub fn range_max_ps(&self) -> i64 {
        self.range_min_ps + (self.counts.len() as u64 * self.bin_width_ps) as i64
    }

    pub fn bin_lower_ps(&self, i: usize) -> i64 {
        self.range_min_ps + (i as u64 * self.bin_width_ps) as i64
    }

    pub fn bin_center_ps(&self, i: usize) -> f64 {
        self.bin_lower_ps(i) as f64 + 0.5 * self.bin_width_ps as f64
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Index of the bin containing `delay_ps`, if in range.
    pub fn bin_of(&self, delay_ps: i64) -> Option<usize> {
        if delay_ps < self.range_min_ps || delay_ps >= self.range_max_ps() {
            return None;
        }
        Some(((delay_ps - self.range_min_ps) as u64 / self.bin_width_ps) as usize)
    }

    /// Bins lying wholly inside `[lo, hi)`.
    pub fn bins_within(&self, lo_ps: i64, hi_ps: i64) -> std::ops::Range<usize> {
        let w = self.bin_width_ps as i64;
        let first = (lo_ps - self.range_min_ps).max(0);
        let first = ((first + w - 1) / w) as usize;
        let last = ((hi_ps - self.range_min_ps).max(0) / w) as usize;
        first.min(self.counts.len())..last.min(self.counts.len()).max(first.min(self.counts.len()))
    }

    /// Sum adjacent groups of `factor` bins.
    pub fn rebin(&self, factor: usize) -> Result<CoincidenceHistogram> {
        if factor == 0 || self.counts.len() % factor != 0 {
            return Err(Error::invalid(
                "rebin factor",
                format!("{factor} does not divide the {} bins", self.counts.len()),
            ));
        }
        Ok(CoincidenceHistogram {
            bin_width_ps: self.bin_width_ps * factor as u64,
            counts: self.counts.chunks(factor).map(|c| c.iter().sum()).collect(),
            ..self.clone()
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# bin_width_ps={}", self.bin_width_ps)?;
        writeln!(w, "# range_ps={},{}", self.range_min_ps, self.range_max_ps())?;
        writeln!(w, "# acquisition_time_s={}", self.acquisition_time_s)?;
        writeln!(w, "# start_channel={}", self.start_channel)?;
        writeln!(w, "# stop_channel={}", self.stop_channel)?;
        writeln!(w, "delay_ps,counts")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{c}", self.bin_lower_ps(i))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<CoincidenceHistogram> {
        let mut meta = std::collections::BTreeMap::new();
        let mut rows: Vec<(i64, u64)> = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse(format!("histogram CSV: {e}")))?;
            let line = line.trim();
            if let Some(kv) = line.strip_prefix('#') {
                if let Some((a, b)) = kv.split_once('=') {
                    meta.insert(a.trim().to_string(), b.trim().to_string());
                }
                continue;
            }
            if line.is_empty() || line.starts_with("delay_ps") {
                continue;
            }
            let row = line
                .split_once(',')
                .and_then(|(d, c)| Some((d.trim().parse().ok()?, c.trim().parse().ok()?)))
                .ok_or_else(|| Error::Parse(format!("histogram CSV line {}: {line:?}", k + 1)))?;
            rows.push(row);
        }
        let get = |key: &str| -> Result<String> {
            meta.get(key)
                .cloned()
                .ok_or_else(|| Error::Parse(format!("histogram CSV: missing `# {key}=` header")))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?.parse().map_err(|_| Error::Parse(format!("histogram CSV: bad {key}")))
        };
        let bin_width_ps = num("bin_width_ps")? as u64;
        let range_min_ps = rows.first().map(|r| r.0).unwrap_or(0);
        if rows.windows(2).any(|w| w[1].0 - w[0].0 != bin_width_ps as i64) {
            return Err(Error::Parse("histogram CSV: rows are not contiguous bins".into()));
        }
        Ok(CoincidenceHistogram {
            bin_width_ps,
            range_min_ps,
            counts: rows.into_iter().map(|r| r.1).collect(),
            acquisition_time_s: num("acquisition_time_s")?,
            start_channel: num("start_channel")? as u8,
            stop_channel: num("stop_channel")? as u8,
        })
    }
}

/// Incremental histogram over time-ordered tag batches.
pub struct HistogramBuilder {
    start_channel: u8,
    stop_channel: u8,
    bin_width: i64,
    lo: i64,
    hi: i64,
    counts: Vec<u64>,
    mode: PairingMode,
    recent_starts: VecDeque<i64>,
    recent_stops: VecDeque<i64>,
    last_accepted_start: Option<i64>,
    starts_seen: u64,
    stops_seen: u64,
}

impl HistogramBuilder {
    pub fn new(start_channel: u8, stop_channel: u8, bin_width_ps: u64, range_ps: (i64, i64)) -> Result<Self> {
        let (lo, hi) = range_ps;
        if bin_width_ps == 0 {
            return Err(Error::invalid("bin width", "must be positive"));
        }
        if hi <= lo || (hi - lo) % bin_width_ps as i64 != 0 {
            return Err(Error::invalid(
                "histogram range",
                format!("[{lo}, {hi}) ps is not a positive whole number of {bin_width_ps} ps bins"),
            ));
        }
        if start_channel == stop_channel {
            return Err(Error::invalid("coincidence channels", "start and stop must differ"));
        }
        let n = ((hi - lo) / bin_width_ps as i64) as usize;
        Ok(HistogramBuilder {
            start_channel,
            stop_channel,
            bin_width: bin_width_ps as i64,
            lo,
            hi,
            counts: vec![0; n],
            mode: PairingMode::MultiStop,
            recent_starts: VecDeque::new(),
            recent_stops: VecDeque::new(),
            last_accepted_start: None,
            starts_seen: 0,
            stops_seen: 0,
        })
    }

    pub fn with_mode(mut self, mode: PairingMode) -> Self {
        self.mode = mode;
        self
    }

    fn record(&mut self, delay: i64) {
        if delay >= self.lo && delay < self.hi {
            self.counts[((delay - self.lo) / self.bin_width) as usize] += 1;
        }
    }

    fn on_start(&mut self, t: i64) {
        self.starts_seen += 1;
        match self.mode {
            PairingMode::MultiStop => {
                // Pair with stops already seen (delay ≤ 0).
                while self.recent_stops.front().is_some_and(|&s| s - t < self.lo) {
                    self.recent_stops.pop_front();
                }
                for k in 0..self.recent_stops.len() {
                    let d = self.recent_stops[k] - t;
                    self.record(d);
                }
                self.recent_starts.push_back(t);
            }
            PairingMode::StartStopDeadTime { dead_time_ps } => {
                let accept = self.last_accepted_start.is_none_or(|l| t - l >= dead_time_ps as i64);
                if accept {
                    self.last_accepted_start = Some(t);
                }
            }
        }
    }

    fn on_stop(&mut self, s: i64) {
        self.stops_seen += 1;
        match self.mode {
            PairingMode::MultiStop => {
                while self.recent_starts.front().is_some_and(|&t| s - t >= self.hi) {
                    self.recent_starts.pop_front();
                }
                for k in 0..self.recent_starts.len() {
                    let d = s - self.recent_starts[k];
                    self.record(d);
                }
                self.recent_stops.push_back(s);
            }
            PairingMode::StartStopDeadTime { .. } => {
                if let Some(t) = self.last_accepted_start {
                    self.record(s - t);
                }
            }
        }
    }

    /// Feed time-ordered tags of both channels (either may be empty).
    pub fn push(&mut self, starts: &[u64], stops: &[u64]) {
        let (mut i, mut j) = (0, 0);
        while i < starts.len() || j < stops.len() {
            let take_start = j >= stops.len() || (i < starts.len() && starts[i] <= stops[j]);
            if take_start {
                self.on_start(starts[i] as i64);
                i += 1;
            } else {
                self.on_stop(stops[j] as i64);
                j += 1;
            }
        }
    }

    pub fn push_batch(&mut self, batch: &TagBatch) {
        self.push(batch.tags(self.start_channel), batch.tags(self.stop_channel));
    }

    pub fn push_record(&mut self, channel: u8, t: u64) {
        if channel == self.start_channel {
            self.on_start(t as i64);
        } else if channel == self.stop_channel {
            self.on_stop(t as i64);
        }
    }

    pub fn finish(self, acquisition_time_s: f64) -> Result<CoincidenceHistogram> {
        if self.starts_seen == 0 {
            return Err(Error::MissingChannel(self.start_channel));
        }
        if self.stops_seen == 0 {
            return Err(Error::MissingChannel(self.stop_channel));
        }
        if !(acquisition_time_s > 0.0) {
            return Err(Error::invalid("acquisition time", format!("{acquisition_time_s} s is not positive")));
        }
        Ok(CoincidenceHistogram {
            bin_width_ps: self.bin_width as u64,
            range_min_ps: self.lo,
            counts: self.counts,
            acquisition_time_s,
            start_channel: self.start_channel,
            stop_channel: self.stop_channel,
        })
    }
}

/// Multi-stop histogram of a whole in-memory stream.
pub fn build_histogram(
    stream: &TimeTagStream,
    start_channel: u8,
    stop_channel: u8,
    bin_width_ps: u64,
    range_ps: (i64, i64),
) -> Result<CoincidenceHistogram> {
    if bin_width_ps < stream.metadata.tag_resolution_ps {
        return Err(Error::invalid(
            "bin width",
            format!("{bin_width_ps} ps is finer than the {} ps tag resolution", stream.metadata.tag_resolution_ps),
        ));
    }
    let mut b = HistogramBuilder::new(start_channel, stop_channel, bin_width_ps, range_ps)?;
    b.push(stream.channel(start_channel), stream.channel(stop_channel));
    b.finish(stream.metadata.duration_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccidentalFloor {
    pub mean: f64,
    pub sigma: f64,
    pub bins: usize,
}

/// Mean and sample standard deviation of the bins wholly inside `window_ps`.
/// Fails if the window touches `peak_region_ps`.
pub fn accidental_floor(
    hist: &CoincidenceHistogram,
    window_ps: (i64, i64),
    peak_region_ps: (i64, i64),
) -> Result<AccidentalFloor> {
    let (lo, hi) = window_ps;
    if hi <= lo {
        return Err(Error::invalid("off-peak window", format!("[{lo}, {hi}) ps is empty")));
    }
    if lo < peak_region_ps.1 && peak_region_ps.0 < hi {
        return Err(Error::invalid(
            "off-peak window",
            format!("[{lo}, {hi}) ps overlaps the peak region [{}, {}) ps", peak_region_ps.0, peak_region_ps.1),
        ));
    }
    let bins = hist.bins_within(lo, hi);
    if bins.len() < 2 {
        return Err(Error::invalid("off-peak window", "needs at least two whole bins"));
    }
    let (mean, sigma) = crate::numeric::mean_std(hist.counts[bins.clone()].iter().map(|&c| c as f64));
    Ok(AccidentalFloor {
        mean,
        sigma,
        bins: bins.len(),
    })
}

/// Peak window: `bins` whole bins around the largest bin in the search region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakWindow {
    pub search_ps: (i64, i64),
    pub bins: usize,
}

impl PeakWindow {
    /// Bin index range of the window in `hist`.
    pub fn locate(&self, hist: &CoincidenceHistogram) -> Result<std::ops::Range<usize>> {
        if self.bins == 0 {
            return Err(Error::invalid("peak window", "needs at least one bin"));
        }
        let region = hist.bins_within(self.search_ps.0, self.search_ps.1);
        if region.is_empty() {
            return Err(Error::invalid("peak search region", "contains no whole histogram bins"));
        }
        // first maximum wins on ties
        let imax = region.clone().fold(region.start, |best, i| if hist.counts[i] > hist.counts[best] { i } else { best });
        let start = imax.saturating_sub(self.bins / 2).min(hist.counts.len().saturating_sub(self.bins));
        let end = (start + self.bins).min(hist.counts.len());
        if end - start != self.bins {
            return Err(Error::invalid("peak window", "wider than the histogram"));
        }
        Ok(start..end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoincidenceResult {
    pub rate_hz: f64,
    pub sigma_hz: f64,
    pub sigma_poisson_hz: f64,
    pub sigma_accidental_hz: f64,
    pub windowed_counts: u64,
    pub accidentals_in_window: f64,
    pub window_ns: f64,
    pub window_start_ps: i64,
    pub snr: f64,
    /// Subtracted counts fell more than 3σ below zero.
    pub negative_excess: bool,
}

impl CoincidenceResult {
    /// True-to-accidental rate ratio within the window.
    pub fn car(&self) -> f64 {
        if self.accidentals_in_window == 0.0 {
            return f64::INFINITY;
        }
        (self.windowed_counts as f64 - self.accidentals_in_window) / self.accidentals_in_window
    }
}

/// Accidental-subtracted coincidence rate with quadrature uncertainties.
pub fn extract_coincidences(hist: &CoincidenceHistogram, peak: &PeakWindow, floor: &AccidentalFloor) -> Result<CoincidenceResult> {
    let window = peak.locate(hist)?;
    let t = hist.acquisition_time_s;
    let n = window.len() as f64;
    let counts: u64 = hist.counts[window.clone()].iter().sum();
    let accidentals = n * floor.mean;
    let rate = (counts as f64 - accidentals) / t;
    let sigma_poisson = (counts as f64).sqrt() / t;
    let sigma_acc = floor.sigma * n.sqrt() / t;
    let sigma = sigma_poisson.hypot(sigma_acc);
    let negative_excess = rate < -3.0 * sigma;
    if negative_excess {
        log::warn!("accidental-subtracted coincidences are {:.1}σ below zero", -rate / sigma);
    }
    Ok(CoincidenceResult {
        rate_hz: rate,
        sigma_hz: sigma,
        sigma_poisson_hz: sigma_poisson,
        sigma_accidental_hz: sigma_acc,
        windowed_counts: counts,
        accidentals_in_window: accidentals,
        window_ns: n * hist.bin_width_ps as f64 * 1e-3,
        window_start_ps: hist.bin_lower_ps(window.start),
        snr: snr(hist, peak, floor)?,
        negative_excess,
    })
}

/// (max bin in the window − floor mean) / floor sigma; infinite when sigma is zero.
pub fn snr(hist: &CoincidenceHistogram, peak: &PeakWindow, floor: &AccidentalFloor) -> Result<f64> {
    let window = peak.locate(hist)?;
    let height = hist.counts[window].iter().copied().max().unwrap_or(0) as f64 - floor.mean;
    if floor.sigma == 0.0 {
        return Ok(if height == 0.0 { 0.0 } else { f64::INFINITY.copysign(height) });
    }
    Ok(height / floor.sigma)
}

/// Analysis settings, defaulting to the reference procedure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub start_channel: u8,
    pub stop_channel: u8,
    pub base_bin_ps: u64,
    pub rebin: usize,
    pub range_ps: (i64, i64),
    pub peak_search_ps: (i64, i64),
    pub floor_window_ps: (i64, i64),
    pub window_bins: usize,
    pub mode: PairingMode,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            start_channel: 0,
            stop_channel: 1,
            base_bin_ps: 4,
            rebin: 64,
            // 800 bins of 256 ps
            range_ps: (-102_400, 102_400),
            peak_search_ps: (-40_000, 102_400),
            // first 60 ns of the range, early-delay side
            floor_window_ps: (-102_400, -42_400),
            window_bins: 14,
            mode: PairingMode::MultiStop,
        }
    }
}

impl AnalysisConfig {
    pub fn builder(&self) -> Result<HistogramBuilder> {
        if self.rebin == 0 {
            return Err(Error::invalid("rebin factor", "must be positive"));
        }
        Ok(HistogramBuilder::new(self.start_channel, self.stop_channel, self.base_bin_ps, self.range_ps)?.with_mode(self.mode))
    }

    pub fn peak(&self) -> PeakWindow {
        PeakWindow {
            search_ps: self.peak_search_ps,
            bins: self.window_bins,
        }
    }

    /// Rebin, estimate the floor and extract the rate.
    pub fn analyze(&self, base: &CoincidenceHistogram) -> Result<Analysis> {
        let hist = base.rebin(self.rebin)?;
        let floor = accidental_floor(&hist, self.floor_window_ps, self.peak_search_ps)?;
        let result = extract_coincidences(&hist, &self.peak(), &floor)?;
        Ok(Analysis { hist, floor, result })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub hist: CoincidenceHistogram,
    pub floor: AccidentalFloor,
    pub result: CoincidenceResult,
}
