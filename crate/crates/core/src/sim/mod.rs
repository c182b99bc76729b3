//! Monte Carlo detector time tags for a triplet source.
//!
//! Time is cut into fixed one-second slabs. Each slab draws from its own ChaCha
//! stream derived from `(seed, slab, process)`, so the output does not depend
//! on how slabs are scheduled. Within a slab, events are generated in `f64`
//! picoseconds relative to the slab start and converted to absolute integer
//! picoseconds before dead time and quantization.

mod stream;
mod tagfile;

pub use stream::{StreamMetadata, TimeTagStream};
pub use tagfile::{read_tags, write_tags_binary, write_tags_csv, TagFormat, TagReader, TagWriter, MAGIC, VERSION};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Length of one generation slab.
pub const SLAB_PS: u64 = 1_000_000_000_000;
/// Jitter draws are clamped at this many standard deviations.
pub const JITTER_CLAMP_SIGMAS: f64 = 8.0;
/// Dead-time losses above this fraction draw a warning.
pub const DEAD_TIME_WARNING_FRACTION: f64 = 0.5;

const PS_PER_S: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelRole {
    /// Detects the stage-1 partner photon.
    Herald,
    /// Detects one photon of the stage-2 pair.
    Granddaughter,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelConfig {
    pub id: u8,
    pub role: ChannelRole,
    pub efficiency: f64,
    pub dark_rate_hz: f64,
    /// Uncorrelated real photons, e.g. parasitic down-conversion.
    pub background_rate_hz: f64,
    pub jitter_sigma_ps: f64,
    pub dead_time_ns: f64,
    pub optical_delay_ps: f64,
}

impl ChannelConfig {
    pub fn new(id: u8, role: ChannelRole, efficiency: f64) -> Self {
        ChannelConfig {
            id,
            role,
            efficiency,
            dark_rate_hz: 0.0,
            background_rate_hz: 0.0,
            jitter_sigma_ps: 0.0,
            dead_time_ns: 0.0,
            optical_delay_ps: 0.0,
        }
    }

    fn dead_time_ps(&self) -> u64 {
        (self.dead_time_ns * 1e3).round() as u64
    }
}

/// Strictly periodic test source injected into one channel before jitter and dead time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicSource {
    pub channel: u8,
    pub period_ps: u64,
    pub phase_ps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub triplet_generation_rate_hz: f64,
    /// Herald clicks not belonging to a triplet (mostly stage-1 pairs whose
    /// daughter did not split), modelled as one Poisson stream.
    pub herald_singles_rate_hz: f64,
    pub channels: Vec<ChannelConfig>,
    pub duration_s: f64,
    pub seed: u64,
    pub tag_resolution_ps: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub periodic: Vec<PeriodicSource>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("scenario", reason));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration must be positive, got {} s", self.duration_s));
        }
        // Absolute timestamps must fit comfortably in i64 picoseconds.
        if self.duration_s > 1e6 {
            return bad(format!("duration {} s exceeds the 10⁶ s limit", self.duration_s));
        }
        if self.tag_resolution_ps < 1 {
            return bad("tag resolution must be at least 1 ps".into());
        }
        for (name, r) in [
            ("triplet generation rate", self.triplet_generation_rate_hz),
            ("herald singles rate", self.herald_singles_rate_hz),
        ] {
            if !(r >= 0.0 && r.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {r}"));
            }
        }
        let heralds = self.channels.iter().filter(|c| c.role == ChannelRole::Herald).count();
        let daughters = self.channels.len() - heralds;
        if heralds != 1 || !(1..=2).contains(&daughters) {
            return bad(format!(
                "need one herald and one or two granddaughter channels, got {heralds} and {daughters}"
            ));
        }
        for (k, c) in self.channels.iter().enumerate() {
            let what = format!("channel {}", c.id);
            if self.channels[..k].iter().any(|o| o.id == c.id) {
                return Err(Error::invalid(what, "duplicate channel id"));
            }
            if !(c.efficiency > 0.0 && c.efficiency <= 1.0) {
                return Err(Error::invalid(what, format!("efficiency {} outside (0, 1]", c.efficiency)));
            }
            for (name, v) in [
                ("dark rate", c.dark_rate_hz),
                ("background rate", c.background_rate_hz),
                ("jitter", c.jitter_sigma_ps),
                ("dead time", c.dead_time_ns),
            ] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::invalid(what, format!("{name} must be finite and non-negative, got {v}")));
                }
            }
            if !c.optical_delay_ps.is_finite() || c.optical_delay_ps.abs() > 1e9 {
                return Err(Error::invalid(what, format!("optical delay {} ps is not within ±1 ms", c.optical_delay_ps)));
            }
        }
        for p in &self.periodic {
            if p.period_ps == 0 {
                return bad("periodic source needs a positive period".into());
            }
            self.channel(p.channel)?;
        }
        Ok(())
    }

    pub fn channel(&self, id: u8) -> Result<&ChannelConfig> {
        self.channels.iter().find(|c| c.id == id).ok_or(Error::MissingChannel(id))
    }

    pub fn duration_ps(&self) -> u64 {
        (self.duration_s * PS_PER_S).round() as u64
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        let hash = Sha256::digest(&json);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn uncorrelated_rate_hz(&self, c: &ChannelConfig) -> f64 {
        let extra = if c.role == ChannelRole::Herald { self.herald_singles_rate_hz } else { 0.0 };
        c.dark_rate_hz + c.background_rate_hz + extra
    }

    /// Rate of photons reaching channel `c` before dead time.
    pub fn incident_rate_hz(&self, c: &ChannelConfig) -> f64 {
        let periodic: f64 = self
            .periodic
            .iter()
            .filter(|p| p.channel == c.id)
            .map(|p| PS_PER_S / p.period_ps as f64)
            .sum();
        self.triplet_generation_rate_hz * c.efficiency + self.uncorrelated_rate_hz(c) + periodic
    }
}

/// Expected recorded rate: incident rate through a non-paralyzable dead time, R/(1+Rτ).
pub fn detected_singles_rate(config: &ScenarioConfig, channel: u8) -> Result<f64> {
    let c = config.channel(channel)?;
    let r = config.incident_rate_hz(c);
    Ok(r / (1.0 + r * c.dead_time_ns * 1e-9))
}

/// Probability that a photon arriving at a random time finds the detector live.
pub fn live_fraction(config: &ScenarioConfig, channel: u8) -> Result<f64> {
    let c = config.channel(channel)?;
    let r = config.incident_rate_hz(c);
    Ok(1.0 / (1.0 + r * c.dead_time_ns * 1e-9))
}

/// Expected herald–granddaughter (or granddaughter–granddaughter) coincidence
/// rate from triplets, including dead-time losses on both channels.
pub fn expected_coincidence_rate(config: &ScenarioConfig, a: u8, b: u8) -> Result<f64> {
    if a == b {
        return Err(Error::invalid("coincidence channels", "start and stop must differ"));
    }
    let (ca, cb) = (config.channel(a)?, config.channel(b)?);
    Ok(config.triplet_generation_rate_hz
        * ca.efficiency
        * cb.efficiency
        * live_fraction(config, a)?
        * live_fraction(config, b)?)
}

/// Non-paralyzable dead time: keep a tag iff it is at least `dead_time_ns` after the last kept tag.
pub fn apply_dead_time(tags_ps: &[u64], dead_time_ns: f64) -> Result<Vec<u64>> {
    if !(dead_time_ns >= 0.0) {
        return Err(Error::invalid("dead time", format!("{dead_time_ns} ns is negative")));
    }
    if let Some(i) = tags_ps.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::Unsorted { index: i + 1 });
    }
    let dead = (dead_time_ns * 1e3).round() as u64;
    let mut gate = DeadTimeGate::new(dead);
    Ok(tags_ps.iter().copied().filter(|&t| gate.accept(t as i64)).collect())
}

struct DeadTimeGate {
    dead_ps: i64,
    last: Option<i64>,
}

impl DeadTimeGate {
    fn new(dead_ps: u64) -> Self {
        DeadTimeGate {
            dead_ps: dead_ps as i64,
            last: None,
        }
    }

    fn accept(&mut self, t: i64) -> bool {
        match self.last {
            Some(l) if t - l < self.dead_ps => false,
            _ => {
                self.last = Some(t);
                true
            }
        }
    }
}

/// Tags of one time slice, per channel in ascending channel-id order.
/// Every tag in a batch precedes every tag of the next batch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TagBatch {
    pub channels: Vec<(u8, Vec<u64>)>,
}

impl TagBatch {
    pub fn tags(&self, channel: u8) -> &[u64] {
        self.channels
            .iter()
            .find(|(c, _)| *c == channel)
            .map(|(_, v)| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.channels.iter().map(|(_, v)| v.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSummary {
    pub id: u8,
    /// Photons reaching the detector inside the acquisition window.
    pub incident: u64,
    pub recorded: u64,
    pub dead_time_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub digest: String,
    pub duration_s: f64,
    pub seed: u64,
    pub triplets: u64,
    pub channels: Vec<ChannelSummary>,
    pub warnings: Vec<String>,
}

impl SimulationSummary {
    pub fn recorded(&self, channel: u8) -> u64 {
        self.channels.iter().find(|c| c.id == channel).map_or(0, |c| c.recorded)
    }
}

/// Generate the full stream in memory. Prefer [`simulate_with`] for long runs.
pub fn simulate(config: &ScenarioConfig) -> Result<TimeTagStream> {
    let mut per_channel: Vec<(u8, Vec<u64>)> = {
        let mut ids: Vec<u8> = config.channels.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids.into_iter().map(|id| (id, Vec::new())).collect()
    };
    let summary = simulate_with(config, |batch: &TagBatch| {
        for ((_, dst), (_, src)) in per_channel.iter_mut().zip(&batch.channels) {
            dst.extend_from_slice(src);
        }
        Ok(())
    })?;
    TimeTagStream::new(per_channel.into_iter().collect(), StreamMetadata::from_summary(config, &summary))
}

// Process identifiers mixed into the per-slab RNG stream number.
const PROCESS_TRIPLETS: u64 = 0;
const PROCESS_UNCORRELATED: u64 = 1;

fn slab_rng(seed: u64, slab: u64, process: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((slab << 16) | process);
    rng
}

fn jitter(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let z: f64 = rng.sample(StandardNormal);
    sigma * z.clamp(-JITTER_CLAMP_SIGMAS, JITTER_CLAMP_SIGMAS)
}

struct ChannelState {
    config: ChannelConfig,
    dead: DeadTimeGate,
    /// Absolute-time events not yet released, sorted.
    pending: Vec<i64>,
    incident: u64,
    recorded: u64,
}

/// Stream the simulation through `sink`, one batch per slab.
pub fn simulate_with<F>(config: &ScenarioConfig, mut sink: F) -> Result<SimulationSummary>
where
    F: FnMut(&TagBatch) -> Result<()>,
{
    config.validate()?;
    let duration_ps = config.duration_ps() as i64;
    let resolution = config.tag_resolution_ps as i64;
    let n_slabs = (config.duration_ps()).div_ceil(SLAB_PS);

    let mut sorted = config.channels.clone();
    sorted.sort_by_key(|c| c.id);
    let mut states: Vec<ChannelState> = sorted
        .into_iter()
        .map(|c| ChannelState {
            dead: DeadTimeGate::new(c.dead_time_ps()),
            config: c,
            pending: Vec::new(),
            incident: 0,
            recorded: 0,
        })
        .collect();

    // Future slabs only produce events at or after slab_start + min_shift.
    let min_shift = states
        .iter()
        .map(|s| s.config.optical_delay_ps - JITTER_CLAMP_SIGMAS * s.config.jitter_sigma_ps)
        .fold(0.0f64, f64::min)
        .floor() as i64;

    let exp = |rng: &mut ChaCha8Rng| -> f64 { rng.sample::<f64, _>(Exp1) };
    let mut triplets = 0u64;
    let mut fresh: Vec<Vec<f64>> = vec![Vec::new(); states.len()];

    for slab in 0..n_slabs {
        let start = (slab * SLAB_PS) as i64;
        let span = (SLAB_PS as i64).min(duration_ps - start) as f64;
        for f in fresh.iter_mut() {
            f.clear();
        }

        // Triplet emissions; every candidate draws survival and jitter in channel order.
        if config.triplet_generation_rate_hz > 0.0 {
            let mut rng = slab_rng(config.seed, slab, PROCESS_TRIPLETS);
            let mean_gap = PS_PER_S / config.triplet_generation_rate_hz;
            let mut t = exp(&mut rng) * mean_gap;
            while t < span {
                triplets += 1;
                for (s, f) in states.iter().zip(fresh.iter_mut()) {
                    let survive = rng.random::<f64>() < s.config.efficiency;
                    let dt = jitter(&mut rng, s.config.jitter_sigma_ps);
                    if survive {
                        f.push(t + s.config.optical_delay_ps + dt);
                    }
                }
                t += exp(&mut rng) * mean_gap;
            }
        }

        for (k, (s, f)) in states.iter().zip(fresh.iter_mut()).enumerate() {
            let c = &s.config;
            let rate = config.uncorrelated_rate_hz(c);
            if rate > 0.0 {
                let mut rng = slab_rng(config.seed, slab, PROCESS_UNCORRELATED + 1 + k as u64);
                let mean_gap = PS_PER_S / rate;
                let mut t = exp(&mut rng) * mean_gap;
                while t < span {
                    f.push(t + c.optical_delay_ps + jitter(&mut rng, c.jitter_sigma_ps));
                    t += exp(&mut rng) * mean_gap;
                }
            }
            for p in config.periodic.iter().filter(|p| p.channel == c.id) {
                // Jitter for periodic sources comes from a dedicated stream as well.
                let mut rng = slab_rng(config.seed, slab, 0x8000 + k as u64);
                let first = if start as u64 <= p.phase_ps {
                    p.phase_ps - start as u64
                } else {
                    (p.period_ps - (start as u64 - p.phase_ps) % p.period_ps) % p.period_ps
                };
                let mut t = first;
                while (t as f64) < span {
                    f.push(t as f64 + c.optical_delay_ps + jitter(&mut rng, c.jitter_sigma_ps));
                    t += p.period_ps;
                }
            }
            // Nearly sorted already (jitter ≪ gaps); the stable sort is adaptive.
            f.sort_by(f64::total_cmp);
        }

        for (s, f) in states.iter_mut().zip(&fresh) {
            let merged = merge_sorted(&s.pending, f.iter().map(|&x| start + x.round() as i64));
            s.pending = merged;
        }

        let last = slab + 1 == n_slabs;
        let release_before = if last { i64::MAX } else { start + SLAB_PS as i64 + min_shift };
        let mut batch = TagBatch::default();
        for s in states.iter_mut() {
            let cut = s.pending.partition_point(|&t| t < release_before);
            let mut out = Vec::with_capacity(cut);
            for &t in &s.pending[..cut] {
                if t < 0 || t > duration_ps {
                    continue;
                }
                s.incident += 1;
                if s.dead.accept(t) {
                    out.push((t - t.rem_euclid(resolution)) as u64);
                }
            }
            s.recorded += out.len() as u64;
            s.pending.drain(..cut);
            batch.channels.push((s.config.id, out));
        }
        sink(&batch)?;
    }

    let mut warnings = Vec::new();
    let channels = states
        .iter()
        .map(|s| {
            let loss = if s.incident == 0 { 0.0 } else { 1.0 - s.recorded as f64 / s.incident as f64 };
            if loss > DEAD_TIME_WARNING_FRACTION {
                let msg = format!(
                    "channel {}: dead time removed {:.0}% of tags; rates are far outside the low-loss regime",
                    s.config.id,
                    100.0 * loss
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
            ChannelSummary {
                id: s.config.id,
                incident: s.incident,
                recorded: s.recorded,
                dead_time_loss: loss,
            }
        })
        .collect();

    Ok(SimulationSummary {
        digest: config.digest(),
        duration_s: config.duration_s,
        seed: config.seed,
        triplets,
        channels,
        warnings,
    })
}

fn merge_sorted(a: &[i64], b: impl Iterator<Item = i64>) -> Vec<i64> {
    let b: Vec<i64> = b.collect();
    if a.is_empty() {
        return b;
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}
