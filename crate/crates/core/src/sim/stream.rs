use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ScenarioConfig, SimulationSummary};
use crate::error::{Error, Result};

/// Header stored alongside tags in files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMetadata {
    /// SHA-256 of the generating scenario, or empty for hand-made streams.
    pub digest: String,
    pub duration_s: f64,
    pub seed: Option<u64>,
    pub tag_resolution_ps: u64,
}

impl StreamMetadata {
    pub fn from_summary(config: &ScenarioConfig, summary: &SimulationSummary) -> Self {
        StreamMetadata {
            digest: summary.digest.clone(),
            duration_s: config.duration_s,
            seed: Some(config.seed),
            tag_resolution_ps: config.tag_resolution_ps,
        }
    }

    pub fn untracked(duration_s: f64) -> Self {
        StreamMetadata {
            digest: String::new(),
            duration_s,
            seed: None,
            tag_resolution_ps: 1,
        }
    }
}

/// Tags held per channel, each list sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTagStream {
    channels: BTreeMap<u8, Vec<u64>>,
    pub metadata: StreamMetadata,
}

impl TimeTagStream {
    pub fn new(channels: BTreeMap<u8, Vec<u64>>, metadata: StreamMetadata) -> Result<Self> {
        let limit = (metadata.duration_s * 1e12).round() as u64;
        for tags in channels.values() {
            if let Some(i) = tags.windows(2).position(|w| w[1] < w[0]) {
                return Err(Error::Unsorted { index: i + 1 });
            }
            if let Some(&t) = tags.last() {
                if t > limit {
                    return Err(Error::invalid(
                        "time tags",
                        format!("tag at {t} ps lies beyond the {} s acquisition", metadata.duration_s),
                    ));
                }
            }
        }
        Ok(TimeTagStream { channels, metadata })
    }

    /// Build from unordered `(channel, ps)` records.
    pub fn from_records(records: impl IntoIterator<Item = (u8, u64)>, metadata: StreamMetadata) -> Result<Self> {
        let mut channels: BTreeMap<u8, Vec<u64>> = BTreeMap::new();
        for (c, t) in records {
            channels.entry(c).or_default().push(t);
        }
        for v in channels.values_mut() {
            v.sort_unstable();
        }
        Self::new(channels, metadata)
    }

    /// Tags of one channel; empty if the channel never fired.
    pub fn channel(&self, id: u8) -> &[u64] {
        self.channels.get(&id).map_or(&[], Vec::as_slice)
    }

    pub fn has_channel(&self, id: u8) -> bool {
        self.channels.get(&id).is_some_and(|v| !v.is_empty())
    }

    pub fn channel_ids(&self) -> impl Iterator<Item = u8> + '_ {
        self.channels.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.channels.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All records ordered by time, ties broken by channel id.
    pub fn records(&self) -> Vec<(u8, u64)> {
        let mut out: Vec<(u8, u64)> = self
            .channels
            .iter()
            .flat_map(|(&c, v)| v.iter().map(move |&t| (c, t)))
            .collect();
        out.sort_unstable_by_key(|&(c, t)| (t, c));
        out
    }

    /// A copy with `offset_ps` added to every tag of `channel`, dropping tags that leave the window.
    pub fn shifted(&self, channel: u8, offset_ps: i64) -> TimeTagStream {
        let limit = (self.metadata.duration_s * 1e12).round() as i64;
        let mut channels = self.channels.clone();
        if let Some(v) = channels.get_mut(&channel) {
            *v = v
                .iter()
                .map(|&t| t as i64 + offset_ps)
                .filter(|&t| (0..=limit).contains(&t))
                .map(|t| t as u64)
                .collect();
        }
        TimeTagStream {
            channels,
            metadata: self.metadata.clone(),
        }
    }
}
