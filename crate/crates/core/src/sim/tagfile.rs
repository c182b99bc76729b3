//! Tag files.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! 0   8  magic  b"CSPDCTAG"
//! 8   4  u32    format version (1)
//! 12  4  u32    reserved, zero
//! 16  4  u32    metadata length n
//! 20  n  JSON   StreamMetadata
//! ..  9  {u8 channel, u64 timestamp_ps} repeated, ordered by (time, channel)
//! ```
//!
//! The CSV form is `channel,timestamp_ps` with the metadata as leading `# key=value` lines.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::stream::StreamMetadata;
use super::{TagBatch, TimeTagStream};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"CSPDCTAG";
pub const VERSION: u32 = 1;
const RECORD_BYTES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagFormat {
    Binary,
    Csv,
}

pub struct TagWriter<W: Write> {
    inner: W,
    format: TagFormat,
    written: u64,
}

impl<W: Write> TagWriter<W> {
    pub fn new(mut inner: W, format: TagFormat, metadata: &StreamMetadata) -> std::io::Result<Self> {
        match format {
            TagFormat::Binary => {
                let json = serde_json::to_vec(metadata).expect("metadata serializes");
                inner.write_all(&MAGIC)?;
                inner.write_all(&VERSION.to_le_bytes())?;
                inner.write_all(&0u32.to_le_bytes())?;
                inner.write_all(&(json.len() as u32).to_le_bytes())?;
                inner.write_all(&json)?;
            }
            TagFormat::Csv => {
                if !metadata.digest.is_empty() {
                    writeln!(inner, "# digest={}", metadata.digest)?;
                }
                writeln!(inner, "# duration_s={}", metadata.duration_s)?;
                if let Some(seed) = metadata.seed {
                    writeln!(inner, "# seed={seed}")?;
                }
                writeln!(inner, "# tag_resolution_ps={}", metadata.tag_resolution_ps)?;
                writeln!(inner, "channel,timestamp_ps")?;
            }
        }
        Ok(TagWriter {
            inner,
            format,
            written: 0,
        })
    }

    pub fn write_record(&mut self, channel: u8, t: u64) -> std::io::Result<()> {
        self.written += 1;
        match self.format {
            TagFormat::Binary => {
                let mut rec = [0u8; RECORD_BYTES];
                rec[0] = channel;
                rec[1..].copy_from_slice(&t.to_le_bytes());
                self.inner.write_all(&rec)
            }
            TagFormat::Csv => writeln!(self.inner, "{channel},{t}"),
        }
    }

    /// Write a batch in (time, channel) order.
    pub fn write_batch(&mut self, batch: &TagBatch) -> std::io::Result<()> {
        let mut cursors = vec![0usize; batch.channels.len()];
        loop {
            let next = batch
                .channels
                .iter()
                .enumerate()
                .filter_map(|(k, (c, v))| v.get(cursors[k]).map(|&t| (t, *c, k)))
                .min();
            let Some((t, c, k)) = next else { break };
            cursors[k] += 1;
            self.write_record(c, t)?;
        }
        Ok(())
    }

    pub fn records_written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

fn write_stream(path: &Path, stream: &TimeTagStream, format: TagFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = TagWriter::new(BufWriter::new(file), format, &stream.metadata).map_err(|e| Error::io(path, e))?;
    for (c, t) in stream.records() {
        w.write_record(c, t).map_err(|e| Error::io(path, e))?;
    }
    w.finish().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_tags_binary(path: impl AsRef<Path>, stream: &TimeTagStream) -> Result<()> {
    write_stream(path.as_ref(), stream, TagFormat::Binary)
}

pub fn write_tags_csv(path: impl AsRef<Path>, stream: &TimeTagStream) -> Result<()> {
    write_stream(path.as_ref(), stream, TagFormat::Csv)
}

/// Streaming reader for either format, detected from the first bytes.
pub struct TagReader<R: BufRead> {
    inner: R,
    format: TagFormat,
    /// Metadata fields found in the file; CSV files may omit any of them.
    pub duration_s: Option<f64>,
    pub digest: String,
    pub seed: Option<u64>,
    pub tag_resolution_ps: Option<u64>,
    line: usize,
    buf: String,
}

impl<R: BufRead> TagReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let head = inner.fill_buf().map_err(|e| Error::Parse(format!("tag file: {e}")))?;
        if head.len() >= MAGIC.len() && head[..MAGIC.len()] == MAGIC {
            let mut fixed = [0u8; 20];
            inner.read_exact(&mut fixed).map_err(|_| Error::Parse("tag file: truncated header".into()))?;
            let version = u32::from_le_bytes(fixed[8..12].try_into().unwrap());
            if version != VERSION {
                return Err(Error::Parse(format!("tag file: unsupported version {version}")));
            }
            let n = u32::from_le_bytes(fixed[16..20].try_into().unwrap()) as usize;
            let mut json = vec![0u8; n];
            inner.read_exact(&mut json).map_err(|_| Error::Parse("tag file: truncated metadata".into()))?;
            let meta: StreamMetadata =
                serde_json::from_slice(&json).map_err(|e| Error::Parse(format!("tag file metadata: {e}")))?;
            return Ok(TagReader {
                inner,
                format: TagFormat::Binary,
                duration_s: Some(meta.duration_s),
                digest: meta.digest,
                seed: meta.seed,
                tag_resolution_ps: Some(meta.tag_resolution_ps),
                line: 0,
                buf: String::new(),
            });
        }
        let mut r = TagReader {
            inner,
            format: TagFormat::Csv,
            duration_s: None,
            digest: String::new(),
            seed: None,
            tag_resolution_ps: None,
            line: 0,
            buf: String::new(),
        };
        // Consume comment lines and the column header.
        loop {
            let peek = r.inner.fill_buf().map_err(|e| Error::Parse(format!("tag file: {e}")))?;
            if peek.is_empty() {
                break;
            }
            let is_meta = peek[0] == b'#' || peek[0].is_ascii_alphabetic() || peek[0] == b'\n' || peek[0] == b'\r';
            if !is_meta {
                break;
            }
            r.next_line()?;
            let line = r.buf.trim().to_string();
            if let Some(kv) = line.strip_prefix('#') {
                r.absorb_meta(kv)?;
            } else if !line.is_empty() && line.replace(' ', "") != "channel,timestamp_ps" {
                return Err(Error::Parse(format!("tag CSV line {}: unexpected header {line:?}", r.line)));
            }
        }
        Ok(r)
    }

    pub fn format(&self) -> TagFormat {
        self.format
    }

    fn next_line(&mut self) -> Result<usize> {
        self.buf.clear();
        self.line += 1;
        self.inner
            .read_line(&mut self.buf)
            .map_err(|e| Error::Parse(format!("tag CSV line {}: {e}", self.line)))
    }

    fn absorb_meta(&mut self, kv: &str) -> Result<()> {
        let Some((k, v)) = kv.split_once('=') else { return Ok(()) };
        let bad = |what: &str| Error::Parse(format!("tag CSV metadata {what}: {v:?}"));
        let v = v.trim();
        match k.trim() {
            "duration_s" => self.duration_s = Some(v.parse().map_err(|_| bad("duration_s"))?),
            "digest" => self.digest = v.to_string(),
            "seed" => self.seed = Some(v.parse().map_err(|_| bad("seed"))?),
            "tag_resolution_ps" => self.tag_resolution_ps = Some(v.parse().map_err(|_| bad("tag_resolution_ps"))?),
            _ => {}
        }
        Ok(())
    }

    /// Next `(channel, timestamp_ps)` record, or `None` at end of file.
    pub fn next_record(&mut self) -> Result<Option<(u8, u64)>> {
        match self.format {
            TagFormat::Binary => {
                let mut rec = [0u8; RECORD_BYTES];
                match read_full(&mut self.inner, &mut rec) {
                    Ok(0) => Ok(None),
                    Ok(RECORD_BYTES) => Ok(Some((rec[0], u64::from_le_bytes(rec[1..].try_into().unwrap())))),
                    Ok(_) => Err(Error::Parse("tag file: truncated record".into())),
                    Err(e) => Err(Error::Parse(format!("tag file: {e}"))),
                }
            }
            TagFormat::Csv => loop {
                if self.next_line()? == 0 {
                    return Ok(None);
                }
                let line = self.buf.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let parsed = line
                    .split_once(',')
                    .and_then(|(c, t)| Some((c.trim().parse::<u8>().ok()?, t.trim().parse::<u64>().ok()?)));
                return match parsed {
                    Some(r) => Ok(Some(r)),
                    None => Err(Error::Parse(format!("tag CSV line {}: expected `channel,timestamp_ps`, got {line:?}", self.line))),
                };
            },
        }
    }
}

impl<R: BufRead> Iterator for TagReader<R> {
    type Item = Result<(u8, u64)>;
    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..])? {
            0 => break,
            k => n += k,
        }
    }
    Ok(n)
}

/// Load a whole tag file. Without a stored or given duration, the last tag sets it.
pub fn read_tags(path: impl AsRef<Path>, duration_s: Option<f64>) -> Result<TimeTagStream> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = TagReader::new(BufReader::new(file))?;
    let records: Vec<(u8, u64)> = reader.by_ref().collect::<Result<_>>()?;
    let duration = match duration_s.or(reader.duration_s) {
        Some(d) => d,
        None => {
            let last = records.iter().map(|r| r.1).max().unwrap_or(0);
            log::warn!("{}: no duration recorded; using the last tag time", path.display());
            (last as f64 / 1e12).max(1e-12)
        }
    };
    let metadata = StreamMetadata {
        digest: reader.digest.clone(),
        duration_s: duration,
        seed: reader.seed,
        tag_resolution_ps: reader.tag_resolution_ps.unwrap_or(1),
    };
    TimeTagStream::from_records(records, metadata)
}
