//! Time-tag streams and their on-disk format.
//!
//! A tag file is a 16-byte header (`IHBT`, u16 version, u8 channel, 9
//! reserved zero bytes) followed by little-endian u64 picosecond stamps.
//! Metadata lives in a JSON sidecar next to it (`<file>.json`).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{write_atomic, write_json};

pub const MAGIC: &[u8; 4] = b"IHBT";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

/// Picoseconds per second.
pub const PS: f64 = 1e12;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StreamMetadata {
    pub config_hash: String,
    pub seed: u64,
    pub channel_id: u8,
    /// s
    pub duration: f64,
    pub count: u64,
    /// Hz
    pub rate: f64,
    /// δ at the slit position, if the stream came from a simulation
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slit_position: Option<f64>,
}

/// Strictly increasing picosecond detection times on one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTagStream {
    channel_id: u8,
    timestamps: Vec<u64>,
    duration_ps: u64,
    metadata: StreamMetadata,
}

/// First index at which `tags` fails to increase strictly.
pub fn first_unsorted(tags: &[u64]) -> Option<usize> {
    tags.windows(2).position(|w| w[1] <= w[0]).map(|i| i + 1)
}

impl TimeTagStream {
    pub fn new(
        channel_id: u8,
        timestamps: Vec<u64>,
        duration_ps: u64,
        config_hash: String,
        seed: u64,
    ) -> Result<Self> {
        if duration_ps == 0 {
            return Err(Error::domain("duration", "must be positive"));
        }
        if let Some(index) = first_unsorted(&timestamps) {
            return Err(Error::Unsorted { stream: "tags", index });
        }
        if timestamps.last().is_some_and(|&t| t >= duration_ps) {
            return Err(Error::domain("timestamps", "must lie below the stream duration"));
        }
        let duration = duration_ps as f64 / PS;
        let metadata = StreamMetadata {
            config_hash,
            seed,
            channel_id,
            duration,
            count: timestamps.len() as u64,
            rate: timestamps.len() as f64 / duration,
            delta: None,
            slit_position: None,
        };
        Ok(Self {
            channel_id,
            timestamps,
            duration_ps,
            metadata,
        })
    }

    /// Bare stream without provenance, for tests and external data.
    pub fn from_tags(channel_id: u8, timestamps: Vec<u64>, duration_ps: u64) -> Result<Self> {
        Self::new(channel_id, timestamps, duration_ps, String::new(), 0)
    }

    pub fn with_position(mut self, slit_position: f64, delta: f64) -> Self {
        self.metadata.slit_position = Some(slit_position);
        self.metadata.delta = Some(delta);
        self
    }

    pub fn channel_id(&self) -> u8 {
        self.channel_id
    }

    pub fn timestamps(&self) -> &[u64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn duration_ps(&self) -> u64 {
        self.duration_ps
    }

    /// s
    pub fn duration(&self) -> f64 {
        self.duration_ps as f64 / PS
    }

    pub fn metadata(&self) -> &StreamMetadata {
        &self.metadata
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.timestamps.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.channel_id);
        out.extend_from_slice(&[0u8; 9]);
        for t in &self.timestamps {
            out.extend_from_slice(&t.to_le_bytes());
        }
        out
    }

    /// Write the tag file and its sidecar; returns both paths.
    pub fn write(&self, path: &Path) -> Result<(PathBuf, PathBuf)> {
        write_atomic(path, &self.to_bytes())?;
        let side = sidecar_path(path);
        write_json(&side, &self.metadata)?;
        Ok((path.to_path_buf(), side))
    }

    /// Read a tag file. The sidecar supplies the duration and provenance; without
    /// one the duration is taken as one picosecond past the last tag.
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let (channel_id, timestamps) = parse_tags(path, &bytes)?;
        let side = sidecar_path(path);
        let meta: Option<StreamMetadata> = match fs::read(&side) {
            Ok(text) => Some(serde_json::from_slice(&text).map_err(|e| Error::Format {
                path: side.clone(),
                offset: e.column() as u64,
                reason: format!("sidecar: {e}"),
            })?),
            Err(_) => None,
        };
        let duration_ps = match &meta {
            Some(m) => (m.duration * PS).round() as u64,
            None => timestamps.last().map_or(1, |t| t + 1),
        };
        if let Some(&last) = timestamps.last() {
            if last >= duration_ps {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    offset: (HEADER_LEN + 8 * (timestamps.len() - 1)) as u64,
                    reason: "timestamp beyond the sidecar duration".into(),
                });
            }
        }
        let mut stream = Self::from_tags(channel_id, timestamps, duration_ps)?;
        if let Some(m) = meta {
            stream.metadata = StreamMetadata {
                channel_id,
                count: stream.timestamps.len() as u64,
                ..m
            };
        }
        Ok(stream)
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn parse_tags(path: &Path, bytes: &[u8]) -> Result<(u8, Vec<u64>)> {
    let fail = |offset: usize, reason: &str| Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason: reason.to_string(),
    };
    if bytes.len() < HEADER_LEN {
        return Err(fail(bytes.len(), "truncated header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(fail(0, "bad magic (expected IHBT)"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(fail(4, &format!("unsupported version {version}")));
    }
    let channel = bytes[6];
    if let Some(i) = bytes[7..HEADER_LEN].iter().position(|&b| b != 0) {
        return Err(fail(7 + i, "reserved header byte is not zero"));
    }
    let body = &bytes[HEADER_LEN..];
    if body.len() % 8 != 0 {
        return Err(fail(HEADER_LEN + body.len() / 8 * 8, "trailing partial timestamp"));
    }
    let tags: Vec<u64> = body
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if let Some(i) = first_unsorted(&tags) {
        return Err(fail(HEADER_LEN + 8 * i, "timestamps not strictly increasing"));
    }
    Ok((channel, tags))
}
