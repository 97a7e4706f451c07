//! On-disk recording layout: one CSV per repetition plus a JSON manifest.
//!
//! ```text
//! manifest.json   { "sample_rate_hz": 1100.0,
//!                   "recordings": [ { "subject": 0, "gesture": "One",
//!                                     "repetition": 0, "file": "s0_One_r00.csv" } ] }
//! s0_One_r00.csv  ch1,ch2,ch3
//!                 1.234567890e-1,-2.000000000e0,...
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::signal::{Segment, CHANNELS, MIN_INGEST_LEN};
use crate::{Error, Gesture, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHANNEL_HEADER: [&str; CHANNELS] = ["ch1", "ch2", "ch3"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sample_rate_hz: f64,
    pub recordings: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject: u32,
    pub gesture: String,
    pub repetition: u32,
    pub file: PathBuf,
}

/// Shortest decimal text that parses back to exactly `v`.
pub fn format_real(v: f64) -> String {
    format!("{v:e}")
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if !(manifest.sample_rate_hz > 0.0) {
        return Err(Error::format(path, "sample_rate_hz must be positive"));
    }
    Ok(manifest)
}

/// Reads one three-channel window.
pub fn read_window(path: &Path) -> Result<[Vec<f64>; CHANNELS]> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::format(path, format!("{other:?}")),
        })?;
    let header = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .clone();
    if header.len() != CHANNELS {
        return Err(Error::format(
            path,
            format!("expected {CHANNELS} channel columns, found {}", header.len()),
        ));
    }
    let mut channels: [Vec<f64>; CHANNELS] = Default::default();
    for record in reader.records() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != CHANNELS {
            return Err(Error::format(
                path,
                format!("row {row} has {} columns, expected {CHANNELS}", record.len()),
            ));
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row,
                message: format!("non-numeric cell {cell:?} in column {}", header[c].trim()),
            })?;
            channels[c].push(v);
        }
    }
    if channels[0].len() < MIN_INGEST_LEN {
        return Err(Error::format(
            path,
            format!(
                "window has {} samples, need at least {MIN_INGEST_LEN}",
                channels[0].len()
            ),
        ));
    }
    Ok(channels)
}

/// Loads every recording listed in `manifest`; file paths are relative to `root`.
///
/// Segments come back sorted by (subject, gesture, repetition).
pub fn load_dataset(root: &Path, manifest: &Path) -> Result<Vec<Segment<f64>>> {
    let m = read_manifest(manifest)?;
    let mut seen = BTreeSet::new();
    let mut segments = Vec::with_capacity(m.recordings.len());
    for entry in &m.recordings {
        let gesture: Gesture = entry.gesture.parse().map_err(|_| {
            Error::format(manifest, format!("unknown gesture {:?}", entry.gesture))
        })?;
        if !seen.insert((entry.subject, gesture, entry.repetition)) {
            return Err(Error::data(format!(
                "manifest lists subject {} {gesture} repetition {} twice",
                entry.subject, entry.repetition
            )));
        }
        let path = root.join(&entry.file);
        let windows = read_window(&path)?;
        segments.push(Segment::new(gesture.into(), entry.subject, entry.repetition, windows)?);
    }
    segments.sort_by_key(|s| s.sort_key());
    Ok(segments)
}

/// Loads `root/manifest.json`.
pub fn load_dataset_dir(root: &Path) -> Result<Vec<Segment<f64>>> {
    load_dataset(root, &root.join(MANIFEST_FILE))
}

pub fn recording_file_name(subject: u32, gesture: Gesture, repetition: u32) -> String {
    format!("s{subject}_{gesture}_r{repetition:02}.csv")
}

pub fn write_window(path: &Path, channels: &[Vec<f64>; CHANNELS]) -> Result<()> {
    let mut out = String::with_capacity(channels[0].len() * 50);
    out.push_str(&CHANNEL_HEADER.join(","));
    out.push('\n');
    for k in 0..channels[0].len() {
        let row: Vec<String> = channels.iter().map(|c| format_real(c[k])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes one CSV per segment and `manifest.json` into `root`.
pub fn save_dataset(root: &Path, segments: &[Segment<f64>], sample_rate_hz: f64) -> Result<Manifest> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut recordings = Vec::with_capacity(segments.len());
    for s in segments {
        let gesture = s.label().gesture();
        let file = PathBuf::from(recording_file_name(s.subject_id(), gesture, s.repetition_index()));
        write_window(&root.join(&file), s.channel_windows())?;
        recordings.push(ManifestEntry {
            subject: s.subject_id(),
            gesture: gesture.name().to_string(),
            repetition: s.repetition_index(),
            file,
        });
    }
    let manifest = Manifest {
        sample_rate_hz,
        recordings,
    };
    let path = root.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
