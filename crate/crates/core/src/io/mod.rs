//! File formats and configuration. Frames are 1-based on disk and 0-based in
//! memory; the conversion happens only here.

mod config;
mod features;
mod graph;
mod mot;
mod points;
mod sequence;
mod weights;

use std::path::Path;

pub use config::{Config, MetricsConfig, TrackingConfig};
pub use features::{emit_features, parse_features, FeatureKind, FeatureTable};
pub use graph::{emit_graph, parse_graph, GraphDump};
pub use mot::{emit_mot, parse_detections, parse_tracks, MotFile, MotRecord};
pub use points::{emit_points, parse_points};
pub use sequence::{load_sequence, Sequence, SequencePaths};
pub use weights::{emit_weights, parse_weights, WeightsFile};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = concat!("hypertrack ", env!("CARGO_PKG_VERSION"));

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".into(),
    });
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn parse_f64(path: &str, line: usize, field: &str, name: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("{name}: cannot parse {field:?} as a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("{name}: non-finite value")));
    }
    Ok(v)
}

fn parse_int<T: std::str::FromStr>(path: &str, line: usize, field: &str, name: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("{name}: cannot parse {field:?} as an integer")))
}

/// Converts a 1-based on-disk frame number.
fn disk_frame(path: &str, line: usize, field: &str) -> Result<u32> {
    let f: u32 = parse_int(path, line, field, "frame")?;
    f.checked_sub(1)
        .ok_or_else(|| Error::parse(path, line, "frame numbers start at 1"))
}
