use std::path::{Path, PathBuf};

use super::{parse_detections, parse_features, parse_points, parse_tracks, read_bytes, read_text, FeatureKind};
use crate::error::Result;
use crate::metrics::LabeledBox;
use crate::model::{Detection, PointTrajectory};

/// Input files of one sequence. Only `det` is required.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequencePaths {
    pub det: PathBuf,
    pub emb: Option<PathBuf>,
    pub hist: Option<PathBuf>,
    pub points: Option<PathBuf>,
    pub gt: Option<PathBuf>,
}

impl SequencePaths {
    /// The conventional layout written by the synthetic generator:
    /// `det.txt`, and when present `emb.bin`, `hist.bin`, `points.csv`,
    /// `gt.txt`.
    pub fn in_dir(dir: &Path) -> Self {
        let opt = |name: &str| Some(dir.join(name)).filter(|p| p.is_file());
        Self {
            det: dir.join("det.txt"),
            emb: opt("emb.bin"),
            hist: opt("hist.bin"),
            points: opt("points.csv"),
            gt: opt("gt.txt"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sequence {
    pub detections: Vec<Detection>,
    pub points: Vec<PointTrajectory>,
    pub ground_truth: Option<Vec<LabeledBox>>,
}

pub fn load_sequence(paths: &SequencePaths) -> Result<Sequence> {
    let name = |p: &Path| p.display().to_string();
    let det = parse_detections(&read_text(&paths.det)?, &name(&paths.det))?;
    let emb = match &paths.emb {
        Some(p) => Some(parse_features(&read_bytes(p)?, FeatureKind::Embedding)?),
        None => None,
    };
    let hist = match &paths.hist {
        Some(p) => Some(parse_features(&read_bytes(p)?, FeatureKind::Histogram)?),
        None => None,
    };
    let points = match &paths.points {
        Some(p) => parse_points(&read_text(p)?, &name(p))?,
        None => Vec::new(),
    };
    let ground_truth = match &paths.gt {
        Some(p) => Some(parse_tracks(&read_text(p)?, &name(p))?.boxes()),
        None => None,
    };
    Ok(Sequence {
        detections: det.to_detections(emb.as_ref(), hist.as_ref())?,
        points,
        ground_truth,
    })
}
