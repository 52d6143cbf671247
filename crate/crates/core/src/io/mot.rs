use std::collections::HashSet;
use std::fmt::Write as _;
use std::sync::Arc;

use super::{disk_frame, parse_f64, parse_int, FeatureTable};
use crate::error::{Error, Result};
use crate::metrics::LabeledBox;
use crate::model::{Detection, Tracklet};

/// One `frame,id,left,top,width,height,conf,x,y,z` row, frame 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRecord {
    pub frame: u32,
    pub id: i64,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub conf: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl MotRecord {
    pub fn to_box(&self) -> LabeledBox {
        LabeledBox::new(self.frame, self.id, self.left, self.top, self.width, self.height)
    }

    pub fn from_detection(id: i64, d: &Detection) -> Self {
        Self {
            frame: d.frame,
            id,
            left: d.left(),
            top: d.top(),
            width: d.width,
            height: d.height,
            conf: d.confidence,
            x: -1.0,
            y: -1.0,
            z: -1.0,
        }
    }
}

/// Comment lines (without the leading `#`) and records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MotFile {
    pub header: Vec<String>,
    pub records: Vec<MotRecord>,
}

impl MotFile {
    /// Lifts raw detections; detection ids are row indices so that feature
    /// rows stay keyed to them.
    pub fn to_detections(&self, embeddings: Option<&FeatureTable>, histograms: Option<&FeatureTable>) -> Result<Vec<Detection>> {
        for t in [embeddings, histograms].into_iter().flatten() {
            if t.rows() != self.records.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} feature rows for {} detections",
                    t.rows(),
                    self.records.len()
                )));
            }
        }
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut d = Detection::from_ltwh(i as u64, r.frame, r.left, r.top, r.width, r.height, r.conf)?;
                if let Some(e) = embeddings {
                    d = d.with_embedding(Arc::from(e.row(i)));
                }
                if let Some(h) = histograms {
                    d = d.with_histogram(Arc::from(h.row(i)));
                }
                Ok(d)
            })
            .collect()
    }

    /// Results file from labeled trajectories, sorted by frame then id.
    pub fn from_tracks(header: Vec<String>, tracks: &[(i64, Tracklet)]) -> Self {
        let mut records: Vec<MotRecord> = tracks
            .iter()
            .flat_map(|(id, t)| t.detections().iter().map(move |d| MotRecord::from_detection(*id, d)))
            .collect();
        records.sort_by_key(|r| (r.frame, r.id));
        Self { header, records }
    }

    pub fn boxes(&self) -> Vec<LabeledBox> {
        self.records.iter().map(MotRecord::to_box).collect()
    }
}

fn parse_lines(text: &str, path: &str) -> Result<MotFile> {
    let mut out = MotFile::default();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        if let Some(c) = line.strip_prefix('#') {
            out.header.push(c.to_string());
            continue;
        }
        if line.trim().is_empty() {
            return Err(Error::parse(path, ln, "empty line"));
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(Error::parse(path, ln, format!("expected 10 fields, found {}", f.len())));
        }
        let r = MotRecord {
            frame: disk_frame(path, ln, f[0])?,
            id: parse_int(path, ln, f[1], "id")?,
            left: parse_f64(path, ln, f[2], "left")?,
            top: parse_f64(path, ln, f[3], "top")?,
            width: parse_f64(path, ln, f[4], "width")?,
            height: parse_f64(path, ln, f[5], "height")?,
            conf: parse_f64(path, ln, f[6], "conf")?,
            x: parse_f64(path, ln, f[7], "x")?,
            y: parse_f64(path, ln, f[8], "y")?,
            z: parse_f64(path, ln, f[9], "z")?,
        };
        if r.width <= 0.0 || r.height <= 0.0 {
            return Err(Error::parse(path, ln, "box width and height must be positive"));
        }
        out.records.push(r);
    }
    Ok(out)
}

/// Detection file: frames must be non-decreasing.
pub fn parse_detections(text: &str, path: &str) -> Result<MotFile> {
    let file = parse_lines(text, path)?;
    let mut rows = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#')).map(|(i, _)| i + 1);
    let mut prev = 0;
    for r in &file.records {
        let ln = rows.next().unwrap_or(0);
        if r.frame < prev {
            return Err(Error::parse(path, ln, "frames are not in ascending order"));
        }
        prev = r.frame;
    }
    Ok(file)
}

/// Tracking results or ground truth: any order, but each `(frame, id)`
/// appears once.
pub fn parse_tracks(text: &str, path: &str) -> Result<MotFile> {
    let file = parse_lines(text, path)?;
    let mut seen = HashSet::new();
    let rows = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#')).map(|(i, _)| i + 1);
    for (r, ln) in file.records.iter().zip(rows) {
        if !seen.insert((r.frame, r.id)) {
            return Err(Error::parse(path, ln, format!("identity {} appears twice in frame {}", r.id, r.frame + 1)));
        }
    }
    Ok(file)
}

pub fn emit_mot(file: &MotFile) -> String {
    let mut s = String::new();
    for h in &file.header {
        let _ = writeln!(s, "#{h}");
    }
    for r in &file.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.frame + 1,
            r.id,
            r.left,
            r.top,
            r.width,
            r.height,
            r.conf,
            r.x,
            r.y,
            r.z
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANON: &str = "# produced by hand\n1,-1,10,20,30,40,0.9,-1,-1,-1\n1,-1,100.5,20.25,30,40,0.75,-1,-1,-1\n3,-1,12,22,30,40,0.5,-1,-1,-1\n";

    #[test]
    fn round_trip_is_byte_identical() {
        let f = parse_detections(CANON, "det.txt").unwrap();
        assert_eq!(f.records.len(), 3);
        assert_eq!(f.records[2].frame, 2);
        assert_eq!(f.header, vec![" produced by hand".to_string()]);
        assert_eq!(emit_mot(&f), CANON);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let bad = "1,-1,10,20,30,40,0.9,-1,-1,-1\n2,-1,10,20,30\n";
        match parse_detections(bad, "det.txt") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_detections("0,-1,10,20,30,40,0.9,-1,-1,-1\n", "d").is_err());
        assert!(parse_detections("2,-1,1,1,1,1,1,-1,-1,-1\n1,-1,1,1,1,1,1,-1,-1,-1\n", "d").is_err());
        assert!(parse_detections("1,-1,1,1,0,1,1,-1,-1,-1\n", "d").is_err());
        assert!(parse_tracks("1,4,1,1,1,1,1,-1,-1,-1\n1,4,1,1,1,1,1,-1,-1,-1\n", "gt").is_err());
    }

    #[test]
    fn detections_use_centres() {
        let f = parse_detections(CANON, "det.txt").unwrap();
        let d = f.to_detections(None, None).unwrap();
        assert_eq!((d[0].cx, d[0].cy), (25.0, 40.0));
        assert_eq!(d[1].id, 1);
    }

    #[test]
    fn feature_count_must_match() {
        let f = parse_detections(CANON, "det.txt").unwrap();
        let t = FeatureTable::new(2, vec![0.0; 4]).unwrap();
        assert!(matches!(f.to_detections(Some(&t), None), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn results_sorted_by_frame() {
        let a = Tracklet::new(0, vec![Detection::new(0, 3, 5.0, 5.0, 2.0, 2.0, 1.0).unwrap()]).unwrap();
        let b = Tracklet::new(1, vec![Detection::new(1, 1, 5.0, 5.0, 2.0, 2.0, 1.0).unwrap()]).unwrap();
        let f = MotFile::from_tracks(vec![], &[(1, a), (2, b)]);
        let frames: Vec<u32> = f.records.iter().map(|r| r.frame).collect();
        assert_eq!(frames, vec![1, 3]);
    }
}
