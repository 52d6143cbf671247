use std::fmt::Write as _;

use super::{disk_frame, parse_f64, parse_int};
use crate::error::{Error, Result};
use crate::model::PointTrajectory;

/// `trajectory_id,frame,x,y` rows sorted by id then frame; `#` lines are
/// comments.
/// Trajectory id, samples so far, line of its first sample.
type Pending = (i64, Vec<(u32, f64, f64)>, usize);

pub fn parse_points(text: &str, path: &str) -> Result<Vec<PointTrajectory>> {
    let mut out = Vec::new();
    let mut current: Option<Pending> = None;
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        if line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::parse(path, ln, format!("expected 4 fields, found {}", f.len())));
        }
        let id: i64 = parse_int(path, ln, f[0], "trajectory_id")?;
        let frame = disk_frame(path, ln, f[1])?;
        let sample = (frame, parse_f64(path, ln, f[2], "x")?, parse_f64(path, ln, f[3], "y")?);
        match &mut current {
            Some((cid, samples, _)) if *cid == id => {
                if samples.last().is_some_and(|s| s.0 >= frame) {
                    return Err(Error::parse(path, ln, "frames within a trajectory must increase"));
                }
                samples.push(sample);
            }
            Some((cid, _, _)) if *cid > id => {
                return Err(Error::parse(path, ln, "trajectory ids must be ascending"));
            }
            _ => {
                if let Some((cid, samples, start)) = current.take() {
                    out.push(PointTrajectory::new(cid, samples).map_err(|e| Error::parse(path, start, e.to_string()))?);
                }
                current = Some((id, vec![sample], ln));
            }
        }
    }
    if let Some((cid, samples, start)) = current {
        out.push(PointTrajectory::new(cid, samples).map_err(|e| Error::parse(path, start, e.to_string()))?);
    }
    Ok(out)
}

pub fn emit_points(trajectories: &[PointTrajectory]) -> String {
    let mut sorted: Vec<&PointTrajectory> = trajectories.iter().collect();
    sorted.sort_by_key(|t| t.id);
    let mut s = String::new();
    for t in sorted {
        for (f, x, y) in t.samples() {
            let _ = writeln!(s, "{},{},{},{}", t.id, f + 1, x, y);
        }
    }
    s
}
