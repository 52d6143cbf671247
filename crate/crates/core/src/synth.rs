//! Seeded synthetic scenarios: constant-velocity targets with detector noise,
//! dropouts, clutter, appearance features and point trajectories.

use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{emit_features, emit_mot, emit_points, write_atomic, FeatureKind, FeatureTable, MotFile, MotRecord, TOOL_VERSION};
use crate::model::PointTrajectory;

pub const EMBEDDING_DIM: usize = 16;
pub const HISTOGRAM_BINS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub start: (f64, f64),
    pub velocity: (f64, f64),
    pub size: (f64, f64),
    /// Frames with no detection at all.
    pub occluded: Option<Range<u32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub frames: u32,
    pub targets: Vec<TargetSpec>,
    pub dropout: f64,
    /// Expected spurious detections per frame.
    pub clutter: f64,
    pub position_noise: f64,
}

impl Scenario {
    pub const NAMES: [&'static str; 2] = ["cross2", "cross4-occl"];

    pub fn by_name(name: &str) -> Result<Self> {
        let t = |x: f64, y: f64, vx: f64, vy: f64| TargetSpec {
            start: (x, y),
            velocity: (vx, vy),
            size: (40.0, 80.0),
            occluded: None,
        };
        match name {
            "cross2" => Ok(Self {
                name: name.into(),
                frames: 100,
                targets: vec![t(80.0, 200.0, 4.0, 0.5), t(480.0, 250.0, -4.0, 0.0)],
                dropout: 0.05,
                clutter: 0.02,
                position_noise: 1.5,
            }),
            "cross4-occl" => Ok(Self {
                name: name.into(),
                frames: 100,
                targets: vec![
                    t(60.0, 150.0, 4.0, 0.3),
                    t(540.0, 180.0, -4.0, 0.0),
                    TargetSpec {
                        occluded: Some(45..55),
                        ..t(60.0, 330.0, 4.0, -0.2)
                    },
                    t(540.0, 300.0, -4.2, 0.2),
                ],
                dropout: 0.05,
                clutter: 0.02,
                position_noise: 1.5,
            }),
            other => Err(Error::Config(format!(
                "unknown scenario {other:?}; expected one of {:?}",
                Self::NAMES
            ))),
        }
    }

    fn center(&self, k: usize, f: u32) -> (f64, f64) {
        let s = &self.targets[k];
        (s.start.0 + s.velocity.0 * f as f64, s.start.1 + s.velocity.1 * f as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub detections: MotFile,
    pub ground_truth: MotFile,
    pub points: Vec<PointTrajectory>,
    pub embeddings: FeatureTable,
    pub histograms: FeatureTable,
}

impl SynthOutput {
    /// Writes `det.txt`, `gt.txt`, `points.csv`, `emb.bin`, `hist.bin` and a
    /// `manifest.json` carrying the header lines and a SHA-256 per file (the
    /// binary feature layout has no room for a header).
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut points: String = self.detections.header.iter().map(|h| format!("#{h}\n")).collect();
        points.push_str(&emit_points(&self.points));
        let files: [(&str, Vec<u8>); 5] = [
            ("det.txt", emit_mot(&self.detections).into_bytes()),
            ("gt.txt", emit_mot(&self.ground_truth).into_bytes()),
            ("points.csv", points.into_bytes()),
            ("emb.bin", emit_features(&self.embeddings, FeatureKind::Embedding)),
            ("hist.bin", emit_features(&self.histograms, FeatureKind::Histogram)),
        ];
        let mut digests = serde_json::Map::new();
        for (name, bytes) in &files {
            write_atomic(&dir.join(name), bytes)?;
            digests.insert((*name).into(), hex::encode(Sha256::digest(bytes)).into());
        }
        let manifest = serde_json::json!({
            "tool": TOOL_VERSION,
            "header": self.detections.header,
            "sha256": digests,
        });
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Internal(e.to_string()))? + "\n";
        write_atomic(&dir.join("manifest.json"), text.as_bytes())
    }
}

fn unit(v: Vec<f32>) -> Vec<f32> {
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt().max(1e-12);
    v.into_iter().map(|x| x / n).collect()
}

pub fn generate(scenario: &Scenario, seed: u64, header: &[String]) -> Result<SynthOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = |s: f64| Normal::new(0.0, s).map_err(|e| Error::Config(e.to_string()));
    let pos = std(scenario.position_noise)?;
    let size_noise = std(1.0)?;
    let emb_noise = std(0.15)?;
    let unit_normal = std(1.0)?;

    let n = scenario.targets.len();
    let base_emb: Vec<Vec<f32>> = (0..n)
        .map(|_| unit((0..EMBEDDING_DIM).map(|_| unit_normal.sample(&mut rng) as f32).collect()))
        .collect();
    let base_hist: Vec<Vec<f32>> = (0..n)
        .map(|_| (0..HISTOGRAM_BINS).map(|_| rng.random_range(0.0f32..1.0).powi(4)).collect())
        .collect();

    let mut title = header.to_vec();
    title.push(format!(" synth scenario={} seed={seed}", scenario.name));
    let mut dets = MotFile {
        header: title.clone(),
        records: Vec::new(),
    };
    let mut gt = MotFile {
        header: title,
        records: Vec::new(),
    };
    let mut emb = Vec::new();
    let mut hist = Vec::new();

    for f in 0..scenario.frames {
        for (k, spec) in scenario.targets.iter().enumerate() {
            let (cx, cy) = scenario.center(k, f);
            let (w, h) = spec.size;
            gt.records.push(record(f, k as i64 + 1, cx, cy, w, h, 1.0));
            let hidden = spec.occluded.as_ref().is_some_and(|r| r.contains(&f));
            if hidden || rng.random_bool(scenario.dropout) {
                continue;
            }
            let conf = rng.random_range(0.7..1.0);
            dets.records.push(record(
                f,
                -1,
                cx + pos.sample(&mut rng),
                cy + pos.sample(&mut rng),
                (w + size_noise.sample(&mut rng)).max(4.0),
                (h + size_noise.sample(&mut rng)).max(4.0),
                conf,
            ));
            emb.extend(unit(base_emb[k].iter().map(|v| v + emb_noise.sample(&mut rng) as f32).collect()));
            hist.extend(base_hist[k].iter().map(|v| v * rng.random_range(0.8f32..1.2)));
        }
        if rng.random_bool(scenario.clutter.clamp(0.0, 1.0)) {
            let conf = rng.random_range(0.3..0.6);
            dets.records.push(record(
                f,
                -1,
                rng.random_range(40.0..600.0),
                rng.random_range(40.0..440.0),
                40.0,
                80.0,
                conf,
            ));
            emb.extend(unit((0..EMBEDDING_DIM).map(|_| unit_normal.sample(&mut rng) as f32).collect()));
            hist.extend((0..HISTOGRAM_BINS).map(|_| rng.random_range(0.0f32..1.0)));
        }
    }

    let points = point_trajectories(scenario, &mut rng);
    Ok(SynthOutput {
        detections: dets,
        ground_truth: gt,
        points,
        embeddings: FeatureTable::new(EMBEDDING_DIM, emb)?,
        histograms: FeatureTable::new(HISTOGRAM_BINS, hist)?,
    })
}

fn record(frame: u32, id: i64, cx: f64, cy: f64, w: f64, h: f64, conf: f64) -> MotRecord {
    // Round to hundredths so the text form is short and stable.
    let r = |v: f64| (v * 100.0).round() / 100.0;
    MotRecord {
        frame,
        id,
        left: r(cx - w / 2.0),
        top: r(cy - h / 2.0),
        width: r(w),
        height: r(h),
        conf: r(conf),
        x: -1.0,
        y: -1.0,
        z: -1.0,
    }
}

/// Points riding on the targets with lifespans of 8 to 25 frames, plus a few
/// static background points.
fn point_trajectories(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Vec<PointTrajectory> {
    let mut out = Vec::new();
    let mut next_id = 0i64;
    for f in 0..scenario.frames {
        for (k, spec) in scenario.targets.iter().enumerate() {
            for _ in 0..3 {
                let life = rng.random_range(8..=25u32);
                let (ox, oy) = (
                    rng.random_range(-0.35..0.35) * spec.size.0,
                    rng.random_range(-0.35..0.35) * spec.size.1,
                );
                let end = (f + life).min(scenario.frames);
                if end - f < 2 {
                    continue;
                }
                let samples: Vec<(u32, f64, f64)> = (f..end)
                    .map(|g| {
                        let (cx, cy) = scenario.center(k, g);
                        let r = |v: f64| (v * 100.0).round() / 100.0;
                        (g, r(cx + ox), r(cy + oy))
                    })
                    .collect();
                out.push(PointTrajectory::new(next_id, samples).expect("increasing frames"));
                next_id += 1;
            }
        }
    }
    for _ in 0..20 {
        let (x, y) = (rng.random_range(0.0..640.0_f64).round(), rng.random_range(0.0..480.0_f64).round());
        let start = rng.random_range(0..scenario.frames.saturating_sub(2).max(1));
        let end = (start + rng.random_range(8..=25)).min(scenario.frames);
        if end - start >= 2 {
            out.push(PointTrajectory::new(next_id, (start..end).map(|g| (g, x, y)).collect()).expect("increasing frames"));
            next_id += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_output_is_reproducible() {
        let s = Scenario::by_name("cross2").unwrap();
        let a = generate(&s, 1, &[]).unwrap();
        let b = generate(&s, 1, &[]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate(&s, 2, &[]).unwrap());
    }

    #[test]
    fn shapes_are_consistent() {
        let s = Scenario::by_name("cross4-occl").unwrap();
        let out = generate(&s, 3, &[]).unwrap();
        assert_eq!(out.ground_truth.records.len(), 400);
        assert_eq!(out.embeddings.rows(), out.detections.records.len());
        assert_eq!(out.histograms.rows(), out.detections.records.len());
        assert!(out.detections.records.windows(2).all(|w| w[0].frame <= w[1].frame));
        let hidden = out
            .detections
            .records
            .iter()
            .filter(|r| {
                let f = r.frame as f64;
                (45..55).contains(&r.frame) && (r.top - (290.0 - 0.2 * f)).abs() < 6.0 && (r.left - (40.0 + 4.0 * f)).abs() < 6.0
            })
            .count();
        assert_eq!(hidden, 0);
    }

    #[test]
    fn unknown_scenario_rejected() {
        assert!(Scenario::by_name("nope").is_err());
    }
}
