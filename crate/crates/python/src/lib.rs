//! Python bindings. Paths go in, plain Python values come out; the heavy
//! work runs with the interpreter lock released.

use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use hypertrack::affinity::MotionContext;
use hypertrack::io::{
    emit_mot, load_sequence, parse_graph, parse_tracks, parse_weights, read_text, Config, MotFile, SequencePaths, TOOL_VERSION,
};
use hypertrack::metrics::evaluate;
use hypertrack::model::{default_arities, WeightVector};
use hypertrack::pipeline::run_sequence;
use hypertrack::postprocess::resolve_conflicts;
use hypertrack::search::search_all;
use hypertrack::synth::{generate, Scenario};
use hypertrack::Error;

/// `(frame, id, left, top, width, height, conf)`.
type Row = (u32, i64, f64, f64, f64, f64, f64);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Config(_) | Error::SizeCap { .. } => PyValueError::new_err(e.to_string()),
        e if e.is_input_format() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn config(path: Option<&Path>) -> Result<Config, Error> {
    match path {
        Some(p) => Config::from_toml(&read_text(p)?, &p.display().to_string()),
        None => Ok(Config::default()),
    }
}

fn weights(path: Option<&Path>) -> Result<WeightVector, Error> {
    match path {
        Some(p) => Ok(parse_weights(&read_text(p)?, &p.display().to_string())?.weights),
        None => Ok(WeightVector::builtin()),
    }
}

fn json_to_py(py: Python<'_>, value: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyfunction]
fn version() -> &'static str {
    TOOL_VERSION
}

/// Published per-degree weights for hyperedges up to degree 4.
#[pyfunction]
fn default_weights() -> Vec<Vec<f64>> {
    WeightVector::builtin().per_degree().to_vec()
}

#[pyfunction]
#[pyo3(signature = (config_path=None))]
fn config_hash(config_path: Option<PathBuf>) -> PyResult<String> {
    config(config_path.as_deref()).map(|c| c.hash()).map_err(to_py)
}

/// Writes a seeded synthetic sequence into `out_dir`.
#[pyfunction]
fn synth(py: Python<'_>, scenario: &str, seed: u64, out_dir: PathBuf) -> PyResult<()> {
    py.detach(|| {
        let s = Scenario::by_name(scenario)?;
        generate(&s, seed, &Config::default().header_lines())?.write_to(&out_dir)
    })
    .map_err(to_py)
}

/// Tracks a sequence and returns MOT rows
/// `(frame, id, left, top, width, height, conf)` with 1-based frames.
#[pyfunction]
#[pyo3(signature = (det, emb=None, hist=None, pts=None, config_path=None, weights_path=None))]
fn track(
    py: Python<'_>,
    det: PathBuf,
    emb: Option<PathBuf>,
    hist: Option<PathBuf>,
    pts: Option<PathBuf>,
    config_path: Option<PathBuf>,
    weights_path: Option<PathBuf>,
) -> PyResult<Vec<Row>> {
    py.detach(|| {
        let cfg = config(config_path.as_deref())?;
        let w = weights(weights_path.as_deref())?;
        if w.arities() != default_arities(cfg.build.max_degree) {
            return Err(Error::DimensionMismatch(format!("weights have per-degree lengths {:?}", w.arities())));
        }
        let seq = load_sequence(&SequencePaths {
            det,
            emb,
            hist,
            points: pts,
            gt: None,
        })?;
        let tracks = run_sequence(&seq.detections, &MotionContext::new(seq.points), &cfg, &w)?;
        let labeled: Vec<(i64, _)> = tracks.into_iter().map(|(l, t)| (l as i64, t)).collect();
        let file = MotFile::from_tracks(Vec::new(), &labeled);
        Ok(file
            .records
            .iter()
            .map(|r| (r.frame + 1, r.id, r.left, r.top, r.width, r.height, r.conf))
            .collect())
    })
    .map_err(to_py)
}

/// Renders rows returned by `track` as MOT text.
#[pyfunction]
fn format_tracks(rows: Vec<Row>) -> PyResult<String> {
    let text: String = rows
        .iter()
        .map(|(f, id, l, t, w, h, c)| format!("{f},{id},{l},{t},{w},{h},{c},-1,-1,-1\n"))
        .collect();
    let file = parse_tracks(&text, "<rows>").map_err(to_py)?;
    Ok(emit_mot(&file))
}

/// Runs dense-structure search on a dumped graph. Returns a dict with every
/// structure found and the conflict-free selection.
#[pyfunction]
#[pyo3(signature = (graph, weights_path=None, alpha_hat=2))]
fn search(py: Python<'_>, graph: PathBuf, weights_path: Option<PathBuf>, alpha_hat: usize) -> PyResult<Py<PyAny>> {
    let out = py
        .detach(|| {
            let mut cfg = Config::default();
            cfg.tracking.alpha_hat = alpha_hat;
            cfg.search.alpha_hat = alpha_hat;
            cfg.validate()?;
            let dump = parse_graph(&read_text(&graph)?, &graph.display().to_string())?;
            let w = weights(weights_path.as_deref())?;
            let found = search_all(&dump.graph, &w, &cfg.search_config())?;
            let selected = resolve_conflicts(&found, alpha_hat);
            Ok(serde_json::json!({ "structures": found, "selected": selected }))
        })
        .map_err(to_py)?;
    json_to_py(py, &out)
}

/// CLEAR MOT and identity scores of a result file against ground truth.
#[pyfunction]
#[pyo3(signature = (results, gt, iou=0.5))]
fn evaluate_files(py: Python<'_>, results: PathBuf, gt: PathBuf, iou: f64) -> PyResult<Py<PyAny>> {
    let report = py
        .detach(|| {
            let mut cfg = Config::default();
            cfg.metrics.iou_threshold = iou;
            cfg.validate()?;
            let r = parse_tracks(&read_text(&results)?, &results.display().to_string())?;
            let g = parse_tracks(&read_text(&gt)?, &gt.display().to_string())?;
            Ok(evaluate(&r.boxes(), &g.boxes(), iou))
        })
        .map_err(to_py)?;
    json_to_py(py, &report)
}

#[pymodule]
fn hypertrack_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    m.add_function(wrap_pyfunction!(default_weights, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(track, m)?)?;
    m.add_function(wrap_pyfunction!(format_tracks, m)?)?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_files, m)?)?;
    Ok(())
}
