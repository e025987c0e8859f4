//! Shared helpers for the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use archnet::network::WeightedGraph;
use archnet::pipeline::{run_pipeline, PipelineConfig, RunManifest};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e")
}

pub fn run_fixture(out: &Path) -> RunManifest {
    let config = PipelineConfig::load(&fixture_dir().join("pipeline.json")).expect("fixture config");
    run_pipeline(&config, out).expect("fixture pipeline")
}

/// Hand-derived pruned co-occurrence network of the fixture (min weight 2),
/// counted letter by letter from the page texts.
pub fn expected_auto_edges() -> BTreeMap<(String, String), u64> {
    let a = "Sybren Valkema";
    let b = "Harvey Littleton";
    let c = "Erwin Eisch";
    let d = "Marvin Lipofsky";
    let e = "Andries Copier";
    let g = "Albert Lewis";
    let i = "Durk Valkema";
    [
        (a, b, 5),
        (a, c, 4),
        (b, c, 3),
        (a, d, 2),
        (b, d, 2),
        (a, e, 4),
        (a, g, 3),
        (b, g, 2),
        (d, i, 2),
        (c, e, 2),
    ]
    .into_iter()
    .map(|(u, v, w)| {
        let (u, v) = if u < v { (u, v) } else { (v, u) };
        ((u.to_string(), v.to_string()), w)
    })
    .collect()
}

pub fn expected_kb_ids() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("Sybren Valkema", "Q2618110"),
        ("Harvey Littleton", "Q900002"),
        ("Erwin Eisch", "Q900003"),
        ("Marvin Lipofsky", "Q900004"),
        ("Andries Copier", "Q900005"),
        ("Durk Valkema", "Q900006"),
        ("Albert Lewis", "Q900007"),
    ])
}

pub fn pair(u: &str, v: &str) -> (String, String) {
    if u < v {
        (u.to_string(), v.to_string())
    } else {
        (v.to_string(), u.to_string())
    }
}

pub fn expected_missing() -> Vec<(String, String)> {
    vec![
        pair("Jan Pietersen", "Sybren Valkema"),
        pair("Kea Verwey", "Sybren Valkema"),
    ]
}

pub fn expected_extra() -> Vec<(String, String)> {
    vec![
        pair("Albert Lewis", "Harvey Littleton"),
        pair("Harvey Littleton", "Marvin Lipofsky"),
    ]
}

pub fn edge_map(g: &WeightedGraph) -> BTreeMap<(String, String), u64> {
    g.edges().map(|(u, v, w)| ((u.to_string(), v.to_string()), w)).collect()
}

/// Every file in `dir` with its bytes, keyed by file name.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.expect("dir entry");
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).expect("artifact"),
            )
        })
        .collect()
}

/// Whether two JSON documents agree, numbers compared within `tol`.
pub fn json_close(a: &serde_json::Value, b: &serde_json::Value, tol: f64) -> bool {
    use serde_json::Value::*;
    match (a, b) {
        (Number(x), Number(y)) => (x.as_f64().unwrap() - y.as_f64().unwrap()).abs() <= tol,
        (Array(x), Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| json_close(p, q, tol)),
        (Object(x), Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| json_close(v, w, tol)))
        }
        _ => a == b,
    }
}
