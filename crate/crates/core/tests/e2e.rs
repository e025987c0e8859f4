mod common;

use std::time::Instant;

use archnet::evaluation::NetworkDiff;
use archnet::network::read_graph;
use common::*;

#[test]
fn fixture_network_matches_hand_count() {
    let dir = tempfile::tempdir().unwrap();
    run_fixture(dir.path());
    let g = read_graph(&dir.path().join("g_auto.graphml")).unwrap();
    assert_eq!(edge_map(&g), expected_auto_edges());
    let ids = expected_kb_ids();
    assert_eq!(g.node_count(), ids.len());
    for (name, id) in ids {
        assert_eq!(g.node(name).unwrap().kb_id.as_deref(), Some(id), "{name}");
    }
}

#[test]
fn fixture_diff_matches_hand_count() {
    let dir = tempfile::tempdir().unwrap();
    run_fixture(dir.path());
    let diff: NetworkDiff = serde_json::from_slice(&std::fs::read(dir.path().join("diff.json")).unwrap()).unwrap();
    assert_eq!(diff.missing_edges, expected_missing());
    assert_eq!(diff.extra_edges, expected_extra());
    assert_eq!(diff.shared_edges.len(), 8);
}

#[test]
fn fixture_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    run_fixture(dir.path());
    let golden = std::fs::read(fixture_dir().join("expected_g_auto.graphml")).unwrap();
    assert_eq!(std::fs::read(dir.path().join("g_auto.graphml")).unwrap(), golden);
    let read =
        |p: std::path::PathBuf| -> serde_json::Value { serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap() };
    let stats = read(dir.path().join("stats.json"));
    let expected = read(fixture_dir().join("expected_stats.json"));
    assert!(json_close(&stats, &expected, 1e-9));
}

#[test]
fn reruns_are_byte_identical_across_execution_modes() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    archnet::par::set_parallelism(true);
    run_fixture(first.path());
    archnet::par::set_parallelism(false);
    run_fixture(second.path());
    archnet::par::set_parallelism(true);
    let (a, b) = (snapshot(first.path()), snapshot(second.path()));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (name, bytes) in &a {
        assert!(bytes == &b[name], "{name} differs between runs");
    }
}

#[test]
fn entity_counts_shrink_monotonically() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = run_fixture(dir.path());
    let counts = manifest.entity_counts().map(|c| c.expect("count recorded"));
    assert_eq!(counts, [12, 10, 8]);
    assert!(counts.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn fixture_runs_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    run_fixture(dir.path());
    assert!(start.elapsed().as_secs_f64() < 30.0);
}
