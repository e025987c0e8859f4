//! Graph statistics, centrality profiles and community structure.

mod community;
mod paths;

pub use community::{greedy_communities, modularity};
pub use paths::{betweenness, closeness, clustering, components, eccentricities};

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{IndexedGraph, WeightedGraph};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("eigenvector power iteration did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub num_components: usize,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub avg_degree: f64,
    pub avg_weighted_degree: f64,
    pub density: f64,
    pub diameter: usize,
    pub avg_clustering: f64,
    pub modularity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub weighted: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            weighted: true,
            tolerance: 1e-8,
            max_iterations: 1000,
        }
    }
}

/// Dominant eigenvector of the adjacency matrix, L2-normalized.
///
/// Iterates `x <- (A/w_max + I) x`. Neither the scaling nor the shift changes
/// the eigenvectors; the shift stops bipartite graphs from oscillating and the
/// scaling keeps the iteration count independent of the weight unit.
/// Converged once the L1 change of the normalized vector falls below
/// `n * tolerance`.
pub fn eigenvector(g: &IndexedGraph, opts: &EigenOptions) -> Result<Vec<f64>, AnalysisError> {
    let n = g.len();
    if n == 0 {
        return Err(AnalysisError::EmptyGraph);
    }
    let w_max = g.adj.iter().flatten().map(|(_, w)| *w).max().unwrap_or(1) as f64;
    let weight = |w: u64| if opts.weighted { w as f64 / w_max } else { 1.0 };
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..opts.max_iterations {
        let last = x.clone();
        for (v, list) in g.adj.iter().enumerate() {
            for &(u, w) in list {
                x[u] += last[v] * weight(w);
            }
        }
        let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        let norm = if norm == 0.0 { 1.0 } else { norm };
        x.iter_mut().for_each(|a| *a /= norm);
        let change: f64 = x.iter().zip(&last).map(|(a, b)| (a - b).abs()).sum();
        if change < n as f64 * opts.tolerance {
            return Ok(x);
        }
    }
    Err(AnalysisError::NoConvergence {
        iterations: opts.max_iterations,
    })
}

/// The five per-node measures, in one struct so they can be raw or normalized.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Measures {
    pub degree: f64,
    pub weighted_degree: f64,
    pub betweenness: f64,
    pub closeness: f64,
    pub eigenvector: f64,
}

impl Measures {
    fn values(&self) -> [f64; 5] {
        [
            self.degree,
            self.weighted_degree,
            self.betweenness,
            self.closeness,
            self.eigenvector,
        ]
    }

    fn from_values(v: [f64; 5]) -> Self {
        Self {
            degree: v[0],
            weighted_degree: v[1],
            betweenness: v[2],
            closeness: v[3],
            eigenvector: v[4],
        }
    }

    pub fn sum(&self) -> f64 {
        self.values().iter().sum()
    }
}

/// Raw centralities per node, in node-name order.
#[derive(Debug, Clone, PartialEq)]
pub struct Centralities {
    pub names: Vec<String>,
    pub measures: Vec<Measures>,
}

pub fn centralities(graph: &WeightedGraph) -> Result<Centralities, AnalysisError> {
    centralities_with(graph, &EigenOptions::default())
}

pub fn centralities_with(graph: &WeightedGraph, opts: &EigenOptions) -> Result<Centralities, AnalysisError> {
    let g = graph.indexed();
    let n = g.len();
    if n == 0 {
        return Err(AnalysisError::EmptyGraph);
    }
    let eig = eigenvector(&g, opts)?;
    let bc = betweenness(&g);
    let cc = closeness(&g);
    let measures = (0..n)
        .map(|v| {
            let deg = g.adj[v].len() as f64;
            Measures {
                degree: if n > 1 { deg / (n - 1) as f64 } else { 0.0 },
                weighted_degree: g.adj[v].iter().map(|(_, w)| *w as f64).sum(),
                betweenness: bc[v],
                closeness: cc[v],
                eigenvector: eig[v],
            }
        })
        .collect();
    Ok(Centralities {
        names: g.names,
        measures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityProfile {
    pub node: String,
    pub raw: Measures,
    pub normalized: Measures,
    pub composite: f64,
}

/// Max-normalize each measure (an all-zero measure stays zero).
pub fn profiles(c: &Centralities) -> Vec<CentralityProfile> {
    let mut max = [0.0f64; 5];
    for m in &c.measures {
        for (mx, v) in max.iter_mut().zip(m.values()) {
            *mx = mx.max(v);
        }
    }
    let mut out: Vec<CentralityProfile> = c
        .names
        .iter()
        .zip(&c.measures)
        .map(|(name, raw)| {
            let mut norm = raw.values();
            for (v, mx) in norm.iter_mut().zip(max) {
                *v = if mx > 0.0 { *v / mx } else { 0.0 };
            }
            let normalized = Measures::from_values(norm);
            CentralityProfile {
                node: name.clone(),
                raw: *raw,
                normalized,
                composite: normalized.sum(),
            }
        })
        .collect();
    out.sort_by(|a, b| b.composite.total_cmp(&a.composite).then_with(|| a.node.cmp(&b.node)));
    out
}

/// Top `k` nodes by composite score, ties by name.
pub fn centrality_profile(graph: &WeightedGraph, k: usize) -> Result<Vec<CentralityProfile>, AnalysisError> {
    let mut all = profiles(&centralities(graph)?);
    all.truncate(k);
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Communities {
    pub partition: Vec<Vec<String>>,
    pub modularity: f64,
}

pub fn communities(graph: &WeightedGraph) -> Communities {
    let g = graph.indexed();
    let parts = greedy_communities(&g);
    Communities {
        modularity: modularity(&g, &parts),
        partition: parts
            .iter()
            .map(|c| c.iter().map(|&v| g.names[v].clone()).collect())
            .collect(),
    }
}

fn stats_with(g: &IndexedGraph, q: f64) -> GraphStats {
    let n = g.len();
    let m = g.edge_count();
    let total: u64 = g.adj.iter().flatten().map(|(_, w)| w).sum();
    let comps = components(g);
    // Largest component; ties go to the one holding the smallest node.
    let largest = comps.iter().rev().max_by_key(|c| c.len()).expect("non-empty graph");
    let ecc = eccentricities(g);
    GraphStats {
        num_components: comps.len(),
        num_nodes: n,
        num_edges: m,
        avg_degree: 2.0 * m as f64 / n as f64,
        avg_weighted_degree: total as f64 / n as f64,
        density: if n > 1 {
            2.0 * m as f64 / (n * (n - 1)) as f64
        } else {
            0.0
        },
        diameter: largest.iter().map(|&v| ecc[v]).max().unwrap_or(0),
        avg_clustering: clustering(g).iter().sum::<f64>() / n as f64,
        modularity: q,
    }
}

pub fn graph_stats(graph: &WeightedGraph) -> Result<GraphStats, AnalysisError> {
    if graph.is_empty() {
        return Err(AnalysisError::EmptyGraph);
    }
    let g = graph.indexed();
    let q = modularity(&g, &greedy_communities(&g));
    Ok(stats_with(&g, q))
}

/// Everything `analyze` reports for one graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub stats: GraphStats,
    pub profiles: Vec<CentralityProfile>,
    pub communities: Vec<Vec<String>>,
}

pub fn analyze(graph: &WeightedGraph, top: usize) -> Result<AnalysisReport, AnalysisError> {
    if graph.is_empty() {
        return Err(AnalysisError::EmptyGraph);
    }
    let g = graph.indexed();
    let comm = communities(graph);
    let mut profiles = profiles(&centralities(graph)?);
    profiles.truncate(top);
    Ok(AnalysisReport {
        stats: stats_with(&g, comm.modularity),
        profiles,
        communities: comm.partition,
    })
}

/// Side-by-side statistics of several named graphs, one row per statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsComparison {
    pub graphs: Vec<String>,
    pub stats: Vec<GraphStats>,
}

impl StatsComparison {
    fn rows(&self) -> Vec<(&'static str, Vec<String>)> {
        let col = |f: &dyn Fn(&GraphStats) -> String| self.stats.iter().map(f).collect::<Vec<_>>();
        vec![
            ("num_components", col(&|s| s.num_components.to_string())),
            ("num_nodes", col(&|s| s.num_nodes.to_string())),
            ("num_edges", col(&|s| s.num_edges.to_string())),
            ("avg_degree", col(&|s| format!("{:.3}", s.avg_degree))),
            ("avg_weighted_degree", col(&|s| format!("{:.3}", s.avg_weighted_degree))),
            ("density", col(&|s| format!("{:.3}", s.density))),
            ("diameter", col(&|s| s.diameter.to_string())),
            ("avg_clustering", col(&|s| format!("{:.3}", s.avg_clustering))),
            ("modularity", col(&|s| format!("{:.3}", s.modularity))),
        ]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["statistic".to_string()];
        header.extend(self.graphs.iter().cloned());
        out.write_record(&header)?;
        for (name, values) in self.rows() {
            let mut rec = vec![name.to_string()];
            rec.extend(values);
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(&str, &str, u64)]) -> WeightedGraph {
        let mut g = WeightedGraph::new();
        for (u, v, w) in edges {
            g.add_weight(u, v, *w);
        }
        g
    }

    fn star(leaves: usize) -> WeightedGraph {
        let names: Vec<String> = (0..leaves).map(|i| format!("leaf{i}")).collect();
        graph(&names.iter().map(|l| ("center", l.as_str(), 1)).collect::<Vec<_>>())
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn stats_examples() {
        let k3 = graph(&[("a", "b", 1), ("b", "c", 1), ("a", "c", 1)]);
        let s = graph_stats(&k3).unwrap();
        assert_eq!((s.num_components, s.diameter), (1, 1));
        assert!(close(s.density, 1.0) && close(s.avg_clustering, 1.0));

        let p4 = graph(&[("a", "b", 1), ("b", "c", 1), ("c", "d", 1)]);
        let s = graph_stats(&p4).unwrap();
        assert_eq!(s.diameter, 3);
        assert!(close(s.density, 0.5) && close(s.avg_clustering, 0.0));

        let two = graph(&[("a", "b", 1), ("c", "d", 1)]);
        let s = graph_stats(&two).unwrap();
        assert_eq!((s.num_components, s.diameter), (2, 1));

        assert!(matches!(
            graph_stats(&WeightedGraph::new()),
            Err(AnalysisError::EmptyGraph)
        ));
    }

    #[test]
    fn diameter_uses_largest_component() {
        let g = graph(&[("a", "b", 1), ("c", "d", 1), ("d", "e", 1)]);
        assert_eq!(graph_stats(&g).unwrap().diameter, 2);
    }

    #[test]
    fn centrality_examples() {
        let c = centralities(&star(3)).unwrap();
        let center = &c.measures[0];
        assert_eq!(c.names[0], "center");
        assert!(close(center.degree, 1.0) && close(center.betweenness, 1.0) && close(center.closeness, 1.0));

        let k4 = graph(&[
            ("a", "b", 1),
            ("a", "c", 1),
            ("a", "d", 1),
            ("b", "c", 1),
            ("b", "d", 1),
            ("c", "d", 1),
        ]);
        let c = centralities(&k4).unwrap();
        assert!(c
            .measures
            .iter()
            .all(|m| close(m.eigenvector, 0.5) && m.betweenness == 0.0));

        let edge = centralities(&graph(&[("a", "b", 7)])).unwrap();
        assert!(edge.measures.iter().all(|m| m.degree == 1.0));
    }

    #[test]
    fn closeness_scaled_by_component() {
        // Component {a,b,c} as a path plus a separate edge: n = 5.
        let g = graph(&[("a", "b", 1), ("b", "c", 1), ("d", "e", 1)]);
        let c = centralities(&g).unwrap();
        assert!(close(c.measures[1].closeness, 2.0 / 2.0 * 2.0 / 4.0));
        assert!(close(c.measures[0].closeness, 2.0 / 3.0 * 2.0 / 4.0));
        assert!(close(c.measures[3].closeness, 1.0 * 1.0 / 4.0));
    }

    #[test]
    fn profile_examples() {
        let p = centrality_profile(&star(3), 10).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p[0].node, "center");
        assert_eq!(p[0].normalized.values(), [1.0; 5]);
        assert_eq!(p[0].composite, 5.0);
        assert_eq!(centrality_profile(&star(3), 2).unwrap().len(), 2);

        let pair = centrality_profile(&graph(&[("a", "b", 3)]), 5).unwrap();
        // Betweenness is zero everywhere, so it normalizes to zero.
        assert!(pair.iter().all(|p| p.composite == pair[0].composite));
        assert_eq!(pair[0].node, "a");
    }

    #[test]
    fn community_examples() {
        let k4 = graph(&[
            ("a", "b", 1),
            ("a", "c", 1),
            ("a", "d", 1),
            ("b", "c", 1),
            ("b", "d", 1),
            ("c", "d", 1),
        ]);
        let g = k4.indexed();
        assert!(close(modularity(&g, &[vec![0, 1, 2, 3]]), 0.0));

        let barbell = graph(&[
            ("a", "b", 1),
            ("b", "c", 1),
            ("a", "c", 1),
            ("d", "e", 1),
            ("e", "f", 1),
            ("d", "f", 1),
            ("c", "d", 1),
        ]);
        let c = communities(&barbell);
        assert_eq!(c.partition, vec![vec!["a", "b", "c"], vec!["d", "e", "f"]]);
        // Two communities with L = 3 and S = 7 each, W = 7.
        assert!(close(c.modularity, 2.0 * (3.0 / 7.0 - (7.0f64 / 14.0).powi(2))));

        // Splitting the edge would give Q = -0.5.
        let edge = communities(&graph(&[("a", "b", 1)]));
        assert_eq!(edge.partition.len(), 1);
        assert_eq!(edge.modularity, 0.0);
    }

    #[test]
    fn modularity_without_edges_is_zero() {
        let mut g = WeightedGraph::new();
        g.add_node("x", Default::default());
        let s = graph_stats(&g).unwrap();
        assert_eq!((s.modularity, s.diameter, s.density), (0.0, 0, 0.0));
    }

    #[test]
    fn eigen_residual_small() {
        let g = graph(&[
            ("a", "b", 2),
            ("b", "c", 1),
            ("c", "a", 5),
            ("c", "d", 1),
            ("d", "e", 3),
        ])
        .indexed();
        let v = eigenvector(&g, &EigenOptions::default()).unwrap();
        let av: Vec<f64> = (0..g.len())
            .map(|i| g.adj[i].iter().map(|(j, w)| *w as f64 * v[*j]).sum())
            .collect();
        let lambda: f64 = av.iter().zip(&v).map(|(a, b)| a * b).sum();
        let res = av
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(res <= 1e-6);
    }

    #[test]
    fn eigen_reports_non_convergence() {
        let g = graph(&[("a", "b", 1), ("b", "c", 1), ("c", "d", 1)]).indexed();
        let opts = EigenOptions {
            max_iterations: 2,
            ..Default::default()
        };
        assert!(matches!(
            eigenvector(&g, &opts),
            Err(AnalysisError::NoConvergence { iterations: 2 })
        ));
    }

    #[test]
    fn comparison_csv() {
        let s = graph_stats(&star(3)).unwrap();
        let cmp = StatsComparison {
            graphs: vec!["auto".into(), "manual".into()],
            stats: vec![s.clone(), s],
        };
        let mut buf = Vec::new();
        cmp.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("statistic,auto,manual\nnum_components,1,1\n"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        // Connected by construction: a spanning path plus random extra edges.
        // Disconnected graphs with nearly equal component spectral radii make
        // power iteration legitimately fail to converge.
        fn random_graph() -> impl Strategy<Value = WeightedGraph> {
            (2u8..8, proptest::collection::vec((0u8..8, 0u8..8, 1u64..6), 0..15)).prop_map(|(n, es)| {
                let mut g = WeightedGraph::new();
                for i in 1..n {
                    g.add_weight(&format!("n{}", i - 1), &format!("n{i}"), 1);
                }
                for (u, v, w) in es {
                    g.add_weight(&format!("n{}", u % n), &format!("n{}", v % n), w);
                }
                g
            })
        }

        proptest! {
            #[test]
            fn normalized_scale_invariance(g in random_graph(), k in 2u64..7) {
                let mut scaled = WeightedGraph::new();
                for (u, v, w) in g.edges() {
                    scaled.add_weight(u, v, w * k);
                }
                let a = profiles(&centralities(&g).unwrap());
                let b = profiles(&centralities(&scaled).unwrap());
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x.composite - y.composite).abs() < 1e-6);
                }
            }

            #[test]
            fn top_node_hits_one(g in random_graph()) {
                let p = centrality_profile(&g, 1).unwrap();
                prop_assert!(p[0].normalized.values().contains(&1.0));
                let all = centrality_profile(&g, usize::MAX).unwrap();
                for prof in &all {
                    prop_assert!((prof.composite - prof.normalized.sum()).abs() < 1e-12);
                    prop_assert!(prof.normalized.values().iter().all(|v| (0.0..=1.0).contains(v)));
                }
            }

            #[test]
            fn greedy_partition_covers_nodes(g in random_graph()) {
                let ig = g.indexed();
                let parts = greedy_communities(&ig);
                let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..ig.len()).collect::<Vec<_>>());
                let q = modularity(&ig, &parts);
                prop_assert!((-0.5..=1.0).contains(&q));
                let singletons: Vec<Vec<usize>> = (0..ig.len()).map(|v| vec![v]).collect();
                prop_assert!(q >= modularity(&ig, &singletons) - 1e-12);
            }
        }
    }
}
