//! Unweighted shortest-path measures. Each source is an independent BFS, run
//! through [`crate::par`] and reduced in source order.

use std::collections::VecDeque;

use crate::network::IndexedGraph;

struct Bfs {
    dist: Vec<Option<usize>>,
    sigma: Vec<f64>,
    order: Vec<usize>,
}

fn bfs(g: &IndexedGraph, s: usize) -> Bfs {
    let n = g.len();
    let mut dist = vec![None; n];
    let mut sigma = vec![0.0; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    dist[s] = Some(0);
    sigma[s] = 1.0;
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        let dv = dist[v].expect("queued nodes have a distance");
        for &(w, _) in &g.adj[v] {
            match dist[w] {
                None => {
                    dist[w] = Some(dv + 1);
                    sigma[w] += sigma[v];
                    queue.push_back(w);
                }
                Some(dw) if dw == dv + 1 => sigma[w] += sigma[v],
                _ => {}
            }
        }
    }
    Bfs { dist, sigma, order }
}

/// Dependencies of `s` on every node (Brandes accumulation).
fn dependencies(g: &IndexedGraph, s: usize) -> Vec<f64> {
    let Bfs { dist, sigma, order } = bfs(g, s);
    let mut delta = vec![0.0; g.len()];
    for &w in order.iter().rev() {
        let dw = dist[w].expect("visited");
        for &(v, _) in &g.adj[w] {
            if dw > 0 && dist[v] == Some(dw - 1) {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
        }
    }
    delta[s] = 0.0;
    delta
}

/// Betweenness over unordered pairs, normalized by 2/((n-1)(n-2)); zero for
/// graphs with fewer than three nodes.
pub fn betweenness(g: &IndexedGraph) -> Vec<f64> {
    let n = g.len();
    let per_source = crate::par::map_range(n, |s| dependencies(g, s));
    let mut bc = vec![0.0; n];
    for d in per_source {
        for (b, x) in bc.iter_mut().zip(d) {
            *b += x;
        }
    }
    if n < 3 {
        return vec![0.0; n];
    }
    // Every unordered pair was counted from both ends.
    let scale = 1.0 / ((n - 1) as f64 * (n - 2) as f64);
    bc.iter().map(|b| b * scale).collect()
}

/// Per-source reachability summary: (reachable count including self, sum of
/// distances, eccentricity).
fn reach(g: &IndexedGraph, s: usize) -> (usize, usize, usize) {
    let b = bfs(g, s);
    let ds = b.dist.iter().flatten();
    let (count, sum, ecc) = ds.fold((0, 0, 0), |(c, t, m), d| (c + 1, t + d, m.max(*d)));
    (count, sum, ecc)
}

/// Closeness within the node's component, scaled by (k-1)/(n-1).
pub fn closeness(g: &IndexedGraph) -> Vec<f64> {
    let n = g.len();
    crate::par::map_range(n, |s| {
        let (k, total, _) = reach(g, s);
        if total == 0 || n < 2 {
            return 0.0;
        }
        let within = (k - 1) as f64 / total as f64;
        within * (k - 1) as f64 / (n - 1) as f64
    })
}

/// Eccentricity of every node within its own component.
pub fn eccentricities(g: &IndexedGraph) -> Vec<usize> {
    crate::par::map_range(g.len(), |s| reach(g, s).2)
}

/// Connected components, each sorted, ordered by their smallest node.
pub fn components(g: &IndexedGraph) -> Vec<Vec<usize>> {
    let n = g.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(v) = stack.pop() {
            comp.push(v);
            for &(w, _) in &g.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Local clustering coefficient from triangle counts; degree below two gives 0.
pub fn clustering(g: &IndexedGraph) -> Vec<f64> {
    let adjacent = |a: usize, b: usize| g.adj[a].binary_search_by_key(&b, |(x, _)| *x).is_ok();
    crate::par::map_range(g.len(), |v| {
        let list = &g.adj[v];
        let k = list.len();
        if k < 2 {
            return 0.0;
        }
        let mut links = 0usize;
        for (i, &(a, _)) in list.iter().enumerate() {
            links += list[i + 1..].iter().filter(|(b, _)| adjacent(a, *b)).count();
        }
        2.0 * links as f64 / (k * (k - 1)) as f64
    })
}
