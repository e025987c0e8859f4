//! Greedy agglomerative modularity maximization.

use std::collections::BTreeMap;

use crate::network::IndexedGraph;

fn strengths(g: &IndexedGraph) -> Vec<i128> {
    g.adj.iter().map(|l| l.iter().map(|(_, w)| *w as i128).sum()).collect()
}

fn total_weight(g: &IndexedGraph) -> i128 {
    strengths(g).iter().sum::<i128>() / 2
}

/// Weighted modularity of a partition. Accumulated exactly as
/// `sum_c (4W*L_c - S_c^2) / (4W^2)` with `L_c` the internal weight and `S_c`
/// the total strength of community `c`. Zero when the graph has no edges.
pub fn modularity(g: &IndexedGraph, communities: &[Vec<usize>]) -> f64 {
    let w = total_weight(g);
    if w == 0 {
        return 0.0;
    }
    let s = strengths(g);
    let mut label = vec![usize::MAX; g.len()];
    for (c, members) in communities.iter().enumerate() {
        for &v in members {
            label[v] = c;
        }
    }
    let mut internal = vec![0i128; communities.len()];
    let mut strength = vec![0i128; communities.len()];
    for v in 0..g.len() {
        let c = label[v];
        assert!(c != usize::MAX, "node {v} missing from partition");
        strength[c] += s[v];
        for &(u, wt) in &g.adj[v] {
            if u > v && label[u] == c {
                internal[c] += wt as i128;
            }
        }
    }
    let num: i128 = internal.iter().zip(&strength).map(|(l, sc)| 4 * w * l - sc * sc).sum();
    num as f64 / (4 * w * w) as f64
}

/// Merge the pair of adjacent communities with the largest modularity gain
/// until no merge gains. Gains are compared through their exact integer
/// numerator `2W*e_ab - S_a*S_b`; ties go to the lexicographically smallest
/// community pair, a community being named by its smallest node.
///
/// Returns communities sorted internally and by smallest member.
pub fn greedy_communities(g: &IndexedGraph) -> Vec<Vec<usize>> {
    let n = g.len();
    let w = total_weight(g);
    let mut members: BTreeMap<usize, Vec<usize>> = (0..n).map(|v| (v, vec![v])).collect();
    if w == 0 {
        return members.into_values().collect();
    }
    let mut strength: BTreeMap<usize, i128> = strengths(g).into_iter().enumerate().collect();
    let mut links: BTreeMap<(usize, usize), i128> = BTreeMap::new();
    for (v, list) in g.adj.iter().enumerate() {
        for &(u, wt) in list {
            if u > v {
                links.insert((v, u), wt as i128);
            }
        }
    }
    loop {
        let mut best: Option<((usize, usize), i128)> = None;
        for (&(a, b), &e) in &links {
            let gain = 2 * w * e - strength[&a] * strength[&b];
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some(((a, b), gain));
            }
        }
        let Some(((a, b), gain)) = best else { break };
        if gain <= 0 {
            break;
        }
        // `a < b`, so the merged community keeps the name `a`.
        let moved = members.remove(&b).expect("live community");
        members.get_mut(&a).expect("live community").extend(moved);
        let sb = strength.remove(&b).expect("live community");
        *strength.get_mut(&a).expect("live community") += sb;
        let touching: Vec<((usize, usize), i128)> = links
            .iter()
            .filter(|((x, y), _)| *x == b || *y == b)
            .map(|(k, e)| (*k, *e))
            .collect();
        for ((x, y), e) in touching {
            links.remove(&(x, y));
            let other = if x == b { y } else { x };
            if other == a {
                continue;
            }
            let key = (a.min(other), a.max(other));
            *links.entry(key).or_insert(0) += e;
        }
    }
    let mut out: Vec<Vec<usize>> = members.into_values().collect();
    for c in &mut out {
        c.sort_unstable();
    }
    out.sort_by_key(|c| c[0]);
    out
}
