//! Clustering of motion primitives through pairwise warping paths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::neighborhood::Neighborhoods;
use crate::primitives::{shortest_warping_paths, MotionPrimitive, PathFilter, WarpingPath};

/// Best accepted warping path between primitive `a` (rows) and `b` (columns).
///
/// Every weakly connected component of the rectangle's neighbourhood graph yields its
/// shortest path from the top row to the bottom row; among those passing `filter`,
/// the one covering the most rows of `a` wins, ties broken by lower cost.
pub fn pairwise_path(
    nbrs: &Neighborhoods,
    a: &MotionPrimitive,
    b: &MotionPrimitive,
    filter: &PathFilter,
) -> Result<Option<WarpingPath>> {
    let (paths, _) = shortest_warping_paths(nbrs, a.interval(), b.interval(), false)?;
    let best = paths
        .into_iter()
        .flatten()
        .filter(|p| filter.accepts(p))
        .fold(None, |best: Option<WarpingPath>, p| match best {
            Some(b) if b.span() > p.span() || (b.span() == p.span() && b.cost <= p.cost) => Some(b),
            _ => Some(p),
        });
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterEdge {
    pub from: usize,
    pub to: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterGraph {
    pub nodes: usize,
    /// Directed edges; every accepted pair contributes both directions.
    pub edges: Vec<ClusterEdge>,
    /// Strongly connected components, each sorted, ordered by smallest member.
    pub clusters: Vec<Vec<usize>>,
}

impl ClusterGraph {
    /// Cluster index of every primitive.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.nodes];
        for (c, members) in self.clusters.iter().enumerate() {
            for &m in members {
                labels[m] = c;
            }
        }
        labels
    }
}

pub fn build_clusters(
    primitives: &[MotionPrimitive],
    nbrs: &Neighborhoods,
    filter: &PathFilter,
) -> Result<ClusterGraph> {
    let n = primitives.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let found: Vec<Option<ClusterEdge>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            Ok(pairwise_path(nbrs, &primitives[a], &primitives[b], filter)?
                .map(|p| ClusterEdge { from: a, to: b, cost: p.cost }))
        })
        .collect::<Result<_>>()?;
    let mut edges = Vec::new();
    for e in found.into_iter().flatten() {
        edges.push(e);
        edges.push(ClusterEdge { from: e.to, to: e.from, cost: e.cost });
    }
    let mut adj = vec![Vec::new(); n];
    for e in &edges {
        adj[e.from].push(e.to);
    }
    Ok(ClusterGraph {
        nodes: n,
        edges,
        clusters: strongly_connected_components(&adj),
    })
}

/// Tarjan's algorithm, iterative. Components are sorted internally and ordered by
/// their smallest node.
pub fn strongly_connected_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        // (node, position in its adjacency list)
        let mut call = vec![(root, 0usize)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps.sort_by_key(|c| c[0]);
    comps
}
