//! Motion primitives: neighbourhood graph, warping paths and cut positions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activity::Interval;
use crate::error::{Error, Result};
use crate::neighborhood::Neighborhoods;

const NONE: usize = usize::MAX;
// compact node links; graphs beyond u32::MAX - 1 nodes are not supported
const NIL: u32 = u32::MAX;

/// Allowed warping steps `(a, b)`: `S_{i+a}`, `p_{j+b}`.
pub const STEPS: [(usize, usize); 3] = [(1, 1), (0, 1), (1, 0)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphNode {
    /// Frame whose neighbour set holds the entry (row, trial axis).
    pub i: usize,
    /// The neighbour (column).
    pub j: usize,
    pub d: f64,
}

/// Neighbour entries inside a window of the SSSM, connected by warping steps.
/// Nodes are stored in lexicographic `(i, j)` order, which is a topological order.
///
/// This is the explicit form used for inspection; [`shortest_warping_paths`] gives the
/// same paths in a streaming pass.
#[derive(Debug, Clone)]
pub struct NeighborhoodGraph {
    rows: Interval,
    nodes: Vec<GraphNode>,
    row_start: Vec<usize>,
    succ: Vec<[u32; 3]>,
    pred: Vec<[u32; 3]>,
    pub ops: u64,
}

impl NeighborhoodGraph {
    /// Lower-triangle graph (`j < i`) of one activity.
    pub fn for_activity(nbrs: &Neighborhoods, activity: Interval) -> Result<Self> {
        if activity.end >= nbrs.len() {
            return Err(Error::invalid(format!(
                "activity [{}, {}] outside trial of {} frames",
                activity.start,
                activity.end,
                nbrs.len()
            )));
        }
        Self::build(nbrs, activity, activity, true)
    }

    /// Rectangle graph: rows from `rows`, columns from `cols`.
    pub fn for_rectangle(nbrs: &Neighborhoods, rows: Interval, cols: Interval) -> Result<Self> {
        if rows.end >= nbrs.len() || cols.end >= nbrs.len() {
            return Err(Error::invalid("rectangle outside trial"));
        }
        Self::build(nbrs, rows, cols, false)
    }

    fn build(nbrs: &Neighborhoods, rows: Interval, cols: Interval, lower: bool) -> Result<Self> {
        let capacity = rows.frames().map(|i| nbrs.set(i).len()).sum();
        let mut nodes = Vec::with_capacity(capacity);
        let mut row_start = Vec::with_capacity(rows.len() + 1);
        let mut ops = 0u64;
        for i in rows.frames() {
            row_start.push(nodes.len());
            let set = nbrs.set(i);
            let from = set.partition_point(|p| p.0 < cols.start);
            for &(j, d) in &set[from..] {
                ops += 1;
                if j > cols.end || (lower && j >= i) {
                    break;
                }
                nodes.push(GraphNode { i, j, d });
            }
        }
        row_start.push(nodes.len());
        let n = nodes.len();
        if n >= NIL as usize {
            return Err(Error::invalid(format!("neighbourhood graph of {n} entries is too large")));
        }
        let mut succ = vec![[NIL; 3]; n];
        let mut pred = vec![[NIL; 3]; n];
        // Successors by merging each row with the next; both are sorted by column.
        for r in 0..rows.len() {
            let (a, b) = (row_start[r], row_start[r + 1]);
            let (c, e) = (row_start[r + 1], row_start.get(r + 2).copied().unwrap_or(n));
            let mut q = c;
            for v in a..b {
                let j = nodes[v].j;
                ops += 1;
                if v + 1 < b && nodes[v + 1].j == j + 1 {
                    succ[v][1] = (v + 1) as u32;
                }
                while q < e && nodes[q].j < j {
                    q += 1;
                }
                if q < e && nodes[q].j == j {
                    succ[v][2] = q as u32;
                    if q + 1 < e && nodes[q + 1].j == j + 1 {
                        succ[v][0] = (q + 1) as u32;
                    }
                } else if q < e && nodes[q].j == j + 1 {
                    succ[v][0] = q as u32;
                }
            }
        }
        for v in 0..n {
            for k in 0..3 {
                if succ[v][k] != NIL {
                    pred[succ[v][k] as usize][k] = v as u32;
                }
            }
        }
        Ok(Self {
            rows,
            nodes,
            row_start,
            succ,
            pred,
            ops,
        })
    }

    /// Node index of entry `(i, j)`.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        if i < self.rows.start || i > self.rows.end {
            return None;
        }
        let r = i - self.rows.start;
        let (a, b) = (self.row_start[r], self.row_start[r + 1]);
        self.nodes[a..b].binary_search_by_key(&j, |n| n.j).ok().map(|k| a + k)
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Successors of node `n` (at most one per step type).
    pub fn successors(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        self.succ[n].iter().filter(|&&t| t != NIL).map(|&t| t as usize)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.nodes.len())
            .flat_map(|n| self.successors(n).map(move |t| (n, t)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().flatten().filter(|&&t| t != NIL).count()
    }

    /// Predecessors in lexicographic order: `(i-1, j-1)`, `(i-1, j)`, `(i, j-1)`.
    fn predecessors(&self, n: usize) -> [Option<usize>; 3] {
        let p = self.pred[n];
        [p[0], p[2], p[1]].map(|v| (v != NIL).then_some(v as usize))
    }

    /// Component label of every node; labels are numbered by first node.
    pub fn component_labels(&self) -> (Vec<usize>, usize) {
        let n = self.nodes.len();
        let mut uf = UnionFind::new(n);
        for v in 0..n {
            for t in self.successors(v) {
                uf.union(v, t);
            }
        }
        let mut root_label = vec![NONE; n];
        let mut labels = vec![0; n];
        let mut count = 0;
        for (v, label) in labels.iter_mut().enumerate() {
            let root = uf.find(v);
            if root_label[root] == NONE {
                root_label[root] = count;
                count += 1;
            }
            *label = root_label[root];
        }
        (labels, count)
    }

    /// Weakly connected components, each a sorted list of node indices; components are
    /// ordered by their first node.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let (labels, count) = self.component_labels();
        let mut comps = vec![Vec::new(); count];
        for (v, &c) in labels.iter().enumerate() {
            comps[c].push(v);
        }
        comps
    }

    /// Shortest warping path of every component, from its first row to its last.
    ///
    /// A virtual start reaches every entry of the first row at the entry's distance;
    /// each step costs the distance of the entry it lands on; a virtual end collects
    /// the last row. Ties keep the lexicographically smallest predecessor and end entry.
    pub fn shortest_paths(&self, components: &[Vec<usize>]) -> Vec<Option<WarpingPath>> {
        let mut labels = vec![NONE; self.nodes.len()];
        for (c, nodes) in components.iter().enumerate() {
            for &v in nodes {
                labels[v] = c;
            }
        }
        self.labeled_shortest_paths(&labels, components.len())
    }

    /// [`Self::shortest_paths`] over per-node component labels; unlabelled nodes are ignored.
    fn labeled_shortest_paths(&self, labels: &[usize], count: usize) -> Vec<Option<WarpingPath>> {
        let n = self.nodes.len();
        let mut first_row = vec![usize::MAX; count];
        let mut last_row = vec![0; count];
        for (node, &c) in self.nodes.iter().zip(labels) {
            if c != NONE {
                first_row[c] = first_row[c].min(node.i);
                last_row[c] = last_row[c].max(node.i);
            }
        }
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![NIL; n];
        let mut end = vec![NONE; count];
        for v in 0..n {
            let c = labels[v];
            if c == NONE {
                continue;
            }
            let node = self.nodes[v];
            if node.i == first_row[c] {
                dist[v] = node.d;
            }
            for p in self.predecessors(v).into_iter().flatten() {
                let cand = dist[p] + node.d;
                if cand < dist[v] {
                    dist[v] = cand;
                    pred[v] = p as u32;
                }
            }
            if node.i == last_row[c] && dist[v].is_finite() && (end[c] == NONE || dist[v] < dist[end[c]]) {
                end[c] = v;
            }
        }
        end.into_iter()
            .map(|e| {
                if e == NONE {
                    return None;
                }
                let mut entries = Vec::new();
                let mut v = e as u32;
                while v != NIL {
                    let node = &self.nodes[v as usize];
                    entries.push((node.i, node.j));
                    v = pred[v as usize];
                }
                entries.reverse();
                Some(WarpingPath { entries, cost: dist[e] })
            })
            .collect()
    }
}

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        self.rank.push(0);
        id
    }

    fn find(&mut self, x: usize) -> usize {
        let mut x = x as u32;
        while self.parent[x as usize] != x {
            let up = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = up;
            x = up;
        }
        x as usize
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        match self.rank[a].cmp(&self.rank[b]) {
            std::cmp::Ordering::Less => self.parent[a] = b as u32,
            std::cmp::Ordering::Greater => self.parent[b] = a as u32,
            std::cmp::Ordering::Equal => {
                self.parent[b] = a as u32;
                self.rank[a] += 1;
            }
        }
    }
}

/// Shortest warping path of every weakly connected component of a window's
/// neighbourhood graph, computed without materialising the graph.
///
/// Results match [`NeighborhoodGraph::shortest_paths`] over
/// [`NeighborhoodGraph::connected_components`] entry for entry, including tie-breaking.
/// One pass labels components (union-find over provisional labels only), a second
/// runs the path recursion holding distances for two rows; per entry only a label, a
/// step code and a short back link are kept. `lower` restricts the window to `j < i`.
/// Returns the paths and the number of visited entries.
pub fn shortest_warping_paths(
    nbrs: &Neighborhoods,
    rows: Interval,
    cols: Interval,
    lower: bool,
) -> Result<(Vec<Option<WarpingPath>>, u64)> {
    if rows.end >= nbrs.len() || cols.end >= nbrs.len() {
        return Err(Error::invalid(format!(
            "window rows [{}, {}] cols [{}, {}] outside trial of {} frames",
            rows.start,
            rows.end,
            cols.start,
            cols.end,
            nbrs.len()
        )));
    }
    let mut spans: Vec<(usize, usize)> = Vec::with_capacity(rows.len());
    let mut row_start = Vec::with_capacity(rows.len() + 1);
    let mut ops = 0u64;

    // Pass 1: row spans and provisional labels, merged through the predecessors of
    // each entry.
    let mut label: Vec<u32> = Vec::new();
    let mut uf = UnionFind::new(0);
    for (r, i) in rows.frames().enumerate() {
        let set = nbrs.set(i);
        let (from, to) = if lower {
            let from = set.iter().position(|p| p.0 >= cols.start).unwrap_or(set.len());
            (from, from + set[from..].iter().take_while(|p| p.0 <= cols.end && p.0 < i).count())
        } else {
            let from = set.partition_point(|p| p.0 < cols.start);
            (from, from.max(set.partition_point(|p| p.0 <= cols.end)))
        };
        spans.push((from, to));
        let base = label.len();
        row_start.push(base);
        if label.len() + (to - from) >= NIL as usize {
            return Err(Error::invalid("warping path window has too many entries"));
        }
        let cur = &set[from..to];
        let (prev, pbase) = if r > 0 {
            let (pf, pt) = spans[r - 1];
            (&nbrs.set(i - 1)[pf..pt], row_start[r - 1])
        } else {
            (&[][..], 0)
        };
        let mut q = 0;
        for (k, &(j, _)) in cur.iter().enumerate() {
            ops += 1;
            while q < prev.len() && prev[q].0 + 1 < j {
                q += 1;
            }
            let mut l = NIL;
            let mut link = |other: u32, uf: &mut UnionFind| {
                if l == NIL {
                    l = other;
                } else if l != other {
                    uf.union(l as usize, other as usize);
                }
            };
            for t in q..(q + 2).min(prev.len()) {
                if prev[t].0 + 1 == j || prev[t].0 == j {
                    link(label[pbase + t], &mut uf);
                }
            }
            if k > 0 && cur[k - 1].0 + 1 == j {
                link(label[base + k - 1], &mut uf);
            }
            label.push(if l == NIL { uf.make() } else { l });
        }
    }
    let n = label.len();
    row_start.push(n);
    let row = |r: usize| -> &[(usize, f64)] {
        let (from, to) = spans[r];
        &nbrs.set(rows.start + r)[from..to]
    };
    // final labels numbered by first entry
    let mut root_comp = vec![NIL; uf.parent.len()];
    let (mut first_row, mut last_row) = (Vec::new(), Vec::new());
    for r in 0..rows.len() {
        for v in row_start[r]..row_start[r + 1] {
            ops += 1;
            let root = uf.find(label[v] as usize);
            if root_comp[root] == NIL {
                root_comp[root] = first_row.len() as u32;
                first_row.push(r);
                last_row.push(r);
            }
            let c = root_comp[root];
            last_row[c as usize] = r;
            label[v] = c;
        }
    }

    // Pass 2: path recursion. Step codes: 0 start, 1 from (i-1, j-1), 2 from (i-1, j),
    // 3 from (i, j-1); candidates are tried in that (lexicographic) order.
    let mut step = vec![0u8; n];
    // distance back to the predecessor; 0 when it does not fit and must be searched
    let mut back = vec![0u16; n];
    let mut end = vec![(NIL, 0, 0, f64::INFINITY); first_row.len()];
    let (mut prev_dist, mut cur_dist): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    for r in 0..rows.len() {
        let (cur, base) = (row(r), row_start[r]);
        let (prev, pbase) = if r > 0 { (row(r - 1), row_start[r - 1]) } else { (&[][..], 0) };
        cur_dist.clear();
        let mut q = 0;
        for (k, &(j, d)) in cur.iter().enumerate() {
            ops += 1;
            let v = base + k;
            let c = label[v] as usize;
            let mut best = if r == first_row[c] { d } else { f64::INFINITY };
            while q < prev.len() && prev[q].0 + 1 < j {
                q += 1;
            }
            for t in q..(q + 2).min(prev.len()) {
                let via = if prev[t].0 + 1 == j {
                    1
                } else if prev[t].0 == j {
                    2
                } else {
                    continue;
                };
                let cand = prev_dist[t] + d;
                if cand < best {
                    best = cand;
                    step[v] = via;
                    back[v] = u16::try_from(v - (pbase + t)).unwrap_or(0);
                }
            }
            if k > 0 && cur[k - 1].0 + 1 == j {
                let cand = cur_dist[k - 1] + d;
                if cand < best {
                    best = cand;
                    step[v] = 3;
                    back[v] = 1;
                }
            }
            cur_dist.push(best);
            if r == last_row[c] && best.is_finite() && (end[c].0 == NIL || best < end[c].3) {
                end[c] = (v as u32, rows.start + r, j, best);
            }
        }
        std::mem::swap(&mut prev_dist, &mut cur_dist);
    }

    // Entries follow from the end entry and the step codes alone.
    let paths = end
        .into_iter()
        .map(|(last, mut i, mut j, cost)| {
            if last == NIL {
                return None;
            }
            let mut v = last as usize;
            let mut entries = vec![(i, j)];
            loop {
                let via = step[v];
                match via {
                    0 => break,
                    1 => (i, j) = (i - 1, j - 1),
                    2 => i -= 1,
                    _ => j -= 1,
                }
                entries.push((i, j));
                v = match back[v] {
                    0 => {
                        let r = i - rows.start;
                        row_start[r] + row(r).binary_search_by_key(&j, |p| p.0).expect("predecessor entry exists")
                    }
                    off => v - off as usize,
                };
            }
            entries.reverse();
            Some(WarpingPath { entries, cost })
        })
        .collect();
    Ok((paths, ops))
}

/// Monotone path of SSSM entries `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpingPath {
    pub entries: Vec<(usize, usize)>,
    /// Sum of the distances of the entries.
    pub cost: f64,
}

impl WarpingPath {
    /// Path length λ.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn start(&self) -> (usize, usize) {
        self.entries[0]
    }

    pub fn end(&self) -> (usize, usize) {
        self.entries[self.entries.len() - 1]
    }

    /// Frames covered on the trial (row) axis.
    pub fn span(&self) -> usize {
        self.end().0 - self.start().0 + 1
    }

    pub fn column_span(&self) -> usize {
        self.end().1 - self.start().1 + 1
    }

    /// Average gradient: rows advanced per column advanced.
    pub fn slope(&self) -> f64 {
        let rows = (self.end().0 - self.start().0) as f64;
        let cols = (self.end().1 - self.start().1) as f64;
        if cols == 0.0 {
            if rows == 0.0 {
                f64::NAN
            } else {
                f64::INFINITY
            }
        } else {
            rows / cols
        }
    }

    /// Consecutive entries differ by an allowed step.
    pub fn is_valid(&self) -> bool {
        self.entries.windows(2).all(|w| {
            let (a, b) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            STEPS.contains(&(a, b))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathFilter {
    /// Minimum frames covered on the trial axis.
    pub min_span: usize,
    /// Slope limit ν; valid slopes lie in `[1/ν, ν]`.
    pub slope_limit: f64,
}

impl Default for PathFilter {
    fn default() -> Self {
        Self {
            min_span: 5,
            slope_limit: 2.0,
        }
    }
}

impl PathFilter {
    pub fn validate(&self) -> Result<()> {
        if !(self.slope_limit > 1.0) || !self.slope_limit.is_finite() {
            return Err(Error::invalid(format!("slope limit must exceed 1, got {}", self.slope_limit)));
        }
        Ok(())
    }

    pub fn accepts(&self, path: &WarpingPath) -> bool {
        let s = path.slope();
        !path.is_empty()
            && path.span() >= self.min_span
            && s >= 1.0 / self.slope_limit
            && s <= self.slope_limit
    }
}

pub fn filter_paths(paths: Vec<WarpingPath>, filter: &PathFilter) -> Vec<WarpingPath> {
    paths.into_iter().filter(|p| filter.accepts(p)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveSource {
    Path,
    WholeActivity,
    Mirrored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotionPrimitive {
    pub start: usize,
    pub end: usize,
    pub activity: usize,
    pub source: PrimitiveSource,
}

impl MotionPrimitive {
    pub fn interval(&self) -> Interval {
        Interval::new(self.start, self.end)
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A cut candidate: start row of an accepted path and that path's cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutCandidate {
    pub frame: usize,
    pub cost: f64,
}

/// Keeps candidates in order of ascending cost, dropping any closer than
/// `distance` frames to one already kept or to a fixed boundary.
pub fn merge_cuts(candidates: &[CutCandidate], fixed: &[usize], distance: usize) -> Vec<usize> {
    let mut order: Vec<&CutCandidate> = candidates.iter().collect();
    order.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.frame.cmp(&b.frame)));
    let mut kept: Vec<usize> = Vec::new();
    for c in order {
        let near = |f: &usize| f.abs_diff(c.frame) < distance;
        if !kept.iter().any(near) && !fixed.iter().any(near) {
            kept.push(c.frame);
        }
    }
    kept.sort_unstable();
    kept
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveParams {
    pub filter: PathFilter,
    /// Cut candidates closer than this many frames are merged.
    pub merge_distance: usize,
}

impl Default for PrimitiveParams {
    fn default() -> Self {
        Self {
            filter: PathFilter::default(),
            merge_distance: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PrimitiveExtraction {
    pub primitives: Vec<MotionPrimitive>,
    /// Accepted warping paths.
    pub paths: Vec<WarpingPath>,
    pub candidates: Vec<CutCandidate>,
    pub cuts: Vec<usize>,
    /// Graph construction, component and path search operations.
    pub ops: u64,
}

/// Cut candidates of one activity: start rows of every accepted path.
pub fn cut_candidates(
    nbrs: &Neighborhoods,
    activity: Interval,
    filter: &PathFilter,
) -> Result<(Vec<CutCandidate>, Vec<WarpingPath>, u64)> {
    if activity.end >= nbrs.len() {
        return Err(Error::invalid(format!(
            "activity [{}, {}] outside trial of {} frames",
            activity.start,
            activity.end,
            nbrs.len()
        )));
    }
    let (paths, ops) = shortest_warping_paths(nbrs, activity, activity, true)?;
    let paths: Vec<WarpingPath> = paths.into_iter().flatten().filter(|p| filter.accepts(p)).collect();
    let candidates = paths
        .iter()
        .map(|p| CutCandidate {
            frame: p.start().0,
            cost: p.cost,
        })
        .collect();
    Ok((candidates, paths, ops))
}

/// Splits `activity` at the given cuts (sorted, inside the activity).
pub fn primitives_from_cuts(
    activity: Interval,
    activity_index: usize,
    cuts: &[usize],
    source: impl Fn(usize) -> PrimitiveSource,
) -> Vec<MotionPrimitive> {
    let mut bounds: Vec<usize> = vec![activity.start];
    bounds.extend(cuts.iter().copied().filter(|&c| c > activity.start && c <= activity.end));
    bounds.dedup();
    let single = bounds.len() == 1;
    bounds
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let e = bounds.get(k + 1).map_or(activity.end, |n| n - 1);
            MotionPrimitive {
                start: s,
                end: e,
                activity: activity_index,
                source: if single { PrimitiveSource::WholeActivity } else { source(s) },
            }
        })
        .collect()
}

pub fn extract_primitives(
    activity: Interval,
    activity_index: usize,
    nbrs: &Neighborhoods,
    params: &PrimitiveParams,
) -> Result<PrimitiveExtraction> {
    params.filter.validate()?;
    let (candidates, paths, ops) = cut_candidates(nbrs, activity, &params.filter)?;
    let cuts = merge_cuts(&candidates, &[activity.start, activity.end + 1], params.merge_distance);
    let primitives = primitives_from_cuts(activity, activity_index, &cuts, |_| PrimitiveSource::Path);
    Ok(PrimitiveExtraction {
        primitives,
        paths,
        candidates,
        cuts,
        ops,
    })
}

/// Primitives of every activity, processed in parallel.
pub fn extract_all(
    activities: &[Interval],
    nbrs: &Neighborhoods,
    params: &PrimitiveParams,
) -> Result<Vec<PrimitiveExtraction>> {
    activities
        .par_iter()
        .enumerate()
        .map(|(k, &a)| extract_primitives(a, k, nbrs, params))
        .collect()
}
