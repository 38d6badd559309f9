//! Brute-force oracles shared by the oracle and acceptance test targets.
//!
//! Every check returns `Err(description)` on the first disagreement so the
//! acceptance harness can report it without panicking.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use motionseg::activity::Interval;
use motionseg::clustering::strongly_connected_components;
use motionseg::evaluation::dtw_with;
use motionseg::features::{FeatureSequence, Kde};
use motionseg::ingest::{filter, FilterKind, TimeSeries};
use motionseg::kdtree::KdTree;
use motionseg::neighborhood::{radius_neighborhoods, Neighborhoods};
use motionseg::primitives::{shortest_warping_paths, NeighborhoodGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};

pub type Check = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn brute_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += (a[k] - b[k]).powi(2);
    }
    s.sqrt()
}

// ---------------------------------------------------------------------------
// Radius search
// ---------------------------------------------------------------------------

/// Tree radius queries and the full neighbourhood computation against a pairwise scan.
pub fn kdtree_vs_brute_force(fixtures: u64, m: usize) -> Check {
    let mut queries = 0usize;
    for seed in 0..fixtures {
        let mut r = rng(1000 + seed);
        let dim = r.random_range(1..=9);
        // clustered points so that radii hit dense and sparse regions
        let centers: Vec<Vec<f64>> = (0..4).map(|_| (0..dim).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
        let points: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                let c = &centers[r.random_range(0..centers.len())];
                c.iter().map(|v| v + r.random_range(-0.5..0.5)).collect()
            })
            .collect();
        let flat: Vec<f64> = points.concat();
        let radius = r.random_range(0.05..1.2);

        let tree = KdTree::build(&flat, dim);
        for (i, p) in points.iter().enumerate() {
            let mut got = Vec::new();
            tree.within_radius(p, radius, Some(i), &mut got);
            let got: BTreeMap<usize, f64> = got.into_iter().collect();
            let want: BTreeMap<usize, f64> = points
                .iter()
                .enumerate()
                .filter(|&(j, q)| j != i && brute_dist(p, q) <= radius)
                .map(|(j, q)| (j, brute_dist(p, q)))
                .collect();
            if got.keys().ne(want.keys()) {
                return Err(format!("fixture {seed}, frame {i}: tree and scan disagree on the neighbour set"));
            }
            for (j, d) in &want {
                if (got[j] - d).abs() > 1e-12 {
                    return Err(format!("fixture {seed}, pair ({i},{j}): distance {} vs {d}", got[j]));
                }
            }
            queries += 1;
        }

        let feats = FeatureSequence::from_vectors(&points).map_err(|e| e.to_string())?;
        let nbrs = radius_neighborhoods(&feats, radius).map_err(|e| e.to_string())?;
        for (i, p) in points.iter().enumerate() {
            let got: Vec<usize> = nbrs.set(i).iter().map(|e| e.0).collect();
            let want: Vec<usize> = (0..m).filter(|&j| j != i && brute_dist(p, &points[j]) <= radius).collect();
            if got != want {
                return Err(format!("fixture {seed}, frame {i}: neighbourhood set differs from scan"));
            }
        }
    }
    Ok(format!("{fixtures} fixtures, {queries} queries"))
}

// ---------------------------------------------------------------------------
// Shortest warping paths
// ---------------------------------------------------------------------------

/// Random symmetric sparse neighbourhoods over `m` frames.
pub fn random_neighborhoods(r: &mut ChaCha8Rng, m: usize, density: f64) -> Neighborhoods {
    let mut sets = vec![Vec::new(); m];
    for i in 0..m {
        for j in 0..i {
            if r.random_bool(density) {
                let d = r.random_range(0.0..1.0);
                sets[i].push((j, d));
                sets[j].push((i, d));
            }
        }
    }
    Neighborhoods::from_sets(sets, 1.0).expect("valid sets")
}

/// Minimum path cost by depth-first enumeration of every step sequence.
fn enumerate_min_cost(comp: &BTreeMap<(usize, usize), f64>) -> f64 {
    let first = comp.keys().map(|k| k.0).min().unwrap();
    let last = comp.keys().map(|k| k.0).max().unwrap();
    fn walk(
        at: (usize, usize),
        acc: f64,
        last: usize,
        comp: &BTreeMap<(usize, usize), f64>,
        best: &mut f64,
    ) {
        if at.0 == last {
            *best = best.min(acc);
        }
        for (di, dj) in [(1, 1), (0, 1), (1, 0)] {
            let next = (at.0 + di, at.1 + dj);
            if let Some(d) = comp.get(&next) {
                walk(next, acc + d, last, comp, best);
            }
        }
    }
    let mut best = f64::INFINITY;
    for (&k, &d) in comp.iter().filter(|(k, _)| k.0 == first) {
        walk(k, d, last, comp, &mut best);
    }
    best
}

/// Weak components of the lower-triangle entry set, found by flood fill.
fn oracle_components(entries: &BTreeMap<(usize, usize), f64>) -> Vec<BTreeMap<(usize, usize), f64>> {
    let mut seen = BTreeSet::new();
    let mut comps = Vec::new();
    for &start in entries.keys() {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = BTreeMap::new();
        let mut stack = vec![start];
        while let Some((i, j)) = stack.pop() {
            comp.insert((i, j), entries[&(i, j)]);
            let around = [
                (i + 1, j + 1),
                (i, j + 1),
                (i + 1, j),
                (i.wrapping_sub(1), j.wrapping_sub(1)),
                (i, j.wrapping_sub(1)),
                (i.wrapping_sub(1), j),
            ];
            for n in around {
                if entries.contains_key(&n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        comps.push(comp);
    }
    comps
}

/// Graph components and their shortest paths against flood fill plus enumeration.
pub fn shortest_path_vs_enumeration(trials: u64, max_nodes: usize) -> Check {
    let mut checked = 0usize;
    for seed in 0..trials {
        let mut r = rng(2000 + seed);
        let m = r.random_range(6..28);
        let density = r.random_range(0.08..0.35);
        let nbrs = random_neighborhoods(&mut r, m, density);
        let act = Interval::new(0, m - 1);
        let graph = NeighborhoodGraph::for_activity(&nbrs, act).map_err(|e| e.to_string())?;

        let entries: BTreeMap<(usize, usize), f64> = (0..m)
            .flat_map(|i| nbrs.set(i).iter().filter(move |e| e.0 < i).map(move |&(j, d)| ((i, j), d)))
            .collect();
        let want = oracle_components(&entries);
        let comps = graph.connected_components();
        let got: BTreeSet<BTreeSet<(usize, usize)>> = comps
            .iter()
            .map(|c| c.iter().map(|&v| (graph.nodes()[v].i, graph.nodes()[v].j)).collect())
            .collect();
        let want_sets: BTreeSet<BTreeSet<(usize, usize)>> = want.iter().map(|c| c.keys().copied().collect()).collect();
        if got != want_sets {
            return Err(format!("trial {seed}: component partition differs from flood fill"));
        }

        let paths = graph.shortest_paths(&comps);
        let (streamed, _) = shortest_warping_paths(&nbrs, act, act, true).map_err(|e| e.to_string())?;
        if streamed != paths {
            return Err(format!("trial {seed}: streaming search differs from the explicit graph"));
        }
        let rows = Interval::new(r.random_range(0..m / 2), m - 1);
        let cols = Interval::new(0, r.random_range(m / 2..m));
        let rect = NeighborhoodGraph::for_rectangle(&nbrs, rows, cols).map_err(|e| e.to_string())?;
        let (rect_streamed, _) = shortest_warping_paths(&nbrs, rows, cols, false).map_err(|e| e.to_string())?;
        if rect_streamed != rect.shortest_paths(&rect.connected_components()) {
            return Err(format!("trial {seed}: streaming rectangle search differs from the explicit graph"));
        }
        for (c, path) in comps.iter().zip(&paths) {
            if c.len() > max_nodes {
                continue;
            }
            let comp: BTreeMap<(usize, usize), f64> = c
                .iter()
                .map(|&v| {
                    let n = graph.nodes()[v];
                    ((n.i, n.j), n.d)
                })
                .collect();
            let best = enumerate_min_cost(&comp);
            // a weak component need not contain a monotone first-to-last-row path
            let Some(path) = path else {
                if best.is_finite() {
                    return Err(format!("trial {seed}: no path returned, enumeration found {best}"));
                }
                checked += 1;
                continue;
            };
            if !best.is_finite() {
                return Err(format!("trial {seed}: path {:?} returned where none exists", path.entries));
            }
            let first = comp.keys().map(|k| k.0).min().unwrap();
            let last = comp.keys().map(|k| k.0).max().unwrap();
            let sum: f64 = path.entries.iter().map(|e| comp.get(e).copied().unwrap_or(f64::NAN)).sum();
            if !path.is_valid() || path.start().0 != first || path.end().0 != last {
                return Err(format!("trial {seed}: path {:?} is not a first-to-last-row path", path.entries));
            }
            if (sum - path.cost).abs() > 1e-9 || (path.cost - best).abs() > 1e-9 {
                return Err(format!("trial {seed}: path cost {} (entries {sum}) vs enumerated {best}", path.cost));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} components"))
}

// ---------------------------------------------------------------------------
// Strongly connected components
// ---------------------------------------------------------------------------

pub fn scc_vs_closure(trials: u64, max_nodes: usize) -> Check {
    for seed in 0..trials {
        let mut r = rng(3000 + seed);
        let n = r.random_range(1..=max_nodes);
        let p = r.random_range(0.0..0.4);
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|_| (0..n).filter(|_| r.random_bool(p)).collect())
            .collect();
        let mut reach = vec![vec![false; n]; n];
        for (v, out) in adj.iter().enumerate() {
            reach[v][v] = true;
            for &w in out {
                reach[v][w] = true;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if reach[i][k] && reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
        let mut want: Vec<Vec<usize>> = Vec::new();
        let mut assigned = vec![false; n];
        for i in 0..n {
            if assigned[i] {
                continue;
            }
            let class: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
            for &j in &class {
                assigned[j] = true;
            }
            want.push(class);
        }
        let got = strongly_connected_components(&adj);
        if got != want {
            return Err(format!("graph {seed} ({n} nodes): {got:?} vs closure {want:?}"));
        }
    }
    Ok(format!("{trials} graphs"))
}

// ---------------------------------------------------------------------------
// Dynamic time warping
// ---------------------------------------------------------------------------

pub fn dtw_vs_enumeration(trials: u64, max_len: usize) -> Check {
    fn walk(i: usize, j: usize, acc: f64, c: &[Vec<f64>], best: &mut f64) {
        let acc = acc + c[i][j];
        if i + 1 == c.len() && j + 1 == c[0].len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < c.len() && j + 1 < c[0].len() {
            walk(i + 1, j + 1, acc, c, best);
        }
        if j + 1 < c[0].len() {
            walk(i, j + 1, acc, c, best);
        }
        if i + 1 < c.len() {
            walk(i + 1, j, acc, c, best);
        }
    }
    for seed in 0..trials {
        let mut r = rng(4000 + seed);
        let (n, m) = (r.random_range(1..=max_len), r.random_range(1..=max_len));
        let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| r.random_range(0.0..2.0)).collect()).collect();
        let mut best = f64::INFINITY;
        walk(0, 0, 0.0, &cost, &mut best);
        let got = dtw_with(n, m, |i, j| cost[i][j]);
        if (got - best).abs() > 1e-12 {
            return Err(format!("{n}x{m} matrix {seed}: dtw {got} vs enumerated {best}"));
        }
    }
    Ok(format!("{trials} alignments"))
}

// ---------------------------------------------------------------------------
// Kernel density
// ---------------------------------------------------------------------------

pub fn kde_vs_direct_sum(trials: u64) -> Check {
    let mut worst = 0.0f64;
    for seed in 0..trials {
        let mut r = rng(5000 + seed);
        let dim = r.random_range(1..=6);
        let n = r.random_range(1..80);
        let centers: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let h: Vec<f64> = (0..dim).map(|_| r.random_range(0.05..0.8)).collect();
        let kde = Kde::new(centers.clone(), h.clone()).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let x: Vec<f64> = (0..dim).map(|_| r.random_range(-1.5..1.5)).collect();
            let mut direct = 0.0;
            for c in &centers {
                let mut k = 1.0;
                for d in 0..dim {
                    let u = (x[d] - c[d]) / h[d];
                    k *= (-0.5 * u * u).exp() / (h[d] * (2.0 * std::f64::consts::PI).sqrt());
                }
                direct += k;
            }
            direct /= n as f64;
            let got = kde.evaluate(&x);
            let err = (got - direct).abs() / direct.abs().max(1e-300);
            worst = worst.max(err);
            if err > 1e-9 {
                return Err(format!("case {seed}: density {got} vs direct sum {direct}"));
            }
        }
    }
    Ok(format!("{trials} estimates, worst relative error {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// Zero-phase low-pass
// ---------------------------------------------------------------------------

/// Gain of the forward-backward filter per frequency bin, read off an FFT, against
/// the squared response of a bilinear Butterworth prototype.
pub fn lowpass_vs_fft(cutoff: f64, rate: f64) -> Check {
    let (total, window) = (4096usize, 2048usize);
    let bins = [4usize, 16, 40, 64, 80, 102, 120, 160, 240, 400];
    let signal: Vec<f64> = (0..total)
        .map(|t| {
            bins.iter()
                .map(|&k| (2.0 * std::f64::consts::PI * k as f64 * t as f64 / window as f64).cos())
                .sum()
        })
        .collect();
    let series = TimeSeries::new(signal.clone(), vec!["x".into()], rate).map_err(|e| e.to_string())?;
    let out = filter(&series, FilterKind::Lowpass { cutoff_hz: cutoff })
        .map_err(|e| e.to_string())?
        .channel(0);
    let start = (total - window) / 2;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window);
    let spectrum = |x: &[f64]| {
        let mut buf: Vec<Complex<f64>> = x[start..start + window].iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft.process(&mut buf);
        buf
    };
    let (sin, sout) = (spectrum(&signal), spectrum(&out));
    let wc = (std::f64::consts::PI * cutoff / rate).tan();
    let mut worst = 0.0f64;
    for &k in &bins {
        let f = k as f64 * rate / window as f64;
        let ratio = (std::f64::consts::PI * f / rate).tan() / wc;
        let expected = 1.0 / (1.0 + ratio.powi(4));
        let gain = sout[k].norm() / sin[k].norm();
        let err = (gain - expected).abs();
        worst = worst.max(err);
        if err > 1e-3 {
            return Err(format!("{f:.3} Hz: gain {gain:.6} vs prototype {expected:.6}"));
        }
    }
    Ok(format!("{} tones, worst gain error {worst:.1e}", bins.len()))
}
