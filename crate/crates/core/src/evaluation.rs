//! Quantitative measures: frame accuracy, DTW cluster variance, key-point
//! consistency and interval boundary/overlap statistics.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activity::Interval;
use crate::error::{Error, Result};
use crate::ingest::TimeSeries;
use crate::pipeline::SegmentationResult;

pub const TRANSITION: &str = "transition";
pub const UNCERTAIN: &str = "uncertain";

pub fn is_reserved(label: &str) -> bool {
    label == TRANSITION || label == UNCERTAIN
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledInterval {
    pub interval: Interval,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPoint {
    pub frame: usize,
    pub label: String,
}

/// Human annotations. Frames are 0-based here; files are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroundTruth {
    Intervals(Vec<LabeledInterval>),
    KeyPoints(Vec<KeyPoint>),
}

impl GroundTruth {
    /// Parses `start_frame,end_frame,label` or `keyframe,label` rows, with an optional header.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let row_err = |row: usize, message: String| Error::Row {
            path: path.to_path_buf(),
            row,
            message,
        };
        let mut intervals = Vec::new();
        let mut keys = Vec::new();
        let mut width = None;
        for (k, line) in text.lines().enumerate() {
            let row = k + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if width.is_none() && cells[0].parse::<usize>().is_err() {
                // header row
                width = Some(cells.len());
                continue;
            }
            let w = *width.get_or_insert(cells.len());
            if cells.len() != w || !(w == 2 || w == 3) {
                return Err(row_err(row, format!("expected {w} columns (2 or 3), got {}", cells.len())));
            }
            let frame = |s: &str| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(f) if f >= 1 => Ok(f - 1),
                    _ => Err(row_err(row, format!("bad frame number \"{s}\""))),
                }
            };
            if w == 3 {
                let (a, b) = (frame(cells[0])?, frame(cells[1])?);
                if b < a {
                    return Err(row_err(row, "end frame before start frame".into()));
                }
                intervals.push(LabeledInterval {
                    interval: Interval::new(a, b),
                    label: cells[2].to_string(),
                });
            } else {
                keys.push(KeyPoint {
                    frame: frame(cells[0])?,
                    label: cells[1].to_string(),
                });
            }
        }
        if width == Some(2) {
            keys.sort_by_key(|k| k.frame);
            return Ok(Self::KeyPoints(keys));
        }
        intervals.sort_by_key(|iv| iv.interval);
        if let Some(w) = intervals.windows(2).find(|w| w[0].interval.end >= w[1].interval.start) {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!(
                    "annotations {}-{} and {}-{} overlap",
                    w[0].interval.start + 1,
                    w[0].interval.end + 1,
                    w[1].interval.start + 1,
                    w[1].interval.end + 1
                ),
            });
        }
        Ok(Self::Intervals(intervals))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Label of every frame after aliasing; frames without annotation are uncertain.
    pub fn frame_labels(&self, frames: usize, aliases: &BTreeMap<String, String>) -> Result<Vec<String>> {
        let Self::Intervals(ivs) = self else {
            return Err(Error::invalid("frame labels need interval annotations, got key points"));
        };
        let mut out = vec![UNCERTAIN.to_string(); frames];
        for iv in ivs {
            if iv.interval.end >= frames {
                return Err(Error::invalid(format!(
                    "annotation {}-{} beyond trial of {frames} frames",
                    iv.interval.start + 1,
                    iv.interval.end + 1
                )));
            }
            let label = aliases.get(&iv.label).unwrap_or(&iv.label);
            for f in iv.interval.frames() {
                out[f] = label.clone();
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyMode {
    Strict,
    Tolerant,
}

/// Majority ground-truth label of every cluster. Reserved labels only win when a
/// cluster has no other frames; ties go to the lexicographically smallest label.
pub fn cluster_labels(frame_clusters: &[Option<usize>], labels: &[String]) -> BTreeMap<usize, String> {
    let mut votes: BTreeMap<usize, BTreeMap<&str, usize>> = BTreeMap::new();
    for (c, l) in frame_clusters.iter().zip(labels) {
        if let Some(c) = c {
            *votes.entry(*c).or_default().entry(l.as_str()).or_default() += 1;
        }
    }
    votes
        .into_iter()
        .map(|(c, v)| {
            let pick = |reserved: bool| {
                v.iter()
                    .filter(|(l, _)| is_reserved(l) == reserved)
                    .fold(None, |best: Option<(&str, usize)>, (l, n)| match best {
                        Some((_, bn)) if bn >= *n => best,
                        _ => Some((l, *n)),
                    })
                    .map(|(l, _)| l.to_string())
            };
            (c, pick(false).or_else(|| pick(true)).unwrap_or_default())
        })
        .collect()
}

/// Fraction of frames whose label agrees with their cluster's label.
///
/// Frames outside primitives count as predicted transitions and are correct when
/// annotated transition or uncertain. Tolerant mode also accepts any frame annotated
/// transition or uncertain.
pub fn frame_accuracy(
    frame_clusters: &[Option<usize>],
    gt: &GroundTruth,
    mode: AccuracyMode,
    aliases: &BTreeMap<String, String>,
) -> Result<f64> {
    let m = frame_clusters.len();
    if m == 0 {
        return Err(Error::NoFrames);
    }
    let labels = gt.frame_labels(m, aliases)?;
    let names = cluster_labels(frame_clusters, &labels);
    let correct = frame_clusters
        .iter()
        .zip(&labels)
        .filter(|(c, l)| match c {
            None => is_reserved(l),
            Some(c) => names[c] == **l || (mode == AccuracyMode::Tolerant && is_reserved(l)),
        })
        .count();
    Ok(correct as f64 / m as f64)
}

/// Dynamic time warping with steps (1,1), (0,1), (1,0) over an arbitrary local cost.
pub fn dtw_with(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> f64 {
    if n == 0 || m == 0 {
        return if n == m { 0.0 } else { f64::INFINITY };
    }
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![f64::INFINITY; m];
    for i in 0..n {
        for j in 0..m {
            let c = cost(i, j);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let mut b = f64::INFINITY;
                if i > 0 {
                    b = b.min(prev[j]);
                    if j > 0 {
                        b = b.min(prev[j - 1]);
                    }
                }
                if j > 0 {
                    b = b.min(cur[j - 1]);
                }
                b
            };
            cur[j] = best + c;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// DTW cost between two frame sequences under frame-wise Euclidean distance.
pub fn dtw(a: &[&[f64]], b: &[&[f64]]) -> f64 {
    dtw_with(a.len(), b.len(), |i, j| euclidean(a[i], b[j]))
}

/// Minimal weighted squared distance between two point clouds after a rotation about
/// the vertical axis and a translation in the ground plane. Points are `[x, y, z]`
/// with `y` vertical; weights are normalised internally.
pub fn point_cloud_distance(a: &[[f64; 3]], b: &[[f64; 3]], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if a.is_empty() || total <= 0.0 {
        return 0.0;
    }
    let w: Vec<f64> = weights.iter().map(|v| v / total).collect();
    let mean = |p: &[[f64; 3]], k: usize| p.iter().zip(&w).map(|(q, w)| w * q[k]).sum::<f64>();
    let (ax, az, bx, bz) = (mean(a, 0), mean(a, 2), mean(b, 0), mean(b, 2));
    let (mut s_cos, mut s_sin) = (0.0, 0.0);
    for ((p, q), wi) in a.iter().zip(b).zip(&w) {
        let (x, z) = (p[0] - ax, p[2] - az);
        let (x2, z2) = (q[0] - bx, q[2] - bz);
        s_cos += wi * (x * x2 + z * z2);
        s_sin += wi * (x * z2 - z * x2);
    }
    let theta = s_sin.atan2(s_cos);
    let (c, s) = (theta.cos(), theta.sin());
    a.iter()
        .zip(b)
        .zip(&w)
        .map(|((p, q), wi)| {
            let (x2, z2) = (q[0] - bx, q[2] - bz);
            let rx = x2 * c + z2 * s + ax;
            let rz = -x2 * s + z2 * c + az;
            wi * ((p[0] - rx).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - rz).powi(2))
        })
        .sum()
}

/// DTW over point-cloud distances: frames hold consecutive `[x, y, z]` joint triplets
/// and each frame is compared through the cloud of joints in a window of
/// `2 * half_window + 1` frames around it.
pub fn point_cloud_dtw(a: &[&[f64]], b: &[&[f64]], half_window: usize) -> Result<f64> {
    let dim = a.first().or(b.first()).map_or(0, |f| f.len());
    if dim == 0 || dim % 3 != 0 {
        return Err(Error::ChannelMismatch(format!("point clouds need xyz triplets, got {dim} channels")));
    }
    let cloud = |s: &[&[f64]], i: usize| -> Vec<[f64; 3]> {
        let lo = i.saturating_sub(half_window);
        let hi = (i + half_window).min(s.len() - 1);
        (lo..=hi)
            .flat_map(|f| s[f].chunks_exact(3).map(|c| [c[0], c[1], c[2]]))
            .collect()
    };
    let ca: Vec<Vec<[f64; 3]>> = (0..a.len()).map(|i| cloud(a, i)).collect();
    let cb: Vec<Vec<[f64; 3]>> = (0..b.len()).map(|i| cloud(b, i)).collect();
    Ok(dtw_with(a.len(), b.len(), |i, j| {
        let n = ca[i].len().min(cb[j].len());
        point_cloud_distance(&ca[i][..n], &cb[j][..n], &vec![1.0; n]).sqrt()
    }))
}

/// `D = sum over ordered pairs i != j of DTW(s_i, s_j) / |s_i|`. `None` below two segments.
pub fn intra_cluster_variance(segments: &[Vec<&[f64]>]) -> Option<f64> {
    let n = segments.len();
    if n < 2 {
        return None;
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let terms: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let d = dtw(&segments[i], &segments[j]);
            d / segments[i].len() as f64 + d / segments[j].len() as f64
        })
        .collect();
    Some(terms.iter().sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointReport {
    /// Counts of relative positions over ten equal bins of `[0, 1]`.
    pub histogram: Vec<usize>,
    pub positions: Vec<f64>,
    /// Population standard deviation of the relative position per key-point label.
    pub class_std: BTreeMap<String, f64>,
    pub in_transitions: usize,
    pub unassigned: usize,
}

/// Relative position `(key - start) / length` of every key point in its primitive.
pub fn keypoint_consistency(primitives: &[Interval], transitions: &[Interval], keys: &[KeyPoint]) -> KeypointReport {
    let mut histogram = vec![0; 10];
    let mut positions = Vec::new();
    let mut by_class: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let (mut in_transitions, mut unassigned) = (0, 0);
    for k in keys {
        if let Some(p) = primitives.iter().find(|p| p.contains(k.frame)) {
            let rel = (k.frame - p.start) as f64 / p.len() as f64;
            histogram[((rel * 10.0) as usize).min(9)] += 1;
            positions.push(rel);
            by_class.entry(k.label.clone()).or_default().push(rel);
        } else if transitions.iter().any(|t| t.contains(k.frame)) {
            in_transitions += 1;
        } else {
            unassigned += 1;
        }
    }
    KeypointReport {
        histogram,
        positions,
        class_std: by_class.into_iter().map(|(l, v)| (l, mean_std(&v).1)).collect(),
        in_transitions,
        unassigned,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub annotations: usize,
    /// Pooled start and end distances to the nearest primitive boundary, in frames.
    pub boundary_mean: f64,
    pub boundary_std: f64,
    /// Share of each annotation covered by its largest-overlapping primitive, in percent.
    pub overlap_mean: f64,
    pub overlap_std: f64,
}

/// Boundary distances and largest-segment overlap of non-reserved annotations.
pub fn interval_overlap(primitives: &[Interval], gt: &[LabeledInterval]) -> Option<OverlapReport> {
    if primitives.is_empty() {
        return None;
    }
    let mut dists = Vec::new();
    let mut overlaps = Vec::new();
    for a in gt.iter().filter(|a| !is_reserved(&a.label)) {
        let iv = a.interval;
        let ds = primitives.iter().map(|p| p.start.abs_diff(iv.start)).min()?;
        let de = primitives.iter().map(|p| p.end.abs_diff(iv.end)).min()?;
        dists.push(ds as f64);
        dists.push(de as f64);
        let best = primitives
            .iter()
            .filter_map(|p| p.intersect(&iv).map(|x| x.len()))
            .max()
            .unwrap_or(0);
        overlaps.push(100.0 * best as f64 / iv.len() as f64);
    }
    if overlaps.is_empty() {
        return None;
    }
    let (bm, bs) = mean_std(&dists);
    let (om, os) = mean_std(&overlaps);
    Some(OverlapReport {
        annotations: overlaps.len(),
        boundary_mean: bm,
        boundary_std: bs,
        overlap_mean: om,
        overlap_std: os,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterVariance {
    pub cluster: usize,
    pub size: usize,
    pub d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub strict_accuracy: Option<f64>,
    pub tolerant_accuracy: Option<f64>,
    pub cluster_variance: Vec<ClusterVariance>,
    pub mean_cluster_variance: Option<f64>,
    pub keypoints: Option<KeypointReport>,
    pub boundaries: Option<OverlapReport>,
}

/// Evaluates a segmentation result against annotations. Cluster variance needs the
/// trial's frames.
pub fn evaluate(
    result: &SegmentationResult,
    gt: &GroundTruth,
    aliases: &BTreeMap<String, String>,
    series: Option<&TimeSeries>,
) -> Result<EvalReport> {
    let prims = result.primitive_intervals();
    let mut report = EvalReport {
        strict_accuracy: None,
        tolerant_accuracy: None,
        cluster_variance: Vec::new(),
        mean_cluster_variance: None,
        keypoints: None,
        boundaries: None,
    };
    match gt {
        GroundTruth::Intervals(ivs) => {
            let fc = result.frame_clusters();
            report.strict_accuracy = Some(frame_accuracy(&fc, gt, AccuracyMode::Strict, aliases)?);
            report.tolerant_accuracy = Some(frame_accuracy(&fc, gt, AccuracyMode::Tolerant, aliases)?);
            report.boundaries = interval_overlap(&prims, ivs);
        }
        GroundTruth::KeyPoints(keys) => {
            report.keypoints = Some(keypoint_consistency(&prims, &result.transition_intervals(), keys));
        }
    }
    if let Some(series) = series {
        if series.frames() != result.meta.frames {
            return Err(Error::invalid(format!(
                "trial has {} frames, segmentation expects {}",
                series.frames(),
                result.meta.frames
            )));
        }
        for c in &result.clusters {
            let segments: Vec<Vec<&[f64]>> = c
                .primitives
                .iter()
                .map(|&p| prims[p].frames().map(|f| series.frame(f)).collect())
                .collect();
            report.cluster_variance.push(ClusterVariance {
                cluster: c.id,
                size: c.primitives.len(),
                d: intra_cluster_variance(&segments),
            });
        }
        let ds: Vec<f64> = report.cluster_variance.iter().filter_map(|c| c.d).collect();
        if !ds.is_empty() {
            report.mean_cluster_variance = Some(ds.iter().sum::<f64>() / ds.len() as f64);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt(rows: &str) -> GroundTruth {
        GroundTruth::parse(rows, Path::new("gt.csv")).unwrap()
    }

    #[test]
    fn parse_intervals_and_keys() {
        let g = gt("start_frame,end_frame,label\n1,10,walk\n11,20,transition\n");
        let GroundTruth::Intervals(ivs) = &g else { panic!() };
        assert_eq!(ivs[0].interval, Interval::new(0, 9));
        let k = gt("keyframe,label\n5,heel\n");
        assert_eq!(k, GroundTruth::KeyPoints(vec![KeyPoint { frame: 4, label: "heel".into() }]));
        assert!(GroundTruth::parse("1,10,a\n5,12,b\n", Path::new("x")).is_err());
        assert!(GroundTruth::parse("0,10,a\n", Path::new("x")).is_err());
    }

    #[test]
    fn perfect_and_mixed_accuracy() {
        let g = gt("1,5,a\n6,10,b\n");
        let fc: Vec<Option<usize>> = (0..10).map(|f| Some(f / 5)).collect();
        let none = BTreeMap::new();
        assert_eq!(frame_accuracy(&fc, &g, AccuracyMode::Strict, &none).unwrap(), 1.0);
        assert_eq!(frame_accuracy(&fc, &g, AccuracyMode::Tolerant, &none).unwrap(), 1.0);

        // one cluster over 6 frames of A and 4 of transition
        let g = gt("1,6,A\n7,10,transition\n");
        let fc = vec![Some(0); 10];
        assert!((frame_accuracy(&fc, &g, AccuracyMode::Strict, &none).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(frame_accuracy(&fc, &g, AccuracyMode::Tolerant, &none).unwrap(), 1.0);
        assert!(frame_accuracy(&fc, &gt("3,x\n"), AccuracyMode::Strict, &none).is_err());
    }

    #[test]
    fn aliases_merge_labels() {
        let g = gt("1,5,left\n6,10,right\n");
        let fc = vec![Some(0); 10];
        let mut aliases = BTreeMap::new();
        assert_eq!(frame_accuracy(&fc, &g, AccuracyMode::Strict, &aliases).unwrap(), 0.5);
        aliases.insert("left".to_string(), "step".to_string());
        aliases.insert("right".to_string(), "step".to_string());
        assert_eq!(frame_accuracy(&fc, &g, AccuracyMode::Strict, &aliases).unwrap(), 1.0);
    }

    #[test]
    fn dtw_basics() {
        let a: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![2.0]];
        let b: Vec<Vec<f64>> = vec![vec![0.0], vec![0.0], vec![1.0], vec![2.0]];
        let ra: Vec<&[f64]> = a.iter().map(Vec::as_slice).collect();
        let rb: Vec<&[f64]> = b.iter().map(Vec::as_slice).collect();
        assert_eq!(dtw(&ra, &ra), 0.0);
        assert_eq!(dtw(&ra, &rb), 0.0);
        assert_eq!(intra_cluster_variance(&[ra.clone(), ra.clone()]), Some(0.0));
        assert_eq!(intra_cluster_variance(&[ra]), None);
    }

    #[test]
    fn point_cloud_rotation_invariance() {
        let a = [[1.0, 0.0, 0.0], [0.0, 1.0, 2.0], [-1.0, 0.5, 0.3]];
        let t = 0.7f64;
        let b: Vec<[f64; 3]> = a
            .iter()
            .map(|p| [p[0] * t.cos() - p[2] * t.sin() + 3.0, p[1], p[0] * t.sin() + p[2] * t.cos() - 1.0])
            .collect();
        assert!(point_cloud_distance(&a, &b, &[1.0; 3]) < 1e-20);
        let lifted: Vec<[f64; 3]> = a.iter().map(|p| [p[0], p[1] + 1.0, p[2]]).collect();
        assert!((point_cloud_distance(&a, &lifted, &[1.0; 3]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn keypoint_examples() {
        let prims = [Interval::new(99, 138)];
        let keys = [
            KeyPoint { frame: 119, label: "k".into() },
            KeyPoint { frame: 99, label: "k".into() },
            KeyPoint { frame: 10, label: "k".into() },
        ];
        let r = keypoint_consistency(&prims, &[Interval::new(0, 98)], &keys);
        assert_eq!(r.positions, vec![0.5, 0.0]);
        assert_eq!(r.histogram.iter().sum::<usize>(), 2);
        assert_eq!(r.in_transitions, 1);
    }

    #[test]
    fn overlap_examples() {
        let ann = [LabeledInterval { interval: Interval::new(99, 198), label: "a".into() }];
        let r = interval_overlap(&[Interval::new(99, 148), Interval::new(149, 198)], &ann).unwrap();
        assert_eq!(r.overlap_mean, 50.0);
        assert_eq!(r.boundary_mean, 0.0);
        let r = interval_overlap(&[Interval::new(99, 198)], &ann).unwrap();
        assert_eq!(r.overlap_mean, 100.0);
    }
}
