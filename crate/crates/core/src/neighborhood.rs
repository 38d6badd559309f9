//! Radius-bounded neighbour sets: the sparse self-similarity matrix.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::kdtree::KdTree;

/// Per-frame neighbour lists `S_i` of `(j, d_ij)`, each sorted by `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods {
    sets: Vec<Vec<(usize, f64)>>,
    radius: f64,
    ops: u64,
}

impl Neighborhoods {
    /// Wraps explicit neighbour lists. Lists are sorted; indices must be in range
    /// and must not refer to their own frame.
    pub fn from_sets(mut sets: Vec<Vec<(usize, f64)>>, radius: f64) -> Result<Self> {
        let m = sets.len();
        for (i, s) in sets.iter_mut().enumerate() {
            if s.iter().any(|&(j, d)| j >= m || j == i || !(d >= 0.0) || !d.is_finite()) {
                return Err(Error::invalid(format!("neighbour list of frame {i} is malformed")));
            }
            s.sort_by_key(|p| p.0);
            if s.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::invalid(format!("duplicate neighbour in frame {i}")));
            }
        }
        Ok(Self { sets, radius, ops: 0 })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn set(&self, i: usize) -> &[(usize, f64)] {
        &self.sets[i]
    }

    pub fn sets(&self) -> &[Vec<(usize, f64)>] {
        &self.sets
    }

    /// Search operations spent building these sets.
    pub fn ops(&self) -> u64 {
        self.ops
    }

    pub fn entry_count(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    /// Largest neighbour set (the `k` of the complexity bounds).
    pub fn max_set_size(&self) -> usize {
        self.sets.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Distance of the pair `(i, j)` if present.
    pub fn distance(&self, i: usize, j: usize) -> Option<f64> {
        let s = &self.sets[i];
        s.binary_search_by_key(&j, |p| p.0).ok().map(|k| s[k].1)
    }

    pub fn is_symmetric(&self) -> bool {
        self.sets
            .iter()
            .enumerate()
            .all(|(i, s)| s.iter().all(|&(j, d)| self.distance(j, i) == Some(d)))
    }

    /// Keeps only pairs for which `keep(i, j)` holds.
    pub fn retain(&self, keep: impl Fn(usize, usize) -> bool) -> Self {
        Self {
            sets: self
                .sets
                .iter()
                .enumerate()
                .map(|(i, s)| s.iter().copied().filter(|&(j, _)| keep(i, j)).collect())
                .collect(),
            radius: self.radius,
            ops: self.ops,
        }
    }
}

/// `r = R * sqrt(|w| * N)`.
pub fn generalized_radius(r: f64, window_size: usize, dim: usize) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() || window_size == 0 || dim == 0 {
        return Err(Error::invalid(format!(
            "radius needs R > 0, |w| >= 1, N >= 1 (got R={r}, |w|={window_size}, N={dim})"
        )));
    }
    Ok(r * ((window_size * dim) as f64).sqrt())
}

/// Exact radius neighbourhoods with the generalised radius `R`.
pub fn compute_neighborhoods(feats: &FeatureSequence, r: f64) -> Result<Neighborhoods> {
    let radius = generalized_radius(r, feats.offsets().len(), feats.source_dim())?;
    radius_neighborhoods(feats, radius)
}

/// Exact neighbourhoods for an absolute radius.
pub fn radius_neighborhoods(feats: &FeatureSequence, radius: f64) -> Result<Neighborhoods> {
    let m = feats.len();
    if m < 2 {
        return Err(Error::invalid(format!("neighbourhoods need at least 2 frames, got {m}")));
    }
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("radius must be finite and non-negative, got {radius}")));
    }
    let tree = KdTree::build(feats.as_slice(), feats.dim());
    let results: Vec<(Vec<(usize, f64)>, u64)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            let ops = tree.within_radius(feats.vector(i), radius, Some(i), &mut out);
            out.sort_by_key(|p| p.0);
            (out, ops)
        })
        .collect();
    let ops = results.iter().map(|r| r.1).sum();
    Ok(Neighborhoods {
        sets: results.into_iter().map(|r| r.0).collect(),
        radius,
        ops,
    })
}

/// Cross block between a sequence and its mirrored counterpart, symmetrised.
///
/// Pair `(i, j)` is present when frame `i` of `original` lies within the radius of
/// frame `j` of `mirrored` or vice versa; the smaller distance is kept. This is the
/// off-diagonal block of the neighbourhoods of the concatenated sequence.
pub fn cross_neighborhoods(
    original: &FeatureSequence,
    mirrored: &FeatureSequence,
    r: f64,
) -> Result<Neighborhoods> {
    if original.len() != mirrored.len() || original.dim() != mirrored.dim() {
        return Err(Error::ChannelMismatch("mirrored features differ in shape".into()));
    }
    let m = original.len();
    if m < 2 {
        return Err(Error::invalid("neighbourhoods need at least 2 frames"));
    }
    let radius = generalized_radius(r, original.offsets().len(), original.source_dim())?;
    let tree = KdTree::build(mirrored.as_slice(), mirrored.dim());
    let found: Vec<(Vec<(usize, f64)>, u64)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            let ops = tree.within_radius(original.vector(i), radius, None, &mut out);
            (out, ops)
        })
        .collect();
    let ops = found.iter().map(|r| r.1).sum();
    let mut sets: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for (i, (s, _)) in found.into_iter().enumerate() {
        for (j, d) in s {
            if i != j {
                sets[i].push((j, d));
                sets[j].push((i, d));
            }
        }
    }
    for s in sets.iter_mut() {
        s.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        s.dedup_by_key(|p| p.0);
    }
    Ok(Neighborhoods {
        sets,
        radius,
        ops,
    })
}

/// Greyscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn transpose(&self) -> Self {
        let mut pixels = vec![0; self.pixels.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                pixels[x * self.height + y] = self.get(x, y);
            }
        }
        Self {
            width: self.height,
            height: self.width,
            pixels,
        }
    }

    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Background value of pixels without a neighbour pair.
pub const SSSM_BACKGROUND: u8 = 255;

/// Renders the SSSM: distance 0 is black, distance `r` is light grey (254),
/// absent pairs are white. The main diagonal is drawn at distance 0.
pub fn sssm_export(nbrs: &Neighborhoods) -> GrayImage {
    let m = nbrs.len();
    let mut pixels = vec![SSSM_BACKGROUND; m * m];
    let r = nbrs.radius();
    for i in 0..m {
        pixels[i * m + i] = 0;
        for &(j, d) in nbrs.set(i) {
            let v = if r > 0.0 { (d / r * 254.0).round().clamp(0.0, 254.0) } else { 0.0 };
            pixels[i * m + j] = v as u8;
        }
    }
    GrayImage {
        width: m,
        height: m,
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(vecs: &[Vec<f64>]) -> FeatureSequence {
        FeatureSequence::from_vectors(vecs).unwrap()
    }

    #[test]
    fn radius_examples() {
        assert_eq!(generalized_radius(1.0, 1, 1).unwrap(), 1.0);
        assert_eq!(generalized_radius(1.0, 3, 12).unwrap(), 6.0);
        assert_eq!(generalized_radius(0.5, 4, 4).unwrap(), 2.0);
        assert!(generalized_radius(0.0, 1, 1).is_err());
        assert!(generalized_radius(1.0, 0, 1).is_err());
    }

    #[test]
    fn identical_frames() {
        let n = compute_neighborhoods(&seq(&[vec![1.0, 2.0], vec![1.0, 2.0]]), 0.1).unwrap();
        assert_eq!(n.set(0), &[(1, 0.0)]);
        assert_eq!(n.set(1), &[(0, 0.0)]);
    }

    #[test]
    fn points_on_a_line() {
        let vecs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let n = radius_neighborhoods(&seq(&vecs), 1.5).unwrap();
        for i in 1..9 {
            let js: Vec<usize> = n.set(i).iter().map(|p| p.0).collect();
            assert_eq!(js, vec![i - 1, i + 1]);
        }
        assert!(n.is_symmetric());
    }

    #[test]
    fn needs_two_frames() {
        assert!(compute_neighborhoods(&seq(&[vec![1.0]]), 1.0).is_err());
    }

    #[test]
    fn cross_block_of_identical_sequences() {
        let vecs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 2.0]).collect();
        let a = seq(&vecs);
        let c = cross_neighborhoods(&a, &a, 1.0).unwrap();
        // only self pairs are within reach, and those are dropped
        assert_eq!(c.entry_count(), 0);
        let shifted: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 2.0 + 2.0]).collect();
        let c = cross_neighborhoods(&a, &seq(&shifted), 0.5).unwrap();
        assert!(c.is_symmetric());
        assert_eq!(c.distance(3, 2), Some(0.0));
        assert_eq!(c.distance(2, 3), Some(0.0));
    }

    #[test]
    fn image_is_symmetric_and_diagonal_only_when_empty() {
        let vecs: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 0.7).cos()]).collect();
        let n = radius_neighborhoods(&seq(&vecs), 0.5).unwrap();
        let img = sssm_export(&n);
        assert_eq!(img, img.transpose());
        let empty = Neighborhoods::from_sets(vec![Vec::new(); 5], 1.0).unwrap();
        let img = sssm_export(&empty);
        for y in 0..5 {
            for x in 0..5 {
                assert_eq!(img.get(x, y), if x == y { 0 } else { SSSM_BACKGROUND });
            }
        }
        assert!(img.to_pgm().starts_with(b"P5\n5 5\n255\n"));
    }
}
