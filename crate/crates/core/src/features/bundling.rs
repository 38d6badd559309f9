//! Density-based feature bundling.
//!
//! Every feature point is pulled towards the local density mode of its `k`
//! nearest neighbours, moving only orthogonally to its own direction of motion.
//! Repeated performances of the same movement thereby collapse onto a common
//! trajectory while the sequence keeps its temporal layout.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::{direction_of_movement, orthogonal_subspace, FeatureSequence};
use crate::error::{Error, Result};
use crate::kdtree::KdTree;

/// Fraction of neighbour-set variance kept by the per-frame PCA.
pub const PCA_VARIANCE: f64 = 0.975;

#[derive(Debug, Clone, PartialEq)]
pub struct BundleConfig {
    /// Neighbours per frame.
    pub k: usize,
    /// Seed for the random fill of the QR basis.
    pub seed: u64,
    pub max_iterations: usize,
    /// Convergence threshold relative to the mean neighbour distance.
    pub tolerance: f64,
}

impl Default for BundleConfig {
    fn default() -> Self {
        Self {
            k: 64,
            seed: 0,
            max_iterations: 50,
            tolerance: 1e-6,
        }
    }
}

/// Per-frame diagnostics of a bundling run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameBundle {
    /// The trajectory does not move at this frame; the point was copied.
    pub stationary: bool,
    /// Retained PCA dimension.
    pub pca_dim: usize,
    pub iterations: usize,
    /// KDE value (in the reduced space) at the input and at the returned position.
    pub density_before: f64,
    pub density_after: f64,
    /// Unit direction of movement, empty when stationary.
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BundleStats {
    pub frames: Vec<FrameBundle>,
}

/// Scott's-rule diagonal bandwidth `h_j = sigma_j * k^(-1/(d+4))` for `k` samples of
/// dimension `d` (rows of `samples`). Zero-variance variates get a tiny floor
/// proportional to the data range.
pub fn kde_bandwidth(samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = samples.len();
    if k < 2 {
        return Err(Error::invalid(format!("bandwidth needs at least 2 samples, got {k}")));
    }
    let d = samples[0].len();
    let factor = (k as f64).powf(-1.0 / (d as f64 + 4.0));
    let (lo, hi) = samples
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let floor = if range > 0.0 { 1e-12 * range } else { 1e-12 };
    Ok((0..d)
        .map(|j| {
            let mean = samples.iter().map(|s| s[j]).sum::<f64>() / k as f64;
            let var = samples.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            let sigma = var.sqrt();
            if sigma > 0.0 {
                sigma * factor
            } else {
                floor
            }
        })
        .collect())
}

/// Gaussian product-kernel density estimate with diagonal bandwidth.
#[derive(Debug, Clone)]
pub struct Kde {
    centers: Vec<Vec<f64>>,
    bandwidth: Vec<f64>,
    norm: f64,
}

impl Kde {
    pub fn new(centers: Vec<Vec<f64>>, bandwidth: Vec<f64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::invalid("density estimate without samples"));
        }
        if centers.iter().any(|c| c.len() != bandwidth.len()) {
            return Err(Error::ChannelMismatch("sample and bandwidth dimensions differ".into()));
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let det: f64 = bandwidth.iter().map(|h| h * two_pi.sqrt()).product();
        Ok(Self {
            norm: 1.0 / (centers.len() as f64 * det),
            centers,
            bandwidth,
        })
    }

    pub fn from_samples(samples: Vec<Vec<f64>>) -> Result<Self> {
        let h = kde_bandwidth(&samples)?;
        Self::new(samples, h)
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.norm
            * self
                .centers
                .iter()
                .map(|c| {
                    let q: f64 = c
                        .iter()
                        .zip(x)
                        .zip(&self.bandwidth)
                        .map(|((ci, xi), h)| ((xi - ci) / h).powi(2))
                        .sum();
                    (-0.5 * q).exp()
                })
                .sum::<f64>()
    }
}

/// Principal components of a sample set.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: DVector<f64>,
    /// Columns are orthonormal loadings, by decreasing variance.
    pub components: DMatrix<f64>,
    pub variances: Vec<f64>,
}

impl Pca {
    /// Keeps the fewest leading components explaining at least `fraction` of the variance.
    /// A sample set without variance yields zero components.
    pub fn fit(samples: &[&[f64]], fraction: f64) -> Self {
        let k = samples.len();
        let dim = samples.first().map_or(0, |s| s.len());
        let mut mean = DVector::<f64>::zeros(dim);
        for s in samples {
            mean += DVector::from_column_slice(s);
        }
        mean /= k.max(1) as f64;
        let mut centered = DMatrix::<f64>::zeros(k, dim);
        for (r, s) in samples.iter().enumerate() {
            for c in 0..dim {
                centered[(r, c)] = s[c] - mean[c];
            }
        }
        let cov = centered.transpose() * &centered / (k.max(2) - 1) as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
        let mut keep = 0;
        if total > 0.0 {
            let mut acc = 0.0;
            for &idx in &order {
                acc += eig.eigenvalues[idx].max(0.0);
                keep += 1;
                if acc >= fraction * total {
                    break;
                }
            }
        }
        let mut components = DMatrix::<f64>::zeros(dim, keep);
        for (c, &idx) in order.iter().take(keep).enumerate() {
            components.set_column(c, &eig.eigenvectors.column(idx));
        }
        Self {
            mean,
            components,
            variances: order.iter().take(keep).map(|&i| eig.eigenvalues[i]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.ncols()
    }

    pub fn project(&self, x: &[f64]) -> DVector<f64> {
        self.components.transpose() * (DVector::from_column_slice(x) - &self.mean)
    }
}

pub fn bundle_features(
    feats: &FeatureSequence,
    config: &BundleConfig,
) -> Result<(FeatureSequence, BundleStats)> {
    let m = feats.len();
    if config.k < 2 || config.k >= m {
        return Err(Error::invalid(format!(
            "bundling needs 2 <= k < frames, got k={} for {m} frames",
            config.k
        )));
    }
    if m < 5 {
        return Err(Error::invalid("bundling needs at least 5 frames"));
    }
    let dim = feats.dim();
    let tree = KdTree::build(feats.as_slice(), dim);
    let results: Vec<Result<(Vec<f64>, FrameBundle)>> = (0..m)
        .into_par_iter()
        .map(|i| bundle_frame(feats, &tree, i, config))
        .collect();
    let mut data = Vec::with_capacity(m * dim);
    let mut stats = BundleStats::default();
    for r in results {
        let (v, s) = r?;
        data.extend_from_slice(&v);
        stats.frames.push(s);
    }
    Ok((feats.with_data(data, true), stats))
}

fn frame_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn bundle_frame(
    feats: &FeatureSequence,
    tree: &KdTree<'_>,
    i: usize,
    config: &BundleConfig,
) -> Result<(Vec<f64>, FrameBundle)> {
    let x = feats.vector(i);
    let Some(direction) = direction_of_movement(feats, i)? else {
        return Ok((x.to_vec(), FrameBundle { stationary: true, ..Default::default() }));
    };
    let neighbours = tree.nearest(x, config.k, Some(i));
    let scale = neighbours.iter().map(|n| n.1).sum::<f64>() / neighbours.len() as f64;
    let rows: Vec<&[f64]> = neighbours.iter().map(|&(j, _)| feats.vector(j)).collect();
    let pca = Pca::fit(&rows, PCA_VARIANCE);
    let d = pca.dim();
    let mut info = FrameBundle {
        pca_dim: d,
        direction: direction.clone(),
        ..Default::default()
    };
    if d == 0 {
        return Ok((x.to_vec(), info));
    }

    let samples: Vec<Vec<f64>> = rows.iter().map(|r| pca.project(r).as_slice().to_vec()).collect();
    let kde = Kde::from_samples(samples)?;
    let h = DVector::from_column_slice(kde.bandwidth());
    let y0 = pca.project(x);
    info.density_before = kde.evaluate(y0.as_slice());
    info.density_after = info.density_before;

    // whitened coordinates: the kernel is isotropic there
    let z0 = y0.component_div(&h);
    let zs: Vec<DVector<f64>> = kde
        .centers
        .iter()
        .map(|c| DVector::from_column_slice(c).component_div(&h))
        .collect();

    // Moving by dz keeps <O, direction> = 0 iff dz is orthogonal to h * (V^T direction).
    let u = pca.components.transpose() * DVector::from_column_slice(&direction);
    let constraint = h.component_mul(&u);
    let basis = if u.norm() < 1e-9 {
        DMatrix::<f64>::identity(d, d)
    } else {
        orthogonal_subspace(constraint.as_slice(), frame_seed(config.seed, i))?
    };
    if basis.ncols() == 0 {
        return Ok((x.to_vec(), info));
    }

    // Mean shift on the KDE restricted to the affine subspace z0 + basis * t. The
    // restriction is itself an isotropic Gaussian mixture in t, so the plain mean
    // shift update applies and ascends monotonically.
    let ts: Vec<DVector<f64>> = zs.iter().map(|z| basis.transpose() * (z - &z0)).collect();
    let residual: Vec<f64> = zs
        .iter()
        .zip(&ts)
        .map(|(z, t)| ((z - &z0).norm_squared() - t.norm_squared()).max(0.0))
        .collect();
    let mut t = DVector::<f64>::zeros(basis.ncols());
    let threshold = config.tolerance * scale.max(f64::MIN_POSITIVE);
    for iter in 0..config.max_iterations {
        let logw: Vec<f64> = ts
            .iter()
            .zip(&residual)
            .map(|(tn, r)| -0.5 * ((&t - tn).norm_squared() + r))
            .collect();
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut num = DVector::<f64>::zeros(t.len());
        let mut den = 0.0;
        for (tn, lw) in ts.iter().zip(&logw) {
            let w = (lw - max).exp();
            num.axpy(w, tn, 1.0);
            den += w;
        }
        let next = num / den;
        let step_y = (&basis * (&next - &t)).component_mul(&h);
        t = next;
        info.iterations = iter + 1;
        if step_y.norm() < threshold {
            break;
        }
    }

    let dy = (&basis * &t).component_mul(&h);
    let mut offset = &pca.components * &dy;
    // Drop the variance outside the retained components. The correction lives in the
    // discarded space; the part needed to stay orthogonal to the direction is kept.
    let outside = |v: &DVector<f64>| v - &pca.components * (pca.components.transpose() * v);
    let residual = outside(&(DVector::from_column_slice(x) - &pca.mean));
    let dvec = DVector::from_column_slice(&direction);
    let q = outside(&dvec);
    let qq = q.norm_squared();
    offset -= &residual;
    if qq > 1e-12 {
        offset.axpy(residual.dot(&dvec) / qq, &q, 1.0);
    }
    let y1 = &y0 + &dy;
    info.density_after = kde.evaluate(y1.as_slice());
    let out: Vec<f64> = x.iter().zip(offset.iter()).map(|(a, o)| a + o).collect();
    Ok((out, info))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandwidth_scott_rule() {
        // 32 samples with sample standard deviation exactly 2: 32^(-1/5) = 0.5
        let a = 2.0 * (31.0f64 / 32.0).sqrt();
        let samples: Vec<Vec<f64>> = (0..32).map(|i| vec![if i % 2 == 0 { a } else { -a }]).collect();
        let h = kde_bandwidth(&samples).unwrap();
        assert!((h[0] - 1.0).abs() < 1e-12, "{h:?}");
    }

    #[test]
    fn bandwidth_floor_for_constant_variate() {
        let samples: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 3.0]).collect();
        let h = kde_bandwidth(&samples).unwrap();
        assert!(h[1] > 0.0 && h[1] < 1e-10);
        let kde = Kde::new(samples.clone(), h).unwrap();
        assert!(kde.evaluate(&[4.0, 3.0]).is_finite());
    }

    #[test]
    fn bandwidth_needs_two_samples() {
        assert!(kde_bandwidth(&[vec![1.0]]).is_err());
    }

    #[test]
    fn pca_keeps_dominant_axis() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let t = i as f64 / 10.0;
                vec![t, 2.0 * t, 1e-3 * (i % 3) as f64]
            })
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let pca = Pca::fit(&refs, PCA_VARIANCE);
        assert_eq!(pca.dim(), 1);
        let c = pca.components.column(0);
        assert!((c[1] / c[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn k_out_of_range() {
        let vecs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i as f64).sin()]).collect();
        let f = FeatureSequence::from_vectors(&vecs).unwrap();
        let cfg = |k| BundleConfig { k, ..Default::default() };
        assert!(bundle_features(&f, &cfg(1)).is_err());
        assert!(bundle_features(&f, &cfg(10)).is_err());
        assert!(bundle_features(&f, &cfg(4)).is_ok());
    }

    #[test]
    fn repeated_line_is_fixed_point() {
        // back-and-forth traversal of a straight segment in 3-D
        let vecs: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let phase = (i % 40) as f64;
                let s = if phase < 20.0 { phase } else { 40.0 - phase } / 20.0;
                vec![s, 0.5 - 2.0 * s, 1.0 + 0.25 * s]
            })
            .collect();
        let f = FeatureSequence::from_vectors(&vecs).unwrap();
        let (out, _) = bundle_features(&f, &BundleConfig { k: 16, ..Default::default() }).unwrap();
        assert!(out.is_bundled());
        for (a, b) in out.as_slice().iter().zip(f.as_slice()) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
