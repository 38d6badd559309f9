//! Per-frame feature vectors: temporal stacking, mirroring and bundling.

mod bundling;
mod mirror;

pub use bundling::{bundle_features, kde_bandwidth, BundleConfig, BundleStats, FrameBundle, Kde, Pca, PCA_VARIANCE};
pub use mirror::{mirror_features, MirrorMap};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::TimeSeries;

/// Stacked feature vectors `F_1..F_m`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    data: Vec<f64>,
    dim: usize,
    offsets: Vec<isize>,
    source_dim: usize,
    bundled: bool,
}

impl FeatureSequence {
    /// Wraps raw vectors as a sequence stacked with offsets `[0]`.
    pub fn from_vectors(vectors: &[Vec<f64>]) -> Result<Self> {
        let dim = vectors.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::NoFrames);
        }
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::ChannelMismatch("feature vectors of unequal length".into()));
        }
        let data = vectors.concat();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature vectors must be finite"));
        }
        Ok(Self {
            data,
            dim,
            offsets: vec![0],
            source_dim: dim,
            bundled: false,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Dimension `D` of each stacked vector.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Channels per un-stacked frame.
    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn offsets(&self) -> &[isize] {
        &self.offsets
    }

    pub fn is_bundled(&self) -> bool {
        self.bundled
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn with_data(&self, data: Vec<f64>, bundled: bool) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            data,
            dim: self.dim,
            offsets: self.offsets.clone(),
            source_dim: self.source_dim,
            bundled,
        }
    }

    /// Appends `other` after this sequence (same layout). Used for cross-similarity searches.
    pub fn concat(&self, other: &FeatureSequence) -> Result<FeatureSequence> {
        if other.dim != self.dim {
            return Err(Error::ChannelMismatch("feature dimensions differ".into()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            data,
            dim: self.dim,
            offsets: self.offsets.clone(),
            source_dim: self.source_dim,
            bundled: self.bundled && other.bundled,
        })
    }
}

/// Stacks each frame with its temporal neighbours: row `i` is the concatenation of
/// frames `i + o` for every offset `o`, indices clamped to the trial.
pub fn stack_features(series: &TimeSeries, offsets: &[isize]) -> Result<FeatureSequence> {
    if offsets.is_empty() {
        return Err(Error::invalid("stacking offsets must not be empty"));
    }
    if !offsets.contains(&0) {
        return Err(Error::invalid("stacking offsets must contain 0"));
    }
    let mut sorted = offsets.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let m = series.frames() as isize;
    let n = series.channels();
    let mut data = Vec::with_capacity(series.frames() * n * sorted.len());
    for i in 0..m {
        for &o in &sorted {
            let src = (i + o).clamp(0, m - 1) as usize;
            data.extend_from_slice(series.frame(src));
        }
    }
    Ok(FeatureSequence {
        data,
        dim: n * sorted.len(),
        offsets: sorted,
        source_dim: n,
        bundled: false,
    })
}

/// Five-point derivative of the feature trajectory at frame `i`.
///
/// Interior frames use the centred stencil; the two frames at each end use the
/// fourth-order one-sided stencils.
pub fn five_point_derivative(feats: &FeatureSequence, i: usize) -> Result<Vec<f64>> {
    let m = feats.len();
    if m < 5 {
        return Err(Error::invalid(format!(
            "direction of movement needs at least 5 frames, got {m}"
        )));
    }
    if i >= m {
        return Err(Error::invalid(format!("frame {i} out of range")));
    }
    let (base, coeffs): (usize, [f64; 5]) = if i >= 2 && i + 2 < m {
        (i - 2, [1.0, -8.0, 0.0, 8.0, -1.0])
    } else if i == 0 {
        (0, [-25.0, 48.0, -36.0, 16.0, -3.0])
    } else if i == 1 {
        (0, [-3.0, -10.0, 18.0, -6.0, 1.0])
    } else if i == m - 1 {
        (m - 5, [3.0, -16.0, 36.0, -48.0, 25.0])
    } else {
        (m - 5, [-1.0, 6.0, -18.0, 10.0, 3.0])
    };
    let mut out = vec![0.0; feats.dim()];
    for (k, c) in coeffs.iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(feats.vector(base + k)) {
            *o += c * v;
        }
    }
    out.iter_mut().for_each(|o| *o /= 12.0);
    Ok(out)
}

/// Unit direction of movement at frame `i`, or `None` when the trajectory is stationary there.
pub fn direction_of_movement(feats: &FeatureSequence, i: usize) -> Result<Option<Vec<f64>>> {
    let mut d = five_point_derivative(feats, i)?;
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = feats
        .vector(i)
        .iter()
        .map(|v| v.abs())
        .fold(1.0f64, f64::max);
    if norm <= 1e-12 * scale {
        return Ok(None);
    }
    d.iter_mut().for_each(|v| *v /= norm);
    Ok(Some(d))
}

/// Orthonormal basis (columns) of the hyperplane orthogonal to `direction`.
///
/// QR of a square matrix whose first column is the direction and whose remaining
/// columns are random draws from a seeded generator.
pub fn orthogonal_subspace(direction: &[f64], seed: u64) -> Result<DMatrix<f64>> {
    let d = direction.len();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if d == 0 || !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::invalid("orthogonal subspace of a zero direction"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::<f64>::zeros(d, d);
    m.set_column(0, &(DVector::from_column_slice(direction) / norm));
    for c in 1..d {
        for r in 0..d {
            m[(r, c)] = rng.random_range(-1.0..1.0);
        }
    }
    let q = m.qr().q();
    Ok(q.columns(1, d - 1).into_owned())
}
