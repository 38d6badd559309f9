//! Symmetry classification of activities from original and mirrored primitive cuts.

use serde::{Deserialize, Serialize};

use crate::activity::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryKind {
    /// Mirrored cuts reproduce the original cuts.
    Symmetric,
    /// Mirrored cuts fall strictly between the original ones (e.g. left/right steps).
    PhaseShifted,
    /// The mirrored motion never resembles the original.
    Asymmetric,
    /// Some mirrored cuts match, others do not.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub activity: Interval,
    pub kind: SymmetryKind,
    pub original_cuts: Vec<usize>,
    pub mirrored_cuts: Vec<usize>,
    pub merged_cuts: Vec<usize>,
}

impl SymmetryReport {
    /// Cuts added on top of the original ones.
    pub fn added_cuts(&self) -> usize {
        self.merged_cuts.len() - self.original_cuts.len()
    }
}

fn matches(cut: usize, others: &[usize], tolerance: usize) -> bool {
    others.iter().any(|&o| o.abs_diff(cut) <= tolerance)
}

/// Classifies one activity. Cut lists are frame positions inside `activity`.
///
/// Mirrored cuts without an original cut within `tolerance` are inserted into the
/// merged list, in ascending order, unless they fall within `tolerance` of a cut
/// already present.
pub fn classify_symmetry(
    activity: Interval,
    original: &[usize],
    mirrored: &[usize],
    tolerance: usize,
) -> SymmetryReport {
    let mut orig = original.to_vec();
    orig.sort_unstable();
    orig.dedup();
    let mut mirr = mirrored.to_vec();
    mirr.sort_unstable();
    mirr.dedup();

    let kind = if mirr.is_empty() {
        SymmetryKind::Asymmetric
    } else if orig.len() == mirr.len()
        && orig.iter().zip(&mirr).all(|(a, b)| a.abs_diff(*b) <= tolerance)
    {
        SymmetryKind::Symmetric
    } else if mirr.iter().all(|&c| !matches(c, &orig, tolerance)) {
        SymmetryKind::PhaseShifted
    } else {
        SymmetryKind::Mixed
    };

    let mut merged = orig.clone();
    if matches!(kind, SymmetryKind::PhaseShifted | SymmetryKind::Mixed) {
        for &c in &mirr {
            let near_boundary = c.abs_diff(activity.start) <= tolerance
                || c.abs_diff(activity.end + 1) <= tolerance;
            if !near_boundary && !matches(c, &merged, tolerance) {
                merged.push(c);
            }
        }
        merged.sort_unstable();
    }
    SymmetryReport {
        activity,
        kind,
        original_cuts: orig,
        mirrored_cuts: mirr,
        merged_cuts: merged,
    }
}
