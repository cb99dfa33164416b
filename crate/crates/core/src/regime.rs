//! Regime reports: how many translation-invariant Gibbs measures a parameter
//! point carries, and which case of the classification it falls in.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Loop activity at which the two thresholds coincide, `49/9`.
pub const CRITICAL_LOOP_ACTIVITY: f64 = 49.0 / 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    /// Two-loop graph, finite `Λ`: a single measure.
    #[serde(rename = "two-loop-unique")]
    TwoLoopUnique,
    /// Two-loop graph where the branch scan found several positive
    /// solutions.
    #[serde(rename = "two-loop-non-unique")]
    TwoLoopNonUnique,
    /// `λ ≤ 49/9`, `Λ < Λ1`: three measures.
    #[serde(rename = "i")]
    I,
    /// `λ ≤ 49/9`, `Λ ≥ Λ1`: one measure.
    #[serde(rename = "ii")]
    II,
    /// `λ > 49/9`, `Λ ≤ Λ1`: three measures.
    #[serde(rename = "iii")]
    III,
    /// `λ > 49/9`, `Λ1 < Λ < Λ2`: five measures.
    #[serde(rename = "iv")]
    IV,
    /// `λ > 49/9`, `Λ = Λ2`: three measures.
    #[serde(rename = "v")]
    V,
    /// `λ > 49/9`, `Λ > Λ2`: one measure.
    #[serde(rename = "vi")]
    VI,
    #[serde(rename = "divergent")]
    Divergent,
}

impl CaseLabel {
    /// Number of measures the case prescribes; `None` when the count comes
    /// from the branch scan rather than the label.
    pub fn count(self) -> Option<usize> {
        match self {
            CaseLabel::TwoLoopUnique | CaseLabel::II | CaseLabel::VI => Some(1),
            CaseLabel::I | CaseLabel::III | CaseLabel::V => Some(3),
            CaseLabel::IV => Some(5),
            CaseLabel::Divergent => Some(0),
            CaseLabel::TwoLoopNonUnique => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RegimeReport<T> {
    pub lambda: T,
    /// `None` when the activities diverge.
    #[serde(rename = "Lambda")]
    pub total: Option<T>,
    #[serde(rename = "Lambda1")]
    pub lambda1: Option<T>,
    #[serde(rename = "Lambda2")]
    pub lambda2: Option<T>,
    pub count: usize,
    #[serde(rename = "case")]
    pub case_label: CaseLabel,
}

/// Three-way comparison that treats values within `T::threshold_tol()`
/// (relative) as equal.
pub fn compare_with_tol<T: Scalar>(value: T, threshold: T) -> Ordering {
    let scale = T::one().max(value.abs()).max(threshold.abs());
    if (value - threshold).abs() <= T::threshold_tol() * scale {
        Ordering::Equal
    } else if value < threshold {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// Case of the three-loop classification for a finite `Λ`.
pub fn three_loop_case<T: Scalar>(lambda: T, total: T, lambda1: T, lambda2: T) -> CaseLabel {
    let c1 = compare_with_tol(total, lambda1);
    if lambda <= T::lit(CRITICAL_LOOP_ACTIVITY) {
        return if c1 == Ordering::Less { CaseLabel::I } else { CaseLabel::II };
    }
    if c1 != Ordering::Greater {
        return CaseLabel::III;
    }
    match compare_with_tol(total, lambda2) {
        Ordering::Less => CaseLabel::IV,
        Ordering::Equal => CaseLabel::V,
        Ordering::Greater => CaseLabel::VI,
    }
}
