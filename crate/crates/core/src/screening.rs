//! Pre-screening of downloaded candidates: alignment score floor and
//! per-source speaker compactness.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::embedding::DataSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreeningMetrics {
    pub alignment_score: f64,
    pub group_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreeningThresholds {
    pub min_alignment: f64,
    pub max_group_variance: f64,
}

impl ScreeningThresholds {
    pub fn permissive() -> Self {
        ScreeningThresholds {
            min_alignment: f64::NEG_INFINITY,
            max_group_variance: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_group_variance >= 0.0) {
            return Err(Error::validation("max_group_variance must be >= 0"));
        }
        if self.min_alignment.is_nan() {
            return Err(Error::validation("min_alignment is NaN"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    LowAlignment,
    HighGroupVariance,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::LowAlignment => "LOW_ALIGNMENT",
            RejectReason::HighGroupVariance => "HIGH_GROUP_VARIANCE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningOutcome {
    pub kept: Vec<DataSample>,
    pub rejected: Vec<(DataSample, RejectReason)>,
}

impl ScreeningOutcome {
    /// `sample_id,reason` rows with a header.
    pub fn rejection_csv(&self) -> String {
        let mut out = String::from("sample_id,reason\n");
        for (s, r) in &self.rejected {
            out.push_str(&format!("{},{r}\n", s.sample_id));
        }
        out
    }
}

/// Mean squared Euclidean deviation from the centroid.
pub fn intra_group_variance(embeddings: &[Vec<f64>]) -> Result<f64> {
    let first = embeddings
        .first()
        .ok_or_else(|| Error::validation("variance of an empty group"))?;
    let d = first.len();
    if embeddings.iter().any(|v| v.len() != d) {
        return Err(Error::validation("group embeddings differ in dimension"));
    }
    let n = embeddings.len() as f64;
    let mut centroid = vec![0.0; d];
    for v in embeddings {
        for (c, x) in centroid.iter_mut().zip(v) {
            *c += x;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= n);
    let total: f64 = embeddings
        .iter()
        .map(|v| crate::linalg::sq_dist(v, &centroid))
        .sum();
    Ok((total / n).max(0.0))
}

/// Split a pool into kept and rejected samples, preserving input order.
///
/// A source group's verdict uses the largest `group_variance` reported by
/// any of its samples, so every sample of one source shares it. Variance
/// is checked before alignment.
pub fn screen(pool: &[DataSample], thr: &ScreeningThresholds) -> Result<ScreeningOutcome> {
    thr.validate()?;
    crate::embedding::check_sample_pool(pool)?;
    let mut group_var: HashMap<&str, f64> = HashMap::new();
    for s in pool {
        if !(s.screening.group_variance >= 0.0) {
            return Err(Error::validation(format!(
                "sample {} has invalid group variance",
                s.sample_id
            )));
        }
        let v = group_var.entry(s.source_id.as_str()).or_insert(0.0);
        *v = v.max(s.screening.group_variance);
    }

    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for s in pool {
        if group_var[s.source_id.as_str()] > thr.max_group_variance {
            rejected.push((s.clone(), RejectReason::HighGroupVariance));
        } else if s.screening.alignment_score < thr.min_alignment {
            rejected.push((s.clone(), RejectReason::LowAlignment));
        } else {
            kept.push(s.clone());
        }
    }
    Ok(ScreeningOutcome { kept, rejected })
}
