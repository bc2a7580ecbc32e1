//! Quality scoring: the high-quality threshold, the k-NN data-quality
//! estimator, and the coverage proxy that stands in for zero-shot synthesis
//! by a model trained on the current corpus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sq_dist;

pub const MOS_MIN: f64 = 1.0;
pub const MOS_MAX: f64 = 5.0;

/// A pseudo-MOS value in `[1, 5]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct QualityScore(f64);

impl QualityScore {
    pub fn new(value: f64) -> Result<Self> {
        if (MOS_MIN..=MOS_MAX).contains(&value) {
            Ok(QualityScore(value))
        } else {
            Err(Error::validation(format!(
                "quality score {value} outside [{MOS_MIN}, {MOS_MAX}]"
            )))
        }
    }

    /// Clamp into range; NaN maps to the floor.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            QualityScore(MOS_MIN)
        } else {
            QualityScore(value.clamp(MOS_MIN, MOS_MAX))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for QualityScore {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        QualityScore::new(v)
    }
}

impl From<QualityScore> for f64 {
    fn from(q: QualityScore) -> f64 {
        q.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityThreshold {
    pub theta_hq: QualityScore,
}

impl QualityThreshold {
    pub fn new(theta: f64) -> Result<Self> {
        Ok(QualityThreshold {
            theta_hq: QualityScore::new(theta)?,
        })
    }

    pub fn value(&self) -> f64 {
        self.theta_hq.value()
    }
}

/// The minimum score observed over the reference speakers.
pub fn derive_threshold(reference_scores: &[QualityScore]) -> Result<QualityThreshold> {
    let theta = reference_scores
        .iter()
        .map(|s| s.value())
        .reduce(f64::min)
        .ok_or_else(|| Error::validation("no reference scores to derive a threshold from"))?;
    Ok(QualityThreshold {
        theta_hq: QualityScore(theta),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnQualityEstimator {
    k: usize,
    points: Vec<Vec<f64>>,
    scores: Vec<QualityScore>,
}

pub fn fit_estimator(labeled: &[(Vec<f64>, QualityScore)], k: usize) -> Result<KnnQualityEstimator> {
    if k == 0 {
        return Err(Error::validation("k must be positive"));
    }
    if labeled.len() < k {
        return Err(Error::validation(format!(
            "{} labeled points cannot support k = {k}",
            labeled.len()
        )));
    }
    let dim = labeled[0].0.len();
    if labeled.iter().any(|(p, _)| p.len() != dim) {
        return Err(Error::validation("labeled points differ in dimension"));
    }
    if labeled.iter().any(|(p, _)| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::validation("labeled point has non-finite component"));
    }
    Ok(KnnQualityEstimator {
        k,
        points: labeled.iter().map(|(p, _)| p.clone()).collect(),
        scores: labeled.iter().map(|(_, s)| *s).collect(),
    })
}

impl KnnQualityEstimator {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("estimator serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let est: KnnQualityEstimator =
            serde_json::from_str(text).map_err(|e| Error::json("estimator", e))?;
        if est.points.len() != est.scores.len() || est.k == 0 || est.k > est.points.len() {
            return Err(Error::validation("inconsistent estimator file"));
        }
        Ok(est)
    }
}

/// Mean score of the `k` nearest stored points; distance ties go to the
/// earlier-inserted point.
pub fn predict_quality(est: &KnnQualityEstimator, x: &[f64]) -> Result<QualityScore> {
    if x.len() != est.dim() {
        return Err(Error::validation(format!(
            "query has dimension {}, estimator expects {}",
            x.len(),
            est.dim()
        )));
    }
    let mut keyed: Vec<(f64, usize)> = est
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (sq_dist(p, x), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if est.k < keyed.len() {
        keyed.select_nth_unstable_by(est.k - 1, cmp);
    }
    let sum: f64 = keyed[..est.k]
        .iter()
        .map(|&(_, i)| est.scores[i].value())
        .sum();
    Ok(QualityScore::clamped(sum / est.k as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyParams {
    pub base_quality: f64,
    pub gain: f64,
    pub bandwidth: f64,
}

impl ProxyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return Err(Error::validation("proxy bandwidth must be positive"));
        }
        if !self.base_quality.is_finite() || !self.gain.is_finite() {
            return Err(Error::validation("proxy parameters must be finite"));
        }
        Ok(())
    }
}

/// Zero-shot synthesis quality stand-in: `base + gain * kernel_mass`, where
/// the kernel mass is an unnormalized Gaussian-kernel sum over the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageProxy {
    corpus_embeddings: Vec<Vec<f64>>,
    params: ProxyParams,
}

impl CoverageProxy {
    pub fn new(corpus_embeddings: Vec<Vec<f64>>, params: ProxyParams) -> Result<Self> {
        params.validate()?;
        if let Some(d) = corpus_embeddings.first().map(Vec::len) {
            if corpus_embeddings.iter().any(|v| v.len() != d) {
                return Err(Error::validation("corpus embeddings differ in dimension"));
            }
        }
        Ok(CoverageProxy {
            corpus_embeddings,
            params,
        })
    }

    pub fn params(&self) -> &ProxyParams {
        &self.params
    }

    pub fn corpus_len(&self) -> usize {
        self.corpus_embeddings.len()
    }

    pub fn kernel_mass(&self, x: &[f64]) -> f64 {
        kernel_mass(&self.corpus_embeddings, x, self.params.bandwidth)
    }

    /// Score before clamping into the MOS range.
    pub fn raw_score(&self, x: &[f64]) -> Result<f64> {
        if let Some(c) = self.corpus_embeddings.first() {
            if c.len() != x.len() {
                return Err(Error::validation(format!(
                    "speaker has dimension {}, corpus has {}",
                    x.len(),
                    c.len()
                )));
            }
        }
        Ok(self.params.base_quality + self.params.gain * self.kernel_mass(x))
    }
}

pub(crate) fn kernel_mass(points: &[Vec<f64>], x: &[f64], bandwidth: f64) -> f64 {
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    points.iter().map(|c| (-sq_dist(c, x) * inv).exp()).sum()
}

pub fn zero_shot_quality(proxy: &CoverageProxy, speaker: &[f64]) -> Result<QualityScore> {
    Ok(QualityScore::clamped(proxy.raw_score(speaker)?))
}
