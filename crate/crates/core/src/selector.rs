//! Corpus construction: the estimator-filtered initial corpus, the
//! dual-criteria acquisition step, the full K-iteration loop, and the
//! size-matched top-n baseline.
//!
//! Acceptance at step `k >= 2` requires both
//! `predicted_quality > theta` (the data is good enough to train on) and
//! `zero_shot_quality < theta` (the current model cannot already
//! synthesize the speaker). Both comparisons are strict.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::embedding::{corpus_merge, Corpus, DataSample};
use crate::error::{Error, Result};
use crate::quality::{
    predict_quality, zero_shot_quality, CoverageProxy, KnnQualityEstimator, ProxyParams,
    QualityThreshold,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationReport {
    pub k: u32,
    pub candidates: usize,
    pub passed_quality: usize,
    /// Candidates the current model synthesizes below threshold. Every
    /// candidate counts at `k = 1`, where no model exists yet.
    pub informative: usize,
    pub added: usize,
    pub corpus_size_after: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Added,
    LowQuality,
    Redundant,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Added => "added",
            Decision::LowQuality => "low_quality",
            Decision::Redundant => "redundant",
        })
    }
}

/// Oracle values behind one sample's verdict, kept for post-hoc auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub sample_id: String,
    pub k: u32,
    pub predicted_quality: f64,
    pub zero_shot_quality: Option<f64>,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub corpus: Corpus,
    pub report: IterationReport,
    pub decisions: Vec<DecisionRecord>,
}

pub fn build_initial_corpus(
    screened: &[DataSample],
    est: &KnnQualityEstimator,
    thr: &QualityThreshold,
) -> Result<StepOutcome> {
    crate::embedding::check_sample_pool(screened)?;
    let theta = thr.value();
    let mut added = Vec::new();
    let mut decisions = Vec::with_capacity(screened.len());
    for s in screened {
        let pq = predict_quality(est, &s.speaker_embedding.vector)?.value();
        let decision = if pq > theta {
            added.push(s.sample_id.clone());
            Decision::Added
        } else {
            Decision::LowQuality
        };
        decisions.push(DecisionRecord {
            sample_id: s.sample_id.clone(),
            k: 1,
            predicted_quality: pq,
            zero_shot_quality: None,
            decision,
        });
    }
    let corpus = corpus_merge(&Corpus::empty("ours"), &added, 1)?;
    let report = IterationReport {
        k: 1,
        candidates: screened.len(),
        passed_quality: added.len(),
        informative: screened.len(),
        added: added.len(),
        corpus_size_after: corpus.len(),
    };
    Ok(StepOutcome {
        corpus,
        report,
        decisions,
    })
}

pub fn acquisition_step(
    prev: &Corpus,
    segment: &[DataSample],
    est: &KnnQualityEstimator,
    proxy: &CoverageProxy,
    thr: &QualityThreshold,
    k: u32,
) -> Result<StepOutcome> {
    if k < 2 {
        return Err(Error::validation("acquisition steps start at k = 2"));
    }
    crate::embedding::check_sample_pool(segment)?;
    let overlap: Vec<&str> = segment
        .iter()
        .filter(|s| prev.contains(&s.sample_id))
        .map(|s| s.sample_id.as_str())
        .collect();
    if !overlap.is_empty() {
        return Err(Error::validation(format!(
            "segment overlaps the existing corpus: {}",
            overlap.join(", ")
        )));
    }

    let theta = thr.value();
    let mut passed = 0;
    let mut informative = 0;
    let mut added = Vec::new();
    let mut decisions = Vec::with_capacity(segment.len());
    for s in segment {
        let x = &s.speaker_embedding.vector;
        let pq = predict_quality(est, x)?.value();
        let zq = zero_shot_quality(proxy, x)?.value();
        let good = pq > theta;
        let novel = zq < theta;
        passed += good as usize;
        informative += novel as usize;
        let decision = match (good, novel) {
            (true, true) => {
                added.push(s.sample_id.clone());
                Decision::Added
            }
            (false, _) => Decision::LowQuality,
            (true, false) => Decision::Redundant,
        };
        decisions.push(DecisionRecord {
            sample_id: s.sample_id.clone(),
            k,
            predicted_quality: pq,
            zero_shot_quality: Some(zq),
            decision,
        });
    }
    let corpus = corpus_merge(prev, &added, k)?;
    let report = IterationReport {
        k,
        candidates: segment.len(),
        passed_quality: passed,
        informative,
        added: added.len(),
        corpus_size_after: corpus.len(),
    };
    Ok(StepOutcome {
        corpus,
        report,
        decisions,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopOutcome {
    pub corpus: Corpus,
    pub reports: Vec<IterationReport>,
    pub decisions: Vec<DecisionRecord>,
}

/// Build `C_1` from the first segment, then grow it once per remaining
/// segment. The coverage proxy is rebuilt from `C_{k-1}` before step `k`.
/// Each segment is visited once; rejected samples are not reconsidered.
pub fn run_loop(
    segments: &[Vec<DataSample>],
    est: &KnnQualityEstimator,
    thr: &QualityThreshold,
    proxy_params: &ProxyParams,
) -> Result<LoopOutcome> {
    let first = segments
        .first()
        .ok_or_else(|| Error::validation("selection loop needs K >= 1 segments"))?;
    let mut seen = HashSet::new();
    for s in segments.iter().flatten() {
        if !seen.insert(s.sample_id.as_str()) {
            return Err(Error::validation(format!(
                "sample {} appears in more than one segment",
                s.sample_id
            )));
        }
    }
    let embedding_of: HashMap<&str, &[f64]> = segments
        .iter()
        .flatten()
        .map(|s| (s.sample_id.as_str(), s.speaker_embedding.vector.as_slice()))
        .collect();

    let initial = build_initial_corpus(first, est, thr)?;
    let mut corpus = initial.corpus;
    let mut reports = vec![initial.report];
    let mut decisions = initial.decisions;
    for (offset, segment) in segments.iter().enumerate().skip(1) {
        let k = offset as u32 + 1;
        let proxy = CoverageProxy::new(
            corpus
                .sample_ids()
                .map(|id| embedding_of[id].to_vec())
                .collect(),
            *proxy_params,
        )?;
        let step = acquisition_step(&corpus, segment, est, &proxy, thr, k)?;
        corpus = step.corpus;
        reports.push(step.report);
        decisions.extend(step.decisions);
    }
    Ok(LoopOutcome {
        corpus,
        reports,
        decisions,
    })
}

/// Top-`n` samples by predicted quality; equal scores ordered by id.
pub fn baseline_select(pool: &[DataSample], est: &KnnQualityEstimator, n: usize) -> Result<Corpus> {
    if n > pool.len() {
        return Err(Error::validation(format!(
            "baseline size {n} exceeds pool size {}",
            pool.len()
        )));
    }
    crate::embedding::check_sample_pool(pool)?;
    let mut scored = pool
        .iter()
        .map(|s| Ok((predict_quality(est, &s.speaker_embedding.vector)?.value(), s.sample_id.as_str())))
        .collect::<Result<Vec<(f64, &str)>>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    let ids: Vec<String> = scored[..n].iter().map(|(_, id)| id.to_string()).collect();
    corpus_merge(&Corpus::empty("baseline"), &ids, 1)
}

pub fn reports_jsonl(reports: &[IterationReport]) -> String {
    reports
        .iter()
        .map(|r| serde_json::to_string(r).expect("report serializes") + "\n")
        .collect()
}

/// `sample_id,predicted_quality,zero_shot_quality,decision`; the zero-shot
/// column is empty where no model existed.
pub fn decisions_csv(decisions: &[DecisionRecord]) -> String {
    let mut out = String::from("sample_id,predicted_quality,zero_shot_quality,decision\n");
    for d in decisions {
        let zq = d.zero_shot_quality.map(|z| z.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{zq},{}\n",
            d.sample_id, d.predicted_quality, d.decision
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Embedding;
    use crate::quality::{fit_estimator, QualityScore};
    use crate::screening::ScreeningMetrics;

    fn sample(id: &str, x: Vec<f64>) -> DataSample {
        DataSample {
            sample_id: id.into(),
            source_id: format!("src-{id}"),
            speaker_embedding: Embedding::new(id, x),
            duration_sec: 2.0,
            screening: ScreeningMetrics {
                alignment_score: 1.0,
                group_variance: 0.0,
            },
        }
    }

    /// 1-NN estimator whose prediction at `(i, 0)` is `scores[i]`.
    fn line_estimator(scores: &[f64]) -> KnnQualityEstimator {
        let labeled: Vec<_> = scores
            .iter()
            .enumerate()
            .map(|(i, s)| (vec![i as f64 * 10.0, 0.0], QualityScore::new(*s).unwrap()))
            .collect();
        fit_estimator(&labeled, 1).unwrap()
    }

    fn params() -> ProxyParams {
        ProxyParams {
            base_quality: 2.0,
            gain: 2.0,
            bandwidth: 1.0,
        }
    }

    fn thr(v: f64) -> QualityThreshold {
        QualityThreshold::new(v).unwrap()
    }

    #[test]
    fn initial_corpus_examples() {
        let est = line_estimator(&[2.0, 3.0, 4.0]);
        let pool: Vec<_> = (0..3).map(|i| sample(&format!("s{i}"), vec![i as f64 * 10.0, 0.0])).collect();
        assert_eq!(build_initial_corpus(&pool, &est, &thr(1.5)).unwrap().corpus.len(), 3);
        assert_eq!(build_initial_corpus(&pool, &est, &thr(4.5)).unwrap().corpus.len(), 0);
        let out = build_initial_corpus(&pool, &est, &thr(2.9)).unwrap();
        let ids: Vec<&str> = out.corpus.sample_ids().collect();
        assert_eq!(ids, ["s1", "s2"]);
        assert!(out.corpus.entries().iter().all(|e| e.iteration == 1));
        assert_eq!(out.report.added, 2);
    }

    #[test]
    fn step_adds_only_good_and_novel() {
        // Quality 3.5 everywhere; corpus point sits on `covered`.
        let est = line_estimator(&[3.5]);
        let covered = vec![0.0, 0.0];
        let proxy = CoverageProxy::new(vec![covered.clone()], params()).unwrap();
        let prev = corpus_merge(&Corpus::empty("ours"), &["c0".to_string()], 1).unwrap();

        // At `covered`: zero-shot = 2 + 2*1 = 4 >= 3 -> redundant.
        // Far away: zero-shot ~ 2.0 < 3 -> added.
        let seg = vec![sample("dup", covered), sample("new", vec![50.0, 0.0])];
        let out = acquisition_step(&prev, &seg, &est, &proxy, &thr(3.0), 2).unwrap();
        let ids: Vec<&str> = out.corpus.sample_ids().collect();
        assert_eq!(ids, ["c0", "new"]);
        assert_eq!(out.decisions[0].decision, Decision::Redundant);
        assert_eq!(out.report.passed_quality, 2);
        assert_eq!(out.report.informative, 1);
        assert_eq!(out.corpus.entries()[1].iteration, 2);
    }

    #[test]
    fn step_with_exact_oracle_values() {
        // Predicted 3.5 and zero-shot 2.5 against theta = 3.0.
        let est = line_estimator(&[3.5]);
        let proxy = CoverageProxy::new(
            vec![],
            ProxyParams {
                base_quality: 2.5,
                ..params()
            },
        )
        .unwrap();
        let seg = vec![sample("only", vec![0.0, 0.0])];
        let out = acquisition_step(&Corpus::empty("ours"), &seg, &est, &proxy, &thr(3.0), 2).unwrap();
        assert_eq!(out.decisions[0].predicted_quality, 3.5);
        assert_eq!(out.decisions[0].zero_shot_quality, Some(2.5));
        assert_eq!(out.corpus.len(), 1);
    }

    #[test]
    fn step_edge_cases() {
        let est = line_estimator(&[3.5]);
        let high = CoverageProxy::new(vec![], ProxyParams { base_quality: 4.0, ..params() }).unwrap();
        let seg = vec![sample("a", vec![0.0, 0.0]), sample("b", vec![1.0, 0.0])];
        let prev = Corpus::empty("ours");
        let out = acquisition_step(&prev, &seg, &est, &high, &thr(3.0), 2).unwrap();
        assert_eq!(out.report.added, 0);

        let out = acquisition_step(&prev, &[], &est, &high, &thr(3.0), 2).unwrap();
        assert_eq!(out.corpus, prev);

        let prev = corpus_merge(&prev, &["a".to_string()], 1).unwrap();
        assert!(acquisition_step(&prev, &seg, &est, &high, &thr(3.0), 2).is_err());
    }

    #[test]
    fn equality_at_threshold_is_excluded() {
        let est = line_estimator(&[3.0]);
        let proxy = CoverageProxy::new(vec![], ProxyParams { base_quality: 1.0, ..params() }).unwrap();
        let seg = vec![sample("a", vec![0.0, 0.0])];
        let out = acquisition_step(&Corpus::empty("c"), &seg, &est, &proxy, &thr(3.0), 2).unwrap();
        assert_eq!(out.report.added, 0);
        let est = line_estimator(&[4.0]);
        let proxy = CoverageProxy::new(vec![], ProxyParams { base_quality: 3.0, ..params() }).unwrap();
        let out = acquisition_step(&Corpus::empty("c"), &seg, &est, &proxy, &thr(3.0), 2).unwrap();
        assert_eq!(out.report.added, 0);
    }

    #[test]
    fn loop_with_one_segment_is_initial_corpus() {
        let est = line_estimator(&[2.0, 4.0]);
        let seg: Vec<_> = (0..2).map(|i| sample(&format!("s{i}"), vec![i as f64 * 10.0, 0.0])).collect();
        let out = run_loop(std::slice::from_ref(&seg), &est, &thr(3.0), &params()).unwrap();
        let init = build_initial_corpus(&seg, &est, &thr(3.0)).unwrap();
        assert_eq!(out.corpus, init.corpus);
        assert_eq!(out.reports, vec![init.report]);
    }

    #[test]
    fn loop_with_all_low_quality_is_empty() {
        let est = line_estimator(&[2.0]);
        let segs = vec![
            vec![sample("a", vec![0.0, 0.0])],
            vec![sample("b", vec![1.0, 0.0]), sample("c", vec![2.0, 0.0])],
        ];
        let out = run_loop(&segs, &est, &thr(3.0), &params()).unwrap();
        assert!(out.corpus.is_empty());
        assert!(out.reports.iter().all(|r| r.added == 0));
        assert_eq!(out.reports.len(), 2);
    }

    #[test]
    fn loop_skips_speakers_covered_by_previous_corpus() {
        let est = line_estimator(&[4.0]);
        let segs = vec![
            vec![sample("a", vec![0.0, 0.0])],
            vec![sample("a-again", vec![0.0, 0.0]), sample("far", vec![40.0, 0.0])],
        ];
        let out = run_loop(&segs, &est, &thr(3.0), &params()).unwrap();
        let ids: Vec<&str> = out.corpus.sample_ids().collect();
        assert_eq!(ids, ["a", "far"]);
        assert_eq!(out.reports[1].added, 1);
    }

    #[test]
    fn baseline_examples() {
        let est = line_estimator(&[1.5, 4.5, 2.5, 3.5, 5.0]);
        let pool: Vec<_> = (0..5).map(|i| sample(&format!("s{i}"), vec![i as f64 * 10.0, 0.0])).collect();
        assert_eq!(baseline_select(&pool, &est, 5).unwrap().len(), 5);
        assert!(baseline_select(&pool, &est, 0).unwrap().is_empty());
        let top: Vec<String> = baseline_select(&pool, &est, 3)
            .unwrap()
            .sample_ids()
            .map(String::from)
            .collect();
        assert_eq!(top, ["s4", "s1", "s3"]);
        assert!(baseline_select(&pool, &est, 6).is_err());
    }

    #[test]
    fn baseline_ties_by_id() {
        let est = line_estimator(&[3.0]);
        let pool = vec![sample("b", vec![0.0, 0.0]), sample("a", vec![0.0, 1.0])];
        let c = baseline_select(&pool, &est, 1).unwrap();
        assert_eq!(c.sample_ids().next(), Some("a"));
    }

    #[test]
    fn decision_csv_layout() {
        let rec = vec![DecisionRecord {
            sample_id: "x".into(),
            k: 1,
            predicted_quality: 3.25,
            zero_shot_quality: None,
            decision: Decision::Added,
        }];
        assert_eq!(
            decisions_csv(&rec),
            "sample_id,predicted_quality,zero_shot_quality,decision\nx,3.25,,added\n"
        );
    }
}
