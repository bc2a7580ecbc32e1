use std::collections::HashMap;

use crate::embedding::{corpus_merge, Corpus, DataSample};
use crate::error::{Error, Result};
use crate::metrics::{hq_ratio, mst_total_length, pearson};
use crate::partition::{shuffle_and_partition, SourcePartition};
use crate::quality::{fit_estimator, predict_quality, KnnQualityEstimator, QualityScore, QualityThreshold};
use crate::rng::{derived_rng, fisher_yates};
use crate::screening::{screen, ScreeningOutcome};
use crate::selector::{baseline_select, run_loop, LoopOutcome};
use crate::world::World;

use super::RunConfig;

/// Every corpus the comparison needs, built from one world.
#[derive(Debug, Clone)]
pub struct Curation {
    pub threshold: QualityThreshold,
    pub screening: ScreeningOutcome,
    pub partition: SourcePartition,
    pub estimator: KnnQualityEstimator,
    pub ours: LoopOutcome,
    pub initial: Corpus,
    pub baseline: Corpus,
    pub unselected: Corpus,
}

impl Curation {
    /// `(method, corpus)` in report order.
    pub fn corpora(&self) -> [(&'static str, &Corpus); 4] {
        [
            ("unselected", &self.unselected),
            ("initial", &self.initial),
            ("baseline", &self.baseline),
            ("ours", &self.ours.corpus),
        ]
    }
}

/// Group kept samples by the segment of their source, preserving pool order.
pub fn segment_samples(kept: &[DataSample], partition: &SourcePartition) -> Vec<Vec<DataSample>> {
    let segment_of: HashMap<&str, usize> = partition
        .segments
        .iter()
        .enumerate()
        .flat_map(|(k, ids)| ids.iter().map(move |id| (id.as_str(), k)))
        .collect();
    let mut segments = vec![Vec::new(); partition.segments.len()];
    for s in kept {
        if let Some(&k) = segment_of.get(s.source_id.as_str()) {
            segments[k].push(s.clone());
        }
    }
    segments
}

pub fn curate(world: &World, cfg: &RunConfig) -> Result<Curation> {
    let threshold = world.threshold()?;
    let screening = screen(world.samples(), &cfg.screening)?;
    let partition = shuffle_and_partition(&world.source_ids(), &cfg.partition)?;
    let segments = segment_samples(&screening.kept, &partition);
    let estimator = fit_estimator(&world.labeled(&segments[0])?, cfg.estimator.k)?;
    let ours = run_loop(&segments, &estimator, &threshold, &world.proxy_params())?;
    let initial = Corpus::new(
        "initial",
        ours.corpus
            .entries()
            .iter()
            .filter(|e| e.iteration == 1)
            .cloned()
            .collect(),
    )?;
    let baseline = baseline_select(&screening.kept, &estimator, ours.corpus.len())?;
    let all: Vec<String> = screening.kept.iter().map(|s| s.sample_id.clone()).collect();
    let unselected = corpus_merge(&Corpus::empty("unselected"), &all, 1)?;
    Ok(Curation {
        threshold,
        screening,
        partition,
        estimator,
        ours,
        initial,
        baseline,
        unselected,
    })
}

/// Ground-truth view of one corpus over every source speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEvaluation {
    pub method: String,
    pub corpus_size: usize,
    pub scores: Vec<QualityScore>,
    pub hq_ratio: f64,
    pub n_hq: usize,
    /// MST length over the embeddings of speakers above the threshold.
    pub mst_spread: f64,
}

pub fn evaluate_corpus(
    world: &World,
    method: &str,
    corpus: &Corpus,
    thr: &QualityThreshold,
) -> Result<CorpusEvaluation> {
    let scores = world.evaluate_speakers(corpus)?;
    let theta = thr.value();
    let hq_points: Vec<Vec<f64>> = world
        .speakers()
        .items()
        .iter()
        .zip(&scores)
        .filter(|(_, s)| s.value() > theta)
        .map(|(e, _)| e.vector.clone())
        .collect();
    let mst_spread = if hq_points.is_empty() {
        0.0
    } else {
        mst_total_length(&hq_points)?
    };
    Ok(CorpusEvaluation {
        method: method.to_string(),
        corpus_size: corpus.len(),
        hq_ratio: hq_ratio(&scores, theta)?,
        n_hq: hq_points.len(),
        scores,
        mst_spread,
    })
}

/// Pearson correlation between an estimator fit on a random
/// `fraction` of `pool` and one fit on all of it, over fresh query speakers.
pub fn estimator_correlation(world: &World, pool: &[DataSample], cfg: &RunConfig) -> Result<f64> {
    if pool.is_empty() {
        return Err(Error::validation("estimator comparison needs a non-empty pool"));
    }
    let labeled = world.labeled(pool)?;
    let mut order: Vec<usize> = (0..labeled.len()).collect();
    fisher_yates(&mut order, &mut derived_rng(cfg.seed, "estimator/subset"));
    let take = ((cfg.estimator.subset_fraction * labeled.len() as f64).round() as usize).max(1);
    let subset: Vec<_> = order[..take].iter().map(|&i| labeled[i].clone()).collect();
    let small = fit_estimator(&subset, cfg.estimator.k)?;
    let full = fit_estimator(&labeled, cfg.estimator.k)?;
    let queries = world.sample_query_speakers(cfg.estimator.query_points, cfg.seed);
    let predict = |est: &KnnQualityEstimator| {
        queries
            .iter()
            .map(|q| predict_quality(est, q).map(QualityScore::value))
            .collect::<Result<Vec<f64>>>()
    };
    pearson(&predict(&small)?, &predict(&full)?)
}
