//! Deterministic synthetic candidate pool with hidden ground-truth quality.
//!
//! Speakers live near a low-dimensional latent space: a latent point `u` is
//! drawn from a Gaussian mixture and lifted with a fixed orthonormal
//! projection, `x = A u + noise`. The first latent axis is the quality axis:
//! data quality rises along it, and speakers at its low end are harder to
//! synthesize. Ground-truth synthesis quality uses the same kernel-coverage
//! form as [`crate::quality::CoverageProxy`] with different parameters plus
//! that difficulty term, so the proxy the selector sees is useful but wrong.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embedding::{Corpus, DataSample, Embedding, EmbeddingSet};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::quality::{derive_threshold, kernel_mass, ProxyParams, QualityScore, QualityThreshold};
use crate::rng::{derived_rng, SimRng};
use crate::screening::{intra_group_variance, ScreeningMetrics};

pub const WORLD_FORMAT_VERSION: u32 = 1;

/// Isotropic Gaussian mixture over the latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub means: Vec<Vec<f64>>,
    pub scales: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MixtureSpec {
    pub fn components(&self) -> usize {
        self.means.len()
    }

    fn validate(&self, latent_dim: usize) -> Result<()> {
        let c = self.means.len();
        if c == 0 || self.scales.len() != c || self.weights.len() != c {
            return Err(Error::validation(
                "mixture needs matching, non-empty means, scales and weights",
            ));
        }
        if self.means.iter().flatten().any(|v| !v.is_finite())
            || self.means.iter().any(|m| m.len() != latent_dim)
        {
            return Err(Error::validation(format!(
                "mixture means must be finite with length {latent_dim}"
            )));
        }
        if self.scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::validation("mixture scales must be positive"));
        }
        if self.weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::validation("mixture weights must be positive"));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut SimRng) -> (usize, Vec<f64>) {
        let total: f64 = self.weights.iter().sum();
        let mut pick = rng.random::<f64>() * total;
        let mut c = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            if pick < *w {
                c = i;
                break;
            }
            pick -= w;
        }
        let u = self.means[c]
            .iter()
            .map(|m| m + self.scales[c] * rng.sample::<f64, _>(StandardNormal))
            .collect();
        (c, u)
    }
}

/// Per-sample data quality: `intercept + slope * t(x) + noise`, clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataQualitySpec {
    pub intercept: f64,
    pub slope: f64,
    pub noise_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSpec {
    pub mean: f64,
    pub std: f64,
}

/// Simulated utterance scatter inside one source. A `mixed_fraction` of
/// sources hold several voices and scatter with `mixed_std` instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompactnessSpec {
    pub utterances: usize,
    pub utterance_std: f64,
    pub mixed_fraction: f64,
    pub mixed_std: f64,
}

/// Hidden synthesis quality: `base + slope * t(x) + gain * kernel_mass`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthParams {
    pub base: f64,
    pub slope: f64,
    pub gain: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    /// Distinct speakers before duplication.
    pub n_speakers: usize,
    pub embed_dim: usize,
    pub latent_dim: usize,
    pub mixture: MixtureSpec,
    pub embed_noise_std: f64,
    /// Fraction of speakers re-emitted as a second source right after the
    /// original, jittered by `duplicate_jitter` per coordinate.
    pub duplicate_rate: f64,
    pub duplicate_jitter: f64,
    pub samples_per_source: usize,
    pub data_quality: DataQualitySpec,
    pub alignment: AlignmentSpec,
    pub compactness: CompactnessSpec,
    pub proxy: ProxyParams,
    pub truth: TruthParams,
    pub reference_scores: Vec<f64>,
    pub seed: u64,
}

impl WorldConfig {
    /// The acceptance-scale world: 3000 speakers in 32 dimensions drawn
    /// from 8 clusters spread evenly along the quality axis.
    pub fn acceptance(seed: u64) -> Self {
        let (components, latent_dim) = (8, 8);
        let mut rng = derived_rng(seed, "world/mixture");
        let means = (0..components)
            .map(|c| {
                let axis = -3.0 + 6.0 * c as f64 / (components - 1) as f64;
                std::iter::once(axis)
                    .chain((1..latent_dim).map(|_| 4.0 * rng.sample::<f64, _>(StandardNormal)))
                    .collect()
            })
            .collect();
        WorldConfig {
            n_speakers: 3000,
            embed_dim: 32,
            latent_dim,
            mixture: MixtureSpec {
                means,
                scales: vec![1.0; components],
                weights: vec![1.0; components],
            },
            embed_noise_std: 0.05,
            duplicate_rate: 1.0,
            duplicate_jitter: 0.01,
            samples_per_source: 2,
            data_quality: DataQualitySpec {
                intercept: 3.2,
                slope: 1.0 / 3.0,
                noise_std: 0.3,
            },
            alignment: AlignmentSpec { mean: 0.8, std: 0.12 },
            compactness: CompactnessSpec {
                utterances: 4,
                utterance_std: 0.05,
                mixed_fraction: 0.05,
                mixed_std: 0.5,
            },
            proxy: ProxyParams {
                base_quality: 2.0,
                gain: 0.05,
                bandwidth: 2.0,
            },
            truth: TruthParams {
                base: 2.0,
                slope: 0.3,
                gain: 0.006,
                bandwidth: 2.5,
            },
            reference_scores: vec![3.2, 3.45, 3.6, 3.75, 3.9],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_speakers == 0 || self.embed_dim == 0 || self.latent_dim == 0 {
            return Err(Error::validation("world counts and dimensions must be positive"));
        }
        if self.latent_dim > self.embed_dim {
            return Err(Error::validation("latent dimension exceeds embedding dimension"));
        }
        if self.samples_per_source == 0 || self.compactness.utterances == 0 {
            return Err(Error::validation("sources need at least one sample and utterance"));
        }
        self.mixture.validate(self.latent_dim)?;
        for (name, rate) in [
            ("duplicate_rate", self.duplicate_rate),
            ("mixed_fraction", self.compactness.mixed_fraction),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::validation(format!("{name} {rate} outside [0, 1]")));
            }
        }
        let scales = [
            self.embed_noise_std,
            self.duplicate_jitter,
            self.data_quality.noise_std,
            self.alignment.std,
            self.compactness.utterance_std,
            self.compactness.mixed_std,
        ];
        if scales.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::validation("noise scales must be finite and >= 0"));
        }
        self.proxy.validate()?;
        if !(self.truth.bandwidth > 0.0) || ![self.truth.base, self.truth.slope, self.truth.gain]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::validation("truth parameters must be finite with positive bandwidth"));
        }
        if self.reference_scores.is_empty() {
            return Err(Error::validation("at least one reference score is required"));
        }
        for s in &self.reference_scores {
            QualityScore::new(*s)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SampleRecord {
    sample_id: String,
    source_id: String,
    duration_sec: f64,
    alignment_score: f64,
    group_variance: f64,
    data_quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WorldFile {
    format_version: u32,
    config: WorldConfig,
    projection: Matrix,
    components: Vec<usize>,
    duplicate_of: Vec<Option<usize>>,
    samples: Vec<SampleRecord>,
}

/// A generated pool. Ground truth is only reachable through the evaluation
/// methods; selection code receives plain [`DataSample`]s.
#[derive(Debug, Clone)]
pub struct World {
    config: WorldConfig,
    projection: Matrix,
    speakers: EmbeddingSet,
    components: Vec<usize>,
    duplicate_of: Vec<Option<usize>>,
    samples: Vec<DataSample>,
    data_quality: Vec<QualityScore>,
    speaker_index: HashMap<String, usize>,
    sample_index: HashMap<String, usize>,
}

fn orthonormal_projection(rows: usize, cols: usize, rng: &mut SimRng) -> Result<Matrix> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols);
    while basis.len() < cols {
        let mut v: Vec<f64> = (0..rows).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, bx)| *x -= p * bx);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let data = (0..rows)
        .flat_map(|r| basis.iter().map(move |b| b[r]))
        .collect();
    Matrix::from_row_major(rows, cols, data)
}

fn normal_vec(dim: usize, std: f64, rng: &mut SimRng) -> Vec<f64> {
    (0..dim)
        .map(|_| std * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn generate_world(cfg: &WorldConfig) -> Result<World> {
    cfg.validate()?;
    let mut proj_rng = derived_rng(cfg.seed, "world/projection");
    let projection = orthonormal_projection(cfg.embed_dim, cfg.latent_dim, &mut proj_rng)?;

    let n_dup = (cfg.duplicate_rate * cfg.n_speakers as f64).round() as usize;
    let mut dup_pick: Vec<usize> = (0..cfg.n_speakers).collect();
    crate::rng::fisher_yates(&mut dup_pick, &mut derived_rng(cfg.seed, "world/duplicates"));
    let mut duplicated = vec![false; cfg.n_speakers];
    dup_pick[..n_dup].iter().for_each(|&i| duplicated[i] = true);

    let mut rng = derived_rng(cfg.seed, "world/speakers");
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut components = Vec::new();
    let mut duplicate_of = Vec::new();
    for &dup in &duplicated {
        let (c, u) = cfg.mixture.draw(&mut rng);
        let mut x = projection.matvec(&u);
        let noise = normal_vec(cfg.embed_dim, cfg.embed_noise_std, &mut rng);
        x.iter_mut().zip(&noise).for_each(|(a, n)| *a += n);
        if dup {
            let jitter = normal_vec(cfg.embed_dim, cfg.duplicate_jitter, &mut rng);
            let twin: Vec<f64> = x.iter().zip(&jitter).map(|(a, j)| a + j).collect();
            let original = vectors.len();
            vectors.push(x);
            vectors.push(twin);
            components.extend([c, c]);
            duplicate_of.extend([None, Some(original)]);
        } else {
            vectors.push(x);
            components.push(c);
            duplicate_of.push(None);
        }
    }
    let width = vectors.len().to_string().len().max(4);
    let source_ids: Vec<String> = (0..vectors.len()).map(|i| format!("v{i:0width$}")).collect();

    let axis = projection.column(0);
    let dq = cfg.data_quality;
    let cs = cfg.compactness;
    let mut srng = derived_rng(cfg.seed, "world/samples");
    let mut records = Vec::new();
    for (sid, x) in source_ids.iter().zip(&vectors) {
        let mixed = srng.random::<f64>() < cs.mixed_fraction;
        let spread = if mixed { cs.mixed_std } else { cs.utterance_std };
        let utterances: Vec<Vec<f64>> = (0..cs.utterances)
            .map(|_| {
                let n = normal_vec(cfg.embed_dim, spread, &mut srng);
                x.iter().zip(&n).map(|(a, b)| a + b).collect()
            })
            .collect();
        let group_variance = intra_group_variance(&utterances)?;
        let t = dot(&axis, x);
        for j in 0..cfg.samples_per_source {
            let noise = dq.noise_std * srng.sample::<f64, _>(StandardNormal);
            let align_noise = srng.sample::<f64, _>(StandardNormal);
            records.push(SampleRecord {
                sample_id: format!("{sid}-{j}"),
                source_id: sid.clone(),
                duration_sec: srng.random_range(2.0..12.0),
                alignment_score: cfg.alignment.mean + cfg.alignment.std * align_noise,
                group_variance,
                data_quality: QualityScore::clamped(dq.intercept + dq.slope * t + noise).value(),
            });
        }
    }
    let items = source_ids
        .into_iter()
        .zip(vectors)
        .map(|(id, v)| Embedding::new(id, v))
        .collect();
    let speakers = EmbeddingSet::new(cfg.embed_dim, items)?;
    World::assemble(
        WorldFile {
            format_version: WORLD_FORMAT_VERSION,
            config: cfg.clone(),
            projection,
            components,
            duplicate_of,
            samples: records,
        },
        speakers,
    )
}

impl World {
    fn assemble(file: WorldFile, speakers: EmbeddingSet) -> Result<World> {
        if file.format_version != WORLD_FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported world format version {}",
                file.format_version
            )));
        }
        let n = speakers.len();
        if file.components.len() != n || file.duplicate_of.len() != n {
            return Err(Error::validation("world speaker tables differ in length"));
        }
        if speakers.dim() != file.config.embed_dim
            || file.projection.rows() != file.config.embed_dim
            || file.projection.cols() != file.config.latent_dim
        {
            return Err(Error::validation("world dimensions are inconsistent"));
        }
        let speaker_index: HashMap<String, usize> = speakers
            .items()
            .iter()
            .enumerate()
            .map(|(i, e)| (e.speaker_id.clone(), i))
            .collect();
        let mut samples = Vec::with_capacity(file.samples.len());
        let mut data_quality = Vec::with_capacity(file.samples.len());
        for r in file.samples {
            let &si = speaker_index.get(&r.source_id).ok_or_else(|| {
                Error::validation(format!("sample {} names unknown source {}", r.sample_id, r.source_id))
            })?;
            data_quality.push(QualityScore::new(r.data_quality)?);
            samples.push(DataSample {
                sample_id: r.sample_id,
                source_id: r.source_id,
                speaker_embedding: speakers.items()[si].clone(),
                duration_sec: r.duration_sec,
                screening: ScreeningMetrics {
                    alignment_score: r.alignment_score,
                    group_variance: r.group_variance,
                },
            });
        }
        crate::embedding::check_sample_pool(&samples)?;
        let sample_index = samples
            .iter()
            .enumerate()
            .map(|(i, s)| (s.sample_id.clone(), i))
            .collect();
        Ok(World {
            config: file.config,
            projection: file.projection,
            speakers,
            components: file.components,
            duplicate_of: file.duplicate_of,
            samples,
            data_quality,
            speaker_index,
            sample_index,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    /// One embedding per source, in emission order (duplicates follow their
    /// originals).
    pub fn speakers(&self) -> &EmbeddingSet {
        &self.speakers
    }

    pub fn samples(&self) -> &[DataSample] {
        &self.samples
    }

    pub fn source_ids(&self) -> Vec<String> {
        self.speakers.items().iter().map(|e| e.speaker_id.clone()).collect()
    }

    pub fn component_of(&self, speaker_index: usize) -> usize {
        self.components[speaker_index]
    }

    /// Index of the original source when `speaker_index` is a re-upload.
    pub fn duplicate_of(&self, speaker_index: usize) -> Option<usize> {
        self.duplicate_of[speaker_index]
    }

    /// Groups of source indices that belong to one underlying speaker, in
    /// emission order.
    pub fn speaker_groups(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, d) in self.duplicate_of.iter().enumerate() {
            match d {
                Some(_) => groups.last_mut().expect("duplicate follows original").push(i),
                None => groups.push(vec![i]),
            }
        }
        groups
    }

    pub fn reference_scores(&self) -> Vec<QualityScore> {
        self.config
            .reference_scores
            .iter()
            .map(|&s| QualityScore::clamped(s))
            .collect()
    }

    pub fn threshold(&self) -> Result<QualityThreshold> {
        derive_threshold(&self.reference_scores())
    }

    pub fn proxy_params(&self) -> ProxyParams {
        self.config.proxy
    }

    /// Position along the quality axis.
    pub fn quality_coordinate(&self, x: &[f64]) -> f64 {
        (0..x.len()).map(|r| self.projection[(r, 0)] * x[r]).sum()
    }

    pub fn data_quality(&self, sample_id: &str) -> Result<QualityScore> {
        self.sample_index
            .get(sample_id)
            .map(|&i| self.data_quality[i])
            .ok_or_else(|| Error::validation(format!("unknown sample {sample_id}")))
    }

    /// Training pairs for the data-quality estimator.
    pub fn labeled(&self, samples: &[DataSample]) -> Result<Vec<(Vec<f64>, QualityScore)>> {
        samples
            .iter()
            .map(|s| Ok((s.speaker_embedding.vector.clone(), self.data_quality(&s.sample_id)?)))
            .collect()
    }

    /// Embeddings of every sample in the corpus, in corpus order.
    pub fn corpus_points(&self, corpus: &Corpus) -> Result<Vec<Vec<f64>>> {
        corpus
            .sample_ids()
            .map(|id| {
                self.sample_index
                    .get(id)
                    .map(|&i| self.samples[i].speaker_embedding.vector.clone())
                    .ok_or_else(|| Error::validation(format!("corpus names unknown sample {id}")))
            })
            .collect()
    }

    /// Pre-clamp synthesis quality of an arbitrary speaker vector for a
    /// model trained on `corpus_points`.
    pub fn raw_synthesis_quality_at(&self, x: &[f64], corpus_points: &[Vec<f64>]) -> Result<f64> {
        if x.len() != self.config.embed_dim {
            return Err(Error::validation(format!(
                "speaker has dimension {}, world uses {}",
                x.len(),
                self.config.embed_dim
            )));
        }
        let t = &self.config.truth;
        Ok(t.base
            + t.slope * self.quality_coordinate(x)
            + t.gain * kernel_mass(corpus_points, x, t.bandwidth))
    }

    pub fn synthesis_quality_at(&self, x: &[f64], corpus_points: &[Vec<f64>]) -> Result<QualityScore> {
        Ok(QualityScore::clamped(self.raw_synthesis_quality_at(x, corpus_points)?))
    }

    pub fn ground_truth_synthesis_quality(
        &self,
        speaker_id: &str,
        corpus: &Corpus,
    ) -> Result<QualityScore> {
        let &i = self
            .speaker_index
            .get(speaker_id)
            .ok_or_else(|| Error::validation(format!("unknown speaker {speaker_id}")))?;
        let points = self.corpus_points(corpus)?;
        self.synthesis_quality_at(&self.speakers.items()[i].vector, &points)
    }

    /// Ground-truth synthesis quality of every source speaker.
    pub fn evaluate_speakers(&self, corpus: &Corpus) -> Result<Vec<QualityScore>> {
        let points = self.corpus_points(corpus)?;
        self.speakers
            .items()
            .iter()
            .map(|e| self.synthesis_quality_at(&e.vector, &points))
            .collect()
    }

    /// Fresh speakers from the world's population, outside the pool.
    pub fn sample_query_speakers(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = derived_rng(seed, "world/query");
        (0..n)
            .map(|_| {
                let (_, u) = self.config.mixture.draw(&mut rng);
                let mut x = self.projection.matvec(&u);
                let noise = normal_vec(self.config.embed_dim, self.config.embed_noise_std, &mut rng);
                x.iter_mut().zip(&noise).for_each(|(a, b)| *a += b);
                x
            })
            .collect()
    }

    /// JSON document plus the speaker embedding CSV.
    pub fn to_bundle(&self) -> (String, String) {
        let records = self
            .samples
            .iter()
            .zip(&self.data_quality)
            .map(|(s, q)| SampleRecord {
                sample_id: s.sample_id.clone(),
                source_id: s.source_id.clone(),
                duration_sec: s.duration_sec,
                alignment_score: s.screening.alignment_score,
                group_variance: s.screening.group_variance,
                data_quality: q.value(),
            })
            .collect();
        let file = WorldFile {
            format_version: WORLD_FORMAT_VERSION,
            config: self.config.clone(),
            projection: self.projection.clone(),
            components: self.components.clone(),
            duplicate_of: self.duplicate_of.clone(),
            samples: records,
        };
        let json = serde_json::to_string(&file).expect("world serializes");
        (json, self.speakers.to_csv_string())
    }

    pub fn from_bundle(json: &str, csv: &str) -> Result<World> {
        let file: WorldFile = serde_json::from_str(json).map_err(|e| Error::json("world file", e))?;
        let speakers = EmbeddingSet::parse_csv(csv, "world speakers")?;
        World::assemble(file, speakers)
    }

    pub fn save(&self, json_path: &Path, csv_path: &Path) -> Result<()> {
        let (json, csv) = self.to_bundle();
        std::fs::write(json_path, json).map_err(|e| Error::io(json_path, e))?;
        std::fs::write(csv_path, csv).map_err(|e| Error::io(csv_path, e))
    }

    pub fn load(json_path: &Path, csv_path: &Path) -> Result<World> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        World::from_bundle(&read(json_path)?, &read(csv_path)?)
    }
}

/// Modes spaced evenly around a circle; each point jitters in angle and
/// radius, so a mode is an arc segment rather than an ellipse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub modes: usize,
    pub radius: f64,
    pub angular_std: f64,
    pub radial_std: f64,
}

impl RingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 || !(self.radius > 0.0) {
            return Err(Error::validation("ring needs modes and a positive radius"));
        }
        if !(self.angular_std >= 0.0) || !(self.radial_std >= 0.0) {
            return Err(Error::validation("ring jitter must be >= 0"));
        }
        Ok(())
    }
}

/// `n` planar points from an equal-weight ring mixture.
pub fn ring_mixture<R: Rng + ?Sized>(spec: &RingSpec, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    Ok((0..n)
        .map(|_| {
            let mode = rng.random_range(0..spec.modes);
            let base = std::f64::consts::TAU * mode as f64 / spec.modes as f64;
            let angle = base + spec.angular_std * rng.sample::<f64, _>(StandardNormal);
            let r = spec.radius + spec.radial_std * rng.sample::<f64, _>(StandardNormal);
            vec![r * angle.cos(), r * angle.sin()]
        })
        .collect())
}
