use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffusion::{generate_speakers, loss_curve_csv, sample, DiffusionModel};
use crate::embedding::{corpus_merge, Corpus, DataSample, Embedding, EmbeddingSet};
use crate::error::{Error, Result};
use crate::gmm::{gmm_sample, GmmModel};
use crate::metrics::{cumulative_histogram, distance_triple, hq_ratio, interleaved_halves, DistanceTriple};
use crate::partition::{shuffle_and_partition, SourcePartition};
use crate::quality::{fit_estimator, KnnQualityEstimator, QualityScore};
use crate::rng::{derive_seed, derived_rng};
use crate::screening::screen;
use crate::selector::{
    baseline_select, build_initial_corpus, decisions_csv, reports_jsonl, run_loop,
};
use crate::whitening::WhiteningModel;
use crate::world::{generate_world, World};

use super::chart::{svg_line_chart, Series};
use super::report::{cumhist_csv, distance_triple_csv, estimator_corr_csv, hq_table_csv, w1_csv};
use super::{
    estimator_correlation, evaluate_corpus, fit_gmms, prepare_latent, segment_samples,
    split_speakers, train_diffusion, w1_against_test, CorpusEvaluation, FitSpace, ModelW1,
    RunConfig, SpeakerSplit, PUBLISHED_DISTANCE_TRIPLE,
};

pub const ARTIFACT_FORMAT_VERSION: u32 = 1;

/// Sidecar written next to every artifact as `<file>.meta.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub format_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub command: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectMode {
    Ours,
    Baseline,
    Initial,
    Unselected,
}

impl SelectMode {
    pub const ALL: [SelectMode; 4] = [
        SelectMode::Unselected,
        SelectMode::Initial,
        SelectMode::Ours,
        SelectMode::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectMode::Ours => "ours",
            SelectMode::Baseline => "baseline",
            SelectMode::Initial => "initial",
            SelectMode::Unselected => "unselected",
        }
    }
}

impl fmt::Display for SelectMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(SelectMode::Ours),
            "baseline" => Ok(SelectMode::Baseline),
            "initial" => Ok(SelectMode::Initial),
            "unselected" => Ok(SelectMode::Unselected),
            other => Err(Error::validation(format!("unknown selection mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Diffusion,
    Gmm,
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diffusion" => Ok(Model::Diffusion),
            "gmm" => Ok(Model::Gmm),
            other => Err(Error::validation(format!("unknown generator {other:?}"))),
        }
    }
}

/// Everything `eval` computes, kept for `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub theta_hq: f64,
    pub tail_cut: f64,
    pub methods: Vec<MethodSummary>,
    pub d_prime: usize,
    pub w1: Vec<ModelW1>,
    pub distance_triple: DistanceTriple,
    pub estimator_pearson: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub corpus_size: usize,
    pub hq_ratio: f64,
    pub n_hq: usize,
    pub mst_spread: f64,
    pub tail_count: usize,
    pub generated_hq_ratio: f64,
}

/// A run directory `<root>/{world,plan,corpora,models,reports}` bound to
/// one configuration. Every write leaves a sidecar with the config hash;
/// every read checks it.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
    config: RunConfig,
    hash: String,
}

fn io_read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>, config: RunConfig) -> Result<Self> {
        config.validate()?;
        let hash = config.hash();
        Ok(RunDir {
            root: root.into(),
            config,
            hash,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn write(&self, rel: &str, contents: &str, command: &str) -> Result<()> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        let meta = ArtifactMeta {
            format_version: ARTIFACT_FORMAT_VERSION,
            config_hash: self.hash.clone(),
            seed: self.config.seed,
            command: command.to_string(),
        };
        let mpath = meta_path(&path);
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
        std::fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))
    }

    fn exists(&self, rel: &str) -> bool {
        self.path(rel).is_file()
    }

    /// Read an artifact after checking that it exists and was produced by
    /// the current configuration.
    pub fn read(&self, rel: &str) -> Result<String> {
        let path = self.path(rel);
        if !path.is_file() {
            return Err(Error::MissingArtifact(path));
        }
        let mpath = meta_path(&path);
        if !mpath.is_file() {
            return Err(Error::MissingArtifact(mpath));
        }
        let meta: ArtifactMeta = serde_json::from_str(&io_read(&mpath)?)
            .map_err(|e| Error::json(mpath.display().to_string(), e))?;
        if meta.config_hash != self.hash || meta.format_version != ARTIFACT_FORMAT_VERSION {
            return Err(Error::Stale {
                path,
                expected: self.hash.clone(),
                found: meta.config_hash,
            });
        }
        io_read(&path)
    }

    pub fn load_world(&self) -> Result<World> {
        World::from_bundle(&self.read("world/world.json")?, &self.read("world/speakers.csv")?)
    }

    fn load_partition(&self) -> Result<SourcePartition> {
        SourcePartition::from_json(&self.read("plan/partition.json")?)
    }

    fn load_screened(&self, world: &World) -> Result<Vec<DataSample>> {
        let text = self.read("plan/screened.txt")?;
        let by_id: std::collections::HashMap<&str, &DataSample> =
            world.samples().iter().map(|s| (s.sample_id.as_str(), s)).collect();
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|id| {
                by_id
                    .get(id.trim())
                    .map(|s| (*s).clone())
                    .ok_or_else(|| Error::validation(format!("screened list names unknown sample {id}")))
            })
            .collect()
    }

    pub fn load_corpus(&self, mode: SelectMode) -> Result<Corpus> {
        Corpus::parse_manifest(mode.name(), &self.read(&format!("corpora/{mode}.jsonl"))?)
    }

    fn load_split(&self) -> Result<SpeakerSplit> {
        SpeakerSplit::from_json(&self.read("models/split.json")?)
    }

    fn load_whitening(&self) -> Result<WhiteningModel> {
        WhiteningModel::from_json(&self.read("models/whitening.json")?)
    }

    fn load_diffusion(&self) -> Result<DiffusionModel> {
        DiffusionModel::from_json(&self.read("models/diffusion.json")?)
    }

    fn load_gmms(&self) -> Result<Vec<GmmModel>> {
        let g = &self.config.generation.gmm;
        (g.m_min..=g.m_max)
            .map(|m| GmmModel::from_json(&self.read(&format!("models/gmm_m{m}.json"))?))
            .collect()
    }

    pub fn cmd_world(&self) -> Result<()> {
        let world = generate_world(&self.config.world)?;
        let (json, csv) = world.to_bundle();
        self.write("config.json", &(self.config.to_json_pretty() + "\n"), "world")?;
        self.write("world/world.json", &json, "world")?;
        self.write("world/speakers.csv", &csv, "world")?;
        let ids: String = world.source_ids().iter().map(|id| format!("{id}\n")).collect();
        self.write("world/sources.txt", &ids, "world")
    }

    pub fn cmd_plan(&self) -> Result<()> {
        let ids: Vec<String> = self
            .read("world/sources.txt")?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        let partition = shuffle_and_partition(&ids, &self.config.partition)?;
        self.write("plan/partition.json", &(partition.to_json() + "\n"), "plan")
    }

    pub fn cmd_screen(&self) -> Result<()> {
        let world = self.load_world()?;
        let outcome = screen(world.samples(), &self.config.screening)?;
        let kept: String = outcome.kept.iter().map(|s| format!("{}\n", s.sample_id)).collect();
        self.write("plan/screened.txt", &kept, "screen")?;
        self.write("plan/rejections.csv", &outcome.rejection_csv(), "screen")
    }

    fn segments(&self, world: &World) -> Result<Vec<Vec<DataSample>>> {
        let screened = self.load_screened(world)?;
        Ok(segment_samples(&screened, &self.load_partition()?))
    }

    /// The data-quality estimator, fit once on the first segment.
    fn estimator(&self, world: &World, segments: &[Vec<DataSample>]) -> Result<KnnQualityEstimator> {
        let est = fit_estimator(&world.labeled(&segments[0])?, self.config.estimator.k)?;
        self.write("models/estimator.json", &est.to_json(), "select")?;
        Ok(est)
    }

    /// Build one corpus; returns its size. Baseline size defaults to the
    /// size of the `ours` corpus, and an explicit `n` must agree with it.
    pub fn cmd_select(&self, mode: SelectMode, n: Option<usize>) -> Result<usize> {
        let world = self.load_world()?;
        let thr = world.threshold()?;
        let corpus = match mode {
            SelectMode::Unselected => {
                let ids: Vec<String> = self
                    .load_screened(&world)?
                    .into_iter()
                    .map(|s| s.sample_id)
                    .collect();
                corpus_merge(&Corpus::empty("unselected"), &ids, 1)?
            }
            SelectMode::Initial => {
                let segments = self.segments(&world)?;
                let est = self.estimator(&world, &segments)?;
                build_initial_corpus(&segments[0], &est, &thr)?.corpus.renamed("initial")
            }
            SelectMode::Ours => {
                let segments = self.segments(&world)?;
                let est = self.estimator(&world, &segments)?;
                let out = run_loop(&segments, &est, &thr, &world.proxy_params())?;
                self.write("corpora/ours_iterations.jsonl", &reports_jsonl(&out.reports), "select")?;
                self.write("corpora/ours_decisions.csv", &decisions_csv(&out.decisions), "select")?;
                out.corpus
            }
            SelectMode::Baseline => {
                let ours = match self.load_corpus(SelectMode::Ours) {
                    Ok(c) => Some(c.len()),
                    Err(Error::MissingArtifact(p)) if n.is_none() => {
                        return Err(Error::MissingArtifact(p));
                    }
                    Err(Error::MissingArtifact(_)) => None,
                    Err(e) => return Err(e),
                };
                let size = match (n, ours) {
                    (Some(n), Some(o)) if n != o => {
                        return Err(Error::validation(format!(
                            "baseline size {n} differs from the ours corpus size {o}"
                        )));
                    }
                    (Some(n), _) => n,
                    (None, Some(o)) => o,
                    (None, None) => unreachable!("handled above"),
                };
                let segments = self.segments(&world)?;
                let est = self.estimator(&world, &segments)?;
                let pool: Vec<DataSample> = segments.into_iter().flatten().collect();
                let mut pool = pool;
                pool.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
                baseline_select(&pool, &est, size)?
            }
        };
        self.write(&format!("corpora/{mode}.jsonl"), &corpus.to_manifest(), "select")?;
        Ok(corpus.len())
    }

    fn latent(&self, world: &World, fresh: bool) -> Result<super::LatentData> {
        let g = &self.config.generation;
        if fresh {
            let split = split_speakers(world, &g.split, derive_seed(self.config.seed, "split"))?;
            let latent = prepare_latent(world, &split, None, g.energy)?;
            self.write("models/split.json", &(split.to_json() + "\n"), "sg-train")?;
            self.write("models/whitening.json", &latent.whitening.to_json(), "sg-train")?;
            Ok(latent)
        } else {
            prepare_latent(world, &self.load_split()?, Some(self.load_whitening()?), g.energy)
        }
    }

    pub fn cmd_sg_train(&self, model: Model) -> Result<()> {
        let world = self.load_world()?;
        let latent = self.latent(&world, true)?;
        match model {
            Model::Diffusion => {
                let (m, outcome) = train_diffusion(&latent, &self.config.generation)?;
                self.write("models/diffusion.json", &m.to_json(), "sg-train")?;
                self.write("models/loss_curve.csv", &loss_curve_csv(&outcome.curve), "sg-train")
            }
            Model::Gmm => {
                let seed = derive_seed(self.config.seed, "gmm");
                for g in fit_gmms(&latent, &self.config.generation, seed)? {
                    self.write(&format!("models/gmm_m{}.json", g.m), &g.to_json(), "sg-train")?;
                }
                Ok(())
            }
        }
    }

    /// Draw `n` speakers in embedding space and store them as CSV.
    pub fn cmd_sg_sample(&self, model: Model, n: usize, m: Option<usize>) -> Result<PathBuf> {
        let wm = self.load_whitening()?;
        let (set, rel) = match model {
            Model::Diffusion => {
                let d = self.load_diffusion()?;
                let mut rng = derived_rng(self.config.seed, "sample/diffusion");
                let set = generate_speakers(&wm, &d.net, &d.schedule, n, &mut rng)?;
                (set, "models/generated_diffusion.csv".to_string())
            }
            Model::Gmm => {
                let g = &self.config.generation.gmm;
                let m = m.unwrap_or(g.m_max);
                if !(g.m_min..=g.m_max).contains(&m) {
                    return Err(Error::validation(format!(
                        "M = {m} outside the fitted range {}..={}",
                        g.m_min, g.m_max
                    )));
                }
                let model = GmmModel::from_json(&self.read(&format!("models/gmm_m{m}.json"))?)?;
                let mut rng = derived_rng(self.config.seed, &format!("sample/gmm{m}"));
                let set = gmm_speakers(&wm, &model, g.space, n, &mut rng)?;
                (set, format!("models/generated_gmm_m{m}.csv"))
            }
        };
        self.write(&rel, &set.to_csv_string(), "sg-sample")?;
        Ok(self.path(&rel))
    }

    pub fn cmd_eval(&self) -> Result<EvalSummary> {
        let cfg = &self.config;
        let world = self.load_world()?;
        let thr = world.threshold()?;
        let tail_cut = thr.value() + cfg.metrics.tail_margin;
        let edges = cfg.metrics.edges();

        let generated = EmbeddingSet::parse_csv(
            &self.read("models/generated_diffusion.csv")?,
            "generated speakers",
        )?
        .vectors();
        let mut evals: Vec<CorpusEvaluation> = Vec::new();
        let mut generated_hq = Vec::new();
        let mut hist = Vec::new();
        let mut gen_hist = Vec::new();
        for mode in [SelectMode::Unselected, SelectMode::Initial, SelectMode::Baseline, SelectMode::Ours] {
            let corpus = self.load_corpus(mode)?;
            let e = evaluate_corpus(&world, mode.name(), &corpus, &thr)?;
            let points = world.corpus_points(&corpus)?;
            let gen_scores = generated
                .iter()
                .map(|x| world.synthesis_quality_at(x, &points))
                .collect::<Result<Vec<QualityScore>>>()?;
            generated_hq.push(hq_ratio(&gen_scores, thr.value())?);
            hist.push((mode.name().to_string(), cumulative_histogram(&e.scores, &edges)?));
            gen_hist.push((mode.name().to_string(), cumulative_histogram(&gen_scores, &edges)?));
            evals.push(e);
        }
        self.write("reports/hq_table.csv", &hq_table_csv(&evals, tail_cut, &generated_hq), "eval")?;
        self.write("reports/cumhist.csv", &cumhist_csv(&edges, &hist), "eval")?;
        self.write("reports/cumhist_generated.csv", &cumhist_csv(&edges, &gen_hist), "eval")?;

        let latent = self.latent(&world, false)?;
        let diffusion = self.load_diffusion()?;
        let gmms = self.load_gmms()?;
        let w1 = w1_against_test(
            &latent,
            &diffusion,
            &gmms,
            cfg.generation.gmm.space,
            cfg.metrics.runs,
            derive_seed(cfg.seed, "eval/w1"),
        )?;
        self.write("reports/w1_vs_model.csv", &w1_csv(&w1), "eval")?;

        let (real_a, real_b) = interleaved_halves(&latent.test);
        let mut rng = derived_rng(cfg.seed, "eval/triple");
        let gen_1 = sample(&diffusion.net, &diffusion.schedule, real_a.len(), &mut rng)?;
        let gen_2 = sample(&diffusion.net, &diffusion.schedule, real_a.len(), &mut rng)?;
        let triple = distance_triple(&real_a, &real_b, &gen_1, &gen_2)?;
        self.write("reports/distance_triple.csv", &distance_triple_csv(&triple), "eval")?;

        let pool = self.load_screened(&world)?;
        let r = estimator_correlation(&world, &pool, cfg)?;
        let corr = estimator_corr_csv(cfg.estimator.subset_fraction, cfg.estimator.query_points, r);
        self.write("reports/estimator_corr.csv", &corr, "eval")?;

        let summary = EvalSummary {
            theta_hq: thr.value(),
            tail_cut,
            methods: evals
                .iter()
                .zip(&generated_hq)
                .map(|(e, g)| MethodSummary {
                    method: e.method.clone(),
                    corpus_size: e.corpus_size,
                    hq_ratio: e.hq_ratio,
                    n_hq: e.n_hq,
                    mst_spread: e.mst_spread,
                    tail_count: e.scores.iter().filter(|s| s.value() > tail_cut).count(),
                    generated_hq_ratio: *g,
                })
                .collect(),
            d_prime: latent.whitening.d_prime()?,
            w1,
            distance_triple: triple,
            estimator_pearson: r,
        };
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
        self.write("reports/eval.json", &json, "eval")?;
        Ok(summary)
    }

    pub fn cmd_report(&self) -> Result<String> {
        let summary: EvalSummary = serde_json::from_str(&self.read("reports/eval.json")?)
            .map_err(|e| Error::json("eval summary", e))?;
        let text = summary_text(&summary);
        self.write("reports/summary.txt", &text, "report")?;

        let series_from_csv = |csv: &str| -> Vec<Series> {
            let mut lines = csv.lines();
            let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
            let rows: Vec<Vec<f64>> = lines
                .map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect())
                .collect();
            (1..header.len())
                .map(|c| Series {
                    name: header[c].to_string(),
                    points: rows.iter().map(|r| (r[0], r[c])).collect(),
                })
                .collect()
        };
        for (rel, out, title) in [
            ("reports/cumhist.csv", "reports/cumhist.svg", "Cumulative synthesis quality, real speakers"),
            (
                "reports/cumhist_generated.csv",
                "reports/cumhist_generated.svg",
                "Cumulative synthesis quality, generated speakers",
            ),
        ] {
            let series = series_from_csv(&self.read(rel)?);
            let svg = svg_line_chart(title, "quality score", "speakers at or below", &series, true);
            self.write(out, &svg, "report")?;
        }

        let gmm: Vec<(f64, f64)> = summary
            .w1
            .iter()
            .filter_map(|r| r.m.map(|m| (m as f64, r.stats.mean)))
            .collect();
        let mut series = vec![Series {
            name: "gmm".into(),
            points: gmm.clone(),
        }];
        if let Some(d) = summary.w1.iter().find(|r| r.m.is_none()) {
            let span = gmm.iter().map(|p| p.0);
            let (lo, hi) = (span.clone().fold(f64::INFINITY, f64::min), span.fold(f64::NEG_INFINITY, f64::max));
            if lo.is_finite() {
                series.push(Series {
                    name: "diffusion".into(),
                    points: vec![(lo, d.stats.mean), (hi, d.stats.mean)],
                });
            }
        }
        let svg = svg_line_chart("W1 to held-out speakers", "mixture components M", "mean W1", &series, false);
        self.write("reports/w1_vs_model.svg", &svg, "report")?;

        if self.exists("models/loss_curve.csv") {
            let series = series_from_csv(&self.read("models/loss_curve.csv")?);
            let svg = svg_line_chart("Diffusion training loss", "epoch", "loss", &series, false);
            self.write("reports/loss_curve.svg", &svg, "report")?;
        }
        Ok(text)
    }

    /// Every command in order.
    pub fn cmd_pipeline(&self) -> Result<String> {
        self.cmd_world()?;
        self.cmd_plan()?;
        self.cmd_screen()?;
        for mode in SelectMode::ALL {
            self.cmd_select(mode, None)?;
        }
        self.cmd_sg_train(Model::Diffusion)?;
        self.cmd_sg_train(Model::Gmm)?;
        self.cmd_sg_sample(Model::Diffusion, self.config.generation.split.test, None)?;
        self.cmd_eval()?;
        self.cmd_report()
    }
}

/// Mixture draws completed to embedding space. In latent mode the residual
/// coordinates are standard normal, as for the diffusion model.
fn gmm_speakers<R: Rng + ?Sized>(
    wm: &WhiteningModel,
    model: &GmmModel,
    space: FitSpace,
    n: usize,
    rng: &mut R,
) -> Result<EmbeddingSet> {
    let draws = gmm_sample(model, n, rng)?;
    let vectors = match space {
        FitSpace::Embedding => draws,
        FitSpace::Latent => {
            let z_dim = wm.z_dim()?;
            draws
                .into_iter()
                .map(|y| {
                    let z: Vec<f64> = (0..z_dim).map(|_| rng.sample(StandardNormal)).collect();
                    wm.inverse(&y, &z)
                })
                .collect::<Result<_>>()?
        }
    };
    let items = vectors
        .into_iter()
        .enumerate()
        .map(|(i, v)| Embedding::new(format!("gen-{i}"), v))
        .collect();
    EmbeddingSet::new(wm.dim(), items)
}

fn summary_text(s: &EvalSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Corpus comparison (theta_hq = {:.4}, top region > {:.4})",
        s.theta_hq, s.tail_cut
    );
    let _ = writeln!(
        out,
        "{:<12} {:>8} {:>9} {:>7} {:>12} {:>9} {:>13}",
        "method", "size", "hq_ratio", "n_hq", "mst_spread", "top", "gen_hq_ratio"
    );
    for m in &s.methods {
        let _ = writeln!(
            out,
            "{:<12} {:>8} {:>9.4} {:>7} {:>12.2} {:>9} {:>13.4}",
            m.method, m.corpus_size, m.hq_ratio, m.n_hq, m.mst_spread, m.tail_count, m.generated_hq_ratio
        );
    }
    let _ = writeln!(out, "\nSpeaker generation, W1 to held-out speakers (d' = {})", s.d_prime);
    let _ = writeln!(out, "{:<10} {:>4} {:>10} {:>10}", "model", "M", "mean", "std");
    for r in &s.w1 {
        let m = r.m.map_or("-".to_string(), |m| m.to_string());
        let _ = writeln!(out, "{:<10} {:>4} {:>10.4} {:>10.4}", r.model, m, r.stats.mean, r.stats.std);
    }
    let t = &s.distance_triple;
    let p = PUBLISHED_DISTANCE_TRIPLE;
    let _ = writeln!(
        out,
        "\nDistance triple: d_RR = {:.4}, d_GG = {:.4}, d_RG = {:.4}",
        t.d_rr, t.d_gg, t.d_rg
    );
    let _ = writeln!(
        out,
        "Published full-scale values (not reproducible here): {} / {} / {}",
        p.d_rr, p.d_gg, p.d_rg
    );
    let _ = writeln!(out, "\nEstimator correlation, reduced vs full data: r = {:.4}", s.estimator_pearson);
    out
}
