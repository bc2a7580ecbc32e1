use serde::{Deserialize, Serialize};

use crate::diffusion::{
    generate_speakers, sample, train, DiffusionModel, EpsilonNet, NetShape, NoiseSchedule,
    TrainOutcome,
};
use crate::error::{Error, Result};
use crate::gmm::{fit_em, gmm_sample, GmmModel};
use crate::metrics::{repeated_w1, RepeatedW1Stats};
use crate::rng::{derive_seed, derived_rng, fisher_yates};
use crate::whitening::{fit_vectors, WhiteningModel};
use crate::world::World;

use super::{FitSpace, GenerationConfig, SplitSizes};

/// Source ids for each split. The test list keeps re-uploads next to their
/// originals so that its interleaved halves pair them up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl SpeakerSplit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("split serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("speaker split", e))
    }
}

/// Shuffle speaker groups, then fill test and validation with whole groups
/// and the training set with the remaining sources in order.
pub fn split_speakers(world: &World, sizes: &SplitSizes, seed: u64) -> Result<SpeakerSplit> {
    let ids = world.source_ids();
    let mut groups = world.speaker_groups();
    fisher_yates(&mut groups, &mut derived_rng(seed, "split/groups"));
    let mut groups = groups.into_iter();

    let mut fill = |want: usize, label: &str| -> Result<Vec<String>> {
        let mut out = Vec::with_capacity(want);
        while out.len() < want {
            let g = groups.next().ok_or_else(|| {
                Error::validation(format!("world has too few speakers for the {label} split"))
            })?;
            out.extend(g.into_iter().take(want - out.len()).map(|i| ids[i].clone()));
        }
        Ok(out)
    };
    let test = fill(sizes.test, "test")?;
    let validation = fill(sizes.validation, "validation")?;
    let train = fill(sizes.train, "train")?;
    Ok(SpeakerSplit {
        train,
        validation,
        test,
    })
}

/// Whitened data for the generators, plus the raw test embeddings.
#[derive(Debug, Clone)]
pub struct LatentData {
    pub whitening: WhiteningModel,
    pub train: Vec<Vec<f64>>,
    pub validation: Vec<Vec<f64>>,
    pub test: Vec<Vec<f64>>,
    pub train_x: Vec<Vec<f64>>,
    pub test_x: Vec<Vec<f64>>,
}

fn vectors_for(world: &World, ids: &[String]) -> Result<Vec<Vec<f64>>> {
    let by_id: std::collections::HashMap<&str, &[f64]> = world
        .speakers()
        .items()
        .iter()
        .map(|e| (e.speaker_id.as_str(), e.vector.as_slice()))
        .collect();
    ids.iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .map(|v| v.to_vec())
                .ok_or_else(|| Error::validation(format!("split names unknown speaker {id}")))
        })
        .collect()
}

/// Fit the whitening on the training speakers and project every split.
pub fn prepare_latent(
    world: &World,
    split: &SpeakerSplit,
    whitening: Option<WhiteningModel>,
    energy: f64,
) -> Result<LatentData> {
    let train_x = vectors_for(world, &split.train)?;
    let val_x = vectors_for(world, &split.validation)?;
    let test_x = vectors_for(world, &split.test)?;
    let whitening = match whitening {
        Some(w) => w,
        None => fit_vectors(&train_x)?.with_energy(energy)?,
    };
    let project = |xs: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| whitening.transform_y(x)).collect()
    };
    Ok(LatentData {
        train: project(&train_x)?,
        validation: project(&val_x)?,
        test: project(&test_x)?,
        whitening,
        train_x,
        test_x,
    })
}

pub fn train_diffusion(
    latent: &LatentData,
    cfg: &GenerationConfig,
) -> Result<(DiffusionModel, TrainOutcome)> {
    let sched = NoiseSchedule::try_from(cfg.schedule)?;
    let shape = NetShape::new(latent.whitening.d_prime()?, cfg.time_dim, cfg.hidden)?;
    let mut init_rng = derived_rng(cfg.train.seed, "diffusion/init");
    let net = EpsilonNet::new_random(shape, &mut init_rng);
    let outcome = train(net, &sched, &latent.train, &latent.validation, &cfg.train)?;
    Ok((DiffusionModel::new(sched, outcome.net.clone()), outcome))
}

/// One mixture per `M` in the configured range, fit in the configured space.
pub fn fit_gmms(latent: &LatentData, cfg: &GenerationConfig, seed: u64) -> Result<Vec<GmmModel>> {
    let data = match cfg.gmm.space {
        FitSpace::Latent => &latent.train,
        FitSpace::Embedding => &latent.train_x,
    };
    (cfg.gmm.m_min..=cfg.gmm.m_max)
        .map(|m| {
            let fit = fit_em(data, m, derive_seed(seed, &format!("gmm/m{m}")), &cfg.gmm.em)?;
            Ok(fit.model)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelW1 {
    pub model: String,
    /// Mixture size; `None` for the diffusion model.
    pub m: Option<usize>,
    pub stats: RepeatedW1Stats,
}

/// Repeated W1 from each generator to the test speakers, in the space the
/// mixtures were fit in.
pub fn w1_against_test(
    latent: &LatentData,
    diffusion: &DiffusionModel,
    gmms: &[GmmModel],
    space: FitSpace,
    runs: usize,
    seed: u64,
) -> Result<Vec<ModelW1>> {
    let reference = match space {
        FitSpace::Latent => &latent.test,
        FitSpace::Embedding => &latent.test_x,
    };
    let mut rows = Vec::with_capacity(gmms.len() + 1);
    for g in gmms {
        let stats = repeated_w1(
            |n, rng| gmm_sample(g, n, rng),
            reference,
            runs,
            derive_seed(seed, &format!("w1/gmm{}", g.m)),
        )?;
        rows.push(ModelW1 {
            model: "gmm".into(),
            m: Some(g.m),
            stats,
        });
    }
    let stats = repeated_w1(
        |n, rng| match space {
            FitSpace::Latent => sample(&diffusion.net, &diffusion.schedule, n, rng),
            FitSpace::Embedding => Ok(generate_speakers(
                &latent.whitening,
                &diffusion.net,
                &diffusion.schedule,
                n,
                rng,
            )?
            .vectors()),
        },
        reference,
        runs,
        derive_seed(seed, "w1/diffusion"),
    )?;
    rows.push(ModelW1 {
        model: "diffusion".into(),
        m: None,
        stats,
    });
    Ok(rows)
}
