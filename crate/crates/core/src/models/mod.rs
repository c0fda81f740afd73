//! Rating predictors: mean baselines, SlopeOne, neighborhood models and
//! the latent-factor family up to TrustSVD.

mod baseline;
mod factor;
mod knn;
mod slope_one;

use std::fmt;
use std::str::FromStr;

pub use baseline::{train_mean_model, MeanKind, MeanModel};
pub use factor::{
    derive_seed, initial_factor_params, train_latent_factor, train_trust_svd, trust_svd_gradient,
    trust_svd_objective, FactorModel, FactorParams, FactorVariant, HyperParams, Matrix, RegWeighting,
};
pub use knn::{pcc_similarity, train_knn, KnnMode, KnnModel, SimilarityTable};
pub use slope_one::{train_slope_one, SlopeOne};

use crate::dataset::{RatingDataset, TrustEdgeList};
use crate::error::{Error, Result};

/// Anything that scores a (user, item) pair. Scores are always inside the
/// training rating scale; unknown users or items fall back gracefully.
pub trait Predictor: Send + Sync {
    fn predict(&self, user: usize, item: usize) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    GlobalAvg,
    UserAvg,
    ItemAvg,
    SlopeOne,
    UserKnn,
    ItemKnn,
    RegSvd,
    BiasedMf,
    SvdPlusPlus,
    TrustSvd,
    /// TrustSVD whose trust input is always the Hellinger-extracted graph.
    HellTrustSvd,
}

impl ModelKind {
    pub const ALL: [ModelKind; 11] = [
        ModelKind::GlobalAvg,
        ModelKind::UserAvg,
        ModelKind::ItemAvg,
        ModelKind::SlopeOne,
        ModelKind::UserKnn,
        ModelKind::ItemKnn,
        ModelKind::RegSvd,
        ModelKind::BiasedMf,
        ModelKind::SvdPlusPlus,
        ModelKind::TrustSvd,
        ModelKind::HellTrustSvd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::GlobalAvg => "GlobalAvg",
            ModelKind::UserAvg => "UserAvg",
            ModelKind::ItemAvg => "ItemAvg",
            ModelKind::SlopeOne => "SlopeOne",
            ModelKind::UserKnn => "UserKNN",
            ModelKind::ItemKnn => "ItemKNN",
            ModelKind::RegSvd => "RegSVD",
            ModelKind::BiasedMf => "BiasedMF",
            ModelKind::SvdPlusPlus => "SVD++",
            ModelKind::TrustSvd => "TrustSVD",
            ModelKind::HellTrustSvd => "HellTrustSVD",
        }
    }

    pub fn uses_trust(self) -> bool {
        matches!(self, ModelKind::TrustSvd | ModelKind::HellTrustSvd)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric() || *c == '+')
            .collect::<String>()
            .to_ascii_lowercase();
        let kind = match key.as_str() {
            "globalavg" | "globalaverage" => ModelKind::GlobalAvg,
            "useravg" | "useraverage" => ModelKind::UserAvg,
            "itemavg" | "itemaverage" => ModelKind::ItemAvg,
            "slopeone" => ModelKind::SlopeOne,
            "userknn" => ModelKind::UserKnn,
            "itemknn" => ModelKind::ItemKnn,
            "regsvd" => ModelKind::RegSvd,
            "biasedmf" => ModelKind::BiasedMf,
            "svd++" | "svdpp" | "svdplusplus" => ModelKind::SvdPlusPlus,
            "trustsvd" => ModelKind::TrustSvd,
            "helltrustsvd" => ModelKind::HellTrustSvd,
            _ => return Err(Error::Config(format!("unknown model '{s}'"))),
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnParams {
    pub neighbors: usize,
    pub shrinkage: u32,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self {
            neighbors: 50,
            shrinkage: 30,
        }
    }
}

/// A named model configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub kind: ModelKind,
    pub knn: KnnParams,
    pub hp: HyperParams,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            name: kind.name().to_owned(),
            kind,
            knn: KnnParams::default(),
            hp: HyperParams::default(),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_hp(mut self, hp: HyperParams) -> Self {
        self.hp = hp;
        self
    }

    pub fn with_knn(mut self, knn: KnnParams) -> Self {
        self.knn = knn;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ModelKind::UserKnn | ModelKind::ItemKnn if self.knn.neighbors == 0 => Err(Error::Config(
                format!("{}: neighbors must be at least 1", self.name),
            )),
            ModelKind::RegSvd
            | ModelKind::BiasedMf
            | ModelKind::SvdPlusPlus
            | ModelKind::TrustSvd
            | ModelKind::HellTrustSvd => self
                .hp
                .validate()
                .map_err(|e| Error::Config(format!("{}: {e}", self.name))),
            _ => Ok(()),
        }
    }
}

/// A trained predictor of any kind.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Mean(MeanModel),
    SlopeOne(SlopeOne),
    Knn(KnnModel),
    Factor(FactorModel),
}

impl Predictor for TrainedModel {
    fn predict(&self, user: usize, item: usize) -> f64 {
        match self {
            TrainedModel::Mean(m) => m.predict(user, item),
            TrainedModel::SlopeOne(m) => m.predict(user, item),
            TrainedModel::Knn(m) => m.predict(user, item),
            TrainedModel::Factor(m) => m.predict(user, item),
        }
    }
}

/// Trains `spec` on `train`. Trust-based kinds require `trust`; an absent
/// list is treated as empty.
pub fn train_model(
    spec: &ModelSpec,
    train: &RatingDataset,
    trust: Option<&TrustEdgeList>,
) -> Result<TrainedModel> {
    spec.validate()?;
    Ok(match spec.kind {
        ModelKind::GlobalAvg => TrainedModel::Mean(train_mean_model(train, MeanKind::Global)?),
        ModelKind::UserAvg => TrainedModel::Mean(train_mean_model(train, MeanKind::User)?),
        ModelKind::ItemAvg => TrainedModel::Mean(train_mean_model(train, MeanKind::Item)?),
        ModelKind::SlopeOne => TrainedModel::SlopeOne(train_slope_one(train)?),
        ModelKind::UserKnn => TrainedModel::Knn(train_knn(
            train,
            KnnMode::User,
            spec.knn.neighbors,
            spec.knn.shrinkage,
        )?),
        ModelKind::ItemKnn => TrainedModel::Knn(train_knn(
            train,
            KnnMode::Item,
            spec.knn.neighbors,
            spec.knn.shrinkage,
        )?),
        ModelKind::RegSvd => {
            TrainedModel::Factor(train_latent_factor(train, &spec.hp, FactorVariant::RegSvd)?)
        }
        ModelKind::BiasedMf => {
            TrainedModel::Factor(train_latent_factor(train, &spec.hp, FactorVariant::BiasedMf)?)
        }
        ModelKind::SvdPlusPlus => {
            TrainedModel::Factor(train_latent_factor(train, &spec.hp, FactorVariant::SvdPlusPlus)?)
        }
        ModelKind::TrustSvd | ModelKind::HellTrustSvd => {
            let empty;
            let trust = match trust {
                Some(t) => t,
                None => {
                    empty = TrustEdgeList::empty(train.n_users());
                    &empty
                }
            };
            TrainedModel::Factor(train_trust_svd(train, trust, &spec.hp)?)
        }
    })
}
