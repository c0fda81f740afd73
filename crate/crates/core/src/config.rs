//! Experiment configuration files.
//!
//! INI-style text: an `[experiment]` section plus one `[model NAME]`
//! section per model. Model keys use the dotted recommender-library
//! vocabulary (`factors`, `max.iter`, `learn.rate`, `reg`, `similarity`,
//! `shrinkage`, `neighbors`):
//!
//! ```ini
//! [experiment]
//! name = ml-100k
//! ratings = data/ml-100k/u.data
//! scale = 1,5
//! folds = 5
//! seed = 1
//!
//! [model ItemKNN]
//! similarity = PCC
//! shrinkage = 30
//! neighbors = 50
//!
//! [model BiasedMF]
//! factors = 10
//! max.iter = 200
//! learn.rate = 0.01
//! reg = 0.1
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::dataset::RatingScale;
use crate::error::{Error, Result};
use crate::eval::{DEFAULT_EXPECTED_DEGREE, DEFAULT_SWEEP_GRID};
use crate::models::{HyperParams, KnnParams, ModelKind, ModelSpec, RegWeighting};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Cross-validate every model.
    CrossValidate,
    /// Explicit vs extracted trust for every model.
    Compare,
    /// Expected-degree sweep for the first model.
    Sweep,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cv" | "cross-validate" | "crossvalidate" => Ok(Mode::CrossValidate),
            "compare" => Ok(Mode::Compare),
            "sweep" => Ok(Mode::Sweep),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrustSourceKind {
    None,
    Explicit,
    Hellinger,
}

impl FromStr for TrustSourceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(TrustSourceKind::None),
            "explicit" => Ok(TrustSourceKind::Explicit),
            "hellinger" | "implicit" => Ok(TrustSourceKind::Hellinger),
            other => Err(Error::Config(format!("unknown trust source '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub ratings: PathBuf,
    pub trust: Option<PathBuf>,
    pub scale: RatingScale,
    pub mode: Mode,
    pub trust_source: TrustSourceKind,
    pub expected_degree: f64,
    pub sample_size: Option<usize>,
    pub sweep_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub models: Vec<ModelSpec>,
}

const EXPERIMENT_KEYS: &[&str] = &[
    "name",
    "ratings",
    "trust",
    "scale",
    "mode",
    "trust.source",
    "expected.degree",
    "sample.size",
    "sweep.grid",
    "folds",
    "seed",
    "out.dir",
];

const MODEL_KEYS: &[&str] = &[
    "type",
    "factors",
    "max.iter",
    "learn.rate",
    "reg",
    "reg.social",
    "init.std",
    "reg.weighting",
    "similarity",
    "shrinkage",
    "neighbors",
];

fn parse_value<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] {key} = '{value}' is not valid")))
}

pub fn parse_list(value: &str) -> Result<Vec<f64>> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("'{s}' is not a number")))
        })
        .collect()
}

pub fn parse_scale(value: &str) -> Result<RatingScale> {
    match parse_list(value)?.as_slice() {
        [min, max] => RatingScale::new(*min, *max).map_err(|e| Error::Config(e.to_string())),
        _ => Err(Error::Config(format!("scale '{value}' must be 'min,max'"))),
    }
}

pub fn parse_weighting(value: &str) -> Result<RegWeighting> {
    match value.trim().to_ascii_lowercase().as_str() {
        "uniform" => Ok(RegWeighting::Uniform),
        "frequency" => Ok(RegWeighting::Frequency),
        other => Err(Error::Config(format!(
            "reg.weighting '{other}' must be uniform or frequency"
        ))),
    }
}

/// Default hyperparameters for a model kind before per-key overrides.
pub fn default_hyper_params(kind: ModelKind) -> HyperParams {
    match kind {
        ModelKind::HellTrustSvd | ModelKind::TrustSvd => HyperParams {
            factors: 5,
            max_iter: 200,
            learn_rate: 0.001,
            reg: 0.1,
            reg_social: 0.5,
            ..HyperParams::default()
        },
        ModelKind::SvdPlusPlus => HyperParams {
            factors: 10,
            max_iter: 100,
            ..HyperParams::default()
        },
        _ => HyperParams {
            factors: 10,
            max_iter: 200,
            learn_rate: 0.01,
            reg: 0.1,
            ..HyperParams::default()
        },
    }
}

fn model_from_section(title: &str, props: &ini::Properties) -> Result<ModelSpec> {
    let name = title
        .strip_prefix("model")
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::Config(format!("section [{title}] needs a model name")))?;
    for (k, _) in props.iter() {
        if !MODEL_KEYS.contains(&k) {
            return Err(Error::Config(format!("[{title}] unknown key '{k}'")));
        }
    }
    let kind: ModelKind = props.get("type").unwrap_or(name).parse()?;
    let mut hp = default_hyper_params(kind);
    let mut knn = KnnParams::default();
    for (k, v) in props.iter() {
        match k {
            "factors" => hp.factors = parse_value(title, k, v)?,
            "max.iter" => hp.max_iter = parse_value(title, k, v)?,
            "learn.rate" => hp.learn_rate = parse_value(title, k, v)?,
            "reg" => hp.reg = parse_value(title, k, v)?,
            "reg.social" => hp.reg_social = parse_value(title, k, v)?,
            "init.std" => hp.init_std = parse_value(title, k, v)?,
            "reg.weighting" => hp.reg_weighting = Some(parse_weighting(v)?),
            "shrinkage" => knn.shrinkage = parse_value(title, k, v)?,
            "neighbors" => knn.neighbors = parse_value(title, k, v)?,
            "similarity" if !v.trim().eq_ignore_ascii_case("pcc") => {
                return Err(Error::Config(format!(
                    "[{title}] similarity '{v}' unsupported (only PCC)"
                )))
            }
            _ => {}
        }
    }
    let spec = ModelSpec::new(kind).named(name).with_hp(hp).with_knn(knn);
    spec.validate()?;
    Ok(spec)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let exp = ini
            .section(Some("experiment"))
            .ok_or_else(|| Error::Config("missing [experiment] section".into()))?;
        for (k, _) in exp.iter() {
            if !EXPERIMENT_KEYS.contains(&k) {
                return Err(Error::Config(format!("[experiment] unknown key '{k}'")));
            }
        }
        let get = |k: &str| exp.get(k).map(str::trim).filter(|v| !v.is_empty());
        let sec = "experiment";

        let ratings = PathBuf::from(
            get("ratings").ok_or_else(|| Error::Config("[experiment] ratings is required".into()))?,
        );
        let trust = get("trust").map(PathBuf::from);
        let mut models = Vec::new();
        for (title, props) in ini.iter() {
            match title {
                None if props.is_empty() => {}
                None => return Err(Error::Config("keys outside any section".into())),
                Some("experiment") => {}
                Some(t) if t.starts_with("model") => models.push(model_from_section(t, props)?),
                Some(t) => return Err(Error::Config(format!("unknown section [{t}]"))),
            }
        }
        let cfg = ExperimentConfig {
            name: get("name").unwrap_or("dataset").to_owned(),
            ratings,
            scale: get("scale").map_or(RatingScale::new(1.0, 5.0), parse_scale)?,
            mode: get("mode").map_or(Ok(Mode::CrossValidate), str::parse)?,
            trust_source: get("trust.source").map_or(
                Ok(if trust.is_some() {
                    TrustSourceKind::Explicit
                } else {
                    TrustSourceKind::None
                }),
                str::parse,
            )?,
            trust,
            expected_degree: get("expected.degree")
                .map_or(Ok(DEFAULT_EXPECTED_DEGREE), |v| parse_value(sec, "expected.degree", v))?,
            sample_size: get("sample.size")
                .map(|v| parse_value(sec, "sample.size", v))
                .transpose()?,
            sweep_grid: get("sweep.grid").map_or(Ok(DEFAULT_SWEEP_GRID.to_vec()), parse_list)?,
            folds: get("folds").map_or(Ok(5), |v| parse_value(sec, "folds", v))?,
            seed: get("seed").map_or(Ok(1), |v| parse_value(sec, "seed", v))?,
            out_dir: PathBuf::from(get("out.dir").unwrap_or("results")),
            models,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Checks everything that can be checked without reading the data.
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("no [model ...] sections".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("folds = {} must be >= 2", self.folds)));
        }
        if !(self.expected_degree > 0.0 && self.expected_degree.is_finite()) {
            return Err(Error::Config(format!(
                "expected.degree = {} must be > 0",
                self.expected_degree
            )));
        }
        if let Some(n) = self.sample_size {
            if n < 2 {
                return Err(Error::Config("sample.size must be >= 2".into()));
            }
        }
        let needs_trust_file =
            self.trust_source == TrustSourceKind::Explicit || self.mode == Mode::Compare;
        if needs_trust_file && self.trust.is_none() {
            return Err(Error::Config(
                "explicit trust or compare mode needs a trust file".into(),
            ));
        }
        if self.mode == Mode::Sweep {
            if self.sweep_grid.is_empty() || self.sweep_grid.iter().any(|&d| !(d > 0.0)) {
                return Err(Error::Config("sweep.grid must hold positive degrees".into()));
            }
            if !self.models[0].kind.uses_trust() {
                return Err(Error::Config(format!(
                    "sweep needs a trust model, got {}",
                    self.models[0].name
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[experiment]\nname = toy\nratings = r.txt\nscale = 0.5, 4\n";

    #[test]
    fn parses_models_and_defaults() {
        let text = format!(
            "{BASE}\n[model ItemKNN]\nsimilarity = PCC\nshrinkage = 30\nneighbors = 50\n\n\
             [model SVD++ d10]\ntype = svd++\nfactors = 10\nmax.iter = 100\nlearn.rate = 0.01\nreg = 0.1\n"
        );
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg.name, "toy");
        assert_eq!(cfg.scale, RatingScale { min: 0.5, max: 4.0 });
        assert_eq!(cfg.mode, Mode::CrossValidate);
        assert_eq!(cfg.trust_source, TrustSourceKind::None);
        assert_eq!(cfg.folds, 5);
        assert_eq!(cfg.models.len(), 2);
        assert_eq!(cfg.models[0].kind, ModelKind::ItemKnn);
        assert_eq!(cfg.models[0].knn, KnnParams { neighbors: 50, shrinkage: 30 });
        assert_eq!(cfg.models[1].name, "SVD++ d10");
        assert_eq!(cfg.models[1].hp.max_iter, 100);
    }

    #[test]
    fn unknown_model_fails_fast() {
        let text = format!("{BASE}\n[model SoRec]\nfactors = 5\n");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("unknown model"), "{err}");
    }

    #[test]
    fn unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::parse(&format!("{BASE}flods = 5\n[model GlobalAvg]\n")).is_err());
        assert!(ExperimentConfig::parse(&format!("{BASE}\n[model BiasedMF]\nfactor = 5\n")).is_err());
        assert!(ExperimentConfig::parse(&format!("{BASE}\n[model BiasedMF]\nreg = lots\n")).is_err());
        assert!(ExperimentConfig::parse(&format!("{BASE}\n[model UserKNN]\nsimilarity = COS\n")).is_err());
        assert!(ExperimentConfig::parse(&format!("{BASE}\n[model BiasedMF]\nfactors = 0\n")).is_err());
    }

    #[test]
    fn compare_needs_trust() {
        let text = format!("{BASE}mode = compare\n[model TrustSVD]\n");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = format!("{BASE}mode = compare\ntrust = t.txt\n[model TrustSVD]\n");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg.trust_source, TrustSourceKind::Explicit);
    }

    #[test]
    fn sweep_grid() {
        let text = format!("{BASE}mode = sweep\nsweep.grid = 1, 10, 100\n[model HellTrustSVD]\n");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg.sweep_grid, vec![1.0, 10.0, 100.0]);
        let text = format!("{BASE}mode = sweep\n[model BiasedMF]\n");
        assert!(ExperimentConfig::parse(&text).is_err());
    }
}
