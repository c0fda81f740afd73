//! Latent-factor models trained by stochastic gradient descent.
//!
//! * RegSVD: `p_u·q_j`.
//! * BiasedMF: `μ + b_u + b_j + p_u·q_j`.
//! * SVD++: BiasedMF with `p_u` augmented by `|I_u|^-½ Σ_{i∈I_u} y_i`.
//! * TrustSVD: SVD++ with a further `|T_u|^-½ Σ_{v∈T_u} w_v` term and a
//!   trust reconstruction loss `(w_v·p_u − t_uv)²` weighted by `λ_t`.
//!
//! RegSVD and BiasedMF take one SGD step per rating with uniform L2
//! regularization. SVD++ and TrustSVD share one trainer: ratings are
//! grouped by user, the implicit sums are computed once per user block and
//! the `y`/`w` gradients accumulated over the block are applied at its
//! end, followed by the user's trust edges. Their regularization is
//! weighted by `|·|^-½` of the relevant rating or trust set, so popular
//! users and items are penalized less. Empty sets get weight 0.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{RatingDataset, RatingScale, TrustEdgeList};
use crate::error::{Error, Result};

use super::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub factors: usize,
    pub max_iter: usize,
    pub learn_rate: f64,
    /// λ
    pub reg: f64,
    /// λ_t
    pub reg_social: f64,
    pub seed: u64,
    pub init_std: f64,
    /// Penalty weighting for SVD++/TrustSVD; `None` picks the variant's
    /// own (uniform for SVD++, frequency-weighted for TrustSVD).
    #[serde(default)]
    pub reg_weighting: Option<RegWeighting>,
}

/// How the L2 penalty of a parameter scales with its rating count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegWeighting {
    /// Same λ for every user and item.
    Uniform,
    /// λ·|I_u|^-½ for user terms and λ·|U_j|^-½ for item terms, so that
    /// heavy users and popular items are penalized less.
    Frequency,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            factors: 10,
            max_iter: 100,
            learn_rate: 0.01,
            reg: 0.1,
            reg_social: 0.5,
            seed: 0,
            init_std: 0.1,
            reg_weighting: None,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.factors < 1 {
            return bad("factors must be >= 1".into());
        }
        if !(self.learn_rate > 0.0 && self.learn_rate.is_finite()) {
            return bad(format!("learn rate {} must be > 0", self.learn_rate));
        }
        if !(self.reg >= 0.0 && self.reg.is_finite()) {
            return bad(format!("reg {} must be >= 0", self.reg));
        }
        if !(self.reg_social >= 0.0 && self.reg_social.is_finite()) {
            return bad(format!("social reg {} must be >= 0", self.reg_social));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return bad(format!("init std {} must be >= 0", self.init_std));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactorVariant {
    RegSvd,
    BiasedMf,
    SvdPlusPlus,
    TrustSvd,
}

impl FactorVariant {
    fn default_weighting(self) -> RegWeighting {
        match self {
            FactorVariant::TrustSvd => RegWeighting::Frequency,
            _ => RegWeighting::Uniform,
        }
    }

    fn blocked(self) -> bool {
        matches!(self, FactorVariant::SvdPlusPlus | FactorVariant::TrustSvd)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn gaussian(rows: usize, cols: usize, std: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = if std > 0.0 {
            let dist = Normal::new(0.0, std).expect("finite std");
            (0..rows * cols).map(|_| dist.sample(&mut rng)).collect()
        } else {
            vec![0.0; rows * cols]
        };
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Trainable parameters of the latent-factor family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorParams {
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub p: Matrix,
    pub q: Matrix,
    /// Implicit-feedback item factors (SVD++/TrustSVD).
    pub y: Option<Matrix>,
    /// Trustee factors (TrustSVD).
    pub w: Option<Matrix>,
}

impl FactorParams {
    fn all_finite(&self) -> bool {
        let mats = [Some(&self.p), Some(&self.q), self.y.as_ref(), self.w.as_ref()];
        self.user_bias.iter().chain(&self.item_bias).all(|x| x.is_finite())
            && mats
                .iter()
                .flatten()
                .all(|m| m.data.iter().all(|x| x.is_finite()))
    }
}

// Stream identifiers for deriving per-stage seeds.
const STREAM_P: u64 = 1;
const STREAM_Q: u64 = 2;
const STREAM_Y: u64 = 3;
const STREAM_W: u64 = 4;
const STREAM_SHUFFLE: u64 = 5;

/// SplitMix64 finalizer, used to fan one seed out into independent streams.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn inv_sqrt_len(n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        1.0 / (n as f64).sqrt()
    }
}

/// Training data in the index form the trainers and the objective share.
struct TrainingView<'a> {
    n_users: usize,
    n_items: usize,
    ratings: &'a RatingDataset,
    trust: Option<&'a TrustEdgeList>,
    /// |I_u|^-½
    user_w: Vec<f64>,
    /// |U_j|^-½
    item_w: Vec<f64>,
    /// |T_u|^-½
    trust_out_w: Vec<f64>,
    /// |T_v⁺|^-½
    trust_in_w: Vec<f64>,
}

impl<'a> TrainingView<'a> {
    fn new(ratings: &'a RatingDataset, trust: Option<&'a TrustEdgeList>) -> Result<Self> {
        let n_users = ratings.n_users();
        let n_items = ratings.n_items();
        if let Some(t) = trust {
            if let Some(e) = t.edges().iter().find(|e| e.truster >= n_users || e.trustee >= n_users) {
                return Err(Error::UnknownUser {
                    truster: e.truster,
                    trustee: e.trustee,
                    users: n_users,
                });
            }
        }
        let user_w = (0..n_users).map(|u| inv_sqrt_len(ratings.user_items(u).len())).collect();
        let item_w = (0..n_items).map(|j| inv_sqrt_len(ratings.item_users(j).len())).collect();
        let (trust_out_w, trust_in_w) = match trust {
            Some(t) => (
                (0..n_users).map(|u| inv_sqrt_len(t.trustees(u).len())).collect(),
                (0..n_users).map(|v| inv_sqrt_len(t.trusters(v).len())).collect(),
            ),
            None => (vec![0.0; n_users], vec![0.0; n_users]),
        };
        Ok(Self {
            n_users,
            n_items,
            ratings,
            trust,
            user_w,
            item_w,
            trust_out_w,
            trust_in_w,
        })
    }

    fn trustees(&self, u: usize) -> &[(usize, f64)] {
        self.trust.map_or(&[], |t| t.trustees(u))
    }
}

/// Implicit part of the user vector: |I_u|^-½ Σ y_i + |T_u|^-½ Σ w_v.
fn implicit_sum(view: &TrainingView, params: &FactorParams, u: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    if let Some(y) = &params.y {
        let a = view.user_w[u];
        for &(i, _) in view.ratings.user_items(u) {
            for (o, v) in out.iter_mut().zip(y.row(i)) {
                *o += a * v;
            }
        }
    }
    if let Some(w) = &params.w {
        let t = view.trust_out_w[u];
        for &(v, _) in view.trustees(u) {
            for (o, x) in out.iter_mut().zip(w.row(v)) {
                *o += t * x;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn initial_params(view: &TrainingView, hp: &HyperParams, variant: FactorVariant) -> FactorParams {
    let l = hp.factors;
    let s = hp.seed;
    FactorParams {
        user_bias: vec![0.0; view.n_users],
        item_bias: vec![0.0; view.n_items],
        p: Matrix::gaussian(view.n_users, l, hp.init_std, derive_seed(s, STREAM_P)),
        q: Matrix::gaussian(view.n_items, l, hp.init_std, derive_seed(s, STREAM_Q)),
        y: variant
            .blocked()
            .then(|| Matrix::gaussian(view.n_items, l, hp.init_std, derive_seed(s, STREAM_Y))),
        w: (variant == FactorVariant::TrustSvd)
            .then(|| Matrix::gaussian(view.n_users, l, hp.init_std, derive_seed(s, STREAM_W))),
    }
}

/// Parameters a fresh training run starts from.
pub fn initial_factor_params(
    train: &RatingDataset,
    trust: Option<&TrustEdgeList>,
    hp: &HyperParams,
    variant: FactorVariant,
) -> Result<FactorParams> {
    hp.validate()?;
    let view = TrainingView::new(train, trust)?;
    Ok(initial_params(&view, hp, variant))
}

/// Trained latent-factor predictor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorModel {
    format: String,
    version: u32,
    variant: FactorVariant,
    hp: HyperParams,
    scale: RatingScale,
    global_mean: f64,
    params: FactorParams,
    /// I_u per user (SVD++/TrustSVD).
    rated: Vec<Vec<u32>>,
    /// T_u per user (TrustSVD).
    trusted: Vec<Vec<u32>>,
    known_user: Vec<bool>,
    known_item: Vec<bool>,
    /// Training loss after each epoch.
    epoch_loss: Vec<f64>,
    #[serde(skip)]
    user_vec: Matrix,
}

const MODEL_FORMAT: &str = "trustrec-factor-model";
const MODEL_VERSION: u32 = 1;

impl FactorModel {
    fn assemble(
        view: &TrainingView,
        variant: FactorVariant,
        hp: HyperParams,
        global_mean: f64,
        params: FactorParams,
        epoch_loss: Vec<f64>,
    ) -> Self {
        let rated = if variant.blocked() {
            (0..view.n_users)
                .map(|u| view.ratings.user_items(u).iter().map(|&(i, _)| i as u32).collect())
                .collect()
        } else {
            vec![Vec::new(); view.n_users]
        };
        let trusted: Vec<Vec<u32>> = (0..view.n_users)
            .map(|u| {
                if variant == FactorVariant::TrustSvd {
                    view.trustees(u).iter().map(|&(v, _)| v as u32).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        let known_user = (0..view.n_users)
            .map(|u| !view.ratings.user_items(u).is_empty() || !trusted[u].is_empty())
            .collect();
        let known_item = (0..view.n_items)
            .map(|j| !view.ratings.item_users(j).is_empty())
            .collect();
        let mut m = Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            variant,
            hp,
            scale: view.ratings.scale(),
            global_mean,
            params,
            rated,
            trusted,
            known_user,
            known_item,
            epoch_loss,
            user_vec: Matrix::zeros(0, 0),
        };
        m.refresh_user_vectors();
        m
    }

    /// Caches p_u plus the implicit sums for every user.
    fn refresh_user_vectors(&mut self) {
        let n = self.params.p.rows;
        let l = self.params.p.cols;
        let mut uv = self.params.p.clone();
        for u in 0..n {
            let row = uv.row_mut(u);
            if let Some(y) = &self.params.y {
                let a = inv_sqrt_len(self.rated[u].len());
                for &i in &self.rated[u] {
                    for (o, v) in row.iter_mut().zip(y.row(i as usize)) {
                        *o += a * v;
                    }
                }
            }
            if let Some(w) = &self.params.w {
                let t = inv_sqrt_len(self.trusted[u].len());
                for &v in &self.trusted[u] {
                    for (o, x) in row.iter_mut().zip(w.row(v as usize)) {
                        *o += t * x;
                    }
                }
            }
        }
        debug_assert_eq!(uv.cols, l);
        self.user_vec = uv;
    }

    pub fn variant(&self) -> FactorVariant {
        self.variant
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    pub fn params(&self) -> &FactorParams {
        &self.params
    }

    pub fn epoch_loss(&self) -> &[f64] {
        &self.epoch_loss
    }

    /// Unclamped score.
    pub fn raw_score(&self, user: usize, item: usize) -> f64 {
        let biased = self.variant != FactorVariant::RegSvd;
        let known_u = self.known_user.get(user).copied().unwrap_or(false);
        let known_i = self.known_item.get(item).copied().unwrap_or(false);
        let mut s = if biased { self.global_mean } else { 0.0 };
        if biased && known_u {
            s += self.params.user_bias[user];
        }
        if biased && known_i {
            s += self.params.item_bias[item];
        }
        if known_u && known_i {
            s += dot(self.user_vec.row(user), self.params.q.row(item));
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::to_writer(BufWriter::new(file), self).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut m: FactorModel =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Model(e.to_string()))?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "unsupported model file {} v{}",
                m.format, m.version
            )));
        }
        let n = m.params.p.rows;
        let dims_ok = m.params.user_bias.len() == n
            && m.rated.len() == n
            && m.trusted.len() == n
            && m.known_user.len() == n
            && m.params.q.rows == m.known_item.len()
            && m.params.item_bias.len() == m.params.q.rows
            && m.params.q.cols == m.params.p.cols;
        if !dims_ok {
            return Err(Error::Model("inconsistent parameter dimensions".into()));
        }
        m.refresh_user_vectors();
        Ok(m)
    }
}

impl Predictor for FactorModel {
    fn predict(&self, user: usize, item: usize) -> f64 {
        self.scale.clamp(self.raw_score(user, item))
    }
}

fn diverged(epoch: usize, loss: f64, params: &FactorParams) -> Option<Error> {
    if !loss.is_finite() {
        return Some(Error::Divergence {
            epoch,
            msg: format!("training loss is {loss}"),
        });
    }
    if !params.all_finite() {
        return Some(Error::Divergence {
            epoch,
            msg: "non-finite parameter".into(),
        });
    }
    None
}

/// RegSVD, BiasedMF or SVD++ on ratings alone.
pub fn train_latent_factor(
    train: &RatingDataset,
    hp: &HyperParams,
    variant: FactorVariant,
) -> Result<FactorModel> {
    match variant {
        FactorVariant::TrustSvd => Err(Error::InvalidArgument(
            "TrustSVD needs a trust list; use train_trust_svd".into(),
        )),
        FactorVariant::SvdPlusPlus => train_blocked(train, None, hp, variant),
        _ => train_funk(train, hp, variant),
    }
}

/// TrustSVD on ratings plus a (explicit or extracted) trust list.
pub fn train_trust_svd(
    train: &RatingDataset,
    trust: &TrustEdgeList,
    hp: &HyperParams,
) -> Result<FactorModel> {
    train_blocked(train, Some(trust), hp, FactorVariant::TrustSvd)
}

fn check_train(train: &RatingDataset, hp: &HyperParams) -> Result<()> {
    hp.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set has no ratings".into()));
    }
    Ok(())
}

fn train_funk(train: &RatingDataset, hp: &HyperParams, variant: FactorVariant) -> Result<FactorModel> {
    check_train(train, hp)?;
    let view = TrainingView::new(train, None)?;
    let mut params = initial_params(&view, hp, variant);
    let biased = variant == FactorVariant::BiasedMf;
    let mu = if biased { train.mean_rating() } else { 0.0 };
    let (lr, reg) = (hp.learn_rate, hp.reg);
    let records = train.records();
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(hp.seed, STREAM_SHUFFLE));
    let mut losses = Vec::with_capacity(hp.max_iter);

    for epoch in 1..=hp.max_iter {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for &k in &order {
            let r = records[k];
            let (u, j) = (r.user, r.item);
            let mut pred = mu + dot(params.p.row(u), params.q.row(j));
            if biased {
                pred += params.user_bias[u] + params.item_bias[j];
            }
            let e = pred - r.rating;
            loss += e * e;
            if biased {
                let bu = params.user_bias[u];
                let bj = params.item_bias[j];
                params.user_bias[u] -= lr * (e + reg * bu);
                params.item_bias[j] -= lr * (e + reg * bj);
            }
            let l = hp.factors;
            let (pu_off, qj_off) = (u * l, j * l);
            for f in 0..l {
                let pf = params.p.data[pu_off + f];
                let qf = params.q.data[qj_off + f];
                params.p.data[pu_off + f] -= lr * (e * qf + reg * pf);
                params.q.data[qj_off + f] -= lr * (e * pf + reg * qf);
            }
        }
        if let Some(err) = diverged(epoch, loss, &params) {
            return Err(err);
        }
        losses.push(0.5 * loss);
    }
    Ok(FactorModel::assemble(&view, variant, *hp, mu, params, losses))
}

fn train_blocked(
    train: &RatingDataset,
    trust: Option<&TrustEdgeList>,
    hp: &HyperParams,
    variant: FactorVariant,
) -> Result<FactorModel> {
    check_train(train, hp)?;
    let view = TrainingView::new(train, trust)?;
    let mut params = initial_params(&view, hp, variant);
    let mu = train.mean_rating();
    let l = hp.factors;
    let (lr, reg, reg_t) = (hp.learn_rate, hp.reg, hp.reg_social);
    let (reg_user, reg_item) = match hp.reg_weighting.unwrap_or(variant.default_weighting()) {
        RegWeighting::Frequency => (view.user_w.clone(), view.item_w.clone()),
        RegWeighting::Uniform => (vec![1.0; view.n_users], vec![1.0; view.n_items]),
    };

    let mut users: Vec<usize> = (0..view.n_users)
        .filter(|&u| !train.user_items(u).is_empty() || !view.trustees(u).is_empty())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(hp.seed, STREAM_SHUFFLE));
    let mut items: Vec<(usize, f64)> = Vec::new();
    let mut edges: Vec<(usize, f64)> = Vec::new();
    let mut implicit = vec![0.0; l];
    let mut acc = vec![0.0; l];
    let mut losses = Vec::with_capacity(hp.max_iter);

    for epoch in 1..=hp.max_iter {
        users.shuffle(&mut rng);
        let mut loss = 0.0;
        for &u in &users {
            items.clear();
            items.extend_from_slice(train.user_items(u));
            items.shuffle(&mut rng);
            edges.clear();
            edges.extend_from_slice(view.trustees(u));
            edges.shuffle(&mut rng);

            implicit_sum(&view, &params, u, &mut implicit);
            acc.iter_mut().for_each(|x| *x = 0.0);
            let au = view.user_w[u];
            let ru = reg_user[u];
            let pu_off = u * l;

            for &(j, r) in &items {
                let qj_off = j * l;
                let mut pred = mu + params.user_bias[u] + params.item_bias[j];
                for f in 0..l {
                    pred += params.q.data[qj_off + f] * (params.p.data[pu_off + f] + implicit[f]);
                }
                let e = pred - r;
                loss += e * e;
                let cj = reg_item[j];
                let bu = params.user_bias[u];
                let bj = params.item_bias[j];
                params.user_bias[u] -= lr * (e + reg * ru * bu);
                params.item_bias[j] -= lr * (e + reg * cj * bj);
                for f in 0..l {
                    let pf = params.p.data[pu_off + f];
                    let qf = params.q.data[qj_off + f];
                    params.p.data[pu_off + f] -= lr * (e * qf + reg * ru * pf);
                    params.q.data[qj_off + f] -= lr * (e * (pf + implicit[f]) + reg * cj * qf);
                    acc[f] += e * qf;
                }
            }

            if !items.is_empty() {
                // y_i and w_v enter every rating of u, so their penalty is
                // charged once per rating in the block
                let occ = items.len() as f64;
                if let Some(y) = params.y.as_mut() {
                    for &(i, _) in &items {
                        let ci = reg_item[i] * occ;
                        for (yf, &g) in y.row_mut(i).iter_mut().zip(&acc) {
                            *yf -= lr * (au * g + reg * ci * *yf);
                        }
                    }
                }
                if let Some(w) = params.w.as_mut() {
                    let tu = view.trust_out_w[u];
                    for &(v, _) in &edges {
                        let gv = view.trust_in_w[v] * occ;
                        for (wf, &g) in w.row_mut(v).iter_mut().zip(&acc) {
                            *wf -= lr * (tu * g + reg * gv * *wf);
                        }
                    }
                }
            }

            if let Some(w) = params.w.as_mut() {
                let tu = view.trust_out_w[u];
                for &(v, t_uv) in &edges {
                    let gv = view.trust_in_w[v];
                    let wv_off = v * l;
                    let mut pred_t = 0.0;
                    for f in 0..l {
                        pred_t += w.data[wv_off + f] * params.p.data[pu_off + f];
                    }
                    let et = pred_t - t_uv;
                    loss += reg_t * et * et;
                    for f in 0..l {
                        let pf = params.p.data[pu_off + f];
                        let wf = w.data[wv_off + f];
                        params.p.data[pu_off + f] -= lr * (reg_t * et * wf + reg * reg_t * tu * pf);
                        w.data[wv_off + f] -= lr * (reg_t * et * pf + reg * gv * wf);
                    }
                }
            }
        }
        if let Some(err) = diverged(epoch, loss, &params) {
            return Err(err);
        }
        losses.push(0.5 * loss);
    }
    Ok(FactorModel::assemble(&view, variant, *hp, mu, params, losses))
}

/// Full TrustSVD objective:
///
/// ```text
/// ½ Σ (r̂_uj − r_uj)² + λ_t/2 Σ_u Σ_{v∈T_u} (w_v·p_u − t_uv)²
/// + λ/2 [ Σ_u (|I_u|^-½ + λ_t |T_u|^-½) ‖p_u‖² + Σ_j |U_j|^-½ ‖q_j‖²
///        + Σ_i |U_i|^-½ ‖y_i‖² + Σ_v |T_v⁺|^-½ ‖w_v‖²
///        + Σ_u |I_u|^-½ b_u² + Σ_j |U_j|^-½ b_j² ]
/// ```
///
/// With `params.w == None` (or an empty trust list) this is the SVD++
/// objective under the same weighting.
pub fn trust_svd_objective(
    train: &RatingDataset,
    trust: Option<&TrustEdgeList>,
    hp: &HyperParams,
    params: &FactorParams,
) -> Result<f64> {
    let view = TrainingView::new(train, trust)?;
    let mu = train.mean_rating();
    let (reg, reg_t) = (hp.reg, hp.reg_social);
    let l = params.p.cols;
    let mut z = vec![0.0; l];
    let mut loss = 0.0;
    for u in 0..view.n_users {
        implicit_sum(&view, params, u, &mut z);
        for (zf, pf) in z.iter_mut().zip(params.p.row(u)) {
            *zf += pf;
        }
        for &(j, r) in train.user_items(u) {
            let e = mu + params.user_bias[u] + params.item_bias[j] + dot(&z, params.q.row(j)) - r;
            loss += 0.5 * e * e;
        }
        let pu = params.p.row(u);
        if let Some(w) = &params.w {
            for &(v, t) in view.trustees(u) {
                let e = dot(w.row(v), pu) - t;
                loss += 0.5 * reg_t * e * e;
            }
        }
        let sq = dot(pu, pu);
        loss += 0.5 * reg * (view.user_w[u] + reg_t * view.trust_out_w[u]) * sq;
        loss += 0.5 * reg * view.user_w[u] * params.user_bias[u].powi(2);
    }
    for j in 0..view.n_items {
        let cj = view.item_w[j];
        let qj = params.q.row(j);
        loss += 0.5 * reg * cj * (dot(qj, qj) + params.item_bias[j].powi(2));
        if let Some(y) = &params.y {
            let yj = y.row(j);
            loss += 0.5 * reg * cj * dot(yj, yj);
        }
    }
    if let Some(w) = &params.w {
        for v in 0..view.n_users {
            let wv = w.row(v);
            loss += 0.5 * reg * view.trust_in_w[v] * dot(wv, wv);
        }
    }
    Ok(loss)
}

/// Analytic gradient of [`trust_svd_objective`].
pub fn trust_svd_gradient(
    train: &RatingDataset,
    trust: Option<&TrustEdgeList>,
    hp: &HyperParams,
    params: &FactorParams,
) -> Result<FactorParams> {
    let view = TrainingView::new(train, trust)?;
    let mu = train.mean_rating();
    let (reg, reg_t) = (hp.reg, hp.reg_social);
    let l = params.p.cols;
    let mut g = FactorParams {
        user_bias: vec![0.0; view.n_users],
        item_bias: vec![0.0; view.n_items],
        p: Matrix::zeros(view.n_users, l),
        q: Matrix::zeros(view.n_items, l),
        y: params.y.as_ref().map(|_| Matrix::zeros(view.n_items, l)),
        w: params.w.as_ref().map(|_| Matrix::zeros(view.n_users, l)),
    };
    let mut z = vec![0.0; l];
    let mut eq = vec![0.0; l];
    for u in 0..view.n_users {
        implicit_sum(&view, params, u, &mut z);
        for (zf, pf) in z.iter_mut().zip(params.p.row(u)) {
            *zf += pf;
        }
        eq.iter_mut().for_each(|x| *x = 0.0);
        for &(j, r) in train.user_items(u) {
            let qj = params.q.row(j);
            let e = mu + params.user_bias[u] + params.item_bias[j] + dot(&z, qj) - r;
            g.user_bias[u] += e;
            g.item_bias[j] += e;
            for f in 0..l {
                eq[f] += e * qj[f];
                g.q.row_mut(j)[f] += e * z[f];
            }
        }
        let pu = params.p.row(u);
        let au = view.user_w[u];
        let tu = view.trust_out_w[u];
        for f in 0..l {
            g.p.row_mut(u)[f] += eq[f] + reg * (au + reg_t * tu) * pu[f];
        }
        g.user_bias[u] += reg * au * params.user_bias[u];
        if let Some(gy) = g.y.as_mut() {
            for &(i, _) in train.user_items(u) {
                for (gf, e) in gy.row_mut(i).iter_mut().zip(&eq) {
                    *gf += au * e;
                }
            }
        }
        if let (Some(gw), Some(w)) = (g.w.as_mut(), params.w.as_ref()) {
            for &(v, t) in view.trustees(u) {
                let wv = w.row(v);
                let et = dot(wv, pu) - t;
                for f in 0..l {
                    gw.row_mut(v)[f] += tu * eq[f] + reg_t * et * pu[f];
                    g.p.row_mut(u)[f] += reg_t * et * wv[f];
                }
            }
        }
    }
    for j in 0..view.n_items {
        let cj = view.item_w[j];
        g.item_bias[j] += reg * cj * params.item_bias[j];
        for f in 0..l {
            g.q.row_mut(j)[f] += reg * cj * params.q.row(j)[f];
        }
        if let (Some(gy), Some(y)) = (g.y.as_mut(), params.y.as_ref()) {
            for f in 0..l {
                gy.row_mut(j)[f] += reg * cj * y.row(j)[f];
            }
        }
    }
    if let (Some(gw), Some(w)) = (g.w.as_mut(), params.w.as_ref()) {
        for v in 0..view.n_users {
            let gv = view.trust_in_w[v];
            for f in 0..l {
                gw.row_mut(v)[f] += reg * gv * w.row(v)[f];
            }
        }
    }
    Ok(g)
}
