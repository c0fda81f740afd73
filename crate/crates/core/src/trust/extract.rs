use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::normal::{fit_normal_mle, inverse_normal_cdf, NormalFit};
use super::profile::{build_degree_profiles, DegreeProfile, NormalizedProfile};
use crate::dataset::{RatingDataset, TrustEdge, TrustEdgeList};
use crate::error::{Error, Result};

/// Cap on sampled pairs when fitting the distance distribution.
pub const DEFAULT_MAX_SAMPLES: usize = 1_000_000;

/// Above this many users the full distance table is never kept in memory.
pub const DISTANCE_TABLE_MAX_USERS: usize = 20_000;

const BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ThresholdSpec {
    pub expected_degree: f64,
    pub other_side_count: usize,
    pub alpha: f64,
    pub threshold: f64,
}

/// `alpha = E[deg] / M` and `T = mu + sigma * Φ⁻¹(alpha)`.
pub fn compute_threshold(
    fit: &NormalFit,
    expected_degree: f64,
    other_side_count: usize,
) -> Result<ThresholdSpec> {
    if fit.is_degenerate() {
        return Err(Error::Degenerate(
            "distance sample has zero spread; no threshold can be derived".into(),
        ));
    }
    let alpha = expected_degree / other_side_count as f64;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Degenerate(format!(
            "alpha = {expected_degree}/{other_side_count} = {alpha} is outside (0, 1)"
        )));
    }
    Ok(ThresholdSpec {
        expected_degree,
        other_side_count,
        alpha,
        threshold: fit.mu_hat + fit.sigma_hat * inverse_normal_cdf(alpha)?,
    })
}

fn usable(profiles: &[DegreeProfile]) -> Result<(Vec<usize>, Vec<NormalizedProfile>)> {
    let mut users = Vec::new();
    let mut norm = Vec::new();
    for p in profiles.iter().filter(|p| p.is_usable()) {
        users.push(p.user);
        norm.push(p.normalized()?);
    }
    Ok((users, norm))
}

/// Number of unordered distinct pairs among `n` items.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Distances of `n` independently drawn, uniformly random unordered pairs
/// of distinct usable users.
pub fn sample_distances(profiles: &[DegreeProfile], n: usize, seed: u64) -> Result<Vec<f64>> {
    let (_, norm) = usable(profiles)?;
    sample_normalized(&norm, n, seed)
}

fn sample_normalized(norm: &[NormalizedProfile], n: usize, seed: u64) -> Result<Vec<f64>> {
    if norm.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 users with ratings to sample distances, have {}",
            norm.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("sample size {n} < 2")));
    }
    Ok(sample_pairs(norm.len(), n, seed)
        .map(|(a, b)| norm[a].distance(&norm[b]))
        .collect())
}

/// `n` uniform draws of ordered distinct pairs from `0..m` (m ≥ 2).
fn sample_pairs(m: usize, n: usize, seed: u64) -> impl Iterator<Item = (usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(move |_| {
        let a = rng.random_range(0..m);
        let mut b = rng.random_range(0..m - 1);
        if b >= a {
            b += 1;
        }
        (a, b)
    })
}

/// All usable pairs with `d ≤ threshold`, emitted in both directions with
/// weight 1.0 and sorted by (truster, trustee).
pub fn extract_trust_edges(
    profiles: &[DegreeProfile],
    threshold: f64,
    n_users: usize,
) -> Result<TrustEdgeList> {
    let (users, norm) = usable(profiles)?;
    let pairs = scan_pairs(&norm, |d| d <= threshold);
    Ok(symmetric_edges(n_users, &users, pairs.into_iter().map(|(a, b, _)| (a, b))))
}

/// Blocked scan over the upper triangle, keeping pairs whose distance passes
/// `keep`. Blocks run in parallel; results come back in row order.
fn scan_pairs(norm: &[NormalizedProfile], keep: impl Fn(f64) -> bool + Sync) -> Vec<(u32, u32, f64)> {
    let n = norm.len();
    let blocks: Vec<usize> = (0..n).step_by(BLOCK).collect();
    blocks
        .par_iter()
        .map(|&start| {
            let end = (start + BLOCK).min(n);
            let mut out = Vec::new();
            for a in start..end {
                for b in a + 1..n {
                    let d = norm[a].distance(&norm[b]);
                    if keep(d) {
                        out.push((a as u32, b as u32, d));
                    }
                }
            }
            out
        })
        .flatten()
        .collect()
}

fn symmetric_edges(
    n_users: usize,
    users: &[usize],
    pairs: impl Iterator<Item = (u32, u32)>,
) -> TrustEdgeList {
    let mut edges = Vec::new();
    for (a, b) in pairs {
        let (x, y) = (users[a as usize], users[b as usize]);
        edges.push(TrustEdge {
            truster: x,
            trustee: y,
            weight: 1.0,
        });
        edges.push(TrustEdge {
            truster: y,
            trustee: x,
            weight: 1.0,
        });
    }
    edges.sort_by_key(|e| (e.truster, e.trustee));
    TrustEdgeList::from_sorted(n_users, edges)
}

/// Settings for the full profiles → sample → fit → threshold → edges run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionConfig {
    pub expected_degree: f64,
    /// Pairs to sample; `None` means min(all pairs, [`DEFAULT_MAX_SAMPLES`]).
    pub sample_size: Option<usize>,
    pub seed: u64,
}

impl ExtractionConfig {
    pub fn new(expected_degree: f64, seed: u64) -> Self {
        Self {
            expected_degree,
            sample_size: None,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub fit: NormalFit,
    pub threshold: ThresholdSpec,
    pub edges: TrustEdgeList,
    pub usable_users: usize,
    samples: Vec<f64>,
}

impl Extraction {
    /// Undirected pairs in the extracted graph.
    pub fn pairs(&self) -> usize {
        self.edges.len() / 2
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.pairs() as f64 / self.edges.n_users() as f64
    }

    pub fn diagnostics(&self) -> String {
        format!(
            "mu={:.6} sigma={:.6} alpha={:.6} T={:.6} edges={} mean_degree={:.4}",
            self.fit.mu_hat,
            self.fit.sigma_hat,
            self.threshold.alpha,
            self.threshold.threshold,
            self.edges.len(),
            self.mean_degree()
        )
    }

    /// (p, empirical quantile of the sampled distances, fitted normal quantile).
    pub fn quantile_check(&self) -> Vec<(f64, f64, f64)> {
        let mut sorted = self.samples.clone();
        sorted.sort_by(f64::total_cmp);
        [0.001, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99]
            .iter()
            .map(|&p| {
                let k = ((p * sorted.len() as f64) as usize).min(sorted.len() - 1);
                let fitted = self.fit.quantile(p).unwrap_or(f64::NAN);
                (p, sorted[k], fitted)
            })
            .collect()
    }
}

/// Profiles, fit and threshold for one dataset, reusable across several
/// expected degrees.
#[derive(Debug, Clone)]
pub struct DistanceModel {
    n_users: usize,
    n_items: usize,
    users: Vec<usize>,
    norm: Vec<NormalizedProfile>,
    samples: Vec<f64>,
    pub fit: NormalFit,
    table: Option<Vec<(u32, u32, f64)>>,
}

impl DistanceModel {
    pub fn new(ds: &RatingDataset, sample_size: Option<usize>, seed: u64) -> Result<Self> {
        let profiles = build_degree_profiles(ds);
        let (users, norm) = usable(&profiles)?;
        let n = sample_size.unwrap_or_else(|| pair_count(norm.len()).min(DEFAULT_MAX_SAMPLES));
        let samples = sample_normalized(&norm, n.max(2), seed)?;
        let fit = fit_normal_mle(&samples)?;
        Ok(Self {
            n_users: ds.n_users(),
            n_items: ds.n_items(),
            users,
            norm,
            samples,
            fit,
            table: None,
        })
    }

    /// Keeps every pairwise distance so repeated extractions skip the scan.
    /// No-op above [`DISTANCE_TABLE_MAX_USERS`].
    pub fn cache_distances(&mut self) {
        if self.table.is_none() && self.norm.len() <= DISTANCE_TABLE_MAX_USERS {
            self.table = Some(scan_pairs(&self.norm, |_| true));
        }
    }

    pub fn threshold(&self, expected_degree: f64) -> Result<ThresholdSpec> {
        compute_threshold(&self.fit, expected_degree, self.n_items)
    }

    pub fn extract(&self, expected_degree: f64) -> Result<Extraction> {
        let threshold = self.threshold(expected_degree)?;
        let t = threshold.threshold;
        let edges = match &self.table {
            Some(table) => symmetric_edges(
                self.n_users,
                &self.users,
                table.iter().filter(|p| p.2 <= t).map(|&(a, b, _)| (a, b)),
            ),
            None => symmetric_edges(
                self.n_users,
                &self.users,
                scan_pairs(&self.norm, |d| d <= t).into_iter().map(|(a, b, _)| (a, b)),
            ),
        };
        Ok(Extraction {
            fit: self.fit,
            threshold,
            edges,
            usable_users: self.users.len(),
            samples: self.samples.clone(),
        })
    }
}

/// Runs the whole extraction on the supplied (training) ratings.
pub fn extract_implicit_trust(ds: &RatingDataset, cfg: &ExtractionConfig) -> Result<Extraction> {
    DistanceModel::new(ds, cfg.sample_size, cfg.seed)?.extract(cfg.expected_degree)
}
