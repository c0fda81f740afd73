//! Neighbor-degree profiles on the user side of the rating graph and the
//! Hellinger distance between them.

use crate::dataset::RatingDataset;
use crate::error::{Error, Result};

/// Histogram `L_x` of the degrees of a user's item neighbors.
///
/// Stored sparsely as (degree, count) pairs sorted by degree; degrees are
/// raw item degrees (bin `i` holds items rated by exactly `i` users).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeProfile {
    pub user: usize,
    bins: Vec<(u32, u64)>,
}

impl DegreeProfile {
    /// Profile from dense counts, `counts[i]` being the number of neighbors
    /// with degree `i + 1`.
    pub fn from_counts(user: usize, counts: &[u64]) -> Self {
        let bins = counts
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c > 0)
            .map(|(i, &c)| (i as u32 + 1, c))
            .collect();
        Self { user, bins }
    }

    pub fn bins(&self) -> &[(u32, u64)] {
        &self.bins
    }

    /// Σ l_i, the number of rated items.
    pub fn total(&self) -> u64 {
        self.bins.iter().map(|&(_, c)| c).sum()
    }

    /// An empty profile belongs to a user without ratings and cannot be
    /// compared.
    pub fn is_usable(&self) -> bool {
        !self.bins.is_empty()
    }

    /// Largest degree with a non-zero count.
    pub fn max_degree(&self) -> u32 {
        self.bins.last().map_or(0, |&(d, _)| d)
    }

    /// `l_degree`.
    pub fn count(&self, degree: u32) -> u64 {
        self.bins
            .binary_search_by_key(&degree, |&(d, _)| d)
            .map_or(0, |k| self.bins[k].1)
    }

    /// Dense `(l_1, …, l_len)`.
    pub fn dense(&self, len: usize) -> Vec<u64> {
        let mut v = vec![0; len];
        for &(d, c) in &self.bins {
            if (d as usize) <= len {
                v[d as usize - 1] = c;
            }
        }
        v
    }

    pub(crate) fn normalized(&self) -> Result<NormalizedProfile> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyProfile(self.user));
        }
        let total = total as f64;
        Ok(NormalizedProfile {
            degrees: self.bins.iter().map(|&(d, _)| d).collect(),
            roots: self
                .bins
                .iter()
                .map(|&(_, c)| (c as f64 / total).sqrt())
                .collect(),
        })
    }
}

/// Item degrees over the supplied records, then one profile per user.
/// Users without ratings get an empty (unusable) profile.
pub fn build_degree_profiles(ds: &RatingDataset) -> Vec<DegreeProfile> {
    let degree: Vec<u32> = (0..ds.n_items())
        .map(|j| ds.item_users(j).len() as u32)
        .collect();
    (0..ds.n_users())
        .map(|u| {
            let mut degs: Vec<u32> = ds.user_items(u).iter().map(|&(j, _)| degree[j]).collect();
            degs.sort_unstable();
            let mut bins: Vec<(u32, u64)> = Vec::new();
            for d in degs {
                match bins.last_mut() {
                    Some((last, c)) if *last == d => *c += 1,
                    _ => bins.push((d, 1)),
                }
            }
            DegreeProfile { user: u, bins }
        })
        .collect()
}

/// Largest item degree Δ in the dataset.
pub fn max_item_degree(ds: &RatingDataset) -> usize {
    (0..ds.n_items())
        .map(|j| ds.item_users(j).len())
        .max()
        .unwrap_or(0)
}

/// Square roots of a profile's probability masses, aligned with its degrees.
#[derive(Debug, Clone)]
pub(crate) struct NormalizedProfile {
    degrees: Vec<u32>,
    roots: Vec<f64>,
}

impl NormalizedProfile {
    /// sqrt(Σ (√p_i − √q_i)²) over the union of supports.
    pub(crate) fn distance(&self, other: &NormalizedProfile) -> f64 {
        let (a, b) = (&self.degrees, &other.degrees);
        let (ra, rb) = (&self.roots, &other.roots);
        let (mut i, mut j) = (0, 0);
        let mut sum = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    sum += ra[i] * ra[i];
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    sum += rb[j] * rb[j];
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let diff = ra[i] - rb[j];
                    sum += diff * diff;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum += ra[i..].iter().map(|r| r * r).sum::<f64>();
        sum += rb[j..].iter().map(|r| r * r).sum::<f64>();
        sum.sqrt()
    }
}

/// Hellinger distance between two degree profiles, scaled to `[0, √2]`.
///
/// Each profile is normalized to a probability vector first; bins missing
/// from one side count as zero mass.
pub fn hellinger_distance(x: &DegreeProfile, y: &DegreeProfile) -> Result<f64> {
    Ok(x.normalized()?.distance(&y.normalized()?))
}
