//! User- and item-based neighborhood models with shrunk Pearson similarity.

use rayon::prelude::*;

use crate::dataset::{RatingDataset, RatingScale};
use crate::error::{Error, Result};

use super::Predictor;

/// Largest anchor count for which the dense similarity matrix is built.
pub const KNN_MAX_ANCHORS: usize = 30_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnnMode {
    User,
    Item,
}

/// Pearson correlation of two co-rated vectors, damped by `n / (n + shrinkage)`.
///
/// `None` when fewer than two co-ratings exist or either side is constant.
pub fn pcc_similarity(a: &[f64], b: &[f64], shrinkage: u32) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "co-rated vectors must align");
    let n = a.len();
    if n < 2 {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut num, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        num += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    let r = (num / (va * vb).sqrt()).clamp(-1.0, 1.0);
    Some(r * n as f64 / (n as f64 + shrinkage as f64))
}

fn co_rated_similarity(
    a: &[(usize, f64)],
    b: &[(usize, f64)],
    shrinkage: u32,
    xs: &mut Vec<f64>,
    ys: &mut Vec<f64>,
) -> Option<f64> {
    xs.clear();
    ys.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                xs.push(a[i].1);
                ys.push(b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    pcc_similarity(xs, ys, shrinkage)
}

/// Top-k neighbors per anchor, most similar first.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTable {
    pub k: usize,
    pub neighbors: Vec<Vec<(usize, f64)>>,
}

/// Neighborhood predictor. Anchors are users (user mode) or items (item
/// mode); the "profile" of an anchor is its rating list from the other side.
#[derive(Debug, Clone)]
pub struct KnnModel {
    mode: KnnMode,
    neighbors: usize,
    n_anchors: usize,
    // dense anchor x anchor similarity, NaN where undefined
    sim: Vec<f32>,
    other_ratings: Vec<Vec<(usize, f64)>>,
    anchor_mean: Vec<Option<f64>>,
    global: f64,
    scale: RatingScale,
}

pub fn train_knn(
    train: &RatingDataset,
    mode: KnnMode,
    neighbors: usize,
    shrinkage: u32,
) -> Result<KnnModel> {
    if train.is_empty() {
        return Err(Error::Empty("training set has no ratings".into()));
    }
    if neighbors == 0 {
        return Err(Error::InvalidArgument("neighbors must be at least 1".into()));
    }
    let (n_anchors, n_other) = match mode {
        KnnMode::User => (train.n_users(), train.n_items()),
        KnnMode::Item => (train.n_items(), train.n_users()),
    };
    if n_anchors > KNN_MAX_ANCHORS {
        return Err(Error::InvalidArgument(format!(
            "kNN similarity matrix limited to {KNN_MAX_ANCHORS} anchors, dataset has {n_anchors}"
        )));
    }
    let ratings_of = |k: usize, anchor_side: bool| match (mode, anchor_side) {
        (KnnMode::User, true) | (KnnMode::Item, false) => train.user_items(k).to_vec(),
        (KnnMode::User, false) | (KnnMode::Item, true) => train.item_users(k).to_vec(),
    };
    let anchor_ratings: Vec<_> = (0..n_anchors).map(|a| ratings_of(a, true)).collect();
    let other_ratings: Vec<_> = (0..n_other).map(|o| ratings_of(o, false)).collect();
    let anchor_mean = anchor_ratings
        .iter()
        .map(|l| (!l.is_empty()).then(|| l.iter().map(|&(_, r)| r).sum::<f64>() / l.len() as f64))
        .collect();

    let rows: Vec<Vec<f32>> = (0..n_anchors)
        .into_par_iter()
        .map(|a| {
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            (0..n_anchors)
                .map(|b| {
                    if a == b {
                        return f32::NAN;
                    }
                    co_rated_similarity(&anchor_ratings[a], &anchor_ratings[b], shrinkage, &mut xs, &mut ys)
                        .map_or(f32::NAN, |s| s as f32)
                })
                .collect()
        })
        .collect();
    let sim = rows.concat();

    Ok(KnnModel {
        mode,
        neighbors,
        n_anchors,
        sim,
        other_ratings,
        anchor_mean,
        global: train.mean_rating(),
        scale: train.scale(),
    })
}

impl KnnModel {
    pub fn similarity(&self, a: usize, b: usize) -> Option<f64> {
        let s = self.sim[a * self.n_anchors + b];
        (!s.is_nan()).then_some(s as f64)
    }

    /// The `k` most similar defined neighbors of every anchor.
    pub fn similarity_table(&self) -> SimilarityTable {
        let neighbors = (0..self.n_anchors)
            .map(|a| {
                let mut row: Vec<(usize, f64)> = (0..self.n_anchors)
                    .filter_map(|b| self.similarity(a, b).map(|s| (b, s)))
                    .collect();
                row.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
                row.truncate(self.neighbors);
                row
            })
            .collect();
        SimilarityTable {
            k: self.neighbors,
            neighbors,
        }
    }

    fn mean_of(&self, anchor: usize) -> f64 {
        self.anchor_mean
            .get(anchor)
            .copied()
            .flatten()
            .unwrap_or(self.global)
    }
}

impl Predictor for KnnModel {
    fn predict(&self, user: usize, item: usize) -> f64 {
        let (anchor, target) = match self.mode {
            KnnMode::User => (user, item),
            KnnMode::Item => (item, user),
        };
        if anchor >= self.n_anchors {
            return self.scale.clamp(self.global);
        }
        let base = self.mean_of(anchor);
        let Some(raters) = self.other_ratings.get(target) else {
            return self.scale.clamp(base);
        };
        // positively similar anchors that rated the target
        let row = &self.sim[anchor * self.n_anchors..(anchor + 1) * self.n_anchors];
        let mut cands: Vec<(f32, usize, f64)> = raters
            .iter()
            .filter(|&&(b, _)| b != anchor)
            .filter_map(|&(b, r)| {
                let s = row[b];
                (s > 0.0).then_some((s, b, r))
            })
            .collect();
        if cands.is_empty() {
            return self.scale.clamp(base);
        }
        if cands.len() > self.neighbors {
            cands.select_nth_unstable_by(self.neighbors - 1, |x, y| {
                y.0.total_cmp(&x.0).then(x.1.cmp(&y.1))
            });
            cands.truncate(self.neighbors);
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &(s, b, r) in &cands {
            let s = s as f64;
            num += s * (r - self.mean_of(b));
            den += s.abs();
        }
        self.scale.clamp(base + num / den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RatingRecord;

    fn ds(n_users: usize, n_items: usize, v: &[(usize, usize, f64)]) -> RatingDataset {
        RatingDataset::from_records(
            n_users,
            n_items,
            RatingScale::new(1.0, 5.0).unwrap(),
            v.iter().map(|&(user, item, rating)| RatingRecord { user, item, rating }),
        )
        .unwrap()
    }

    #[test]
    fn pcc_reference_values() {
        let a: Vec<f64> = (0..30).map(|k| (k % 5) as f64).collect();
        assert!((pcc_similarity(&a, &a, 30).unwrap() - 0.5).abs() < 1e-12);
        assert!((pcc_similarity(&[1.0, 5.0], &[5.0, 1.0], 0).unwrap() + 1.0).abs() < 1e-12);
        let s = pcc_similarity(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], 30).unwrap();
        assert!((s - 3.0 / 33.0).abs() < 1e-12);
    }

    #[test]
    fn pcc_undefined_cases() {
        assert_eq!(pcc_similarity(&[1.0], &[2.0], 0), None);
        assert_eq!(pcc_similarity(&[3.0, 3.0], &[1.0, 2.0], 0), None);
        assert_eq!(pcc_similarity(&[], &[], 5), None);
    }

    #[test]
    fn single_user_falls_back_to_user_mean() {
        let m = train_knn(&ds(1, 3, &[(0, 0, 2.0), (0, 1, 4.0)]), KnnMode::User, 50, 30).unwrap();
        assert_eq!(m.predict(0, 2), 3.0);
        assert_eq!(m.predict(0, 0), 3.0);
    }

    #[test]
    fn twin_neighbor_closed_form() {
        // u and v agree on items 0..3; v also rated item 3
        let d = ds(
            2,
            4,
            &[
                (0, 0, 1.0),
                (0, 1, 3.0),
                (0, 2, 5.0),
                (1, 0, 1.0),
                (1, 1, 3.0),
                (1, 2, 5.0),
                (1, 3, 3.0),
            ],
        );
        let m = train_knn(&d, KnnMode::User, 50, 0).unwrap();
        assert!((m.similarity(0, 1).unwrap() - 1.0).abs() < 1e-6);
        // mean_u + (r_v3 - mean_v) with equal means reproduces the twin's rating
        assert!((m.predict(0, 3) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn one_neighbor_centering() {
        let d = ds(
            2,
            4,
            &[
                (0, 0, 1.0),
                (0, 1, 2.0),
                (1, 0, 2.0),
                (1, 1, 4.0),
                (1, 3, 5.0),
            ],
        );
        let m = train_knn(&d, KnnMode::User, 10, 0).unwrap();
        let mean_u = 1.5;
        let mean_v = 11.0 / 3.0;
        assert!((m.predict(0, 3) - (mean_u + 5.0 - mean_v)).abs() < 1e-12);
    }

    #[test]
    fn table_is_bounded_and_sorted() {
        let mut v = Vec::new();
        for u in 0..6 {
            for j in 0..5 {
                v.push((u, j, 1.0 + ((u * 3 + j * (u + 1)) % 5) as f64));
            }
        }
        let m = train_knn(&ds(6, 5, &v), KnnMode::Item, 2, 10).unwrap();
        let t = m.similarity_table();
        for row in &t.neighbors {
            assert!(row.len() <= 2);
            assert!(row.windows(2).all(|w| w[0].1 >= w[1].1));
            assert!(row.iter().all(|&(_, s)| (-1.0..=1.0).contains(&s)));
        }
        for u in 0..6 {
            for j in 0..5 {
                let p = m.predict(u, j);
                assert!((1.0..=5.0).contains(&p));
            }
        }
    }
}
