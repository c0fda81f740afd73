use crate::dataset::{RatingDataset, RatingScale};
use crate::error::{Error, Result};

use super::Predictor;

/// Largest item count for which the dense deviation table is built.
pub const SLOPE_ONE_MAX_ITEMS: usize = 20_000;

/// Weighted SlopeOne over a dense item × item deviation table.
#[derive(Debug, Clone)]
pub struct SlopeOne {
    n_items: usize,
    // dev_sum[j * M + i] = Σ (r_j - r_i) over users rating both
    dev_sum: Vec<f64>,
    count: Vec<u32>,
    user_items: Vec<Vec<(usize, f64)>>,
    user_mean: Vec<Option<f64>>,
    global: f64,
    scale: RatingScale,
}

pub fn train_slope_one(train: &RatingDataset) -> Result<SlopeOne> {
    if train.is_empty() {
        return Err(Error::Empty("training set has no ratings".into()));
    }
    let m = train.n_items();
    if m > SLOPE_ONE_MAX_ITEMS {
        return Err(Error::InvalidArgument(format!(
            "SlopeOne deviation table limited to {SLOPE_ONE_MAX_ITEMS} items, dataset has {m}"
        )));
    }
    let mut dev_sum = vec![0.0; m * m];
    let mut count = vec![0u32; m * m];
    for u in 0..train.n_users() {
        let items = train.user_items(u);
        for &(j, rj) in items {
            let row = j * m;
            for &(i, ri) in items {
                if i != j {
                    dev_sum[row + i] += rj - ri;
                    count[row + i] += 1;
                }
            }
        }
    }
    let user_items: Vec<_> = (0..train.n_users())
        .map(|u| train.user_items(u).to_vec())
        .collect();
    let user_mean = user_items
        .iter()
        .map(|l| (!l.is_empty()).then(|| l.iter().map(|&(_, r)| r).sum::<f64>() / l.len() as f64))
        .collect();
    Ok(SlopeOne {
        n_items: m,
        dev_sum,
        count,
        user_items,
        user_mean,
        global: train.mean_rating(),
        scale: train.scale(),
    })
}

impl SlopeOne {
    /// Average deviation r_j − r_i over co-raters, with the co-rater count.
    pub fn deviation(&self, j: usize, i: usize) -> Option<(f64, u32)> {
        let k = j * self.n_items + i;
        let c = *self.count.get(k)?;
        (c > 0).then(|| (self.dev_sum[k] / c as f64, c))
    }
}

impl Predictor for SlopeOne {
    fn predict(&self, user: usize, item: usize) -> f64 {
        let Some(items) = self.user_items.get(user) else {
            return self.scale.clamp(self.global);
        };
        let mut num = 0.0;
        let mut den = 0.0;
        if item < self.n_items {
            for &(i, ri) in items {
                if i == item {
                    continue;
                }
                if let Some((dev, c)) = self.deviation(item, i) {
                    num += (dev + ri) * c as f64;
                    den += c as f64;
                }
            }
        }
        let p = if den > 0.0 {
            num / den
        } else {
            self.user_mean[user].unwrap_or(self.global)
        };
        self.scale.clamp(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RatingRecord;

    fn recs(v: &[(usize, usize, f64)]) -> Vec<RatingRecord> {
        v.iter()
            .map(|&(user, item, rating)| RatingRecord { user, item, rating })
            .collect()
    }

    #[test]
    fn single_co_rating() {
        // A rated {i:1, j:2}, B rated {i:2}
        let ds = RatingDataset::from_records(
            2,
            2,
            RatingScale::new(1.0, 5.0).unwrap(),
            recs(&[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0)]),
        )
        .unwrap();
        let m = train_slope_one(&ds).unwrap();
        assert_eq!(m.deviation(1, 0), Some((1.0, 1)));
        assert_eq!(m.predict(1, 1), 3.0);
    }

    #[test]
    fn weighted_by_support() {
        // dev(2,0) = 1 from two users, dev(2,1) = -1 from one user
        let ds = RatingDataset::from_records(
            4,
            3,
            RatingScale::new(0.0, 10.0).unwrap(),
            recs(&[
                (0, 0, 2.0),
                (0, 2, 3.0),
                (1, 0, 4.0),
                (1, 2, 5.0),
                (2, 1, 5.0),
                (2, 2, 4.0),
                (3, 0, 3.0),
                (3, 1, 6.0),
            ]),
        )
        .unwrap();
        let m = train_slope_one(&ds).unwrap();
        // ((1 + 3) * 2 + (-1 + 6) * 1) / 3
        assert!((m.predict(3, 2) - 13.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fallbacks() {
        let ds = RatingDataset::from_records(
            3,
            3,
            RatingScale::new(1.0, 5.0).unwrap(),
            recs(&[(0, 0, 1.0), (1, 1, 5.0)]),
        )
        .unwrap();
        let m = train_slope_one(&ds).unwrap();
        // no co-ratings: user mean, then global mean
        assert_eq!(m.predict(0, 1), 1.0);
        assert_eq!(m.predict(2, 1), 3.0);
        assert_eq!(m.predict(9, 9), 3.0);
    }
}
