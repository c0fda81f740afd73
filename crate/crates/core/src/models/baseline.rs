use crate::dataset::{RatingDataset, RatingScale};
use crate::error::{Error, Result};

use super::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanKind {
    Global,
    User,
    Item,
}

/// Global, per-user or per-item average rating.
#[derive(Debug, Clone)]
pub struct MeanModel {
    kind: MeanKind,
    global: f64,
    means: Vec<Option<f64>>,
    scale: RatingScale,
}

pub fn train_mean_model(train: &RatingDataset, kind: MeanKind) -> Result<MeanModel> {
    if train.is_empty() {
        return Err(Error::Empty("training set has no ratings".into()));
    }
    let mean = |list: &[(usize, f64)]| {
        (!list.is_empty()).then(|| list.iter().map(|&(_, r)| r).sum::<f64>() / list.len() as f64)
    };
    let means = match kind {
        MeanKind::Global => Vec::new(),
        MeanKind::User => (0..train.n_users()).map(|u| mean(train.user_items(u))).collect(),
        MeanKind::Item => (0..train.n_items()).map(|j| mean(train.item_users(j))).collect(),
    };
    Ok(MeanModel {
        kind,
        global: train.mean_rating(),
        means,
        scale: train.scale(),
    })
}

impl MeanModel {
    pub fn global_mean(&self) -> f64 {
        self.global
    }
}

impl Predictor for MeanModel {
    fn predict(&self, user: usize, item: usize) -> f64 {
        let key = match self.kind {
            MeanKind::Global => None,
            MeanKind::User => Some(user),
            MeanKind::Item => Some(item),
        };
        let m = key
            .and_then(|k| self.means.get(k).copied().flatten())
            .unwrap_or(self.global);
        self.scale.clamp(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RatingRecord;

    fn ds() -> RatingDataset {
        let recs = [(0, 0, 2.0), (0, 1, 4.0)].map(|(user, item, rating)| RatingRecord {
            user,
            item,
            rating,
        });
        RatingDataset::from_records(2, 3, RatingScale::new(1.0, 5.0).unwrap(), recs).unwrap()
    }

    #[test]
    fn global_mean_everywhere() {
        let m = train_mean_model(&ds(), MeanKind::Global).unwrap();
        for u in 0..3 {
            for j in 0..4 {
                assert_eq!(m.predict(u, j), 3.0);
            }
        }
    }

    #[test]
    fn unseen_falls_back_to_global() {
        let m = train_mean_model(&ds(), MeanKind::User).unwrap();
        assert_eq!(m.predict(0, 2), 3.0);
        assert_eq!(m.predict(1, 0), 3.0);
        let m = train_mean_model(&ds(), MeanKind::Item).unwrap();
        assert_eq!(m.predict(1, 0), 2.0);
        assert_eq!(m.predict(1, 1), 4.0);
        assert_eq!(m.predict(1, 2), 3.0);
        assert_eq!(m.predict(7, 99), 3.0);
    }
}
