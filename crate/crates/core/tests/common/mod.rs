#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trustrec::dataset::{RatingDataset, RatingRecord, RatingScale, TrustEdge, TrustEdgeList};

pub fn scale() -> RatingScale {
    RatingScale::new(1.0, 5.0).unwrap()
}

pub fn dataset(n_users: usize, n_items: usize, triples: &[(usize, usize, f64)]) -> RatingDataset {
    RatingDataset::from_records(
        n_users,
        n_items,
        scale(),
        triples
            .iter()
            .map(|&(user, item, rating)| RatingRecord { user, item, rating }),
    )
    .unwrap()
}

/// Random integer ratings with a low-rank-ish structure: each user has a
/// taste offset, each item a quality offset. Every user gets at least one
/// rating and item popularity is skewed towards low item indices.
pub fn synthetic(n_users: usize, n_items: usize, per_user: usize, seed: u64) -> RatingDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let taste: Vec<f64> = (0..n_users).map(|_| rng.random_range(-1.0..1.0)).collect();
    let quality: Vec<f64> = (0..n_items).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut triples = Vec::new();
    for u in 0..n_users {
        let k = rng.random_range(1..=per_user.max(1));
        for _ in 0..k {
            // squaring a uniform draw skews popularity to the head
            let x: f64 = rng.random();
            let j = ((x * x) * n_items as f64) as usize;
            let noise: f64 = rng.random_range(-0.7..0.7);
            let r = (3.2 + taste[u] + quality[j] + noise).round().clamp(1.0, 5.0);
            triples.push((u, j.min(n_items - 1), r));
        }
    }
    dataset(n_users, n_items, &triples)
}

pub fn trust_list(n_users: usize, pairs: &[(usize, usize)]) -> TrustEdgeList {
    TrustEdgeList::from_edges(
        n_users,
        pairs.iter().map(|&(truster, trustee)| TrustEdge {
            truster,
            trustee,
            weight: 1.0,
        }),
    )
    .unwrap()
    .0
}

/// `m` distinct random directed edges without self-loops.
pub fn random_trust(n_users: usize, m: usize, seed: u64) -> TrustEdgeList {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = std::collections::BTreeSet::new();
    while pairs.len() < m {
        let a = rng.random_range(0..n_users);
        let b = rng.random_range(0..n_users);
        if a != b {
            pairs.insert((a, b));
        }
    }
    trust_list(n_users, &pairs.into_iter().collect::<Vec<_>>())
}

/// Writes `u i r` lines for `ds` (raw ids = indices) to `path`.
pub fn write_ratings(path: &std::path::Path, ds: &RatingDataset) {
    let mut s = String::new();
    for r in ds.records() {
        s.push_str(&format!("{} {} {}\n", r.user, r.item, r.rating));
    }
    std::fs::write(path, s).unwrap();
}

/// 5 users x 5 items with 15 ratings (every user and item has at least
/// one) and 10 directed trust edges.
pub fn toy_trust_instance() -> (RatingDataset, TrustEdgeList) {
    let triples = [
        (0, 0, 5.0),
        (0, 1, 3.0),
        (0, 3, 1.0),
        (1, 0, 4.0),
        (1, 2, 2.0),
        (1, 4, 5.0),
        (2, 1, 1.0),
        (2, 2, 4.0),
        (3, 0, 2.0),
        (3, 3, 5.0),
        (3, 4, 3.0),
        (4, 1, 4.0),
        (4, 2, 3.0),
        (4, 3, 2.0),
        (4, 4, 1.0),
    ];
    let trust = trust_list(
        5,
        &[(0, 1), (0, 2), (1, 0), (1, 3), (2, 4), (3, 0), (3, 1), (3, 4), (4, 2), (4, 0)],
    );
    (dataset(5, 5, &triples), trust)
}
