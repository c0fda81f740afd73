//! Rating and trust file parsing, dense id remapping, dataset statistics
//! and seeded k-fold splits.
//!
//! Both file formats are line oriented: whitespace- or comma-separated
//! fields, `#` comment lines, blank lines skipped. Raw ids are arbitrary
//! tokens and are remapped to dense indices in first-appearance order.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Closed rating interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

impl RatingScale {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::InvalidArgument(format!(
                "rating scale [{min}, {max}] is not a proper interval"
            )));
        }
        Ok(Self { min, max })
    }

    #[inline]
    pub fn clamp(&self, x: f64) -> f64 {
        if x.is_nan() {
            return self.min;
        }
        x.clamp(self.min, self.max)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingRecord {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
}

/// Bijection between raw id tokens and dense indices.
#[derive(Debug, Clone, Default)]
pub struct IdMap {
    raw: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    fn intern(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.raw.len();
        self.raw.push(token.to_owned());
        self.index.insert(token.to_owned(), i);
        i
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn raw(&self, index: usize) -> &str {
        &self.raw[index]
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// Ratings over a dense user/item index space, with both inverted indexes.
///
/// A training subset produced by [`RatingDataset::subset`] keeps the id
/// space of its parent, so users or items without ratings in the subset
/// simply have empty index lists.
#[derive(Debug, Clone)]
pub struct RatingDataset {
    records: Vec<RatingRecord>,
    scale: RatingScale,
    users: Arc<IdMap>,
    items: Arc<IdMap>,
    user_items: Vec<Vec<(usize, f64)>>,
    item_users: Vec<Vec<(usize, f64)>>,
    duplicates: usize,
}

impl RatingDataset {
    /// Builds a dataset from already-dense records. Raw ids are the decimal
    /// indices. Duplicate (user, item) pairs keep the last rating.
    pub fn from_records(
        n_users: usize,
        n_items: usize,
        scale: RatingScale,
        records: impl IntoIterator<Item = RatingRecord>,
    ) -> Result<Self> {
        let mut users = IdMap::default();
        for u in 0..n_users {
            users.intern(&u.to_string());
        }
        let mut items = IdMap::default();
        for i in 0..n_items {
            items.intern(&i.to_string());
        }
        let mut out: Vec<RatingRecord> = Vec::new();
        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        let mut duplicates = 0;
        for (k, r) in records.into_iter().enumerate() {
            if r.user >= n_users || r.item >= n_items {
                return Err(Error::InvalidArgument(format!(
                    "record {k} ({}, {}) outside {n_users}x{n_items}",
                    r.user, r.item
                )));
            }
            if !scale.contains(r.rating) {
                return Err(Error::OutOfScale {
                    line: k + 1,
                    rating: r.rating,
                    min: scale.min,
                    max: scale.max,
                });
            }
            match seen.get(&(r.user, r.item)) {
                Some(&pos) => {
                    out[pos].rating = r.rating;
                    duplicates += 1;
                }
                None => {
                    seen.insert((r.user, r.item), out.len());
                    out.push(r);
                }
            }
        }
        Ok(Self::assemble(out, scale, Arc::new(users), Arc::new(items), duplicates))
    }

    fn assemble(
        records: Vec<RatingRecord>,
        scale: RatingScale,
        users: Arc<IdMap>,
        items: Arc<IdMap>,
        duplicates: usize,
    ) -> Self {
        let mut user_items = vec![Vec::new(); users.len()];
        let mut item_users = vec![Vec::new(); items.len()];
        for r in &records {
            user_items[r.user].push((r.item, r.rating));
            item_users[r.item].push((r.user, r.rating));
        }
        for list in user_items.iter_mut().chain(item_users.iter_mut()) {
            list.sort_unstable_by_key(|&(k, _)| k);
        }
        Self {
            records,
            scale,
            users,
            items,
            user_items,
            item_users,
            duplicates,
        }
    }

    /// Dataset restricted to the records at `indices`, same id space.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let records = indices.iter().map(|&k| self.records[k]).collect();
        Self::assemble(
            records,
            self.scale,
            Arc::clone(&self.users),
            Arc::clone(&self.items),
            0,
        )
    }

    pub fn records(&self) -> &[RatingRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn scale(&self) -> RatingScale {
        self.scale
    }

    pub fn user_ids(&self) -> &IdMap {
        &self.users
    }

    pub fn item_ids(&self) -> &IdMap {
        &self.items
    }

    /// `I_u`: (item, rating) pairs sorted by item.
    pub fn user_items(&self, user: usize) -> &[(usize, f64)] {
        &self.user_items[user]
    }

    /// `U_j`: (user, rating) pairs sorted by user.
    pub fn item_users(&self, item: usize) -> &[(usize, f64)] {
        &self.item_users[item]
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn mean_rating(&self) -> f64 {
        if self.records.is_empty() {
            return f64::NAN;
        }
        self.records.iter().map(|r| r.rating).sum::<f64>() / self.records.len() as f64
    }

    pub fn rating(&self, user: usize, item: usize) -> Option<f64> {
        let list = self.user_items.get(user)?;
        list.binary_search_by_key(&item, |&(i, _)| i)
            .ok()
            .map(|pos| list[pos].1)
    }
}

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
}

fn content_lines<R: BufRead>(source: R) -> impl Iterator<Item = Result<(usize, String)>> {
    source
        .lines()
        .enumerate()
        .filter_map(|(k, line)| match line {
            Err(e) => Some(Err(Error::Parse {
                line: k + 1,
                msg: e.to_string(),
            })),
            Ok(l) => {
                let t = l.trim();
                if t.is_empty() || t.starts_with('#') {
                    None
                } else {
                    Some(Ok((k + 1, t.to_owned())))
                }
            }
        })
}

fn parse_real(token: &str, line: usize, what: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("{what} '{token}' is not a finite number"),
        })
}

/// Parses `user item rating [ignored...]` lines.
pub fn parse_ratings<R: BufRead>(source: R, scale: RatingScale) -> Result<RatingDataset> {
    let mut users = IdMap::default();
    let mut items = IdMap::default();
    let mut records: Vec<RatingRecord> = Vec::new();
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    let mut duplicates = 0;

    for entry in content_lines(source) {
        let (line, text) = entry?;
        let mut it = fields(&text);
        let (Some(u), Some(i), Some(r)) = (it.next(), it.next(), it.next()) else {
            return Err(Error::Parse {
                line,
                msg: "expected user, item and rating fields".into(),
            });
        };
        let rating = parse_real(r, line, "rating")?;
        if !scale.contains(rating) {
            return Err(Error::OutOfScale {
                line,
                rating,
                min: scale.min,
                max: scale.max,
            });
        }
        let user = users.intern(u);
        let item = items.intern(i);
        match seen.get(&(user, item)) {
            Some(&pos) => {
                records[pos].rating = rating;
                duplicates += 1;
            }
            None => {
                seen.insert((user, item), records.len());
                records.push(RatingRecord { user, item, rating });
            }
        }
    }
    if records.is_empty() {
        return Err(Error::Empty("rating source has no records".into()));
    }
    Ok(RatingDataset::assemble(
        records,
        scale,
        Arc::new(users),
        Arc::new(items),
        duplicates,
    ))
}

pub fn load_ratings(path: impl AsRef<Path>, scale: RatingScale) -> Result<RatingDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_ratings(BufReader::new(file), scale)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustEdge {
    pub truster: usize,
    pub trustee: usize,
    pub weight: f64,
}

/// Directed user-user trust edges with out (`T_u`) and in (`T_v⁺`) adjacency.
///
/// Edges are kept sorted by (truster, trustee); self-loops and repeated
/// pairs never survive construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustEdgeList {
    n_users: usize,
    edges: Vec<TrustEdge>,
    out: Vec<Vec<(usize, f64)>>,
    inc: Vec<Vec<usize>>,
}

/// Counts of edges discarded while building a [`TrustEdgeList`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrustWarnings {
    /// Non-comment lines read from the source.
    pub lines: usize,
    pub self_loops: usize,
    pub duplicates: usize,
    pub unknown_users: usize,
}

impl TrustWarnings {
    pub fn total(&self) -> usize {
        self.self_loops + self.duplicates + self.unknown_users
    }
}

impl TrustEdgeList {
    pub fn empty(n_users: usize) -> Self {
        Self {
            n_users,
            edges: Vec::new(),
            out: vec![Vec::new(); n_users],
            inc: vec![Vec::new(); n_users],
        }
    }

    /// Builds the list, dropping self-loops and repeated pairs (first one
    /// wins). Endpoints outside `[0, n_users)` are an error.
    pub fn from_edges(
        n_users: usize,
        edges: impl IntoIterator<Item = TrustEdge>,
    ) -> Result<(Self, TrustWarnings)> {
        let mut warn = TrustWarnings::default();
        let mut kept: Vec<TrustEdge> = Vec::new();
        for e in edges {
            warn.lines += 1;
            if e.truster >= n_users || e.trustee >= n_users {
                return Err(Error::UnknownUser {
                    truster: e.truster,
                    trustee: e.trustee,
                    users: n_users,
                });
            }
            if e.truster == e.trustee {
                warn.self_loops += 1;
                continue;
            }
            kept.push(e);
        }
        kept.sort_by_key(|e| (e.truster, e.trustee));
        let before = kept.len();
        kept.dedup_by_key(|e| (e.truster, e.trustee));
        warn.duplicates = before - kept.len();
        Ok((Self::from_sorted(n_users, kept), warn))
    }

    pub(crate) fn from_sorted(n_users: usize, edges: Vec<TrustEdge>) -> Self {
        let mut out = vec![Vec::new(); n_users];
        let mut inc = vec![Vec::new(); n_users];
        for e in &edges {
            out[e.truster].push((e.trustee, e.weight));
            inc[e.trustee].push(e.truster);
        }
        Self {
            n_users,
            edges,
            out,
            inc,
        }
    }

    pub fn edges(&self) -> &[TrustEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    /// `T_u`: (trustee, weight) pairs sorted by trustee.
    pub fn trustees(&self, user: usize) -> &[(usize, f64)] {
        &self.out[user]
    }

    /// `T_v⁺`: users trusting `user`, sorted.
    pub fn trusters(&self, user: usize) -> &[usize] {
        &self.inc[user]
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges.iter().all(|e| {
            self.out[e.trustee]
                .binary_search_by_key(&e.truster, |&(v, _)| v)
                .is_ok()
        })
    }

    /// |edges| / N², the trust-matrix density.
    pub fn density(&self) -> f64 {
        if self.n_users == 0 {
            return 0.0;
        }
        self.edges.len() as f64 / (self.n_users as f64 * self.n_users as f64)
    }

    /// One `truster trustee weight` line per edge, using the raw ids of `users`.
    pub fn write_to<W: std::io::Write>(&self, users: &IdMap, mut sink: W) -> std::io::Result<()> {
        for e in &self.edges {
            writeln!(
                sink,
                "{} {} {:?}",
                users.raw(e.truster),
                users.raw(e.trustee),
                e.weight
            )?;
        }
        Ok(())
    }
}

/// Parses `truster trustee [weight]` lines, mapping ids through the rating
/// dataset's user namespace. Edges touching users absent from the ratings
/// are dropped and counted.
pub fn parse_trust<R: BufRead>(
    source: R,
    ratings: &RatingDataset,
) -> Result<(TrustEdgeList, TrustWarnings)> {
    let ids = ratings.user_ids();
    let mut edges = Vec::new();
    let mut unknown = 0;
    let mut lines = 0;
    for entry in content_lines(source) {
        let (line, text) = entry?;
        lines += 1;
        let mut it = fields(&text);
        let (Some(a), Some(b)) = (it.next(), it.next()) else {
            return Err(Error::Parse {
                line,
                msg: "expected truster and trustee fields".into(),
            });
        };
        let weight = match it.next() {
            Some(w) => parse_real(w, line, "weight")?,
            None => 1.0,
        };
        match (ids.get(a), ids.get(b)) {
            (Some(truster), Some(trustee)) => edges.push(TrustEdge {
                truster,
                trustee,
                weight,
            }),
            _ => unknown += 1,
        }
    }
    let (list, mut warn) = TrustEdgeList::from_edges(ratings.n_users(), edges)?;
    warn.lines = lines;
    warn.unknown_users = unknown;
    Ok((list, warn))
}

pub fn load_trust(
    path: impl AsRef<Path>,
    ratings: &RatingDataset,
) -> Result<(TrustEdgeList, TrustWarnings)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_trust(BufReader::new(file), ratings)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub density: f64,
    pub mean_rating: f64,
}

impl DatasetStats {
    pub fn key_values(&self) -> String {
        format!(
            "users={}\nitems={}\nratings={}\ndensity={:.6}\nmean_rating={:.6}\n",
            self.users, self.items, self.ratings, self.density, self.mean_rating
        )
    }

    pub fn csv_row(&self, dataset: &str) -> String {
        format!(
            "{dataset},{},{},{},{:.6},{:.6}",
            self.users, self.items, self.ratings, self.density, self.mean_rating
        )
    }
}

pub const STATS_CSV_HEADER: &str = "dataset,N,M,ratings,density,mean";

pub fn dataset_stats(ds: &RatingDataset) -> Result<DatasetStats> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset has no ratings".into()));
    }
    let users = ds.n_users();
    let items = ds.n_items();
    Ok(DatasetStats {
        users,
        items,
        ratings: ds.len(),
        density: ds.len() as f64 / (users as f64 * items as f64),
        mean_rating: ds.mean_rating(),
    })
}

/// Per-record fold labels for k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    k: usize,
    seed: u64,
    assignment: Vec<usize>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&r| self.assignment[r] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&r| self.assignment[r] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded uniform partition of the records into `k` folds whose sizes
/// differ by at most one.
pub fn kfold_split(ds: &RatingDataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k}, need at least 2 folds")));
    }
    let n = ds.len();
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {n} available records"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (pos, &r) in order.iter().enumerate() {
        assignment[r] = pos % k;
    }
    Ok(FoldAssignment { k, seed, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn scale(min: f64, max: f64) -> RatingScale {
        RatingScale::new(min, max).unwrap()
    }

    fn ratings(text: &str) -> Result<RatingDataset> {
        parse_ratings(Cursor::new(text), scale(0.5, 5.0))
    }

    #[test]
    fn single_line() {
        let ds = parse_ratings(Cursor::new("1 2 3.5\n"), scale(0.5, 4.0)).unwrap();
        assert_eq!(
            ds.records(),
            &[RatingRecord {
                user: 0,
                item: 0,
                rating: 3.5
            }]
        );
        assert_eq!((ds.n_users(), ds.n_items()), (1, 1));
    }

    #[test]
    fn commas_comments_and_extra_fields() {
        let ds = ratings("# header\n7,9,4,881250949\n\n8\t9\t2.5\n7 3 1\n").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.n_users(), 2);
        assert_eq!(ds.n_items(), 2);
        assert_eq!(ds.user_ids().raw(1), "8");
        assert_eq!(ds.item_ids().raw(1), "3");
        assert_eq!(ds.user_items(0), &[(0, 4.0), (1, 1.0)]);
        assert_eq!(ds.item_users(0), &[(0, 4.0), (1, 2.5)]);
    }

    #[test]
    fn duplicate_keeps_last() {
        let ds = ratings("1 1 2\n1 2 3\n1 1 5\n").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.duplicates(), 1);
        assert_eq!(ds.rating(0, 0), Some(5.0));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match ratings("1 1 2\n\n1 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match ratings("1 1 abc\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        match ratings("1 1 2\n2 2 9\n") {
            Err(Error::OutOfScale { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(ratings("# nothing\n\n"), Err(Error::Empty(_))));
    }

    #[test]
    fn trust_parse_and_adjacency() {
        let ds = ratings("1 10 3\n2 10 4\n3 11 1\n").unwrap();
        let (t, warn) = parse_trust(Cursor::new("1 2\n2 1\n"), &ds).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.trustees(0), &[(1, 1.0)]);
        assert_eq!(t.trusters(1), &[0]);
        assert_eq!(warn.total(), 0);
        assert!(t.is_symmetric());

        let (t, warn) = parse_trust(Cursor::new("1 1\n"), &ds).unwrap();
        assert!(t.is_empty());
        assert_eq!(warn.self_loops, 1);

        let (t, warn) = parse_trust(Cursor::new("1 2 0.5\n1 99\n1 2\n3,1\n"), &ds).unwrap();
        assert_eq!(warn.lines, 4);
        assert_eq!(warn.unknown_users, 1);
        assert_eq!(warn.duplicates, 1);
        assert_eq!(t.trustees(0), &[(1, 0.5)]);
        assert!(!t.is_symmetric());

        assert!(matches!(
            parse_trust(Cursor::new("1\n"), &ds),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn trust_out_of_range_is_an_error() {
        let e = TrustEdgeList::from_edges(
            2,
            [TrustEdge {
                truster: 0,
                trustee: 5,
                weight: 1.0,
            }],
        );
        assert!(matches!(e, Err(Error::UnknownUser { .. })));
    }

    #[test]
    fn stats_by_hand() {
        let ds = ratings("a x 3\nb y 5\n").unwrap();
        let s = dataset_stats(&ds).unwrap();
        assert_eq!((s.users, s.items, s.ratings), (2, 2, 2));
        assert_eq!(s.density, 0.5);
        assert_eq!(s.mean_rating, 4.0);
        assert_eq!(s.csv_row("toy"), "toy,2,2,2,0.500000,4.000000");
    }

    fn n_records(n: usize) -> RatingDataset {
        RatingDataset::from_records(
            n,
            1,
            scale(1.0, 5.0),
            (0..n).map(|u| RatingRecord {
                user: u,
                item: 0,
                rating: 3.0,
            }),
        )
        .unwrap()
    }

    #[test]
    fn kfold_sizes() {
        let f = kfold_split(&n_records(10), 5, 1).unwrap();
        assert_eq!(f.fold_sizes(), vec![2; 5]);
        let f = kfold_split(&n_records(7), 5, 1).unwrap();
        assert_eq!(f.fold_sizes(), vec![2, 2, 1, 1, 1]);
    }

    #[test]
    fn kfold_is_deterministic_and_rejects_bad_k() {
        let ds = n_records(50);
        assert_eq!(kfold_split(&ds, 5, 9).unwrap(), kfold_split(&ds, 5, 9).unwrap());
        assert_ne!(kfold_split(&ds, 5, 9).unwrap(), kfold_split(&ds, 5, 10).unwrap());
        assert!(kfold_split(&ds, 1, 0).is_err());
        assert!(kfold_split(&n_records(3), 5, 0).is_err());
    }

    #[test]
    fn subset_keeps_id_space() {
        let ds = ratings("1 1 2\n2 2 3\n3 3 4\n").unwrap();
        let sub = ds.subset(&[0, 2]);
        assert_eq!(sub.n_users(), 3);
        assert_eq!(sub.n_items(), 3);
        assert!(sub.user_items(1).is_empty());
        assert_eq!(sub.user_items(2), &[(2, 4.0)]);
    }
}
