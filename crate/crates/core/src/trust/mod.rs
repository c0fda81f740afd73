//! Implicit trust extraction from the bipartite rating graph.
//!
//! Users are compared by the Hellinger distance between the degree
//! histograms of the items they rated. A normal fit over sampled distances
//! and a target social-graph density fix a global threshold; every pair at
//! or below it becomes a symmetric trust edge.

mod extract;
mod normal;
mod profile;

pub use extract::{
    compute_threshold, extract_implicit_trust, extract_trust_edges, pair_count,
    sample_distances, DistanceModel, Extraction, ExtractionConfig, ThresholdSpec,
    DEFAULT_MAX_SAMPLES, DISTANCE_TABLE_MAX_USERS,
};
pub use normal::{fit_normal_mle, inverse_normal_cdf, normal_cdf, NormalFit};
pub use profile::{build_degree_profiles, hellinger_distance, max_item_degree, DegreeProfile};
