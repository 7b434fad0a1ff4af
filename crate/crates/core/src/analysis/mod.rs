//! Instruments for checking what a trained model computes: clustering of
//! hidden vectors against automaton transitions, receptive fields,
//! routing reachability and attention cost.

mod dump;
mod kmeans;
mod pca;
mod receptive;
mod routing;
pub mod svg;

pub use dump::{cluster_purity, collect_outputs, span_start, ClusterReport, LayerOutputDump, OutputRecord, Representation};
pub use kmeans::{kmeans, purity, KMeans, DEFAULT_RESTARTS};
pub use pca::{pca_2d, Pca2};
pub use receptive::{profile_from_norms, receptive_field, ReceptiveProfile};
pub use routing::{
    asymptotic_cost_threshold, attention_cost, exact_cost_threshold, reachable_set, routing_coverage, vanilla_cost,
};
