//! 2-bit random projection sketches for similarity estimation and
//! approximate near neighbor search.
//!
//! The crate has three layers:
//!
//! * probability machinery: Gaussian primitives ([`normal`]), the sixteen
//!   code-pair regions of the 2-bit scheme with their derivatives and lookup
//!   tables ([`region`]), and collision probabilities / LSH gap analysis for
//!   the uniform and offset quantizers ([`collision`]);
//! * coding and estimation: deterministic Gaussian projections, the four
//!   coders, packed sketch storage ([`coding`]), and the 1-bit, 2-bit linear
//!   and 2-bit maximum-likelihood similarity estimators with their Fisher
//!   information ([`estimate`]);
//! * search and experiments: (K,L) hash tables with estimator-driven
//!   re-ranking ([`lsh`]), dataset handling ([`dataset`]) and the simulation
//!   drivers behind the `rpsketch` CLI ([`simulate`]).

pub mod coding;
pub mod collision;
pub mod dataset;
pub mod estimate;
pub mod lsh;
pub mod normal;
pub mod region;
pub mod simulate;

pub use coding::{encode_1bit, encode_2bit, encode_offset, encode_uniform, tally_cells, CellCounts, ProjectionSpec, TwoBitCode, TwoBitSketches};
pub use collision::{collision_prob_offset, collision_prob_uniform, gap, optimal_gap, GapProfile, GapQuery, Scheme};
pub use dataset::{brute_force_top_t, load_dataset, DataFormat, DataMatrix, DatasetSpec};
pub use estimate::{estimate_1bit, estimate_2bit_linear, estimate_2bit_mle, fisher_info_1bit, fisher_info_2bit, g_function, variance_ratio, CellMode, EstimatorKind, MleConfig, MleEstimate};
pub use lsh::{precision_recall, rerank, IndexConfig, LshIndex};
pub use normal::{integrate, std_normal_cdf, std_normal_pdf, QuadratureSpec};
pub use region::{base_region_prob, build_table, region_prob, BaseRegion, ProbabilityTable, RegionId, RHO_EPS, RHO_MAX};
