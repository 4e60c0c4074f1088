//! Simulation drivers: correlated projection pairs, estimator MSE sweeps,
//! planted-neighbor datasets, and the desk-scale retrieval experiment.
//!
//! Every driver takes an explicit seed and derives one independent stream
//! per trial (or per query), so results do not depend on worker count or
//! scheduling.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::coding::{encode_2bit, projection_matrix, project_row, CellCounts, ProjectionSpec, TwoBitSketches};
use crate::dataset::{brute_force_top_t, DataMatrix};
use crate::estimate::{
    estimate_1bit, estimate_2bit_linear, estimate_2bit_mle, fisher_info_1bit, fisher_info_2bit,
    fisher_info_2bit_five_cell, linear_asymptotic_variance, CellMode, EstimateError,
    EstimatorKind, MleConfig,
};
use crate::lsh::{average_pr, pr_auc, precision_recall, rerank, IndexConfig, LshError, LshIndex, PrPoint};
use crate::region::{clamp_rho, ProbabilityTable};

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Lsh(#[from] LshError),
    #[error(transparent)]
    Quadrature(#[from] crate::normal::QuadratureError),
    #[error(transparent)]
    Coding(#[from] crate::coding::CodingError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Independent stream for one trial of a seeded experiment.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut mixed = seed ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    mixed ^= mixed >> 33;
    ChaCha8Rng::seed_from_u64(mixed.wrapping_add(trial))
}

/// One draw from the unit-variance bivariate normal at correlation rho.
#[inline]
pub fn sample_pair(rho: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    sample_pair_with(rho, (1.0 - rho * rho).sqrt(), rng)
}

/// [`sample_pair`] with the noise scale sqrt(1 - rho^2) precomputed, for
/// tight sampling loops.
#[inline]
pub fn sample_pair_with(rho: f64, noise_scale: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let x: f64 = StandardNormal.sample(rng);
    let e: f64 = StandardNormal.sample(rng);
    (x, rho * x + noise_scale * e)
}

/// Simulated code streams of one trial: k paired projections at correlation
/// rho, coded by the supplied scheme.
pub fn synth_pairs<T>(
    rho: f64,
    k: usize,
    trials: usize,
    seed: u64,
    coder: impl Fn(f64, f64) -> (T, T),
) -> Vec<Vec<(T, T)>> {
    let rho = clamp_rho(rho);
    (0..trials)
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            (0..k)
                .map(|_| {
                    let (x, y) = sample_pair(rho, &mut rng);
                    coder(x, y)
                })
                .collect()
        })
        .collect()
}

/// Grouped 2-bit cell counts of one simulated trial.
pub fn two_bit_counts_trial(rho: f64, w: f64, k: usize, seed: u64, trial: u64) -> CellCounts {
    let rho = clamp_rho(rho);
    let mut rng = trial_rng(seed, trial);
    let mut groups = [0u64; 6];
    for _ in 0..k {
        let (x, y) = sample_pair(rho, &mut rng);
        groups[CellCounts::group_of(encode_2bit(x, w), encode_2bit(y, w))] += 1;
    }
    CellCounts::from_groups(groups.map(|c| c as f64))
}

/// Estimators an MSE sweep can exercise; the MLE appears in both cell modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimEstimator {
    OneBit,
    Linear,
    MleSixCell,
    MleFiveCell,
}

impl SimEstimator {
    pub fn label(&self) -> &'static str {
        match self {
            SimEstimator::OneBit => "1bit",
            SimEstimator::Linear => "2bit-linear",
            SimEstimator::MleSixCell => "mle",
            SimEstimator::MleFiveCell => "mle-5cell",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "1bit" | "one-bit" => Some(SimEstimator::OneBit),
            "2bit-linear" | "linear" => Some(SimEstimator::Linear),
            "mle" | "mle-6cell" => Some(SimEstimator::MleSixCell),
            "mle-5cell" | "mle-five" => Some(SimEstimator::MleFiveCell),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MseConfig {
    pub rhos: Vec<f64>,
    pub k: usize,
    pub trials: usize,
    pub w: f64,
    pub seed: u64,
    pub estimators: Vec<SimEstimator>,
}

/// One (rho, estimator) cell of an MSE sweep.
#[derive(Debug, Clone, Copy)]
pub struct MseRow {
    pub rho: f64,
    pub estimator: SimEstimator,
    pub empirical_mse: f64,
    /// Asymptotic variance 1/(k*I) of this estimator at the true rho.
    pub predicted_variance: f64,
}

/// Monte Carlo mean squared error of the chosen estimators against their
/// asymptotic variances.
pub fn run_mse(config: &MseConfig, table: &ProbabilityTable) -> Result<Vec<MseRow>, SimulateError> {
    if config.trials == 0 {
        return Err(SimulateError::InvalidConfig("trials must be positive".into()));
    }
    if config.k == 0 {
        return Err(SimulateError::InvalidConfig("k must be positive".into()));
    }
    if config.estimators.is_empty() {
        return Err(SimulateError::InvalidConfig("no estimators selected".into()));
    }
    if (table.w() - config.w).abs() > 1e-12 {
        return Err(SimulateError::InvalidConfig(format!(
            "table built for w = {} but the sweep uses w = {}",
            table.w(),
            config.w
        )));
    }

    let six = MleConfig { mode: CellMode::SixCell, ..Default::default() };
    let five = MleConfig { mode: CellMode::FiveCell, ..Default::default() };
    let kf = config.k as f64;

    let mut rows = Vec::new();
    for (rho_idx, &rho) in config.rhos.iter().enumerate() {
        let rho = clamp_rho(rho);
        // Decorrelate trial streams across rho values.
        let rho_seed = config.seed ^ ((rho_idx as u64 + 1) << 32);
        let sq_err: Vec<[f64; 4]> = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let counts = two_bit_counts_trial(rho, config.w, config.k, rho_seed, t as u64);
                let mut errs = [0.0f64; 4];
                for est in &config.estimators {
                    let rho_hat = match est {
                        SimEstimator::OneBit => estimate_1bit(counts.same_sign(), counts.total()),
                        SimEstimator::Linear => estimate_2bit_linear(&counts, table).rho_hat,
                        SimEstimator::MleSixCell => estimate_2bit_mle(&counts, table, &six).rho_hat,
                        SimEstimator::MleFiveCell => {
                            estimate_2bit_mle(&counts, table, &five).rho_hat
                        }
                    };
                    errs[est_slot(*est)] = (rho_hat - rho) * (rho_hat - rho);
                }
                errs
            })
            .collect();

        for est in &config.estimators {
            let slot = est_slot(*est);
            let mse = sq_err.iter().map(|e| e[slot]).sum::<f64>() / config.trials as f64;
            let predicted = match est {
                SimEstimator::OneBit => 1.0 / (kf * fisher_info_1bit(rho)),
                SimEstimator::Linear => linear_asymptotic_variance(rho, config.w)? / kf,
                SimEstimator::MleSixCell => 1.0 / (kf * fisher_info_2bit(rho, config.w)?),
                SimEstimator::MleFiveCell => {
                    1.0 / (kf * fisher_info_2bit_five_cell(rho, config.w)?)
                }
            };
            rows.push(MseRow { rho, estimator: *est, empirical_mse: mse, predicted_variance: predicted });
        }
    }
    Ok(rows)
}

fn est_slot(est: SimEstimator) -> usize {
    match est {
        SimEstimator::OneBit => 0,
        SimEstimator::Linear => 1,
        SimEstimator::MleSixCell => 2,
        SimEstimator::MleFiveCell => 3,
    }
}

/// Planted-neighbor dataset layout: `clusters` cluster centers, each with
/// `per_cluster` points whose similarities to the center walk a ladder from
/// `rho_min` to `rho_max`, plus `queries_per_cluster` held-out queries at
/// similarity `query_rho` to the center.
#[derive(Debug, Clone, Copy)]
pub struct PlantedConfig {
    pub clusters: usize,
    pub per_cluster: usize,
    pub dims: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub queries_per_cluster: usize,
    pub query_rho: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        // Ground truth at every evaluated T must cut strictly inside a
        // cluster's similarity ladder, otherwise ranking quality within the
        // cluster cannot move precision-recall; hence clusters larger than
        // the largest T.
        Self {
            clusters: 50,
            per_cluster: 200,
            dims: 128,
            rho_min: 0.60,
            rho_max: 0.98,
            queries_per_cluster: 10,
            query_rho: 0.95,
            seed: 0xD5C0_FFEE,
        }
    }
}

pub struct PlantedData {
    pub data: DataMatrix,
    pub queries: DataMatrix,
}

fn random_unit(dims: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dims).map(|_| StandardNormal.sample(rng)).collect();
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        if norm2 > 1e-12 {
            let inv = 1.0 / norm2.sqrt();
            return v.iter().map(|x| x * inv).collect();
        }
    }
}

/// Unit vector at exact inner product rho with `center`.
fn perturb(center: &[f64], rho: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let raw = random_unit(center.len(), rng);
        let along: f64 = raw.iter().zip(center).map(|(a, b)| a * b).sum();
        let mut ortho: Vec<f64> = raw.iter().zip(center).map(|(a, b)| a - along * b).collect();
        let norm2: f64 = ortho.iter().map(|x| x * x).sum();
        if norm2 < 1e-12 {
            continue;
        }
        let scale = (1.0 - rho * rho).sqrt() / norm2.sqrt();
        for (o, c) in ortho.iter_mut().zip(center) {
            *o = rho * c + scale * *o;
        }
        return ortho;
    }
}

/// Generate the planted-neighbor dataset and its query set.
pub fn planted_clusters(config: &PlantedConfig) -> PlantedData {
    assert!(config.clusters >= 1 && config.per_cluster >= 1 && config.dims >= 2);
    assert!(config.rho_min <= config.rho_max && config.rho_max < 1.0);
    let n = config.clusters * config.per_cluster;
    let nq = config.clusters * config.queries_per_cluster;
    let mut data = Vec::with_capacity(n * config.dims);
    let mut queries = Vec::with_capacity(nq * config.dims);

    for cluster in 0..config.clusters {
        let mut rng = trial_rng(config.seed, cluster as u64);
        let center = random_unit(config.dims, &mut rng);
        for i in 0..config.per_cluster {
            let t = if config.per_cluster == 1 {
                0.0
            } else {
                i as f64 / (config.per_cluster - 1) as f64
            };
            let rho = config.rho_min + t * (config.rho_max - config.rho_min);
            data.extend_from_slice(&perturb(&center, rho, &mut rng));
        }
        for _ in 0..config.queries_per_cluster {
            queries.extend_from_slice(&perturb(&center, config.query_rho, &mut rng));
        }
    }
    PlantedData {
        data: DataMatrix::new(data, n, config.dims),
        queries: DataMatrix::new(queries, nq, config.dims),
    }
}

/// Full re-ranking experiment configuration.
#[derive(Debug, Clone)]
pub struct RetrievalConfig {
    pub planted: PlantedConfig,
    /// Codes per table key (K).
    pub hashes_per_table: usize,
    /// Table counts to evaluate (L).
    pub tables_list: Vec<usize>,
    /// Bin width for table keys (w1).
    pub table_bin_width: f64,
    /// Sketch lengths to evaluate (k).
    pub sketch_sizes: Vec<usize>,
    /// 2-bit threshold for estimation sketches.
    pub sketch_w: f64,
    pub t_values: Vec<usize>,
    pub estimators: Vec<EstimatorKind>,
    pub seed: u64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            planted: PlantedConfig::default(),
            hashes_per_table: 10,
            tables_list: vec![50, 100],
            table_bin_width: 1.5,
            sketch_sizes: vec![100, 200],
            sketch_w: 0.75,
            t_values: vec![10, 20, 50, 100],
            estimators: vec![
                EstimatorKind::OneBit,
                EstimatorKind::TwoBitLinear,
                EstimatorKind::TwoBitMle,
            ],
            seed: 4242,
        }
    }
}

/// Averaged precision-recall rows keyed by the experiment axes.
#[derive(Debug, Clone, Copy)]
pub struct PrRow {
    pub tables: usize,
    pub sketch_k: usize,
    pub t: usize,
    pub estimator: EstimatorKind,
    pub m: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Retrieval statistics of one query under one table count.
#[derive(Debug, Clone, Copy)]
pub struct QueryRetrieval {
    pub tables: usize,
    pub query: usize,
    pub candidates: usize,
    /// Candidates as a fraction of the indexed points.
    pub retrieved_fraction: f64,
}

pub struct RetrievalReport {
    pub rows: Vec<PrRow>,
    pub per_query: Vec<QueryRetrieval>,
    /// Area under the averaged curve per (L, k, T, estimator).
    pub aucs: HashMap<(usize, usize, usize, EstimatorKind), f64>,
}

/// Run the desk-scale protocol: build (K,L) tables over planted-neighbor
/// data, retrieve candidates for every query, re-rank with each estimator at
/// each sketch length, and average precision-recall against brute-force
/// top-T ground truth.
pub fn run_retrieval(
    config: &RetrievalConfig,
    table: &ProbabilityTable,
) -> Result<RetrievalReport, SimulateError> {
    if (table.w() - config.sketch_w).abs() > 1e-12 {
        return Err(SimulateError::InvalidConfig(format!(
            "table built for w = {} but sketches use w = {}",
            table.w(),
            config.sketch_w
        )));
    }
    let max_t = config.t_values.iter().copied().max().unwrap_or(0);
    if max_t == 0 {
        return Err(SimulateError::InvalidConfig("no T values".into()));
    }
    let planted = planted_clusters(&config.planted);
    let data = &planted.data;
    let queries = &planted.queries;
    if max_t >= data.n() {
        return Err(SimulateError::InvalidConfig("T must stay below n".into()));
    }
    let max_k = config.sketch_sizes.iter().copied().max().unwrap();
    let mle = MleConfig::default();

    // Ground truth once, at the largest T; smaller T values are prefixes.
    let truth: Vec<Vec<u32>> = (0..queries.n())
        .into_par_iter()
        .map(|qi| {
            brute_force_top_t(data, queries.row(qi), max_t)
                .into_iter()
                .map(|(id, _)| id)
                .collect()
        })
        .collect();

    // Estimation sketches: one projection set at the largest sketch size;
    // smaller sizes use code prefixes. The sketch stream is independent of
    // the table projections.
    let sketch_seed = config.seed.wrapping_add(0x51E7_C4A9_0000_0001);
    let sketch_spec = ProjectionSpec::new(max_k, data.dims(), sketch_seed);
    let sketch_matrix = projection_matrix(&sketch_spec);
    let encode_sketches = |matrix: &DataMatrix| -> TwoBitSketches {
        let mut projs = vec![0.0; matrix.n() * max_k];
        projs
            .par_chunks_mut(max_k)
            .zip(matrix.as_slice().par_chunks(matrix.dims()))
            .for_each(|(dst, row)| project_row(row, &sketch_matrix, max_k, dst));
        TwoBitSketches::encode(&projs, matrix.n(), max_k, config.sketch_w, sketch_seed)
    };
    let store = encode_sketches(data);
    let query_sketches = encode_sketches(queries);

    let mut rows = Vec::new();
    let mut per_query = Vec::new();
    let mut aucs = HashMap::new();

    for &tables_count in &config.tables_list {
        let index = LshIndex::build(
            data,
            IndexConfig {
                hashes_per_table: config.hashes_per_table,
                tables: tables_count,
                bin_width: config.table_bin_width,
                seed: config.seed,
            },
        )?;

        let candidate_sets: Vec<Vec<u32>> = (0..queries.n())
            .into_par_iter()
            .map(|qi| index.query(queries.row(qi)))
            .collect::<Result<_, _>>()?;

        for (qi, candidates) in candidate_sets.iter().enumerate() {
            per_query.push(QueryRetrieval {
                tables: tables_count,
                query: qi,
                candidates: candidates.len(),
                retrieved_fraction: candidates.len() as f64 / data.n() as f64,
            });
        }
        let max_m = candidate_sets.iter().map(|c| c.len()).max().unwrap_or(0).max(1);

        for &sketch_k in &config.sketch_sizes {
            for &estimator in &config.estimators {
                let rankings: Vec<Vec<u32>> = candidate_sets
                    .par_iter()
                    .enumerate()
                    .map(|(qi, candidates)| {
                        rerank(
                            candidates,
                            &query_sketches,
                            qi,
                            &store,
                            sketch_k,
                            estimator,
                            table,
                            &mle,
                        )
                    })
                    .collect::<Result<_, _>>()?;

                for &t in &config.t_values {
                    let curves: Vec<Vec<PrPoint>> = rankings
                        .par_iter()
                        .zip(truth.par_iter())
                        .map(|(ranked, truth_ids)| precision_recall(ranked, &truth_ids[..t]))
                        .collect();
                    let averaged = average_pr(&curves, max_m);
                    let auc = pr_auc(&averaged);
                    aucs.insert((tables_count, sketch_k, t, estimator), auc);
                    rows.extend(averaged.iter().map(|p| PrRow {
                        tables: tables_count,
                        sketch_k,
                        t,
                        estimator,
                        m: p.m,
                        precision: p.precision,
                        recall: p.recall,
                    }));
                }
            }
        }
    }
    Ok(RetrievalReport { rows, per_query, aucs })
}

/// Sixteen-cell chi-square independence statistic of paired 2-bit codes.
/// Used by simulation checks at rho = 0.
pub fn chi_square_16(table: &[[u64; 4]; 4]) -> f64 {
    let total: u64 = table.iter().flatten().sum();
    let mut row_sums = [0u64; 4];
    let mut col_sums = [0u64; 4];
    for (i, row) in table.iter().enumerate() {
        for (j, &cell) in row.iter().enumerate() {
            row_sums[i] += cell;
            col_sums[j] += cell;
        }
    }
    let mut stat = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &cell) in row.iter().enumerate() {
            let expected = row_sums[i] as f64 * col_sums[j] as f64 / total as f64;
            if expected > 0.0 {
                let diff = cell as f64 - expected;
                stat += diff * diff / expected;
            }
        }
    }
    stat
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::dot;
    use crate::region::{base_region_prob, build_table, BaseRegion};
    use std::sync::OnceLock;

    fn table075() -> &'static ProbabilityTable {
        static TABLE: OnceLock<ProbabilityTable> = OnceLock::new();
        TABLE.get_or_init(|| build_table(0.75, 1e-3).unwrap())
    }

    #[test]
    fn independent_codes_pass_chi_square() {
        // At rho = 0 the 4x4 code table must look independent: the statistic
        // stays under the 9-degree critical value at alpha = 1e-4.
        let w = 0.75;
        let mut rng = trial_rng(7, 0);
        let mut cells = [[0u64; 4]; 4];
        for _ in 0..1_000_000 {
            let (x, y) = sample_pair(0.0, &mut rng);
            cells[encode_2bit(x, w).value() as usize][encode_2bit(y, w).value() as usize] += 1;
        }
        let stat = chi_square_16(&cells);
        assert!(stat < 33.719948438964906, "chi-square {stat}");
    }

    #[test]
    fn near_perfect_correlation_empties_discordant_groups() {
        // At rho = 1 - 1e-8 the discordant regions keep O(sqrt(eps)) mass, so
        // a 1e5-pair trial may leak a handful of counts but no more.
        let counts = two_bit_counts_trial(1.0 - 1e-8, 0.75, 100_000, 3, 0);
        let discordant = counts.adj_opp + counts.diag_outer_neg + counts.diag_inner_neg;
        assert!(discordant <= 20.0, "discordant leakage {discordant}");
        assert!(counts.diagonal() + counts.adj_same >= 100_000.0 - 20.0);
    }

    #[test]
    fn simulated_cell_frequencies_match_region_probabilities() {
        let rho = 0.5;
        let w = 0.75;
        let n = 1_000_000usize;
        let counts = two_bit_counts_trial(rho, w, n, 11, 0);
        let p = |r: BaseRegion, rho: f64| base_region_prob(r, rho, w).unwrap();
        let expect = [
            2.0 * p(BaseRegion::InnerInner, rho),
            4.0 * p(BaseRegion::InnerOuter, rho),
            2.0 * p(BaseRegion::OuterOuter, rho),
            2.0 * p(BaseRegion::InnerInner, -rho),
            4.0 * p(BaseRegion::InnerOuter, -rho),
            2.0 * p(BaseRegion::OuterOuter, -rho),
        ];
        for (got, want) in counts.as_groups().iter().zip(expect.iter()) {
            let freq = got / n as f64;
            let se = (want * (1.0 - want) / n as f64).sqrt();
            assert!((freq - want).abs() < 4.0 * se, "{freq} vs {want}");
        }
    }

    #[test]
    fn synth_pairs_reproducible_and_coded() {
        let a = synth_pairs(0.4, 16, 3, 5, |x, y| (encode_2bit(x, 0.75), encode_2bit(y, 0.75)));
        let b = synth_pairs(0.4, 16, 3, 5, |x, y| (encode_2bit(x, 0.75), encode_2bit(y, 0.75)));
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_eq!(a[0].len(), 16);
    }

    #[test]
    fn mse_sweep_orders_estimators() {
        let config = MseConfig {
            rhos: vec![0.75],
            k: 200,
            trials: 500,
            w: 0.75,
            seed: 99,
            estimators: vec![SimEstimator::OneBit, SimEstimator::Linear, SimEstimator::MleSixCell],
        };
        let rows = run_mse(&config, table075()).unwrap();
        let get = |e: SimEstimator| {
            rows.iter().find(|r| r.estimator == e).map(|r| r.empirical_mse).unwrap()
        };
        let mle = get(SimEstimator::MleSixCell);
        let linear = get(SimEstimator::Linear);
        let one = get(SimEstimator::OneBit);
        assert!(mle < linear && linear < one, "mse ordering violated: {mle} {linear} {one}");
    }

    #[test]
    fn mse_sweep_rejects_zero_trials() {
        let config = MseConfig {
            rhos: vec![0.5],
            k: 10,
            trials: 0,
            w: 0.75,
            seed: 1,
            estimators: vec![SimEstimator::OneBit],
        };
        assert!(matches!(run_mse(&config, table075()), Err(SimulateError::InvalidConfig(_))));
    }

    #[test]
    fn planted_clusters_have_exact_similarities() {
        let config = PlantedConfig {
            clusters: 3,
            per_cluster: 5,
            dims: 32,
            rho_min: 0.6,
            rho_max: 0.9,
            queries_per_cluster: 2,
            query_rho: 0.95,
            seed: 12,
        };
        let planted = planted_clusters(&config);
        assert_eq!(planted.data.n(), 15);
        assert_eq!(planted.queries.n(), 6);
        for row in planted.data.rows() {
            let norm: f64 = row.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-9);
        }
        // First and last point of a cluster sit at the ladder ends.
        for cluster in 0..3 {
            let mut rng = trial_rng(config.seed, cluster as u64);
            let center = random_unit(config.dims, &mut rng);
            let first = planted.data.row(cluster * 5);
            let last = planted.data.row(cluster * 5 + 4);
            assert!((dot(first, &center) - 0.6).abs() < 1e-9);
            assert!((dot(last, &center) - 0.9).abs() < 1e-9);
        }
    }

    #[test]
    fn retrieval_report_smoke() {
        let config = RetrievalConfig {
            planted: PlantedConfig {
                clusters: 10,
                per_cluster: 20,
                dims: 32,
                rho_min: 0.6,
                rho_max: 0.98,
                queries_per_cluster: 2,
                query_rho: 0.95,
                seed: 5,
            },
            hashes_per_table: 6,
            tables_list: vec![20],
            table_bin_width: 1.5,
            sketch_sizes: vec![100],
            sketch_w: 0.75,
            t_values: vec![5, 10],
            estimators: vec![EstimatorKind::OneBit, EstimatorKind::TwoBitMle],
            seed: 31,
        };
        let report = run_retrieval(&config, table075()).unwrap();
        assert_eq!(report.per_query.len(), 20);
        assert_eq!(report.aucs.len(), 4);
        for (&(_, _, _, _), &auc) in &report.aucs {
            assert!(auc.is_finite() && auc >= 0.0 && auc <= 1.0);
        }
        let mle = report.aucs[&(20, 100, 10, EstimatorKind::TwoBitMle)];
        let one = report.aucs[&(20, 100, 10, EstimatorKind::OneBit)];
        assert!(mle >= one, "MLE AUC {mle} below 1-bit AUC {one}");
    }
}
