//! Command-line surface: table construction, theoretical curves, simulation
//! sweeps, index building and the desk-scale re-ranking experiment.
//!
//! Exit codes: 0 success, 1 validation error (bad flags or configuration),
//! 2 runtime failure. Every command that consumes randomness takes a
//! `--seed`; fixed seeds give byte-identical CSV output.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rpsketch::collision::{gap, GapQuery, Scheme};
use rpsketch::dataset::{load_dataset, DataFormat, DatasetSpec};
use rpsketch::estimate::{estimate_pairs_batch, g_function, CellMode, EstimatorKind, MleConfig};
use rpsketch::lsh::{IndexConfig, LshIndex};
use rpsketch::region::{build_table, ProbabilityTable};
use rpsketch::simulate::{
    run_mse, run_retrieval, MseConfig, PlantedConfig, RetrievalConfig, SimEstimator,
};
use rpsketch::TwoBitSketches;

/// Environment variable naming a directory where built probability tables
/// are cached and reused across runs.
const TABLE_CACHE_ENV: &str = "RPSKETCH_TABLE_CACHE";

#[derive(Parser)]
#[command(name = "rpsketch", version, about = "2-bit random projection sketches, estimators and LSH experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Precompute region probabilities and derivatives for a threshold.
    Tabulate(TabulateArgs),
    /// Emit the variance-ratio curve g(w) over a width grid.
    GCurve(GCurveArgs),
    /// Monte Carlo MSE of the estimators against asymptotic variances.
    SimulateMse(SimulateMseArgs),
    /// Collision probabilities and LSH gaps over (rho0, c, w) grids.
    GapCurves(GapCurvesArgs),
    /// Build a (K,L) hash table index over a dataset file.
    BuildIndex(BuildIndexArgs),
    /// Retrieve candidate ids for query points from a saved index.
    Query(QueryArgs),
    /// Desk-scale planted-neighbor retrieval and re-ranking experiment.
    RerankEval(RerankEvalArgs),
    /// Estimate similarities for row-aligned pairs of two sketch files.
    EstimateBatch(EstimateBatchArgs),
}

#[derive(Args)]
struct TabulateArgs {
    /// 2-bit threshold w.
    #[arg(long)]
    w: f64,
    /// Base grid step in rho (at most 0.01).
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Output path for the binary table; a JSON sidecar lands next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GCurveArgs {
    /// Width grid: "lin:<lo>:<hi>:<step>", "geom:<lo>:<hi>:<count>" or a
    /// comma list.
    #[arg(long, default_value = "lin:0.3:3.0:0.0001")]
    w_grid: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateMseArgs {
    /// Comma list of true correlations.
    #[arg(long)]
    rho_grid: String,
    /// Projections per estimate.
    #[arg(long)]
    k: usize,
    /// Monte Carlo trials per correlation.
    #[arg(long)]
    trials: usize,
    /// 2-bit threshold.
    #[arg(long, default_value_t = 0.75)]
    w: f64,
    /// Comma list of estimators: 1bit, 2bit-linear, mle, mle-5cell.
    #[arg(long, default_value = "1bit,2bit-linear,mle")]
    estimators: String,
    /// Probability table file; built (or pulled from the cache) when absent.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GapCurvesArgs {
    /// Comma list of target similarities rho0.
    #[arg(long)]
    rho0: String,
    /// Scheme: uniform, offset or both.
    #[arg(long, default_value = "both")]
    scheme: String,
    /// Width grid (same syntax as g-curve).
    #[arg(long, default_value = "geom:0.25:5.0:200")]
    w_grid: String,
    /// Comma list of approximation factors c; pairs (rho0, c) beyond the
    /// admissible bound c <= sqrt(1/(1-rho0)) are skipped.
    #[arg(long)]
    c_grid: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// Input file path.
    #[arg(long)]
    data: PathBuf,
    /// File format: csv or raw-f32.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Number of rows.
    #[arg(long)]
    n: usize,
    /// Row dimensionality.
    #[arg(long)]
    dims: usize,
    /// Scale rows to unit l2 norm after loading.
    #[arg(long, default_value_t = true)]
    normalize: bool,
}

#[derive(Args)]
struct BuildIndexArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Codes per table key (K).
    #[arg(long, default_value_t = 10)]
    k_per_table: usize,
    /// Number of tables (L).
    #[arg(long, default_value_t = 50)]
    tables: usize,
    /// Table quantizer bin width (w1).
    #[arg(long, default_value_t = 1.5)]
    w1: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    /// Saved index file.
    #[arg(long)]
    index: PathBuf,
    /// Query points file.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    dims: usize,
    #[arg(long, default_value_t = true)]
    normalize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RerankEvalArgs {
    #[arg(long, default_value_t = 50)]
    clusters: usize,
    #[arg(long, default_value_t = 200)]
    per_cluster: usize,
    #[arg(long, default_value_t = 128)]
    dims: usize,
    #[arg(long, default_value_t = 0.6)]
    rho_min: f64,
    #[arg(long, default_value_t = 0.98)]
    rho_max: f64,
    #[arg(long, default_value_t = 10)]
    queries_per_cluster: usize,
    #[arg(long, default_value_t = 0.95)]
    query_rho: f64,
    #[arg(long, default_value_t = 10)]
    k_per_table: usize,
    /// Comma list of table counts L.
    #[arg(long, default_value = "50,100")]
    tables: String,
    #[arg(long, default_value_t = 1.5)]
    w1: f64,
    /// Comma list of sketch lengths k.
    #[arg(long, default_value = "100,200")]
    sketch_k: String,
    #[arg(long, default_value_t = 0.75)]
    sketch_w: f64,
    /// Comma list of ground-truth sizes T.
    #[arg(long, default_value = "10,20,50,100")]
    t: String,
    /// Comma list of estimators: 1bit, 2bit-linear, mle.
    #[arg(long, default_value = "1bit,2bit-linear,mle")]
    estimators: String,
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = 4242)]
    seed: u64,
    /// Main precision-recall CSV; per-query retrieval statistics land in
    /// "<out>.retrieval.csv".
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateBatchArgs {
    /// Sketch file of query points.
    #[arg(long)]
    queries: PathBuf,
    /// Sketch file of candidate points (row-aligned with the queries).
    #[arg(long)]
    candidates: PathBuf,
    /// Estimator: 1bit, 2bit-linear or mle.
    #[arg(long, default_value = "mle")]
    estimator: String,
    /// MLE cell mode: six or five.
    #[arg(long, default_value = "six")]
    mode: String,
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn validation(msg: impl Display) -> Self {
        CliError::Validation(msg.to_string())
    }

    fn runtime(msg: impl Display) -> Self {
        CliError::Runtime(msg.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Tabulate(args) => cmd_tabulate(args),
        Command::GCurve(args) => cmd_g_curve(args),
        Command::SimulateMse(args) => cmd_simulate_mse(args),
        Command::GapCurves(args) => cmd_gap_curves(args),
        Command::BuildIndex(args) => cmd_build_index(args),
        Command::Query(args) => cmd_query(args),
        Command::RerankEval(args) => cmd_rerank_eval(args),
        Command::EstimateBatch(args) => cmd_estimate_batch(args),
    }
}

fn parse_comma_f64(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse()).collect();
    match values {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(CliError::validation(format!("cannot parse {what} list {text:?}"))),
    }
}

fn parse_comma_usize(text: &str, what: &str) -> Result<Vec<usize>, CliError> {
    let values: Result<Vec<usize>, _> = text.split(',').map(|s| s.trim().parse()).collect();
    match values {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(CliError::validation(format!("cannot parse {what} list {text:?}"))),
    }
}

/// Grid syntax: "lin:<lo>:<hi>:<step>", "geom:<lo>:<hi>:<count>", or a
/// comma-separated list of values.
fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |msg: &str| CliError::validation(format!("bad grid {text:?}: {msg}"));
    if let Some(rest) = text.strip_prefix("lin:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected lin:<lo>:<hi>:<step>"));
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad("lo"))?;
        let hi: f64 = parts[1].parse().map_err(|_| bad("hi"))?;
        let step: f64 = parts[2].parse().map_err(|_| bad("step"))?;
        if !(step > 0.0) || hi < lo {
            return Err(bad("need hi >= lo and step > 0"));
        }
        let count = ((hi - lo) / step).round() as usize + 1;
        return Ok((0..count).map(|i| lo + step * i as f64).filter(|&x| x <= hi + step * 0.5).collect());
    }
    if let Some(rest) = text.strip_prefix("geom:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected geom:<lo>:<hi>:<count>"));
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad("lo"))?;
        let hi: f64 = parts[1].parse().map_err(|_| bad("hi"))?;
        let count: usize = parts[2].parse().map_err(|_| bad("count"))?;
        if !(lo > 0.0) || hi <= lo || count < 2 {
            return Err(bad("need 0 < lo < hi and count >= 2"));
        }
        return Ok(rpsketch::collision::geometric_grid(lo, hi, count));
    }
    parse_comma_f64(text, "grid")
}

fn parse_format(text: &str) -> Result<DataFormat, CliError> {
    match text {
        "csv" => Ok(DataFormat::Csv),
        "raw-f32" | "raw_f32" => Ok(DataFormat::RawF32),
        other => Err(CliError::validation(format!("unknown data format {other:?}"))),
    }
}

fn parse_estimator(text: &str) -> Result<EstimatorKind, CliError> {
    match text {
        "1bit" | "one-bit" => Ok(EstimatorKind::OneBit),
        "2bit-linear" | "linear" => Ok(EstimatorKind::TwoBitLinear),
        "mle" => Ok(EstimatorKind::TwoBitMle),
        other => Err(CliError::validation(format!("unknown estimator {other:?}"))),
    }
}

fn csv_writer(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", path.display())))
}

fn write_line(out: &mut BufWriter<File>, line: &str) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::runtime(e))
}

/// Load, fetch from the cache directory, or build the probability table for
/// a threshold.
fn obtain_table(explicit: Option<&Path>, w: f64, step: f64) -> Result<ProbabilityTable, CliError> {
    if let Some(path) = explicit {
        let table = ProbabilityTable::load(path)
            .map_err(|e| CliError::runtime(format!("loading table {}: {e}", path.display())))?;
        if (table.w() - w).abs() > 1e-12 {
            return Err(CliError::validation(format!(
                "table {} was built for w = {}, expected {w}",
                path.display(),
                table.w()
            )));
        }
        return Ok(table);
    }
    if let Ok(dir) = std::env::var(TABLE_CACHE_ENV) {
        let path = Path::new(&dir).join(format!("rpsketch_table_w{w}_s{step}.bin"));
        if path.exists() {
            if let Ok(table) = ProbabilityTable::load(&path) {
                if (table.w() - w).abs() <= 1e-12 {
                    return Ok(table);
                }
            }
        }
        let table = build_table(w, step).map_err(|e| CliError::runtime(e))?;
        std::fs::create_dir_all(&dir).map_err(|e| CliError::runtime(e))?;
        table.save(&path).map_err(|e| CliError::runtime(e))?;
        return Ok(table);
    }
    build_table(w, step).map_err(|e| CliError::runtime(e))
}

fn cmd_tabulate(args: TabulateArgs) -> Result<(), CliError> {
    if !(args.w > 0.0) {
        return Err(CliError::validation("w must be positive"));
    }
    if !(args.step > 0.0 && args.step <= 0.01) {
        return Err(CliError::validation("step must be in (0, 0.01]"));
    }
    let table = build_table(args.w, args.step).map_err(|e| CliError::runtime(e))?;
    table.save(&args.out).map_err(|e| CliError::runtime(e))?;
    eprintln!("wrote {} nodes to {}", table.len(), args.out.display());
    Ok(())
}

fn cmd_g_curve(args: GCurveArgs) -> Result<(), CliError> {
    let grid = parse_grid(&args.w_grid)?;
    if grid.iter().any(|&w| w <= 0.0) {
        return Err(CliError::validation("g-curve widths must be positive"));
    }
    let mut out = csv_writer(&args.out)?;
    write_line(&mut out, "# rpsketch-csv g-curve v1")?;
    write_line(&mut out, "w,g,g_squared")?;
    for &w in &grid {
        let g = g_function(w);
        write_line(&mut out, &format!("{w},{g},{}", g * g))?;
    }
    out.flush().map_err(|e| CliError::runtime(e))?;
    Ok(())
}

fn cmd_simulate_mse(args: SimulateMseArgs) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(CliError::validation("trials must be positive"));
    }
    if args.k == 0 {
        return Err(CliError::validation("k must be positive"));
    }
    let rhos = parse_comma_f64(&args.rho_grid, "rho")?;
    if rhos.iter().any(|r| r.abs() >= 1.0) {
        return Err(CliError::validation("correlations must satisfy |rho| < 1"));
    }
    let estimators: Result<Vec<SimEstimator>, _> = args
        .estimators
        .split(',')
        .map(|s| {
            SimEstimator::parse(s.trim())
                .ok_or_else(|| CliError::validation(format!("unknown estimator {s:?}")))
        })
        .collect();
    let estimators = estimators?;
    let table = obtain_table(args.table.as_deref(), args.w, 1e-3)?;
    let config = MseConfig {
        rhos,
        k: args.k,
        trials: args.trials,
        w: args.w,
        seed: args.seed,
        estimators,
    };
    let rows = run_mse(&config, &table).map_err(|e| CliError::runtime(e))?;
    let mut out = csv_writer(&args.out)?;
    write_line(&mut out, "# rpsketch-csv simulate-mse v1")?;
    write_line(&mut out, "rho,estimator,empirical_mse,fisher_predicted_var")?;
    for row in rows {
        write_line(
            &mut out,
            &format!(
                "{},{},{},{}",
                row.rho,
                row.estimator.label(),
                row.empirical_mse,
                row.predicted_variance
            ),
        )?;
    }
    out.flush().map_err(|e| CliError::runtime(e))?;
    Ok(())
}

fn cmd_gap_curves(args: GapCurvesArgs) -> Result<(), CliError> {
    let rho0s = parse_comma_f64(&args.rho0, "rho0")?;
    let cs = parse_comma_f64(&args.c_grid, "c")?;
    let ws = parse_grid(&args.w_grid)?;
    let schemes: Vec<Scheme> = match args.scheme.as_str() {
        "uniform" => vec![Scheme::Uniform],
        "offset" => vec![Scheme::Offset],
        "both" => vec![Scheme::Uniform, Scheme::Offset],
        other => return Err(CliError::validation(format!("unknown scheme {other:?}"))),
    };
    if rho0s.iter().any(|r| !(0.0..1.0).contains(r)) {
        return Err(CliError::validation("rho0 values must lie in [0, 1)"));
    }
    if cs.iter().any(|&c| c <= 1.0) {
        return Err(CliError::validation("approximation factors must exceed 1"));
    }

    let mut out = csv_writer(&args.out)?;
    write_line(&mut out, "# rpsketch-csv gap-curves v1")?;
    write_line(&mut out, "rho0,c,w,scheme,p1,p2,gap")?;
    for &rho0 in &rho0s {
        for &c in &cs {
            let Ok(_) = GapQuery::new(rho0, c, 1.0) else {
                continue; // inadmissible (rho0, c) pair, skip
            };
            for &w in &ws {
                let query = GapQuery::new(rho0, c, w).map_err(|e| CliError::validation(e))?;
                for &scheme in &schemes {
                    let profile = gap(&query, scheme).map_err(|e| CliError::runtime(e))?;
                    write_line(
                        &mut out,
                        &format!(
                            "{rho0},{c},{w},{},{},{},{}",
                            scheme.label(),
                            profile.p1,
                            profile.p2,
                            profile.gap
                        ),
                    )?;
                }
            }
        }
    }
    out.flush().map_err(|e| CliError::runtime(e))?;
    Ok(())
}

fn load_data(args: &DataArgs) -> Result<rpsketch::DataMatrix, CliError> {
    let spec = DatasetSpec {
        path: args.data.clone(),
        format: parse_format(&args.format)?,
        n: args.n,
        dims: args.dims,
        normalize: args.normalize,
    };
    load_dataset(&spec).map_err(|e| CliError::runtime(e))
}

fn cmd_build_index(args: BuildIndexArgs) -> Result<(), CliError> {
    if args.k_per_table == 0 || args.tables == 0 || !(args.w1 > 0.0) {
        return Err(CliError::validation("need K >= 1, L >= 1 and w1 > 0"));
    }
    let data = load_data(&args.data)?;
    let config = IndexConfig {
        hashes_per_table: args.k_per_table,
        tables: args.tables,
        bin_width: args.w1,
        seed: args.seed,
    };
    let index = LshIndex::build(&data, config).map_err(|e| CliError::runtime(e))?;
    index.save(&args.out).map_err(|e| CliError::runtime(e))?;
    eprintln!("indexed {} points into {} tables", index.n(), args.tables);
    Ok(())
}

fn cmd_query(args: QueryArgs) -> Result<(), CliError> {
    let index = LshIndex::load(&args.index).map_err(|e| CliError::runtime(e))?;
    let spec = DatasetSpec {
        path: args.queries.clone(),
        format: parse_format(&args.format)?,
        n: args.n,
        dims: args.dims,
        normalize: args.normalize,
    };
    let queries = load_dataset(&spec).map_err(|e| CliError::runtime(e))?;
    let mut out = csv_writer(&args.out)?;
    write_line(&mut out, "# rpsketch-csv query v1")?;
    write_line(&mut out, "query_id,candidate_id")?;
    for qi in 0..queries.n() {
        let candidates = index.query(queries.row(qi)).map_err(|e| CliError::runtime(e))?;
        for id in candidates {
            write_line(&mut out, &format!("{qi},{id}"))?;
        }
    }
    out.flush().map_err(|e| CliError::runtime(e))?;
    Ok(())
}

fn cmd_rerank_eval(args: RerankEvalArgs) -> Result<(), CliError> {
    if args.clusters == 0 || args.per_cluster == 0 {
        return Err(CliError::validation("need at least one cluster and one point"));
    }
    if !(args.rho_min <= args.rho_max && args.rho_max < 1.0) {
        return Err(CliError::validation("need rho_min <= rho_max < 1"));
    }
    let tables_list = parse_comma_usize(&args.tables, "tables")?;
    let sketch_sizes = parse_comma_usize(&args.sketch_k, "sketch-k")?;
    let t_values = parse_comma_usize(&args.t, "T")?;
    let estimators: Result<Vec<EstimatorKind>, _> =
        args.estimators.split(',').map(|s| parse_estimator(s.trim())).collect();
    let estimators = estimators?;
    let n = args.clusters * args.per_cluster;
    if t_values.iter().any(|&t| t == 0 || t >= n) {
        return Err(CliError::validation("T values must satisfy 1 <= T < n"));
    }

    let table = obtain_table(args.table.as_deref(), args.sketch_w, 1e-3)?;
    let config = RetrievalConfig {
        planted: PlantedConfig {
            clusters: args.clusters,
            per_cluster: args.per_cluster,
            dims: args.dims,
            rho_min: args.rho_min,
            rho_max: args.rho_max,
            queries_per_cluster: args.queries_per_cluster,
            query_rho: args.query_rho,
            seed: args.seed ^ 0x5EED_DA7A,
        },
        hashes_per_table: args.k_per_table,
        tables_list,
        table_bin_width: args.w1,
        sketch_sizes,
        sketch_w: args.sketch_w,
        t_values,
        estimators,
        seed: args.seed,
    };
    let report = run_retrieval(&config, &table).map_err(|e| CliError::runtime(e))?;

    let mut out = csv_writer(&args.out)?;
    write_line(&mut out, "# rpsketch-csv rerank-eval v1")?;
    write_line(&mut out, "T,m,precision,recall,estimator,L,k")?;
    for row in &report.rows {
        write_line(
            &mut out,
            &format!(
                "{},{},{},{},{},{},{}",
                row.t,
                row.m,
                row.precision,
                row.recall,
                row.estimator.label(),
                row.tables,
                row.sketch_k
            ),
        )?;
    }
    out.flush().map_err(|e| CliError::runtime(e))?;

    let mut retrieval_path = args.out.as_os_str().to_os_string();
    retrieval_path.push(".retrieval.csv");
    let retrieval_path = PathBuf::from(retrieval_path);
    let mut rout = csv_writer(&retrieval_path)?;
    write_line(&mut rout, "# rpsketch-csv rerank-eval-retrieval v1")?;
    write_line(&mut rout, "L,query_id,candidates,retrieved_fraction")?;
    for stat in &report.per_query {
        write_line(
            &mut rout,
            &format!(
                "{},{},{},{}",
                stat.tables, stat.query, stat.candidates, stat.retrieved_fraction
            ),
        )?;
    }
    rout.flush().map_err(|e| CliError::runtime(e))?;

    for ((l, k, t, est), auc) in {
        let mut entries: Vec<_> = report.aucs.iter().collect();
        entries.sort_by(|a, b| a.0 .0.cmp(&b.0 .0).then(a.0 .1.cmp(&b.0 .1)).then(a.0 .2.cmp(&b.0 .2)).then(a.0 .3.label().cmp(b.0 .3.label())));
        entries
    } {
        eprintln!("AUC L={l} k={k} T={t} {}: {auc:.4}", est.label());
    }
    Ok(())
}

fn cmd_estimate_batch(args: EstimateBatchArgs) -> Result<(), CliError> {
    let estimator = parse_estimator(&args.estimator)?;
    let mode = match args.mode.as_str() {
        "six" | "six-cell" => CellMode::SixCell,
        "five" | "five-cell" => CellMode::FiveCell,
        other => return Err(CliError::validation(format!("unknown cell mode {other:?}"))),
    };
    let queries = TwoBitSketches::load(&args.queries).map_err(|e| CliError::runtime(e))?;
    let candidates = TwoBitSketches::load(&args.candidates).map_err(|e| CliError::runtime(e))?;
    let table = obtain_table(args.table.as_deref(), queries.w(), 1e-3)?;
    let config = MleConfig { mode, ..Default::default() };
    let rows = estimate_pairs_batch(&queries, &candidates, estimator, &table, &config)
        .map_err(|e| CliError::runtime(e))?;
    let mut out = csv_writer(&args.out)?;
    write_line(&mut out, "# rpsketch-csv estimate-batch v1")?;
    write_line(&mut out, "pair_id,estimator,rho_hat,predicted_std")?;
    for row in rows {
        write_line(
            &mut out,
            &format!("{},{},{},{}", row.pair_id, estimator.label(), row.rho_hat, row.predicted_std),
        )?;
    }
    out.flush().map_err(|e| CliError::runtime(e))?;
    Ok(())
}
