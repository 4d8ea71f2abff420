use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use simjoin::engine::{read_pairs_tsv, write_pairs_tsv, RoundTimings};
use simjoin::matrix::ingest_edge_list_with;
use simjoin::oracle::{
    default_sigma_grid, disco_shuffle_estimate, exact_products, lsh_storage_estimate, pr_curve, precision_recall,
    read_truth_tsv, stratified_sample, write_curve_csv, write_histogram_csv, write_truth_tsv, DEFAULT_BYTES_PER_WEDGE,
    TERABYTE,
};
use simjoin::{
    build_column_matrix, clean_degree_cap_stream, run_join, EdgeFormat, IdDictionary, JoinConfig, Orientation,
    SparseColumnMatrix,
};

#[derive(Parser)]
#[command(name = "simjoin", version, about = "All-pairs cosine similarity join for sparse graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Drop every out-edge of vertices whose outdegree exceeds the cap.
    Clean(CleanArgs),
    /// Run the join and write pairs, cost report and manifest.
    Run(RunArgs),
    /// Exact ground truth for a stratified sample of columns.
    Oracle(OracleArgs),
    /// Precision and recall of a join output against ground truth.
    Eval(EvalArgs),
    /// Closed-form cost estimates for the baselines.
    Estimate(EstimateArgs),
}

#[derive(Args)]
struct CleanArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, env = "SIMJOIN_DEGREE_CAP", default_value_t = 10_000)]
    cap: usize,
    /// Edges carry a third weight column.
    #[arg(long)]
    weighted: bool,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OrientationArg {
    /// Columns are in-neighborhoods (followers).
    In,
    /// Columns are out-neighborhoods.
    Out,
}

impl From<OrientationArg> for Orientation {
    fn from(o: OrientationArg) -> Self {
        match o {
            OrientationArg::In => Orientation::InNeighborhood,
            OrientationArg::Out => Orientation::OutNeighborhood,
        }
    }
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list `src<TAB>dst[<TAB>weight]` for A.
    #[arg(long)]
    edges: PathBuf,
    /// Edge list for B; omitted means a self-join of A.
    #[arg(long)]
    right: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OrientationArg::In)]
    orientation: OrientationArg,
    #[arg(long)]
    weighted: bool,
    #[arg(long, env = "SIMJOIN_WORKERS", default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    tau: f64,
    /// Sketch length in bits.
    #[arg(long, conflicts_with = "theory_c")]
    ell: Option<usize>,
    /// Oversampling factor.
    #[arg(long, conflicts_with = "theory_c", allow_negative_numbers = true)]
    s: Option<f64>,
    /// Filter threshold on the sketch estimate; defaults to tau.
    #[arg(long, conflicts_with = "theory_c", allow_negative_numbers = true)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Join A with itself (the default when --right is absent).
    #[arg(long, conflicts_with = "right")]
    self_join: bool,
    /// Derive ell, s and sigma from this constant and the column count.
    #[arg(long, allow_negative_numbers = true)]
    theory_c: Option<f64>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Ground-truth TSV to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    per_bucket: usize,
    #[arg(long)]
    tau_min: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// Pairs TSV from `run`.
    #[arg(long)]
    output: PathBuf,
    /// Ground-truth TSV from `oracle`.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    tau: f64,
    /// Also write the precision-recall curve over sigma.
    #[arg(long)]
    curve: bool,
    /// Directory for summary.txt, histogram.csv and curve.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Disco,
    Lsh,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// L1 norm of the Gramian (disco).
    #[arg(long)]
    atb_l1: Option<f64>,
    #[arg(long)]
    tau: f64,
    /// Number of vectors (lsh).
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, default_value_t = 50.0)]
    wedges_per_unit: f64,
    #[arg(long, default_value_t = DEFAULT_BYTES_PER_WEDGE)]
    bytes_per_wedge: u64,
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Io(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Io(_) => 3,
            Failure::Internal(_) => 4,
        }
    }
}

impl From<simjoin::Error> for Failure {
    fn from(e: simjoin::Error) -> Self {
        match e {
            simjoin::Error::Io(_) => Failure::Io(e.to_string()),
            simjoin::Error::Inconsistent(_) => Failure::Internal(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temp file in the target directory, then renames.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> CliResult<()>) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    let mut w = BufWriter::new(tmp);
    body(&mut w)?;
    let tmp = w.into_inner().map_err(|e| Failure::Io(format!("{}: {}", path.display(), e.error())))?;
    tmp.persist(path).map_err(|e| Failure::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    write_atomic(path, |w| w.write_all(bytes).map_err(io_err(path)))
}

fn format_of(weighted: bool) -> EdgeFormat {
    if weighted {
        EdgeFormat::WeightedTriple
    } else {
        EdgeFormat::Pair
    }
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

struct LoadedGraphs {
    ids: IdDictionary,
    a: SparseColumnMatrix,
    b: Option<SparseColumnMatrix>,
    inputs: Vec<InputDigest>,
}

/// Reads A (and B) over one shared vertex dictionary so both matrices have
/// the same rows.
fn load_graphs(args: &GraphArgs) -> CliResult<LoadedGraphs> {
    let fmt = format_of(args.weighted);
    let mut inputs = Vec::new();
    let mut read = |path: &Path, ids: IdDictionary| -> CliResult<_> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        inputs.push(InputDigest { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        ingest_edge_list_with(bytes.as_slice(), fmt, ids)
            .map_err(|e| Failure::from(e).with_context(path))
    };
    let mut ga = read(&args.edges, IdDictionary::new())?;
    let gb = match &args.right {
        Some(p) => {
            let gb = read(p, ga.ids.clone())?;
            ga.ids = gb.ids.clone();
            Some(gb)
        }
        None => None,
    };
    let orient = args.orientation.into();
    let a = build_column_matrix(&ga, orient);
    let b = gb.as_ref().map(|g| build_column_matrix(g, orient));
    Ok(LoadedGraphs { ids: ga.ids, a, b, inputs })
}

impl Failure {
    fn with_context(self, path: &Path) -> Self {
        let p = path.display();
        match self {
            Failure::Validation(m) => Failure::Validation(format!("{p}: {m}")),
            Failure::Io(m) => Failure::Io(format!("{p}: {m}")),
            Failure::Internal(m) => Failure::Internal(format!("{p}: {m}")),
        }
    }
}

fn cmd_clean(args: CleanArgs) -> CliResult<()> {
    let open = || File::open(&args.input).map(BufReader::new).map_err(io_err(&args.input));
    let (first, second) = (open()?, open()?);
    let mut stats = None;
    write_atomic(&args.output, |w| {
        stats = Some(
            clean_degree_cap_stream(first, second, w, format_of(args.weighted), args.cap)
                .map_err(|e| Failure::from(e).with_context(&args.input))?,
        );
        Ok(())
    })?;
    if let Some(s) = stats {
        eprintln!(
            "edges_in={} edges_out={} capped_vertices={} dropped_zero_weight={}",
            s.edges_in, s.edges_out, s.capped_vertices, s.dropped_zero_weight
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct ConfigEcho {
    tau: f64,
    sketch_len: usize,
    oversample: f64,
    sigma: f64,
    seed: u64,
    self_join: bool,
    theory_c: Option<f64>,
    workers: usize,
    orientation: OrientationArg,
    weighted: bool,
}

#[derive(Serialize)]
struct TimingsMs {
    load: f64,
    sketch: f64,
    samplers: f64,
    candidates: f64,
    dedup: f64,
}

#[derive(Serialize)]
struct MatrixShape {
    rows: usize,
    cols_a: usize,
    cols_b: usize,
    nnz_a: usize,
    nnz_b: usize,
}

#[derive(Serialize)]
struct RunManifest {
    config: ConfigEcho,
    inputs: Vec<InputDigest>,
    seed: u64,
    shape: MatrixShape,
    timings_ms: TimingsMs,
    cost: serde_json::Map<String, serde_json::Value>,
    candidate_output_ratio: Option<f64>,
    pairs: usize,
    output_sha256: String,
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn cmd_run(args: RunArgs) -> CliResult<()> {
    let t = Instant::now();
    let g = load_graphs(&args.graph)?;
    let load = t.elapsed();
    let b = g.b.as_ref().unwrap_or(&g.a);
    let self_join = args.self_join || g.b.is_none();

    let mut cfg = JoinConfig::new(args.tau);
    if let Some(c) = args.theory_c {
        cfg = cfg.with_theory(c, g.a.n_cols().max(b.n_cols()));
    }
    cfg.sketch_len = args.ell.unwrap_or(cfg.sketch_len);
    cfg.oversample = args.s.unwrap_or(cfg.oversample);
    cfg.sigma = args.sigma.unwrap_or(cfg.sigma);
    cfg.seed = args.seed;
    cfg.self_join = self_join;
    cfg.workers = args.graph.workers;
    cfg.validate()?;

    let out = run_join(&g.a, b, &cfg)?;
    let mut pairs = Vec::new();
    write_pairs_tsv(&mut pairs, &out.pairs, &g.ids, &g.ids)?;
    let mut ids = Vec::new();
    g.ids.write_tsv(&mut ids)?;

    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    write_bytes_atomic(&args.out.join("pairs.tsv"), &pairs)?;
    write_bytes_atomic(&args.out.join("ids.tsv"), &ids)?;
    write_bytes_atomic(&args.out.join("cost.txt"), out.cost.to_kv().as_bytes())?;
    write_bytes_atomic(&args.out.join("cost.tsv"), out.cost.to_tsv().as_bytes())?;

    let RoundTimings { sketch, samplers, candidates, dedup } = out.timings;
    let manifest = RunManifest {
        config: ConfigEcho {
            tau: cfg.tau,
            sketch_len: cfg.sketch_len,
            oversample: cfg.oversample,
            sigma: cfg.sigma,
            seed: cfg.seed,
            self_join: cfg.self_join,
            theory_c: cfg.theory_c,
            workers: cfg.workers,
            orientation: args.graph.orientation,
            weighted: args.graph.weighted,
        },
        inputs: g.inputs,
        seed: cfg.seed,
        shape: MatrixShape { rows: g.a.n_rows(), cols_a: g.a.n_cols(), cols_b: b.n_cols(), nnz_a: g.a.nnz(), nnz_b: b.nnz() },
        timings_ms: TimingsMs {
            load: ms(load),
            sketch: ms(sketch),
            samplers: ms(samplers),
            candidates: ms(candidates),
            dedup: ms(dedup),
        },
        cost: out.cost.fields().iter().map(|&(k, v)| (k.to_string(), v.into())).collect(),
        candidate_output_ratio: out.cost.candidate_output_ratio(),
        pairs: out.pairs.len(),
        output_sha256: sha256_hex(&pairs),
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Failure::Internal(e.to_string()))?;
    write_bytes_atomic(&args.out.join("manifest.json"), &json)?;
    println!("pairs={} output_sha256={}", out.pairs.len(), manifest.output_sha256);
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> CliResult<()> {
    let g = load_graphs(&args.graph)?;
    let b = g.b.as_ref().unwrap_or(&g.a);
    let sample = stratified_sample(b, args.per_bucket, args.seed)?;
    let pool = rayon_pool(args.graph.workers)?;
    let truth = pool.install(|| exact_products(&g.a, b, &sample, args.tau_min, g.b.is_none()))?;
    write_atomic(&args.out, |w| Ok(write_truth_tsv(w, &truth, &g.ids, &g.ids)?))?;
    println!("sampled={} pairs={}", truth.sample.len(), truth.num_pairs());
    Ok(())
}

fn rayon_pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Failure::Validation("workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| Failure::Internal(e.to_string()))
}

fn cmd_eval(args: EvalArgs) -> CliResult<()> {
    let mut ids = IdDictionary::new();
    let open = |p: &Path| File::open(p).map(BufReader::new).map_err(io_err(p));
    let truth = read_truth_tsv(open(&args.truth)?, &mut ids).map_err(|e| Failure::from(e).with_context(&args.truth))?;
    let output = read_pairs_tsv(open(&args.output)?, &mut ids).map_err(|e| Failure::from(e).with_context(&args.output))?;
    let report = precision_recall(&output, &truth, args.tau)?;

    let summary = format!(
        "tau={}\nprecision={}\nrecall={}\noutput_pairs={}\ntruth_pairs={}\nhits={}\nempty_output={}\nempty_truth={}\n",
        report.tau,
        report.precision,
        report.recall,
        report.output_pairs,
        report.truth_pairs,
        report.hits,
        report.empty_output,
        report.empty_truth
    );
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    write_bytes_atomic(&args.out.join("summary.txt"), summary.as_bytes())?;
    write_atomic(&args.out.join("histogram.csv"), |w| Ok(write_histogram_csv(w, &report.per_column, &ids)?))?;
    if args.curve {
        let curve = pr_curve(&output, &truth, args.tau, &default_sigma_grid(args.tau))?;
        write_atomic(&args.out.join("curve.csv"), |w| Ok(write_curve_csv(w, &curve)?))?;
    }
    print!("{summary}");
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> CliResult<()> {
    match args.model {
        Model::Disco => {
            let atb = args.atb_l1.ok_or_else(|| Failure::Validation("--atb-l1 is required for disco".into()))?;
            if !(atb >= 0.0 && args.tau > 0.0 && args.tau < 1.0) {
                return Err(Failure::Validation("need --atb-l1 >= 0 and 0 < --tau < 1".into()));
            }
            let bytes = disco_shuffle_estimate(atb, args.tau, args.bytes_per_wedge, args.wedges_per_unit);
            println!("model=disco\nbytes={bytes}\ntb={:.1}", bytes / TERABYTE);
        }
        Model::Lsh => {
            let n = args.n.ok_or_else(|| Failure::Validation("--n is required for lsh".into()))?;
            let est = lsh_storage_estimate(n, args.tau)?;
            println!(
                "model=lsh\np1={}\np2={}\nexponent={:.4}\nbytes={}\ntb={:.1}",
                est.p1,
                est.p2,
                est.exponent,
                est.bytes,
                est.bytes / TERABYTE
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Clean(a) => cmd_clean(a),
        Command::Run(a) => cmd_run(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Estimate(a) => cmd_estimate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Validation(m) | Failure::Io(m) | Failure::Internal(m) => m,
            };
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
