use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use lookout_core::bench::{bench_anomaly_counts, bench_sizes, write_bench, BenchOptions};
use lookout_core::pipeline::{self, load_graph, run_explain, write_ranking, AnomalyMode, RunConfig, DEFAULT_BUDGET};
use lookout_core::synth::{generate_synthetic, SyntheticSpec};
use lookout_core::{extract_features, Error, ForestParams, GraphMode, ParseOptions, ScalingMode, TGraph};

const USAGE: u8 = 1;
const DATA: u8 = 2;

#[derive(Parser)]
#[command(
    name = "lookout",
    version,
    about = "Explain anomalous nodes of a time-evolving graph with a few scatter plots"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select and render the pair plots that best explain the anomalies.
    Explain(ExplainArgs),
    /// Rank every node by isolation-forest score on all features.
    Detect(DetectArgs),
    /// Time feature extraction, scoring and selection on synthetic graphs.
    Bench(BenchArgs),
    /// Write a synthetic edge list with planted anomalies.
    Generate(GenerateArgs),
    /// Write the per-node feature table.
    Features(FeaturesArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Edge list: source, destination, timestamp[, value].
    #[arg(long)]
    graph: PathBuf,
    /// Field delimiter of input and output tables; `\t` or `tab` for tabs.
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
    /// The edge list starts with a header row.
    #[arg(long)]
    header: bool,
    #[arg(long, value_enum, default_value_t = Partition::Unipartite)]
    graph_mode: Partition,
}

#[derive(Args)]
struct ForestArgs {
    /// Trees per isolation forest.
    #[arg(long, default_value_t = ForestParams::default().trees as u32, value_parser = clap::value_parser!(u32).range(1..))]
    trees: u32,
    /// Subsample size per tree.
    #[arg(long, default_value_t = ForestParams::default().subsample as u32, value_parser = clap::value_parser!(u32).range(1..))]
    sample: u32,
    #[arg(long, default_value_t = ForestParams::default().seed)]
    seed: u64,
    /// Transform applied to features before scoring and plotting.
    #[arg(long, value_enum, default_value_t = Scale::Log1p)]
    scale: Scale,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    forest: ForestArgs,
    /// File of anomalous node ids, one per line (dictated mode).
    #[arg(long)]
    anomalies: Option<PathBuf>,
    /// Where the anomalies come from; defaults to dictated when --anomalies is given.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Number of top-ranked nodes explained in detected mode.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    top_k: u32,
    /// Number of plots to select.
    #[arg(long, default_value_t = DEFAULT_BUDGET as u32, value_parser = clap::value_parser!(u32).range(1..))]
    budget: u32,
    /// Output directory.
    #[arg(long, default_value = "lookout-out")]
    out: PathBuf,
    /// Also write the full anomaly-by-plot score matrix.
    #[arg(long)]
    dump_scores: bool,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    forest: ForestArgs,
    /// Number of nodes to list; all nodes when omitted.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    top_k: Option<u32>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    forest: ForestArgs,
    /// Edge counts of the generated graphs.
    #[arg(long, value_delimiter = ',', default_value = "10000,100000,1000000")]
    sizes: Vec<usize>,
    /// Anomaly counts for a sweep at the largest size, instead of the size sweep.
    #[arg(long, value_delimiter = ',')]
    anomaly_counts: Option<Vec<usize>>,
    /// Planted anomalies per graph in the size sweep.
    #[arg(long, default_value_t = 50)]
    anomalies: usize,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    budget: u32,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    repeats: u32,
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    edges: usize,
    /// Number of planted anomalies, cycling through the planted kinds.
    #[arg(long, default_value_t = 0)]
    plants: usize,
    /// Edges per fan-out or burst anomaly.
    #[arg(long, default_value_t = 200)]
    intensity: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
    /// Edge list output file.
    #[arg(long)]
    out: PathBuf,
    /// Also write the planted node ids here.
    #[arg(long)]
    anomalies_out: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Log1p,
    None,
}

impl From<Scale> for ScalingMode {
    fn from(s: Scale) -> Self {
        match s {
            Scale::Log1p => ScalingMode::Log1p,
            Scale::None => ScalingMode::None,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Detected,
    Dictated,
}

#[derive(Clone, Copy, ValueEnum)]
enum Partition {
    Unipartite,
    Bipartite,
}

impl From<Partition> for GraphMode {
    fn from(p: Partition) -> Self {
        match p {
            Partition::Unipartite => GraphMode::Unipartite,
            Partition::Bipartite => GraphMode::Bipartite,
        }
    }
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s {
        "\\t" | "tab" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(format!("delimiter must be a single ASCII character, got {s:?}")),
    }
}

impl ForestArgs {
    fn params(&self) -> ForestParams {
        ForestParams {
            trees: self.trees as usize,
            subsample: self.sample as usize,
            seed: self.seed,
        }
    }
}

fn config(input: &InputArgs, forest: &ForestArgs, out: PathBuf) -> RunConfig {
    let mut config = RunConfig::new(&input.graph, out);
    config.delimiter = input.delimiter;
    config.has_header = input.header;
    config.graph_mode = input.graph_mode.into();
    config.trees = forest.trees as usize;
    config.sample = forest.sample as usize;
    config.seed = forest.seed;
    config.scale = forest.scale.into();
    config
}

fn load(input: &InputArgs) -> Result<TGraph, Error> {
    let options = ParseOptions {
        delimiter: input.delimiter,
        has_header: input.header,
        mode: input.graph_mode.into(),
    };
    load_graph(&input.graph, &options)
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    let file = File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(BufWriter::new(file))
}

/// Runs `write` against the file at `path`, or standard output.
fn emit(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<(), Error>) -> Result<(), Error> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            write(&mut w)?;
            w.flush().map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })
        }
        None => write(&mut io::stdout().lock()),
    }
}

fn explain(args: ExplainArgs) -> Result<(), Error> {
    let mut config = config(&args.input, &args.forest, args.out);
    config.mode = match args.mode {
        Some(Mode::Detected) => AnomalyMode::Detected,
        Some(Mode::Dictated) => AnomalyMode::Dictated,
        None if args.anomalies.is_some() => AnomalyMode::Dictated,
        None => AnomalyMode::Detected,
    };
    config.anomalies = args.anomalies;
    config.top_k = args.top_k as usize;
    config.budget = args.budget as usize;
    config.dump_scores = args.dump_scores;
    let output = run_explain(&config)?;
    let report = &output.report;
    println!(
        "{} plots explain {} anomalies: incrimination {:.4} of ideal {:.4}",
        report.plots.len(),
        report.anomalies.len(),
        report.incrimination,
        report.ideal_incrimination
    );
    for plot in &report.plots {
        let owned: Vec<&str> = plot.owned.iter().map(|n| n.id.as_str()).collect();
        println!(
            "  {}. {} vs {}: {}",
            plot.rank,
            plot.feature_x,
            plot.feature_y,
            owned.join(" ")
        );
    }
    println!("wrote {} files to {}", output.files.len(), config.out.display());
    Ok(())
}

fn detect(args: DetectArgs) -> Result<(), Error> {
    let params = args.forest.params();
    params.validate()?;
    let graph = load(&args.input)?;
    let features = extract_features(&graph);
    let top_k = args.top_k.map_or(graph.node_count(), |k| k as usize);
    let ranking = pipeline::detect(&features, &params, args.forest.scale.into(), top_k)?;
    emit(args.out.as_deref(), |w| {
        write_ranking(w, &graph, &ranking, args.input.delimiter)
    })
}

fn bench(args: BenchArgs) -> Result<(), Error> {
    let options = BenchOptions {
        anomalies: args.anomalies,
        budget: args.budget as usize,
        params: args.forest.params(),
        scaling: args.forest.scale.into(),
        repeats: args.repeats as usize,
        ..BenchOptions::default()
    };
    let rows = match &args.anomaly_counts {
        Some(counts) => {
            let edges = args.sizes.iter().copied().max().unwrap_or(100_000);
            info!("anomaly sweep {counts:?} at {edges} edges");
            bench_anomaly_counts(edges, counts, &options)?
        }
        None => bench_sizes(&args.sizes, &options)?,
    };
    emit(args.out.as_deref(), |w| write_bench(w, &rows, args.delimiter))
}

fn generate(args: GenerateArgs) -> Result<(), Error> {
    let spec = SyntheticSpec {
        intensity: args.intensity,
        ..SyntheticSpec::new(args.nodes, args.edges, args.seed)
    }
    .with_cycled_plants(args.plants);
    let synthetic = generate_synthetic(&spec)?;
    emit(Some(&args.out), |w| synthetic.write_delimited(w, args.delimiter))?;
    if let Some(path) = &args.anomalies_out {
        emit(Some(path), |w| synthetic.write_anomalies(w))?;
    }
    Ok(())
}

fn features(args: FeaturesArgs) -> Result<(), Error> {
    let graph = load(&args.input)?;
    let features = extract_features(&graph);
    let ids: Vec<&str> = graph.node_ids().collect();
    emit(args.out.as_deref(), |w| {
        features.write_delimited(w, &ids, args.input.delimiter)
    })
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("LOOKOUT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("LOOKOUT_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::InvalidArgument(_) => USAGE,
        _ => DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(message) = configure_threads() {
        eprintln!("error: {message}");
        return ExitCode::from(USAGE);
    }
    let result = match cli.command {
        Command::Explain(args) => explain(args),
        Command::Detect(args) => detect(args),
        Command::Bench(args) => bench(args),
        Command::Generate(args) => generate(args),
        Command::Features(args) => features(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
