use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use geodex::fetch::{fetch_embeddings, read_prompts, EndpointConfig};
use geodex::hypothesis::{DiagnosticConfig, TestKind};
use geodex::report::{self, RunConfig};
use geodex::synthetic::{self, SuperpositionSpec, SyntheticKind, SyntheticSpec};
use geodex::{graph, GeodexError, Result};

#[derive(Parser)]
#[command(name = "geodex", version, about = "Manifold diagnostics for feature representations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a prompts file through an embeddings endpoint into a dataset CSV
    Fetch(FetchArgs),
    /// Generate a synthetic dataset and its manifest
    Synth(SynthArgs),
    /// Normalize rows and write the uncentered PCA projection as a dataset CSV
    Pca(PcaArgs),
    /// Build the K-nearest-neighbour graph and write it as JSON
    Graph(GraphArgs),
    /// Homeomorphism rank test
    TestHomeo(DiagArgs),
    /// Direct isometry test (cosine similarity against squared distance)
    TestDirect(DiagArgs),
    /// Geodesic isometry test (graph geodesic against feature distance)
    TestGeodesic(DiagArgs),
    /// Compare curve lengths with the predicted scale on a synthetic curve
    ValidateTheorem(TheoremArgs),
    /// Run every applicable test and write the full report bundle
    Report(DiagArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Dataset file (CSV or JSON lines); defaults to the manifest's "data"
    #[arg(long)]
    data: Option<PathBuf>,
    /// Dataset manifest or bare metric-space JSON
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Args)]
struct DiagArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Neighbour count; defaults to the minimal connected K
    #[arg(long)]
    k: Option<usize>,
    /// Uncentered principal components kept; 0 disables PCA
    #[arg(long, default_value_t = 3)]
    components: usize,
    /// Direct-test window as a percentile of pairwise feature distances
    #[arg(long, default_value_t = 10.0)]
    eps_pct: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum number of point pairs; larger sets are subsampled
    #[arg(long, default_value_t = 250_000)]
    pairs_budget: usize,
    /// Drop graph edges above this weight percentile
    #[arg(long)]
    prune_pct: Option<f64>,
    /// Bundle directory (must not exist); without it report.json goes to stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FetchArgs {
    /// Prompts file: one `value<TAB>prompt` or bare prompt per line
    prompts: PathBuf,
    /// Output CSV; appended to when it already holds some prompts
    #[arg(long)]
    out: PathBuf,
    /// Base URL of the embeddings API
    #[arg(long, default_value = "https://api.openai.com/v1")]
    endpoint: String,
    #[arg(long, default_value = "text-embedding-3-large")]
    model: String,
    /// Environment variable holding the bearer token
    #[arg(long, default_value = "OPENAI_API_KEY")]
    token_env: String,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 5)]
    max_retries: u32,
    #[arg(long, default_value_t = 500)]
    backoff_ms: u64,
    #[arg(long, default_value_t = 1)]
    max_in_flight: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Arc,
    PlaneCircle,
    PolynomialCurve,
    Superposition,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 360)]
    n: usize,
    /// Ambient dimension
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Arc curvature
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Polynomial curve degree
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// Per-coordinate Gaussian noise before re-normalization
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    /// Superposition: dictionary size
    #[arg(long, default_value_t = 2000)]
    features: usize,
    /// Superposition: active features per row
    #[arg(long, default_value_t = 5)]
    sparsity: usize,
    /// Output directory for data.csv and manifest.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PcaArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 3)]
    components: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GraphArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    k: Option<usize>,
    /// Uncentered principal components kept; 0 disables PCA
    #[arg(long, default_value_t = 3)]
    components: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TheoremArgs {
    #[arg(long, value_enum, default_value = "arc")]
    kind: Kind,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 10_000)]
    resolution: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn components(k: usize) -> Option<usize> {
    (k > 0).then_some(k)
}

fn resolve_data(input: &InputArgs) -> Result<PathBuf> {
    if let Some(d) = &input.data {
        return Ok(d.clone());
    }
    if !input.manifest.exists() {
        return Err(GeodexError::Config(format!("manifest {} not found", input.manifest.display())));
    }
    geodex::embeddings::DatasetManifest::load(&input.manifest)?
        .data
        .ok_or_else(|| GeodexError::Config("no data file: pass --data or set \"data\" in the manifest".into()))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // a closed pipe (e.g. `| head`) is the reader's choice, not a failure
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_or_print<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let mut json = serde_json::to_string_pretty(value)?;
            json.push('\n');
            fs::write(path, json)?;
            Ok(())
        }
        None => print_json(value),
    }
}

fn run_diag(args: DiagArgs, tests: Vec<TestKind>) -> Result<()> {
    let mut config = RunConfig::new(resolve_data(&args.input)?, args.input.manifest.clone());
    config.tests = tests;
    config.diagnostics = DiagnosticConfig {
        k: args.k,
        components: components(args.components),
        eps_pct: args.eps_pct,
        seed: args.seed,
        pair_budget: args.pairs_budget,
        prune_pct: args.prune_pct,
        ..DiagnosticConfig::default()
    };
    match &args.out {
        Some(out) => {
            let r = report::cmd_run_diagnostics(&config, out)?;
            eprintln!("wrote {} ({} reports)", out.display(), r.reports.len());
            Ok(())
        }
        None => print_json(&report::run_diagnostics(&config)?),
    }
}

fn kind_of(kind: Kind, alpha: f64, degree: usize, features: usize, sparsity: usize) -> SyntheticKind {
    match kind {
        Kind::Arc => SyntheticKind::Arc { alpha },
        Kind::PlaneCircle => SyntheticKind::PlaneCircle,
        Kind::PolynomialCurve => SyntheticKind::PolynomialCurve { degree },
        Kind::Superposition => SyntheticKind::Superposition(SuperpositionSpec::new(features, sparsity)),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fetch(a) => {
            let prompts = read_prompts(&a.prompts)?;
            let config = EndpointConfig {
                base_url: a.endpoint,
                model: a.model,
                token_env: a.token_env,
                batch_size: a.batch_size,
                max_retries: a.max_retries,
                backoff_ms: a.backoff_ms,
                max_in_flight: a.max_in_flight,
                ..EndpointConfig::default()
            };
            let summary = fetch_embeddings(&prompts, &a.out, &config)?;
            print_json(&summary)
        }
        Command::Synth(a) => {
            let mut spec = SyntheticSpec::new(
                kind_of(a.kind, a.alpha, a.degree, a.features, a.sparsity),
                a.n,
                a.dim,
                a.seed,
            );
            spec.noise_sd = a.noise_sd;
            print_json(&report::cmd_synth(&spec, &a.out)?)
        }
        Command::Pca(a) => {
            let (set, space, _, _) = report::load_inputs(a.input.data.as_deref(), &a.input.manifest)?;
            let (projected, singular_values) = report::preprocess(&set, components(a.components))?;
            projected.write_csv(&a.out, &space)?;
            print_json(&serde_json::json!({
                "rows": projected.len(),
                "dim": projected.dim(),
                "singular_values": singular_values,
            }))
        }
        Command::Graph(a) => {
            let (set, _, _, _) = report::load_inputs(a.input.data.as_deref(), &a.input.manifest)?;
            let (work, _) = report::preprocess(&set, components(a.components))?;
            let points: Vec<&[f64]> = work.rows().collect();
            let g = match a.k {
                Some(k) => graph::build_knn(&points, k)?,
                None => graph::minimal_connected_k(&points)?.1,
            };
            write_or_print(&g.to_json(), a.out.as_deref())
        }
        Command::TestHomeo(a) => run_diag(a, vec![TestKind::Homeomorphism]),
        Command::TestDirect(a) => run_diag(a, vec![TestKind::DirectIsometry]),
        Command::TestGeodesic(a) => run_diag(a, vec![TestKind::GeodesicIsometry]),
        Command::Report(a) => run_diag(
            a,
            vec![
                TestKind::Homeomorphism,
                TestKind::DirectIsometry,
                TestKind::GeodesicIsometry,
            ],
        ),
        Command::ValidateTheorem(a) => {
            let spec = SyntheticSpec::new(kind_of(a.kind, a.alpha, 2, 0, 0), 2, a.dim, a.seed);
            print_json(&synthetic::validate_theorem1(&spec, a.resolution)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("geodex: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
