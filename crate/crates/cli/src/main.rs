use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use dynbethe::ddcsbm::{generate, model_summary, ModelParams};
use dynbethe::eigen::ArnoldiConfig;
use dynbethe::graph::{
    ingest_contact_stream, load_labels, load_temporal_edgelist, save_labels, save_temporal_edgelist,
};
use dynbethe::metrics::{estimate_parameters, overlap};
use dynbethe::pipeline::{
    run_benchmark, run_phase_diagram, BenchmarkSpec, EtaChoice, KChoice, Mode, PhaseDiagramSpec, PlantedModel,
};
use dynbethe::spectrum::{build_nb_operator, outlier_eigs, DENSE_MAX};
use dynbethe::threshold::{alpha_c, lambda_d, predicted_isolated_eigs, Horizon};
use dynbethe::{detect, DetectConfig};

#[derive(Parser)]
#[command(name = "dynbethe", version, about = "Community detection in sparse dynamical graphs")]
struct Cli {
    /// Random seed; overrides any seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dynamical degree-corrected block model.
    Generate(GenerateArgs),
    /// Cluster a temporal graph.
    Detect(DetectArgs),
    /// Print the detectability threshold as JSON.
    Threshold(ThresholdArgs),
    /// Leading eigenvalues of the weighted non-backtracking operator as CSV.
    Spectrum(SpectrumArgs),
    /// Replicated detection runs on a model, one CSV row per snapshot.
    Benchmark(ConfigRun),
    /// Sweep a two-parameter grid of planted models, long-format CSV.
    Phase(ConfigRun),
    /// Bin a `timestamp i j` contact stream into a temporal edge list.
    Ingest(IngestArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Model parameters as JSON (field names of `ModelParams`). Without it
    /// the planted two-class flags below apply.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long = "T", default_value_t = 4)]
    snapshots: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 6.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    phi: f64,
    #[arg(long, default_value_t = 0.7)]
    eta: f64,
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Signal strength as a multiple of the detectability threshold.
    #[arg(long, default_value_t = 1.5)]
    alpha_ratio: f64,
    /// Absolute signal strength; overrides --alpha-ratio.
    #[arg(long)]
    alpha: Option<f64>,
    /// Output temporal edge list.
    #[arg(long)]
    graph: PathBuf,
    /// Output planted labels.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Temporal edge list (`n T` header, then `t i j`).
    #[arg(long)]
    graph: PathBuf,
    /// Detection settings as JSON (field names of `DetectConfig`); flags
    /// below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Label persistence. Without it (or --eta-grid) the config value is used.
    #[arg(long, conflicts_with = "eta_grid")]
    eta: Option<f64>,
    /// Choose eta by mean modularity over comma-separated candidates, or
    /// over 0, 0.1, ..., 0.9 when given without a value.
    #[arg(long, num_args = 0..=1, default_missing_value = "")]
    eta_grid: Option<String>,
    /// Number of classes, or `auto` for a silhouette scan.
    #[arg(long)]
    k: Option<String>,
    /// Largest k tried by `--k auto`.
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    /// Chebyshev-filtered random sketch instead of exact eigenvectors.
    #[arg(long)]
    fast: bool,
    #[arg(long)]
    cheb_order: Option<usize>,
    #[arg(long)]
    sketch_dim: Option<usize>,
    /// Keep edges repeated from the previous snapshot.
    #[arg(long)]
    keep_repeated: bool,
    /// Cap on the number of negative eigenpairs (default k T).
    #[arg(long)]
    cap: Option<usize>,
    /// Output label file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Planted labels; adds per-snapshot overlaps to the report.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Number of snapshots, or `inf`.
    #[arg(long = "T")]
    snapshots: String,
    #[arg(long)]
    eta: f64,
    /// Mean degree; with --phi also reports lambda_d.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    phi: f64,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Spatial coupling.
    #[arg(long)]
    xi: f64,
    /// Temporal coupling.
    #[arg(long)]
    h: f64,
    /// Eigenvalues of largest real part to compute.
    #[arg(long, default_value_t = 30)]
    count: usize,
    /// Solve densely (all eigenvalues); only for small operators.
    #[arg(long)]
    dense: bool,
    /// Mean degree for the prediction; estimated from the graph if absent.
    #[arg(long)]
    c: Option<f64>,
    /// Degree heterogeneity for the prediction; estimated from the degree
    /// moments if absent.
    #[arg(long)]
    phi: Option<f64>,
    /// Class contrast for the informative family.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Planted labels, used to estimate lambda and eta when not given.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigRun {
    /// JSON spec.
    #[arg(long)]
    config: PathBuf,
    /// CSV output; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    /// Whitespace-separated `timestamp i j` lines; ids may be any tokens.
    #[arg(long)]
    input: PathBuf,
    /// Window width in timestamp units.
    #[arg(long)]
    window: f64,
    /// Start of the first window.
    #[arg(long, default_value_t = 0.0)]
    start: f64,
    #[arg(long = "T")]
    snapshots: usize,
    /// Output temporal edge list.
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        let closed = e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe);
        if closed {
            return;
        }
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Generate(a) => cmd_generate(a, seed),
        Command::Detect(a) => cmd_detect(a, seed),
        Command::Threshold(a) => cmd_threshold(a),
        Command::Spectrum(a) => cmd_spectrum(a, seed),
        Command::Benchmark(a) => cmd_benchmark(a, seed),
        Command::Phase(a) => cmd_phase(a, seed),
        Command::Ingest(a) => cmd_ingest(a),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_generate(a: GenerateArgs, seed: Option<u64>) -> Result<()> {
    let mut params = match &a.config {
        Some(path) => ModelParams::load_json(path)?,
        None => PlantedModel {
            n: a.n,
            snapshots: a.snapshots,
            k: a.k,
            c: a.c,
            phi: a.phi,
            eta: a.eta,
            tau: a.tau,
            alpha_ratio: a.alpha_ratio,
            alpha: a.alpha,
        }
        .params(0)?,
    };
    if let Some(s) = seed {
        params.seed = s;
    }
    let summary = model_summary(&params)?;
    let sample = generate(&params)?;
    save_temporal_edgelist(&sample.graph, &a.graph)?;
    if let Some(p) = &a.labels {
        save_labels(&sample.labels, p)?;
    }
    let threshold = alpha_c(params.snapshots, params.eta);
    let info = json!({
        "n": params.n,
        "T": params.snapshots,
        "k": params.k,
        "seed": params.seed,
        "c": summary.c,
        "phi": summary.phi,
        "lambda": summary.lambda,
        "alpha": summary.alpha,
        "alpha_c": threshold,
        "alpha_over_alpha_c": summary.alpha / threshold,
        "spatial_edges": sample.graph.num_spatial_edges(),
        "clamped_pairs": sample.report.clamped_pairs,
    });
    emit(None, &(serde_json::to_string_pretty(&info)? + "\n"))?;
    Ok(())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad number `{x}`")))
        .collect()
}

fn detect_config(a: &DetectArgs, seed: Option<u64>) -> Result<DetectConfig> {
    let mut cfg: DetectConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => DetectConfig::default(),
    };
    if let Some(eta) = a.eta {
        cfg.eta = EtaChoice::Fixed(eta);
    }
    if let Some(g) = &a.eta_grid {
        cfg.eta = if g.is_empty() { EtaChoice::default_grid() } else { EtaChoice::Grid(parse_list(g)?) };
    }
    if let Some(k) = &a.k {
        cfg.k = if k == "auto" {
            KChoice::Auto { max: a.k_max }
        } else {
            KChoice::Fixed(k.parse().with_context(|| format!("--k expects a number or `auto`, got `{k}`"))?)
        };
    }
    if a.fast {
        cfg.mode = Mode::Fast;
    }
    if let Some(p) = a.cheb_order {
        cfg.cheb_order = p;
    }
    if a.sketch_dim.is_some() {
        cfg.sketch_dim = a.sketch_dim;
    }
    if a.keep_repeated {
        cfg.remove_repeated_edges = false;
    }
    if a.cap.is_some() {
        cfg.cap = a.cap;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_detect(a: DetectArgs, seed: Option<u64>) -> Result<()> {
    let cfg = detect_config(&a, seed)?;
    let g = load_temporal_edgelist(&a.graph)?;
    let det = detect(&g, &cfg)?;
    if let Some(p) = &a.out {
        save_labels(det.labels(), p)?;
    }
    let mut report = json!({
        "k": det.clusters.k,
        "estimates": det.estimates,
        "diagnostics": det.diagnostics,
        "inertia": det.clusters.inertia,
    });
    if let Some(p) = &a.truth {
        let truth = load_labels(p)?;
        if truth.n() != g.n() || truth.num_snapshots() != g.num_snapshots() {
            bail!("truth labels are {}x{}, graph is {}x{}", truth.n(), truth.num_snapshots(), g.n(), g.num_snapshots());
        }
        let k = truth.k().max(det.clusters.k);
        let per_t = (0..g.num_snapshots())
            .map(|t| overlap(truth.column(t), det.labels().column(t), k))
            .collect::<dynbethe::Result<Vec<f64>>>()?;
        let mean = per_t.iter().sum::<f64>() / per_t.len() as f64;
        report["overlap"] = json!({ "per_snapshot": per_t, "mean": mean });
    }
    emit(a.report.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))
}

fn cmd_threshold(a: ThresholdArgs) -> Result<()> {
    let horizon = match a.snapshots.as_str() {
        "inf" | "infinity" => Horizon::Infinite,
        s => Horizon::Finite(s.parse().with_context(|| format!("--T expects a count or `inf`, got `{s}`"))?),
    };
    if !(0.0..=1.0).contains(&a.eta) {
        bail!("--eta must lie in [0, 1], got {}", a.eta);
    }
    let ac = alpha_c(horizon, a.eta);
    let mut out = json!({
        "T": match horizon {
            Horizon::Finite(t) => json!(t),
            Horizon::Infinite => json!("inf"),
        },
        "eta": a.eta,
        "alpha_c": ac,
    });
    if let Some(c) = a.c {
        out["c"] = json!(c);
        out["phi"] = json!(a.phi);
        out["lambda_d"] = match horizon {
            Horizon::Finite(t) => json!(lambda_d(t, a.eta, c, a.phi)?),
            Horizon::Infinite => json!(ac / (c * a.phi).sqrt()),
        };
    }
    emit(None, &(serde_json::to_string_pretty(&out)? + "\n"))?;
    Ok(())
}

fn cmd_spectrum(a: SpectrumArgs, seed: Option<u64>) -> Result<()> {
    let g = load_temporal_edgelist(&a.graph)?;
    let est = estimate_parameters(&g, None)?;
    let c = a.c.unwrap_or(est.c_hat);
    // The branching factor c phi is the second factorial moment of the
    // degrees over their mean; the plain second moment adds 1 / c.
    let phi = a.phi.unwrap_or(est.phi_hat - 1.0 / est.c_hat);
    let (mut lambda, mut eta) = (a.lambda, a.eta);
    if let Some(p) = &a.labels {
        let labels = load_labels(p)?;
        let with = estimate_parameters(&g, Some(&labels))?;
        // For equal classes c_in = c (1 + (k - 1) lambda).
        let k = labels.k() as f64;
        lambda = lambda.or(with.c_in_hat.map(|ci| (ci / with.c_hat - 1.0) / (k - 1.0)));
        eta = eta.or(with.eta_hat);
    }
    let pred = predicted_isolated_eigs(a.xi, a.h, c, phi, lambda.unwrap_or(0.0), eta.unwrap_or(0.0), g.num_snapshots());
    let b = build_nb_operator(&g, a.xi, a.h)?;
    let mut eigs = if a.dense {
        if b.dim() > DENSE_MAX {
            bail!("operator has dimension {}; --dense is limited to {DENSE_MAX}", b.dim());
        }
        b.dense_eigenvalues()
    } else {
        let cfg = ArnoldiConfig { tol: 1e-8, seed: seed.unwrap_or(ArnoldiConfig::default().seed), ..Default::default() };
        outlier_eigs(&b, a.count.min(b.dim()), &cfg)?
    };
    eigs.truncate(a.count);
    let mut csv = String::from("re,im,pred_distance\n");
    for z in &eigs {
        csv.push_str(&format!("{},{},{}\n", z.re, z.im, pred.relative_distance(*z)));
    }
    eprintln!("bulk radius {:.6}, {} eigenvalues above it", pred.bulk_radius, eigs.iter().filter(|z| z.norm() > pred.bulk_radius).count());
    emit(a.out.as_deref(), &csv)
}

fn cmd_benchmark(a: ConfigRun, seed: Option<u64>) -> Result<()> {
    let mut spec: BenchmarkSpec = read_json(&a.config)?;
    if let Some(s) = seed {
        spec.model.seed = s;
        spec.detect.seed = s;
    }
    let report = run_benchmark(&spec)?;
    eprintln!("mean overlap {:.4} over {} replicates", report.mean_overlap, spec.replicates);
    emit(a.out.as_deref(), &report.to_csv())
}

fn cmd_phase(a: ConfigRun, seed: Option<u64>) -> Result<()> {
    let mut spec: PhaseDiagramSpec = read_json(&a.config)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let table = run_phase_diagram(&spec)?;
    emit(a.out.as_deref(), &table.to_csv())
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let g = ingest_contact_stream(&a.input, a.window, a.start, a.snapshots)?;
    save_temporal_edgelist(&g, &a.out)?;
    let edges: Vec<usize> = g.snapshots().iter().map(|s| s.num_edges()).collect();
    emit(None, &(serde_json::to_string_pretty(&json!({ "n": g.n(), "T": g.num_snapshots(), "edges_per_snapshot": edges }))? + "\n"))?;
    Ok(())
}
