//! `mst`: multimodal style transfer over feature tensor files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use mst_core::label_map::{read_labels_npy, save_labels};
use mst_core::metrics::{self, FeatureBundle, DEFAULT_GAMMA, LAYER_NAMES};
use mst_core::pipeline::{self, ConfigFile};
use mst_core::{
    build_data_cost, kmeans_fit, read_tensor, run_mst, solve_labeling, total_energy, Alpha,
    ClusterModel, EnergyParams, Error, FeatureMap, Metric, PipelineConfig, Settings,
    TransformMode,
};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "mst", version, about = "Multimodal style transfer in feature space")]
struct Cli {
    /// Worker threads (defaults to the number of CPUs)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full pipeline: cluster, match, transform, write the stylized features
    Transfer(TransferArgs),
    /// Cluster style features and write centers and labels as JSON
    Cluster(ClusterArgs),
    /// Label content positions with clusters and write the label field
    Match(MatchArgs),
    /// Content and style losses between feature bundles
    Metrics(MetricsArgs),
    /// Labeling energy of a saved label field
    Energy(EnergyArgs),
}

#[derive(Args, Debug)]
struct TransferArgs {
    /// JSON config; flags given on the command line take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    content: Option<PathBuf>,
    /// One or more style tensors; their features are pooled before clustering
    #[arg(long, num_args = 1..)]
    style: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_k)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    metric: Option<Metric>,
    #[arg(long)]
    mode: Option<TransformMode>,
    /// Blend weight: one value, or one per cluster as `a,b,c`
    #[arg(long)]
    alpha: Option<Alpha>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Label map output, PNG for a `.png` extension and NPY otherwise
    #[arg(long)]
    save_labels: Option<PathBuf>,
    #[arg(long)]
    save_clusters: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[arg(long, required = true, num_args = 1..)]
    style: Vec<PathBuf>,
    #[arg(long, default_value_t = 3, value_parser = parse_k)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = mst_core::clustering::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EnergyTerms {
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = Metric::Cosine)]
    metric: Metric,
}

#[derive(Args, Debug)]
struct MatchArgs {
    #[arg(long)]
    content: PathBuf,
    /// Cluster JSON written by `cluster` or `transfer --save-clusters`
    #[arg(long)]
    clusters: PathBuf,
    #[command(flatten)]
    terms: EnergyTerms,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EnergyArgs {
    #[arg(long)]
    content: PathBuf,
    #[arg(long)]
    clusters: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[command(flatten)]
    terms: EnergyTerms,
}

/// A bundle is a directory of `conv*_1.npy` files, a comma separated list
/// of `LAYER=PATH`, or a single tensor taken as conv4_1.
#[derive(Args, Debug)]
struct MetricsArgs {
    #[arg(long)]
    output: String,
    #[arg(long)]
    content: String,
    #[arg(long)]
    style: String,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
}

fn parse_k(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k),
        Ok(_) => Err("the number of clusters must be at least 1".into()),
        Err(e) => Err(e.to_string()),
    }
}

/// Parses argv, appending the relevant usage line to argument errors.
fn parse_cli() -> Result<Cli, ExitCode> {
    Cli::try_parse().map_err(|e| {
        if !e.use_stderr() {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        eprint!("{}", e.render());
        let mut cmd = Cli::command();
        cmd.build();
        let sub = std::env::args().nth(1).unwrap_or_default();
        let usage = match cmd.find_subcommand_mut(&sub) {
            Some(s) => s.render_usage(),
            None => cmd.render_usage(),
        };
        eprintln!("\n{usage}");
        ExitCode::from(2)
    })
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Argument(_) | Error::Config(_) => 2,
        Error::Io(_) => 3,
        Error::ChannelMismatch { .. } => 4,
        Error::NotEnoughPoints { .. } => 5,
        _ => 1,
    }
}

fn transfer_config(args: TransferArgs) -> mst_core::Result<PipelineConfig> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let missing = |what: &str| Error::Argument(format!("--{what} is required (flag or config)"));
    let content = args.content.or(file.content).ok_or_else(|| missing("content"))?;
    let style = if args.style.is_empty() {
        file.style.unwrap_or_default()
    } else {
        args.style
    };
    if style.is_empty() {
        return Err(missing("style"));
    }
    let output = args.out.or(file.output).ok_or_else(|| missing("out"))?;

    let defaults = Settings::default();
    let settings = Settings {
        k: args.k.or(file.k).unwrap_or(defaults.k),
        lambda: args.lambda.or(file.lambda).unwrap_or(defaults.lambda),
        metric: args.metric.or(file.metric).unwrap_or(defaults.metric),
        mode: args.mode.or(file.mode).unwrap_or(defaults.mode),
        alpha: args.alpha.or(file.alpha).unwrap_or(defaults.alpha),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
        max_iters: args.max_iters.or(file.max_iters).unwrap_or(defaults.max_iters),
        ..defaults
    };
    Ok(PipelineConfig {
        content,
        style,
        output,
        save_labels: args.save_labels.or(file.save_labels),
        save_clusters: args.save_clusters.or(file.save_clusters),
        settings,
    })
}

fn transfer(args: TransferArgs) -> mst_core::Result<()> {
    let config = transfer_config(args)?;
    let (_, report) = run_mst(&config)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report is plain data"));
    Ok(())
}

fn cluster(args: ClusterArgs) -> mst_core::Result<()> {
    let styles = args.style.iter().map(read_tensor).collect::<mst_core::Result<Vec<_>>>()?;
    let channels = styles[0].channels();
    let style = pipeline::style_matrix(channels, &styles)?;
    let model = kmeans_fit(&style, args.k, args.seed, args.max_iters)?;
    model.save_json(&args.out)?;
    let summary = json!({
        "k": model.k(),
        "sizes": model.counts,
        "objective": model.objective(),
        "iterations": model.objective_history.len(),
    });
    println!("{summary}");
    Ok(())
}

fn load_for_energy(
    content: &Path,
    clusters: &Path,
    terms: &EnergyTerms,
) -> mst_core::Result<(FeatureMap, mst_core::DataCost, EnergyParams)> {
    let content = read_tensor(content)?;
    let model = ClusterModel::load_json(clusters)?;
    if model.centers.nrows() != content.channels() {
        return Err(Error::ChannelMismatch {
            content: content.channels(),
            style: model.centers.nrows(),
        });
    }
    let params = EnergyParams::new(terms.lambda, terms.metric)?;
    let costs = build_data_cost(&content.as_matrix(), &model.centers, &params)?;
    Ok((content, costs, params))
}

fn match_labels(args: MatchArgs) -> mst_core::Result<()> {
    let (content, costs, params) = load_for_energy(&args.content, &args.clusters, &args.terms)?;
    let labels = solve_labeling(&costs, content.height(), content.width(), &params, None)?;
    save_labels(&labels, &args.out)?;
    let energy = total_energy(&labels, &costs, &params);
    println!(
        "{}",
        json!({ "energy": energy, "discordant_pairs": labels.discordant_pairs() })
    );
    Ok(())
}

fn energy(args: EnergyArgs) -> mst_core::Result<()> {
    let (content, costs, params) = load_for_energy(&args.content, &args.clusters, &args.terms)?;
    let labels = read_labels_npy(&args.labels)?;
    if (labels.height(), labels.width()) != (content.height(), content.width()) {
        return Err(Error::Dimension(format!(
            "labels are {}x{}, content grid is {}x{}",
            labels.height(),
            labels.width(),
            content.height(),
            content.width()
        )));
    }
    labels.check_against(&costs)?;
    println!("{}", json!({ "energy": total_energy(&labels, &costs, &params) }));
    Ok(())
}

fn load_bundle(source: &str) -> mst_core::Result<FeatureBundle> {
    let mut bundle = FeatureBundle::new();
    let path = Path::new(source);
    if path.is_dir() {
        for layer in LAYER_NAMES {
            let file = path.join(format!("{layer}.npy"));
            if file.exists() {
                bundle.insert(layer, read_tensor(&file)?)?;
            }
        }
        if bundle.is_empty() {
            return Err(Error::Argument(format!("no conv*_1.npy files in {source}")));
        }
    } else if source.contains('=') {
        for item in source.split(',') {
            let (layer, file) = item
                .split_once('=')
                .ok_or_else(|| Error::Argument(format!("expected LAYER=PATH, got {item:?}")))?;
            bundle.insert(layer.trim(), read_tensor(file.trim())?)?;
        }
    } else {
        bundle.insert(metrics::CONTENT_LAYER, read_tensor(path)?)?;
    }
    Ok(bundle)
}

fn metrics_cmd(args: MetricsArgs) -> mst_core::Result<()> {
    let output = load_bundle(&args.output)?;
    let content = load_bundle(&args.content)?;
    let style = load_bundle(&args.style)?;
    let content_loss = metrics::content_loss(&output, &content)?;
    let style_loss = metrics::style_loss(&output, &style)?;
    let report = json!({
        "content_loss": content_loss,
        "style_loss": style_loss,
        "total": content_loss + args.gamma * style_loss,
    });
    println!("{report}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match parse_cli() {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot set up {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Transfer(a) => transfer(a),
        Command::Cluster(a) => cluster(a),
        Command::Match(a) => match_labels(a),
        Command::Metrics(a) => metrics_cmd(a),
        Command::Energy(a) => energy(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
