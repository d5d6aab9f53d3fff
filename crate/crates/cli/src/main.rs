mod svg;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use modediag::density::{auto_bandwidth, Bandwidth};
use modediag::io::{
    read_labels_csv, read_points_csv, write_diagram_csv, write_labels_csv, write_points_csv,
    write_truth_csv,
};
use modediag::meanshift::{mean_shift_cluster, MeanShiftConfig};
use modediag::pipeline::{self, BandwidthChoice, PipelineConfig, PipelineOutput};
use modediag::robustfit::{
    residuals, threshold_value, FitOptions, FitReport, RobustMethod, ScaleEstimator,
};
use modediag::synthgen::{generate, Shape, ShapeSpec};
use modediag::theoryval::{run_validation, ValidationConfig, DEFAULT_TAU};
use modediag::{adjusted_rand_index, PointSet};

use svg::{Plot, Range};

#[derive(Parser)]
#[command(
    name = "modediag",
    version,
    about = "Mode clustering diagrams: density, δ, robust threshold, clusters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a CSV of points and write labels, diagram, report and plots.
    Cluster(ClusterArgs),
    /// Write a synthetic dataset with ground truth.
    Generate(GenerateArgs),
    /// Check the asymptotic theory on a standard normal; prints JSON.
    Validate(ValidateArgs),
    /// Mean-shift baseline clustering.
    Meanshift(MeanshiftArgs),
}

/// `auto` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq)]
enum BandwidthArg {
    Auto,
    Fixed(f64),
}

impl FromStr for BandwidthArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        match s.parse::<f64>() {
            Ok(h) if h.is_finite() && h > 0.0 => Ok(Self::Fixed(h)),
            _ => Err(format!("expected 'auto' or a positive number, got '{s}'")),
        }
    }
}

impl Serialize for BandwidthArg {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Fixed(h) => s.serialize_f64(*h),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum RobustArg {
    Huber,
    TheilSen,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ScaleArg {
    Mad,
    Classic,
}

#[derive(Args, Serialize)]
struct ClusterArgs {
    /// Points CSV, one row per point.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    out_dir: PathBuf,
    #[arg(long, default_value = "auto")]
    bandwidth: BandwidthArg,
    /// Constant in the automatic bandwidth rule.
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    /// Outlier multiplier in the threshold.
    #[arg(long = "m", default_value_t = 3.0)]
    #[serde(rename = "M")]
    m: f64,
    #[arg(long, value_enum, default_value = "huber")]
    robust: RobustArg,
    #[arg(long, value_enum, default_value = "mad")]
    scale: ScaleArg,
    /// Trim points with density below n^(-1/(d+2)) before fitting.
    #[arg(long)]
    density_floor: bool,
    /// δ given to the densest point (default: data diameter).
    #[arg(long = "L")]
    #[serde(rename = "L")]
    root_delta: Option<f64>,
    /// Fit on a smoothed bootstrap sample of this size.
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    #[serde(skip)]
    threads: Option<usize>,
    /// Include per-stage timings in report.json.
    #[arg(long)]
    #[serde(skip)]
    timings: bool,
}

#[derive(Args, Serialize)]
struct GenerateArgs {
    /// two-blobs, broken-circle, four-crescents, blobs3d or gauss-pair.
    #[arg(long)]
    shape: Shape,
    #[arg(long)]
    n: usize,
    /// Uniform background points.
    #[arg(long, default_value_t = 0)]
    noise: usize,
    /// Gauss-pair mean offset.
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Gauss-pair dimension.
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Comma-separated test point (default: 1,0,…,0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 400)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = 20000)]
    slope_n: usize,
    #[arg(long, value_delimiter = ',', default_value = "500,2000,8000")]
    mode_ns: Vec<usize>,
    #[arg(long, default_value_t = 101)]
    mode_reps: usize,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Serialize)]
struct MeanshiftArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    out_dir: PathBuf,
    #[arg(long, default_value = "auto")]
    bandwidth: BandwidthArg,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    /// Labels CSV to compare against; prints the adjusted Rand index.
    #[arg(long)]
    compare: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    threads: Option<usize>,
}

/// Runs `f` on a pool with the requested worker count, or the global pool.
fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(0) => bail!("--threads must be at least 1"),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build()?;
            Ok(pool.install(f))
        }
    }
}

fn read_points(path: &Path) -> Result<PointSet<f64>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_points_csv(file).with_context(|| format!("reading {}", path.display()))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

/// Pretty JSON with keys in sorted order.
fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let sorted = serde_json::to_value(value)?;
    fs::write(
        dir.join(name),
        serde_json::to_string_pretty(&sorted)? + "\n",
    )
    .with_context(|| format!("cannot write {}", dir.join(name).display()))
}

fn cmd_cluster(args: &ClusterArgs) -> Result<()> {
    let ps = read_points(&args.input)?;
    let cfg = PipelineConfig {
        bandwidth: match args.bandwidth {
            BandwidthArg::Auto => BandwidthChoice::Auto { c0: args.c0 },
            BandwidthArg::Fixed(h) => BandwidthChoice::Fixed(h),
        },
        m: args.m,
        fit: FitOptions {
            method: match args.robust {
                RobustArg::Huber => RobustMethod::Huber,
                RobustArg::TheilSen => RobustMethod::TheilSen,
            },
            scale: match args.scale {
                ScaleArg::Mad => ScaleEstimator::Mad,
                ScaleArg::Classic => ScaleEstimator::Classic,
            },
            ..FitOptions::default()
        },
        density_floor: args.density_floor,
        root_delta: args.root_delta,
        bootstrap: args.bootstrap,
        seed: args.seed,
    };
    let out = with_threads(args.threads, || pipeline::run(&ps, &cfg))??;
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;

    write_labels_csv(&out.clusters, create(&args.out_dir, "labels.csv")?)?;
    write_diagram_csv(
        &out.diagram,
        Some(&out.threshold.fit),
        Some(&out.modes),
        create(&args.out_dir, "diagram.csv")?,
    )?;
    fs::write(args.out_dir.join("diagram.svg"), diagram_svg(&out)?)?;
    fs::write(args.out_dir.join("residuals.svg"), residual_svg(&out))?;

    let fit = FitReport::new(&out.threshold, out.diagram.trimmed.len(), &out.modes);
    let mut report = json!({
        "config": args,
        "n_points": ps.len(),
        "dim": ps.dim(),
        "bandwidth": {
            "h": out.density.bandwidth.h,
            "rule": out.density.bandwidth.rule,
        },
        "L": out.diagram.delta_table.root_delta,
        "diagram_source": out.diagram.source,
        "fit": fit,
        "mode_count": out.modes.len(),
        "cluster_modes": out.clusters.modes,
        "cluster_sizes": out.clusters.sizes(),
        "seed": args.seed,
    });
    for (stage, ms) in &out.timings {
        eprintln!("{stage:>10}: {ms:.2} ms");
    }
    if args.timings {
        let t: serde_json::Map<String, serde_json::Value> = out
            .timings
            .iter()
            .map(|(k, v)| (k.to_string(), json!(v)))
            .collect();
        report["timings_ms"] = serde_json::Value::Object(t);
    }
    write_json(&args.out_dir, "report.json", &report)?;
    println!(
        "{} points, {} modes, cluster sizes {:?}",
        ps.len(),
        out.modes.len(),
        out.clusters.sizes()
    );
    Ok(())
}

fn diagram_svg(out: &PipelineOutput<f64>) -> Result<String> {
    let entries = &out.diagram.entries;
    let is_mode = |i: usize| out.modes.binary_search(&i).is_ok();
    let x = Range::covering(entries.iter().map(|e| e.density)).include(0.0);
    let y = Range::covering(entries.iter().map(|e| e.delta)).include(0.0);
    let mut plot = Plot::new(x, y);
    let trimmed: Vec<(f64, f64)> = out
        .diagram
        .trimmed
        .iter()
        .map(|e| (e.density, e.delta))
        .collect();
    plot.points(&trimmed, 2.0, "#bbbbbb");
    let plain: Vec<(f64, f64)> = entries
        .iter()
        .filter(|e| !is_mode(e.index))
        .map(|e| (e.density, e.delta))
        .collect();
    plot.points(&plain, 2.0, "#1f4e9c");
    let modes: Vec<(f64, f64)> = entries
        .iter()
        .filter(|e| is_mode(e.index))
        .map(|e| (e.density, e.delta))
        .collect();
    plot.points(&modes, 4.5, "#d62728");

    let (lo, hi) = entries
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), e| {
            (a.min(e.density), b.max(e.density))
        });
    let mut curve = Vec::with_capacity(256);
    for k in 0..256 {
        let u = if hi > lo {
            (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / 255.0).exp()
        } else {
            lo
        };
        curve.push((u, threshold_value(&out.threshold, u)?));
    }
    plot.polyline(&curve, "#2ca02c", false);
    Ok(plot.render(
        &format!(
            "Mode diagram: {} modes above the threshold",
            out.modes.len()
        ),
        "estimated density",
        "δ (distance to nearest denser point)",
    ))
}

fn residual_svg(out: &PipelineOutput<f64>) -> String {
    let res = residuals(&out.diagram, &out.threshold.fit);
    let logp: Vec<f64> = out.diagram.entries.iter().map(|e| e.log_density).collect();
    let cut = out.threshold.residual_cutoff();
    let x = Range::covering(logp.iter().copied());
    let y = Range::covering(res.iter().map(|r| r.1))
        .include(0.0)
        .include(if cut.is_finite() { cut } else { 0.0 });
    let mut plot = Plot::new(x, y);
    let is_mode = |i: usize| out.modes.binary_search(&i).is_ok();
    let pts = |want: bool| -> Vec<(f64, f64)> {
        logp.iter()
            .zip(&res)
            .filter(|(_, r)| is_mode(r.0) == want)
            .map(|(&lp, r)| (lp, r.1))
            .collect()
    };
    plot.points(&pts(false), 2.0, "#1f4e9c");
    plot.points(&pts(true), 4.5, "#d62728");
    plot.polyline(&[(x.lo, 0.0), (x.hi, 0.0)], "#444444", false);
    if cut.is_finite() {
        plot.polyline(&[(x.lo, cut), (x.hi, cut)], "#2ca02c", true);
    }
    plot.render(
        &format!("Robust-fit residuals, cutoff M·s = {cut:.4}"),
        "log estimated density",
        "residual of log δ",
    )
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let spec = ShapeSpec {
        shape: args.shape,
        n: args.n,
        noise_n: args.noise,
        mu: args.mu,
        d: args.d,
        seed: args.seed,
    };
    let data = generate(&spec)?;
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    write_points_csv(&data.points, create(&args.out_dir, "points.csv")?)?;
    write_truth_csv(&data.labels, create(&args.out_dir, "truth.csv")?)?;
    write_json(
        &args.out_dir,
        "spec.json",
        &json!({ "spec": spec, "generator": data.meta }),
    )?;
    println!(
        "{} points in {} dimensions",
        data.points.len(),
        data.points.dim()
    );
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<bool> {
    let point = args.point.clone().unwrap_or_else(|| {
        let mut p = vec![0.0; args.d];
        if let Some(first) = p.first_mut() {
            *first = 1.0;
        }
        p
    });
    let cfg = ValidationConfig {
        d: args.d,
        point,
        n: args.n,
        reps: args.reps,
        seed: args.seed,
        tau: args.tau,
        slope_n: args.slope_n,
        mode_ns: args.mode_ns.clone(),
        mode_reps: args.mode_reps,
    };
    let report = with_threads(args.threads, || run_validation(&cfg))??;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::to_value(&report)?)?
    );
    Ok(report.pass.all)
}

fn cmd_meanshift(args: &MeanshiftArgs) -> Result<()> {
    let ps = read_points(&args.input)?;
    let bw = match args.bandwidth {
        BandwidthArg::Auto => auto_bandwidth(&ps, args.c0)?,
        BandwidthArg::Fixed(h) => Bandwidth::fixed(h)?,
    };
    let cfg = MeanShiftConfig::new(&ps, bw);
    let ms = with_threads(args.threads, || mean_shift_cluster(&ps, &cfg))??;
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    write_labels_csv(&ms.clusters, create(&args.out_dir, "labels.csv")?)?;

    let mut report = json!({
        "config": args,
        "n_points": ps.len(),
        "dim": ps.dim(),
        "bandwidth": { "h": bw.h, "rule": bw.rule },
        "step_tol": cfg.step_tol,
        "max_iter": cfg.max_iter,
        "merge_radius": cfg.merge_radius,
        "mode_count": ms.clusters.n_clusters(),
        "cluster_modes": ms.clusters.modes,
        "cluster_sizes": ms.clusters.sizes(),
        "converged": ms.converged.iter().filter(|&&c| c).count(),
    });
    if let Some(path) = &args.compare {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let other = read_labels_csv(file).with_context(|| format!("reading {}", path.display()))?;
        let ari = adjusted_rand_index(&ms.clusters.labels, &other)?;
        println!("ARI {ari:.6}");
        report["compare_ari"] = json!(ari);
    }
    write_json(&args.out_dir, "report.json", &report)?;
    println!("{} points, {} clusters", ps.len(), ms.clusters.n_clusters());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let precondition = err
        .chain()
        .filter_map(|e| e.downcast_ref::<modediag::Error>())
        .any(modediag::Error::is_precondition);
    if precondition {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Cluster(a) => cmd_cluster(a).map(|_| true),
        Command::Generate(a) => cmd_generate(a).map(|_| true),
        Command::Validate(a) => cmd_validate(a),
        Command::Meanshift(a) => cmd_meanshift(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
