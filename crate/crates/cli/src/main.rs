use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use infoplane::analysis::{average_planes, compression_score, max_activation_report, InfoPlane};
use infoplane::estimators::{
    estimate_trace, read_estimates_csv, write_estimates_csv, EstimatorKind, EstimatorSpec, NoiseScaling,
    DEFAULT_BINS, DEFAULT_SIGMA0_SQ,
};
use infoplane::network::train;
use infoplane::plot::{render_information_plane, PlotStyle};
use infoplane::sweep::{run_sweep, DataSpec, SweepSpec};
use infoplane::{generate_dataset, load_dataset, make_split, read_trace, write_trace, NetworkConfig};

#[derive(Parser)]
#[command(
    name = "infoplane",
    version,
    about = "Information-plane experiments on small fully connected networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the 4096-sample 12-bit dataset as CSV.
    GenerateData {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one network and record its activation trace.
    Train {
        /// NetworkConfig JSON.
        #[arg(long)]
        config: PathBuf,
        /// Dataset CSV; generated from seed 0 when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        /// Output directory; receives trace/ and metrics.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate I(T;X) and I(T;Y) for every layer and snapshot of a trace.
    Estimate {
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[arg(long, default_value = "run")]
        run_id: String,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Average estimate files into one plane and score its compression.
    Score {
        #[arg(required = true)]
        estimates: Vec<PathBuf>,
        /// Score the output layer along with the hidden layers.
        #[arg(long)]
        include_last: bool,
        /// Output JSON; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a grid of activations, L2 penalties and seeds.
    Sweep {
        /// SweepSpec JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Inclusive seed range, e.g. 0..9.
        #[arg(long, value_parser = parse_seed_range)]
        seeds: Option<RangeInclusive<u64>>,
    },
    /// Render estimate files (averaged) as an SVG information plane.
    Plot {
        #[arg(required = true)]
        estimates: Vec<PathBuf>,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-epoch maximum absolute activation of every layer.
    Maxvals {
        #[arg(long)]
        trace: PathBuf,
        /// Output JSON; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EstimatorArgs {
    #[arg(long, value_parser = parse_estimator)]
    estimator: EstimatorKind,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    /// Kernel variance; the base variance for kde-adaptive.
    #[arg(long, default_value_t = DEFAULT_SIGMA0_SQ)]
    sigma0_sq: f64,
    #[arg(long, value_enum, default_value_t = Scaling::Quadratic)]
    scaling: Scaling,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scaling {
    Quadratic,
    Literal,
}

impl EstimatorArgs {
    fn spec(&self) -> EstimatorSpec {
        let scaling = match self.scaling {
            Scaling::Quadratic => NoiseScaling::Quadratic,
            Scaling::Literal => NoiseScaling::Literal,
        };
        EstimatorSpec::from_kind(self.estimator, self.bins, self.sigma0_sq, scaling)
    }
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, String> {
    s.parse().map_err(|e: infoplane::Error| e.to_string())
}

fn parse_seed_range(s: &str) -> Result<RangeInclusive<u64>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected a..b, got {s:?}"))?;
    let a: u64 = a.trim().parse().map_err(|_| format!("bad seed {a:?}"))?;
    let b: u64 = b.trim().parse().map_err(|_| format!("bad seed {b:?}"))?;
    if a > b {
        return Err(format!("empty seed range {s}"));
    }
    Ok(a..=b)
}

enum Failure {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let usage = e.chain().any(|c| {
            matches!(
                c.downcast_ref::<infoplane::Error>(),
                Some(infoplane::Error::InvalidArgument(_) | infoplane::Error::ScalingMode { .. })
            )
        });
        if usage {
            Failure::Usage(e)
        } else {
            Failure::Run(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Usage)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::Usage)
}

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_plane(files: &[PathBuf]) -> anyhow::Result<InfoPlane> {
    let mut planes = Vec::with_capacity(files.len());
    for f in files {
        let estimates: Vec<_> = read_estimates_csv(f)?.into_iter().map(|(_, e)| e).collect();
        planes.push(
            InfoPlane::from_estimates(&estimates).with_context(|| format!("plane from {}", f.display()))?,
        );
    }
    Ok(average_planes(&planes)?)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::GenerateData { seed, out } => {
            generate_dataset(seed)
                .write_csv(&out)
                .map_err(anyhow::Error::from)?;
        }
        Command::Train {
            config,
            data,
            train_fraction,
            split_seed,
            out,
        } => {
            let config: NetworkConfig = read_json(&config)?;
            config.validate().map_err(anyhow::Error::from)?;
            let dataset = match data {
                Some(path) => load_dataset(&path).map_err(anyhow::Error::from)?,
                None => generate_dataset(0),
            };
            let split = make_split(&dataset, train_fraction, split_seed).map_err(anyhow::Error::from)?;
            let (trace, metrics) = train(&config, &dataset, &split).map_err(anyhow::Error::from)?;
            write_trace(&trace, &out.join("trace")).map_err(anyhow::Error::from)?;
            let metrics_path = out.join("metrics.json");
            let json = serde_json::to_string_pretty(&metrics).map_err(anyhow::Error::from)?;
            fs::write(&metrics_path, json).with_context(|| format!("writing {}", metrics_path.display()))?;
            if let Some(last) = metrics.last() {
                println!(
                    "epoch {} train accuracy {:.4} test accuracy {:.4}",
                    last.epoch, last.train_accuracy, last.test_accuracy
                );
            }
        }
        Command::Estimate {
            trace,
            estimator,
            run_id,
            out,
        } => {
            let trace = read_trace(&trace).map_err(anyhow::Error::from)?;
            let estimates = estimate_trace(&trace, &estimator.spec()).map_err(anyhow::Error::from)?;
            write_estimates_csv(&out, &run_id, &estimates).map_err(anyhow::Error::from)?;
        }
        Command::Score {
            estimates,
            include_last,
            out,
        } => {
            let plane = load_plane(&estimates)?;
            let subset = if include_last {
                plane.layers.clone()
            } else {
                plane.hidden_layers()
            };
            let report = compression_score(&plane, &subset).map_err(anyhow::Error::from)?;
            let json = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
            write_output(out.as_deref(), &json)?;
        }
        Command::Sweep {
            config,
            out,
            workers,
            seeds,
        } => {
            let mut spec: SweepSpec = read_json(&config)?;
            if let Some(w) = workers {
                spec.workers = w;
            }
            if let Some(range) = seeds {
                spec.seeds = range.collect();
            }
            if let DataSpec::File { path } = &spec.data {
                if path.is_relative() {
                    let base = config.parent().unwrap_or(Path::new("."));
                    spec.data = DataSpec::File {
                        path: base.join(path),
                    };
                }
            }
            let report = run_sweep(&spec, &out).map_err(anyhow::Error::from)?;
            let failed: Vec<_> = report.failures().collect();
            println!(
                "{} runs, {} failed; report in {}",
                report.runs.len(),
                failed.len(),
                out.join("sweep_report.json").display()
            );
            if !failed.is_empty() {
                for r in &failed {
                    eprintln!("failed: {}", r.run_id);
                }
                return Err(Failure::Run(anyhow!("{} runs failed", failed.len())));
            }
        }
        Command::Plot {
            estimates,
            title,
            out,
        } => {
            let plane = load_plane(&estimates)?;
            if plane.is_empty() {
                return Err(Failure::Usage(anyhow!("no estimates to plot")));
            }
            let style = PlotStyle {
                title,
                ..Default::default()
            };
            fs::write(&out, render_information_plane(&plane, &style))
                .with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Maxvals { trace, out } => {
            let trace = read_trace(&trace).map_err(anyhow::Error::from)?;
            let report = max_activation_report(&trace).map_err(anyhow::Error::from)?;
            let json = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
            write_output(out.as_deref(), &json)?;
        }
    }
    Ok(())
}
