use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mvfs::attention::CrossProjection;
use mvfs::dataset::{load_manifest, synth_generate, SynthSpec};
use mvfs::harness::{
    self, default_fractions, default_grid, AblationPreset, DataSource, EvaluationReport,
    ExperimentSpec, RedundancyPreset,
};
use mvfs::redundancy::{RedundancyConfig, RedundancyMetric};
use mvfs::selector::{select, SelectionMode, SelectorConfig};
use mvfs::selftest::selftest;

#[derive(Parser)]
#[command(name = "mvfs", version, about = "Multi-view multi-label feature selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select features and print them ranked as CSV.
    Select(SelectArgs),
    /// Run the split / select / MLKNN evaluation protocol.
    Evaluate(EvaluateArgs),
    /// Evaluate over a (lambda, beta) grid.
    Sweep(SweepArgs),
    /// Run the built-in verification suite.
    Selftest,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset manifest file.
    manifest: Option<PathBuf>,
    /// Use a generated planted-feature dataset instead of a manifest.
    #[arg(long, conflicts_with = "manifest")]
    synth: bool,
    #[arg(long, default_value_t = 600)]
    synth_samples: usize,
    #[arg(long, value_delimiter = ',', default_value = "60,80,60")]
    synth_dims: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    synth_labels: usize,
    #[arg(long, default_value_t = 10)]
    synth_planted: usize,
    #[arg(long, default_value_t = 10)]
    synth_duplicates: usize,
    #[arg(long, default_value_t = 0.05)]
    synth_noise: f64,
    #[arg(long, default_value_t = 0)]
    synth_seed: u64,
}

impl DataArgs {
    fn source(&self) -> Result<DataSource, String> {
        match (&self.manifest, self.synth) {
            (Some(p), false) => Ok(DataSource::Manifest(p.clone())),
            (None, true) => Ok(DataSource::Synthetic(SynthSpec {
                n_samples: self.synth_samples,
                view_dims: self.synth_dims.clone(),
                n_labels: self.synth_labels,
                n_planted: self.synth_planted,
                n_duplicates: self.synth_duplicates,
                noise_std: self.synth_noise,
                seed: self.synth_seed,
            })),
            _ => Err("give either a manifest path or --synth".into()),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Block,
    Greedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Corr,
    Mi,
}

impl From<Metric> for RedundancyMetric {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Corr => RedundancyMetric::Correlation,
            Metric::Mi => RedundancyMetric::MutualInformation,
        }
    }
}

#[derive(Args)]
struct SelectorArgs {
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long)]
    no_cross: bool,
    #[arg(long)]
    no_static: bool,
    #[arg(long)]
    no_dynamic: bool,
    #[arg(long, value_enum, default_value = "block")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "corr")]
    static_metric: Metric,
    #[arg(long, value_enum, default_value = "mi")]
    dynamic_metric: Metric,
    #[arg(long, default_value_t = 10)]
    mi_bins: usize,
    /// Rank by signed score rather than magnitude.
    #[arg(long)]
    signed: bool,
    /// Use |correlation| when projecting cross-view attention.
    #[arg(long)]
    abs_cross: bool,
}

impl SelectorArgs {
    fn config(&self, k: usize) -> SelectorConfig {
        SelectorConfig {
            lambda: self.lambda,
            beta: self.beta,
            enable_cross: !self.no_cross,
            enable_static: !self.no_static,
            enable_dynamic: !self.no_dynamic,
            redundancy: RedundancyConfig {
                static_metric: self.static_metric.into(),
                dynamic_metric: self.dynamic_metric.into(),
                mi_bins: self.mi_bins,
            },
            selection_mode: match self.mode {
                Mode::Block => SelectionMode::BlockPerView,
                Mode::Greedy => SelectionMode::GreedyPerFeature,
            },
            signed_importance: self.signed,
            cross_projection: if self.abs_cross {
                CrossProjection::Absolute
            } else {
                CrossProjection::Signed
            },
            k,
        }
    }
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    selector: SelectorArgs,
    /// Number of features to select.
    #[arg(long, conflicts_with = "fraction")]
    k: Option<usize>,
    /// Fraction of all features to select.
    #[arg(long)]
    fraction: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ablation {
    Full,
    Rman1,
    Rman2,
    Rman3,
}

#[derive(Clone, Copy, ValueEnum)]
enum Redundancy {
    Rman,
    Alpha,
    Beta,
    Gamma,
}

#[derive(Args)]
struct ProtocolArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    selector: SelectorArgs,
    /// Comma-separated feature fractions (default 0.02..0.20 step 0.02).
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0.3)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "full")]
    ablation: Ablation,
    /// Redundancy metric preset; overrides --static-metric/--dynamic-metric.
    #[arg(long, value_enum)]
    redundancy: Option<Redundancy>,
    /// Normalize with full-dataset statistics.
    #[arg(long)]
    global_normalization: bool,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-cell CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl ProtocolArgs {
    fn spec(&self) -> Result<ExperimentSpec, String> {
        let mut spec = ExperimentSpec::new(self.data.source()?);
        spec.fractions = self.fractions.clone().unwrap_or_else(default_fractions);
        spec.repeats = self.repeats;
        spec.test_fraction = self.test_fraction;
        spec.base_seed = self.seed;
        spec.selector = self.selector.config(1);
        spec.ablation = match self.ablation {
            Ablation::Full => AblationPreset::Full,
            Ablation::Rman1 => AblationPreset::Rman1,
            Ablation::Rman2 => AblationPreset::Rman2,
            Ablation::Rman3 => AblationPreset::Rman3,
        };
        spec.redundancy = self.redundancy.map(|r| match r {
            Redundancy::Rman => RedundancyPreset::Rman,
            Redundancy::Alpha => RedundancyPreset::Alpha,
            Redundancy::Beta => RedundancyPreset::Beta,
            Redundancy::Gamma => RedundancyPreset::Gamma,
        });
        spec.global_normalization = self.global_normalization;
        Ok(spec)
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    beta_grid: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Select(args) => cmd_select(&args),
        Command::Evaluate(args) => {
            let spec = args.protocol.spec()?;
            let report = harness::run(&spec).map_err(|e| e.to_string())?;
            print_summary(&report);
            write_outputs(&args.protocol, std::slice::from_ref(&report), report.to_json())?;
            Ok(exit_for(report.failed_cells()))
        }
        Command::Sweep(args) => {
            let spec = args.protocol.spec()?;
            let lg = args.lambda_grid.clone().unwrap_or_else(default_grid);
            let bg = args.beta_grid.clone().unwrap_or_else(default_grid);
            let sweep = harness::sweep(&spec, &lg, &bg).map_err(|e| e.to_string())?;
            let mut out = io::stdout().lock();
            let _ = writeln!(out, "lambda,beta,fraction,k,valid,ap,auc,coverage,ranking_loss");
            for r in &sweep.summary {
                let m = r.mean.unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
                    r.lambda, r.beta, r.fraction, r.k, r.valid, m.ap, m.auc, m.coverage, m.ranking_loss
                );
            }
            let json = serde_json::to_string_pretty(&sweep).map_err(|e| e.to_string());
            write_outputs(&args.protocol, &sweep.reports, json.map_err(mvfs::Error::Report))?;
            Ok(exit_for(sweep.reports.iter().map(EvaluationReport::failed_cells).sum()))
        }
        Command::Selftest => {
            let report = selftest();
            print!("{report}");
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn exit_for(failed: usize) -> ExitCode {
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{failed} cell(s) failed");
        ExitCode::FAILURE
    }
}

fn cmd_select(args: &SelectArgs) -> Result<ExitCode, String> {
    let raw = match args.data.source()? {
        DataSource::Manifest(p) => load_manifest(&p),
        DataSource::Synthetic(spec) => synth_generate(&spec).map(|s| s.dataset),
    }
    .map_err(|e| e.to_string())?;
    let data = raw.normalized().map_err(|e| e.to_string())?;
    let total = data.total_features();
    let k = match (args.k, args.fraction) {
        (Some(k), _) => k,
        (None, Some(f)) => harness::k_for_fraction(f, total),
        (None, None) => return Err("give --k or --fraction".into()),
    };
    let result = select(&data, &args.selector.config(k)).map_err(|e| e.to_string())?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "rank,view,column,view_name,importance");
    for (rank, id) in result.selected.iter().enumerate() {
        let imp = result.scores.views[id.view].importance[id.column];
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            rank + 1,
            id.view,
            id.column,
            data.view(id.view).name(),
            imp
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn print_summary(report: &EvaluationReport) {
    eprintln!("fraction      k  valid        AP       AUC  coverage  rank_loss");
    for a in &report.aggregates {
        match (a.mean, a.std) {
            (Some(m), Some(s)) => eprintln!(
                "{:8.3} {:6} {:6}  {:.3}±{:.3} {:.3}±{:.3} {:.3}±{:.3} {:.3}±{:.3}",
                a.fraction, a.k, a.valid, m.ap, s.ap, m.auc, s.auc, m.coverage, s.coverage,
                m.ranking_loss, s.ranking_loss
            ),
            _ => eprintln!("{:8.3} {:6} {:6}  (no valid cells)", a.fraction, a.k, a.valid),
        }
    }
}

fn write_outputs(
    args: &ProtocolArgs,
    reports: &[EvaluationReport],
    json: mvfs::Result<String>,
) -> Result<(), String> {
    if let Some(path) = &args.out {
        let json = json.map_err(|e| e.to_string())?;
        fs::write(path, json).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Some(path) = &args.csv {
        let file = fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        harness::write_cells_csv(file, reports).map_err(|e| e.to_string())?;
    }
    Ok(())
}
