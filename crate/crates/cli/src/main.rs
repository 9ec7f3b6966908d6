//! `watchrisk`: batch watchlist risk analysis over match-score CSVs.
//!
//! Exit codes: 0 success, 1 partial (some travelers skipped), 2 input error,
//! 3 configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};
use thiserror::Error;
use watchrisk_core::entropy::Divergences;
use watchrisk_core::report::{
    assess_from_divergences, run_assess, run_landscape, InputInfo, Level2,
};
use watchrisk_core::synth::generate;
use watchrisk_core::{
    Aggregator, AnalysisConfig, KlOrientation, LossVector, Population, RiskReport, ScoreClass,
    SynthSpec,
};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
        }
    }
}

impl From<watchrisk_core::Error> for CliError {
    fn from(e: watchrisk_core::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "watchrisk", version, about = "Watchlist risk landscape and traveler assessment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Level I: menagerie, error rates and cost landscape.
    Landscape(LandscapeArgs),
    /// Level II: per-traveler relative-entropy risk.
    Assess(AssessArgs),
    /// Generate a synthetic population with planted categories.
    Synth(SynthArgs),
    /// Per-category FNR/FPR table as CSV.
    Rates(RatesArgs),
}

#[derive(Args, Clone, Default)]
struct AnalysisArgs {
    /// Config file (TOML); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    score_max: Option<f64>,
    #[arg(long)]
    tail_fraction: Option<f64>,
    /// mean | extreme
    #[arg(long)]
    aggregator: Option<Aggregator>,
    /// Comma-separated thresholds, e.g. 10,50,100
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long)]
    cfn: Option<f64>,
    #[arg(long)]
    cfp: Option<f64>,
    #[arg(long)]
    pg: Option<f64>,
    /// sheep,goat,wolf_lamb losses
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// ref-first | traveler-first
    #[arg(long)]
    kl_orientation: Option<KlOrientation>,
    #[arg(long)]
    min_scores: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Report path; side tables are written next to it. Stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pin the report timestamp (seconds since the Unix epoch).
    #[arg(long, conflicts_with = "no_timestamp")]
    timestamp: Option<u64>,
    /// Omit the report timestamp.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct LandscapeArgs {
    #[command(flatten)]
    report: ReportArgs,
    #[command(flatten)]
    analysis: AnalysisArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Genuine,
    Impostor,
    Both,
}

#[derive(Args)]
struct AssessArgs {
    #[command(flatten)]
    report: ReportArgs,
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// Comma-separated traveler ids; all subjects when omitted.
    #[arg(long, value_delimiter = ',')]
    travelers: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "both")]
    class: ClassArg,
    /// Skip histogramming and score the given d_goat,d_wl,d_sheep directly.
    #[arg(long)]
    from_divergences: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    /// Synth spec (JSON); 568-subject defaults when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for scores.csv and ground_truth.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long)]
    scores: PathBuf,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    analysis: AnalysisArgs,
}

impl AnalysisArgs {
    /// Flags over config file over defaults.
    fn resolve(&self) -> Result<AnalysisConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                toml::from_str(&text).map_err(|e| {
                    CliError::Config(format!("invalid config {}: {e}", path.display()))
                })?
            }
            None => AnalysisConfig::default(),
        };
        if let Some(v) = self.score_max {
            cfg.score_max = v;
        }
        if let Some(v) = self.tail_fraction {
            cfg.tail_fraction = v;
        }
        if let Some(v) = self.aggregator {
            cfg.aggregator = v;
        }
        if let Some(v) = &self.thresholds {
            cfg.thresholds = Some(v.clone());
        }
        if let Some(v) = self.cfn {
            cfg.c_fn = v;
        }
        if let Some(v) = self.cfp {
            cfg.c_fp = v;
        }
        if let Some(v) = self.pg {
            cfg.p_g = v;
        }
        if let Some(v) = &self.loss {
            cfg.loss = v
                .parse::<LossVector>()
                .map_err(|e| CliError::Config(format!("--loss: {e}")))?;
        }
        if let Some(v) = self.bins {
            cfg.bins = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.kl_orientation {
            cfg.kl_orientation = v;
        }
        if let Some(v) = self.min_scores {
            cfg.min_scores = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ReportArgs {
    fn timestamp(&self) -> Option<u64> {
        if self.no_timestamp {
            return None;
        }
        self.timestamp.or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs())
        })
    }
}

fn load_scores(path: &Path, cfg: &AnalysisConfig) -> Result<(Population, InputInfo)> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let pop = Population::from_csv_reader(bytes.as_slice(), cfg.score_max)
        .map_err(watchrisk_core::Error::from)?;
    let info = InputInfo {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        n_records: pop.record_count(),
        n_subjects: pop.len(),
    };
    Ok((pop, info))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

/// `report.json` -> `report.<suffix>.csv`
fn side_table(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn emit(report: &RiskReport, out: Option<&Path>, tables: &[(&str, String)]) -> Result<()> {
    let json = report.to_json();
    match out {
        Some(path) => {
            write(path, &json)?;
            for (suffix, csv) in tables {
                write(&side_table(path, suffix), csv)?;
            }
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn require_scores(args: &ReportArgs) -> Result<&Path> {
    args.scores
        .as_deref()
        .ok_or_else(|| CliError::Input("--scores is required".into()))
}

fn cmd_landscape(args: &LandscapeArgs) -> Result<u8> {
    let cfg = args.analysis.resolve()?;
    let (pop, info) = load_scores(require_scores(&args.report)?, &cfg)?;
    let run = run_landscape(&pop, &cfg)?;

    let mut report = RiskReport::new(cfg);
    report.generated_at_unix = args.report.timestamp();
    report.input = Some(info);
    let tables = [
        ("menagerie", run.assignment.to_csv()),
        ("rates", run.rates.to_csv()),
        ("landscape", run.level1.landscape.to_csv()),
    ];
    report.level1 = Some(run.level1);
    emit(&report, args.report.out.as_deref(), &tables)?;
    Ok(0)
}

fn parse_divergences(s: &str) -> Result<Divergences> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Config(format!("--from-divergences: {e}")))?;
    match v.as_slice() {
        [goat, wl, sheep] => Ok(Divergences {
            goat: *goat,
            wolf_lamb: *wl,
            sheep: *sheep,
        }),
        _ => Err(CliError::Config(
            "--from-divergences expects d_goat,d_wl,d_sheep".into(),
        )),
    }
}

fn cmd_assess(args: &AssessArgs) -> Result<u8> {
    let cfg = args.analysis.resolve()?;
    let classes: &[ScoreClass] = match args.class {
        ClassArg::Genuine => &[ScoreClass::Genuine],
        ClassArg::Impostor => &[ScoreClass::Impostor],
        ClassArg::Both => &ScoreClass::ALL,
    };

    let (level2, input): (Level2, Option<InputInfo>) = match &args.from_divergences {
        Some(d) => {
            let d = parse_divergences(d)?;
            let id = args
                .travelers
                .as_ref()
                .and_then(|t| t.first().cloned())
                .unwrap_or_else(|| "injected".into());
            (
                assess_from_divergences(&id, classes[0], d, &cfg)?,
                None,
            )
        }
        None => {
            let (pop, info) = load_scores(require_scores(&args.report)?, &cfg)?;
            (
                run_assess(&pop, args.travelers.as_deref(), classes, &cfg)?,
                Some(info),
            )
        }
    };

    let code = match (level2.travelers.is_empty(), level2.skipped.is_empty()) {
        (_, true) => 0,
        (false, false) => 1,
        (true, false) => 2,
    };
    for s in &level2.skipped {
        let class = s.class.map(|c| c.as_str()).unwrap_or("-");
        eprintln!("skipped {} ({class}): {}", s.traveler_id, s.reason);
    }

    let mut report = RiskReport::new(cfg);
    report.generated_at_unix = args.report.timestamp();
    report.input = input;
    let tables = [("travelers", level2.travelers_csv())];
    report.level2 = Some(level2);
    emit(&report, args.report.out.as_deref(), &tables)?;
    Ok(code)
}

fn cmd_synth(args: &SynthArgs) -> Result<u8> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Input(format!("cannot read spec {}: {e}", path.display()))
            })?;
            serde_json::from_str::<SynthSpec>(&text).map_err(|e| {
                CliError::Config(format!("invalid spec {}: {e}", path.display()))
            })?
        }
        None => SynthSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let out = generate(&spec).map_err(watchrisk_core::Error::from)?;
    write(&args.out.join("scores.csv"), &out.scores_csv())?;
    write(&args.out.join("ground_truth.csv"), &out.ground_truth_csv())?;
    Ok(0)
}

fn cmd_rates(args: &RatesArgs) -> Result<u8> {
    let cfg = args.analysis.resolve()?;
    let (pop, _) = load_scores(&args.scores, &cfg)?;
    let run = run_landscape(&pop, &cfg)?;
    let csv = run.rates.to_csv();
    match &args.out {
        Some(path) => write(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Landscape(a) => cmd_landscape(a),
        Command::Assess(a) => cmd_assess(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Rates(a) => cmd_rates(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
