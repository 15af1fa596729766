//! Experiment configuration, orchestration and CSV output.
//!
//! Sweeps fix the noise variance at 1 and vary the total transmit power, so
//! an SNR of `s` dB means `P = 10^(s/10)`.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Parser;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{allocate, Scheme};
use crate::capacity::{db_to_linear, isi_gaussian_capacity, theorem1_curve, Theorem1Config};
use crate::channel::{ChannelModel, H1_TAPS, H2_TAPS};
use crate::mlc::{simulate_rates, FeedbackMode, DEFAULT_SAMPLES};

pub const NOISE_VARIANCE: f64 = 1.0;
pub const DEFAULT_HALF_WINDOW: usize = 200;
pub const DEFAULT_SEED: u64 = 1;
/// Channel used by `theorem1` when none is given: 10 standard-normal taps from seed 1.
pub const DEFAULT_THEOREM1_CHANNEL: ChannelSpec = ChannelSpec::Random { taps: 10, seed: 1 };
pub const DEFAULT_INTERFERENCE_RATIOS: [f64; 3] = [0.1, 1.0, 10.0];

pub const SWEEP_CSV_HEADER: &str = "snr_db,layers,scheme,r_mlc_bits,stderr_bits,capacity_bits";
pub const CAPACITY_CSV_HEADER: &str = "snr_db,capacity_bits";

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// Help or version text requested explicitly.
    #[error("{0}")]
    Info(String),
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Numeric(#[from] crate::Error),
}

impl ExperimentError {
    /// 1 for usage and configuration problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Info(_) => 0,
            ExperimentError::Usage(_) | ExperimentError::Config(_) => 1,
            ExperimentError::Io { .. } | ExperimentError::Numeric(_) => 2,
        }
    }
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Theorem1,
    RateSweep,
    AllocationCompare,
    Capacity,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [
        Experiment::Theorem1,
        Experiment::RateSweep,
        Experiment::AllocationCompare,
        Experiment::Capacity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Theorem1 => "theorem1",
            Experiment::RateSweep => "rate-sweep",
            Experiment::AllocationCompare => "allocation-compare",
            Experiment::Capacity => "capacity",
        }
    }

    fn simulates(self) -> bool {
        matches!(self, Experiment::RateSweep | Experiment::AllocationCompare)
    }
}

impl FromStr for Experiment {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                ExperimentError::Usage(format!(
                    "unknown experiment `{s}` (expected theorem1, rate-sweep, allocation-compare or capacity)"
                ))
            })
    }
}

/// How a channel is named on the command line or in a config file.
///
/// Accepted forms: `h1`, `h2`, `random:<taps>,<seed>`, or a comma-separated
/// tap list such as `1,0.5,-0.2` (optionally prefixed with `taps:`).
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    H1,
    H2,
    Taps(Vec<f64>),
    Random { taps: usize, seed: u64 },
}

/// Most taps a random channel may request.
pub const MAX_RANDOM_TAPS: usize = 4096;

impl ChannelSpec {
    pub fn resolve(&self, noise_variance: f64) -> crate::Result<ChannelModel> {
        match self {
            ChannelSpec::H1 => ChannelModel::new(H1_TAPS.to_vec(), noise_variance),
            ChannelSpec::H2 => ChannelModel::new(H2_TAPS.to_vec(), noise_variance),
            ChannelSpec::Taps(t) => ChannelModel::new(t.clone(), noise_variance),
            ChannelSpec::Random { taps, seed } => ChannelModel::random(*taps, *seed, noise_variance),
        }
    }
}

impl FromStr for ChannelSpec {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "h1" => return Ok(ChannelSpec::H1),
            "h2" => return Ok(ChannelSpec::H2),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("random:") {
            let (taps, seed) = rest.split_once(',').ok_or_else(|| {
                config_err(format!("random channel `{s}` must look like random:<taps>,<seed>"))
            })?;
            let taps: usize = taps
                .trim()
                .parse()
                .map_err(|_| config_err(format!("bad tap count in `{s}`")))?;
            let seed: u64 = seed
                .trim()
                .parse()
                .map_err(|_| config_err(format!("bad seed in `{s}`")))?;
            if taps == 0 || taps > MAX_RANDOM_TAPS {
                return Err(config_err(format!(
                    "random channel needs 1..={MAX_RANDOM_TAPS} taps, got {taps}"
                )));
            }
            return Ok(ChannelSpec::Random { taps, seed });
        }
        let list = s.strip_prefix("taps:").unwrap_or(s);
        let taps = list
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|_| {
                config_err(format!(
                    "unknown channel `{s}` (expected h1, h2, random:<taps>,<seed> or a comma-separated tap list)"
                ))
            })?;
        ChannelModel::new(taps.clone(), NOISE_VARIANCE).map_err(|e| config_err(format!("channel `{s}`: {e}")))?;
        Ok(ChannelSpec::Taps(taps))
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelSpec::H1 => f.write_str("h1"),
            ChannelSpec::H2 => f.write_str("h2"),
            ChannelSpec::Random { taps, seed } => write!(f, "random:{taps},{seed}"),
            ChannelSpec::Taps(t) => f.write_str(&join(t)),
        }
    }
}

fn join<T: fmt::Display>(values: &[T]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub channel: ChannelSpec,
    pub snr_grid_db: Vec<f64>,
    pub layer_counts: Vec<usize>,
    pub scheme: Scheme,
    pub half_window: usize,
    pub samples: usize,
    pub seed: u64,
    pub interference_ratios: Vec<f64>,
    pub feedback_mode: FeedbackMode,
    pub out: PathBuf,
}

/// Config-file fields; every one is optional and CLI flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub experiment: Option<String>,
    pub channel: Option<String>,
    pub snr_db: Option<Vec<f64>>,
    pub layers: Option<Vec<usize>>,
    pub scheme: Option<String>,
    pub half_window: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub interference_ratios: Option<Vec<f64>>,
    pub feedback: Option<String>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| config_err(format!("config file: {e}")))
    }
}

/// Command-line flags.
#[derive(Debug, Clone, Default, Parser)]
#[command(
    name = "mlc",
    version,
    about = "Multilevel coding with per-layer LMMSE equalization: rate, capacity and allocation experiments",
    arg_required_else_help = true
)]
pub struct CliArgs {
    /// theorem1 | rate-sweep | allocation-compare | capacity
    #[arg(long)]
    pub experiment: Option<String>,
    /// h1 | h2 | random:<taps>,<seed> | comma-separated taps
    #[arg(long, allow_hyphen_values = true)]
    pub channel: Option<String>,
    /// SNR grid in dB (input SINR grid for theorem1), comma-separated
    #[arg(long = "snr-db", value_delimiter = ',', allow_hyphen_values = true)]
    pub snr_db: Option<Vec<f64>>,
    /// Layer counts M, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    /// equal-power | equal-distance | equal-rate (rate-sweep only)
    #[arg(long)]
    pub scheme: Option<String>,
    /// LMMSE half window L_g (filter length 2L_g+1)
    #[arg(long = "half-window")]
    pub half_window: Option<usize>,
    /// Interior Monte Carlo symbols per layer
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// sigma_z^2/sigma_w^2 settings for theorem1, comma-separated
    #[arg(long = "interference-ratios", value_delimiter = ',')]
    pub interference_ratios: Option<Vec<f64>>,
    /// genie | hard-decision
    #[arg(long)]
    pub feedback: Option<String>,
    /// Output CSV path
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file supplying any subset of the above
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Parses `args` (including the program name) into a resolved configuration.
pub fn parse_cli<I, T>(args: I) -> Result<ExperimentConfig, ExperimentError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = CliArgs::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            ExperimentError::Info(e.to_string())
        }
        _ => ExperimentError::Usage(e.to_string()),
    })?;
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
            FileConfig::from_json(&text)?
        }
        None => FileConfig::default(),
    };
    resolve(cli, file)
}

/// Merges CLI flags over file values and fills defaults.
pub fn resolve(cli: CliArgs, file: FileConfig) -> Result<ExperimentConfig, ExperimentError> {
    let experiment: Experiment = cli
        .experiment
        .or(file.experiment)
        .ok_or_else(|| config_err("missing --experiment (theorem1, rate-sweep, allocation-compare or capacity)"))?
        .parse()?;
    let name = experiment.name();

    let channel = match cli.channel.or(file.channel) {
        Some(s) => s.parse()?,
        None if experiment == Experiment::Theorem1 => DEFAULT_THEOREM1_CHANNEL,
        None => ChannelSpec::H1,
    };

    let snr_grid_db = cli.snr_db.or(file.snr_db).unwrap_or_else(|| match experiment {
        Experiment::Theorem1 => (0..=8).map(|i| (-5 * i) as f64).collect(),
        Experiment::Capacity => (-2..=4).map(|i| 5.0 * i as f64).collect(),
        _ => vec![0.0, 5.0, 10.0],
    });
    if snr_grid_db.is_empty() || snr_grid_db.iter().any(|v| !v.is_finite()) {
        return Err(config_err("--snr-db needs at least one finite value"));
    }

    let layers = cli.layers.or(file.layers);
    let scheme = cli.scheme.or(file.scheme);
    let samples = cli.samples.or(file.samples);
    let feedback = cli.feedback.or(file.feedback);
    let ratios = cli.interference_ratios.or(file.interference_ratios);

    if !experiment.simulates() {
        for (flag, set) in [
            ("--layers", layers.is_some()),
            ("--samples", samples.is_some()),
            ("--feedback", feedback.is_some()),
        ] {
            if set {
                return Err(config_err(format!("{flag} does not apply to the {name} experiment")));
            }
        }
    }
    if experiment != Experiment::RateSweep && scheme.is_some() {
        return Err(config_err(format!(
            "--scheme only applies to rate-sweep ({name} {})",
            if experiment == Experiment::AllocationCompare {
                "always runs all three schemes"
            } else {
                "has no power allocation"
            }
        )));
    }
    if experiment != Experiment::Theorem1 && ratios.is_some() {
        return Err(config_err("--interference-ratios only applies to theorem1"));
    }

    let layer_counts = layers.unwrap_or_else(|| match experiment {
        Experiment::AllocationCompare => vec![20],
        _ => vec![10, 20, 50, 100],
    });
    if layer_counts.is_empty() || layer_counts.contains(&0) {
        return Err(config_err("--layers values must be at least 1"));
    }
    let scheme = match scheme {
        Some(s) => s.parse().map_err(|e: crate::Error| config_err(e.to_string()))?,
        None => Scheme::EqualPower,
    };
    let feedback_mode = match feedback {
        Some(s) => s.parse().map_err(|e: crate::Error| config_err(e.to_string()))?,
        None => FeedbackMode::Genie,
    };
    let samples = samples.unwrap_or(DEFAULT_SAMPLES);
    if samples == 0 {
        return Err(config_err("--samples must be at least 1"));
    }
    let interference_ratios = ratios.unwrap_or_else(|| DEFAULT_INTERFERENCE_RATIOS.to_vec());
    let out = cli
        .out
        .or(file.out)
        .ok_or_else(|| config_err("missing --out (path of the CSV to write)"))?;

    let config = ExperimentConfig {
        experiment,
        channel,
        snr_grid_db,
        layer_counts,
        scheme,
        half_window: cli.half_window.or(file.half_window).unwrap_or(DEFAULT_HALF_WINDOW),
        samples,
        seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        interference_ratios,
        feedback_mode,
        out,
    };
    config.channel.resolve(NOISE_VARIANCE).map_err(|e| config_err(format!("channel: {e}")))?;
    if experiment == Experiment::Theorem1 {
        theorem1_config(&config)?.validate().map_err(|e| config_err(e.to_string()))?;
    }
    Ok(config)
}

fn theorem1_config(config: &ExperimentConfig) -> Result<Theorem1Config, ExperimentError> {
    Ok(Theorem1Config {
        channel: config.channel.resolve(NOISE_VARIANCE)?,
        half_window: config.half_window,
        sinr_grid_db: config.snr_grid_db.clone(),
        interference_ratios: config.interference_ratios.clone(),
    })
}

/// One `(snr, M, scheme)` point of a rate sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub layers: usize,
    pub scheme: Scheme,
    pub r_mlc: f64,
    pub stderr: f64,
    pub capacity: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.12e},{:.6e},{:.12e}",
            r.snr_db, r.layers, r.scheme, r.r_mlc, r.stderr, r.capacity
        )
        .unwrap();
    }
    out
}

/// Achievable `R_MLC` for each `(snr, M, scheme)`; output order follows the input order.
pub fn rate_rows(
    channel: &ChannelSpec,
    points: &[(f64, usize, Scheme)],
    half_window: usize,
    samples: usize,
    feedback_mode: FeedbackMode,
    seed: u64,
) -> crate::Result<Vec<SweepRow>> {
    let ch = channel.resolve(NOISE_VARIANCE)?;
    points
        .par_iter()
        .map(|&(snr_db, layers, scheme)| {
            let total = db_to_linear(snr_db) * NOISE_VARIANCE;
            let allocation = allocate(scheme, layers, total, &ch, half_window)?;
            let (profile, _) =
                simulate_rates(&ch, allocation.powers(), half_window, samples, feedback_mode, seed)?;
            Ok(SweepRow {
                snr_db,
                layers,
                scheme,
                r_mlc: profile.total,
                stderr: profile.total_stderr(),
                capacity: isi_gaussian_capacity(&ch, total)?,
            })
        })
        .collect()
}

fn metadata(config: &ExperimentConfig, channel: &ChannelModel) -> String {
    let mut m = String::new();
    let mut line = |k: &str, v: String| writeln!(m, "# {k}: {v}").unwrap();
    line("experiment", config.experiment.name().into());
    line("version", version_string());
    line("channel", config.channel.to_string());
    line("taps", join(channel.taps()));
    line("noise_variance", format!("{NOISE_VARIANCE} (snr_db = 10 log10(P / noise_variance))"));
    line("half_window", config.half_window.to_string());
    line("seed", config.seed.to_string());
    if config.experiment.simulates() {
        line("samples", config.samples.to_string());
        line("feedback", match config.feedback_mode {
            FeedbackMode::Genie => "genie".into(),
            FeedbackMode::HardDecision => "hard-decision".into(),
        });
    }
    if config.experiment == Experiment::RateSweep {
        line("scheme", config.scheme.to_string());
    }
    m
}

pub fn version_string() -> String {
    match option_env!("MLC_GIT_DESCRIBE") {
        Some(describe) => format!("mlc-core {describe}"),
        None => format!("mlc-core {}", env!("CARGO_PKG_VERSION")),
    }
}

/// Produces the full file contents (metadata comments, header, rows).
pub fn render(config: &ExperimentConfig) -> Result<String, ExperimentError> {
    let channel = config.channel.resolve(NOISE_VARIANCE)?;
    let mut text = metadata(config, &channel);
    let body = match config.experiment {
        Experiment::Theorem1 => theorem1_curve(&theorem1_config(config)?)?.to_csv(),
        Experiment::Capacity => {
            let mut body = String::from(CAPACITY_CSV_HEADER);
            body.push('\n');
            for &snr in &config.snr_grid_db {
                let c = isi_gaussian_capacity(&channel, db_to_linear(snr) * NOISE_VARIANCE)?;
                writeln!(body, "{snr},{c:.12e}").unwrap();
            }
            body
        }
        Experiment::RateSweep | Experiment::AllocationCompare => {
            let schemes: Vec<Scheme> = if config.experiment == Experiment::RateSweep {
                vec![config.scheme]
            } else {
                Scheme::ALL.to_vec()
            };
            let points: Vec<(f64, usize, Scheme)> = config
                .snr_grid_db
                .iter()
                .flat_map(|&snr| {
                    let schemes = &schemes;
                    config
                        .layer_counts
                        .iter()
                        .flat_map(move |&m| schemes.iter().map(move |&s| (snr, m, s)))
                })
                .collect();
            sweep_csv(&rate_rows(
                &config.channel,
                &points,
                config.half_window,
                config.samples,
                config.feedback_mode,
                config.seed,
            )?)
        }
    };
    text.push_str(&body);
    Ok(text)
}

/// Runs the experiment and writes its CSV to `config.out`.
pub fn run(config: &ExperimentConfig) -> Result<PathBuf, ExperimentError> {
    let text = render(config)?;
    write_file(&config.out, &text)?;
    Ok(config.out.clone())
}

fn write_file(path: &Path, text: &str) -> Result<(), ExperimentError> {
    std::fs::write(path, text).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A parsed experiment CSV: `#` metadata, header columns and numeric-or-text cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut table = CsvTable::default();
        let mut header_seen = false;
        for (lineno, line) in text.lines().enumerate() {
            if let Some(comment) = line.strip_prefix('#') {
                if header_seen {
                    return Err(config_err(format!("line {}: metadata after header", lineno + 1)));
                }
                if let Some((k, v)) = comment.split_once(':') {
                    table.metadata.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            if !header_seen {
                table.columns = cells;
                header_seen = true;
            } else if cells.len() != table.columns.len() {
                return Err(config_err(format!(
                    "line {}: expected {} cells, found {}",
                    lineno + 1,
                    table.columns.len(),
                    cells.len()
                )));
            } else {
                table.rows.push(cells);
            }
        }
        if !header_seen {
            return Err(config_err("no header row"));
        }
        Ok(table)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Numeric values of a column.
    pub fn numbers(&self, name: &str) -> Result<Vec<f64>, ExperimentError> {
        let idx = self
            .column(name)
            .ok_or_else(|| config_err(format!("missing column `{name}`")))?;
        self.rows
            .iter()
            .map(|r| {
                r[idx]
                    .parse::<f64>()
                    .map_err(|_| config_err(format!("column `{name}`: `{}` is not a number", r[idx])))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<ExperimentConfig, ExperimentError> {
        parse_cli(std::iter::once("mlc").chain(args.iter().copied()))
    }

    #[test]
    fn named_channels() {
        let c = parse(&["--experiment", "capacity", "--channel", "h1", "--out", "x.csv"]).unwrap();
        assert_eq!(c.channel.resolve(1.0).unwrap().taps(), &[1.0, 1.0]);
        let c = parse(&["--experiment", "capacity", "--channel", "h2", "--out", "x.csv"]).unwrap();
        let taps = c.channel.resolve(1.0).unwrap().taps().to_vec();
        assert_eq!(taps.len(), 10);
        assert_eq!(&taps[..2], &[-0.432, -1.665]);
    }

    #[test]
    fn channel_spec_forms() {
        assert_eq!("random:10,7".parse::<ChannelSpec>().unwrap(), ChannelSpec::Random { taps: 10, seed: 7 });
        assert_eq!("1,-0.5".parse::<ChannelSpec>().unwrap(), ChannelSpec::Taps(vec![1.0, -0.5]));
        assert_eq!("taps:2".parse::<ChannelSpec>().unwrap(), ChannelSpec::Taps(vec![2.0]));
        for bad in ["h3", "random:0,1", "random:10", "0,0", "", "1,,2", "random:5000,1"] {
            assert!(bad.parse::<ChannelSpec>().is_err(), "{bad}");
        }
        for spec in ["h1", "h2", "random:3,9", "1,0.25"] {
            let parsed: ChannelSpec = spec.parse().unwrap();
            assert_eq!(parsed.to_string().parse::<ChannelSpec>().unwrap(), parsed);
        }
    }

    #[test]
    fn no_args_is_usage_error() {
        let e = parse(&[]).unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn missing_and_conflicting_fields() {
        let e = parse(&["--channel", "h1", "--out", "x"]).unwrap_err();
        assert!(e.to_string().contains("--experiment"), "{e}");
        let e = parse(&["--experiment", "capacity"]).unwrap_err();
        assert!(e.to_string().contains("--out"), "{e}");
        let e = parse(&["--experiment", "capacity", "--layers", "10", "--out", "x"]).unwrap_err();
        assert!(e.to_string().contains("--layers"), "{e}");
        let e = parse(&["--experiment", "allocation-compare", "--scheme", "equal-rate", "--out", "x"]).unwrap_err();
        assert!(e.to_string().contains("--scheme"), "{e}");
        let e = parse(&["--experiment", "warp", "--out", "x"]).unwrap_err();
        assert!(e.to_string().contains("unknown experiment"), "{e}");
        assert_eq!(e.exit_code(), 1);
        let e = parse(&["--experiment", "theorem1", "--snr-db", "-10,0", "--out", "x"]).unwrap_err();
        assert!(e.to_string().contains("decreasing"), "{e}");
    }

    #[test]
    fn negative_grid_values() {
        let c = parse(&["--experiment", "theorem1", "--snr-db", "0,-20,-40", "--out", "x"]).unwrap();
        assert_eq!(c.snr_grid_db, vec![0.0, -20.0, -40.0]);
        assert_eq!(c.channel, DEFAULT_THEOREM1_CHANNEL);
        assert_eq!(c.half_window, 200);
    }

    #[test]
    fn cli_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(
            &path,
            r#"{"experiment":"rate-sweep","channel":"h2","layers":[2,4],"seed":9,"out":"file.csv"}"#,
        )
        .unwrap();
        let c = parse(&["--config", path.to_str().unwrap(), "--seed", "3", "--scheme", "equal-rate"]).unwrap();
        assert_eq!(c.experiment, Experiment::RateSweep);
        assert_eq!(c.channel, ChannelSpec::H2);
        assert_eq!(c.layer_counts, vec![2, 4]);
        assert_eq!(c.seed, 3);
        assert_eq!(c.scheme, Scheme::EqualRate);
        assert_eq!(c.out, PathBuf::from("file.csv"));

        std::fs::write(&path, r#"{"experiment":"capacity","bogus":1}"#).unwrap();
        let e = parse(&["--config", path.to_str().unwrap()]).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn capacity_table() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("cap.csv");
        let c = parse(&[
            "--experiment", "capacity", "--channel", "1", "--snr-db", "0", "--out", out.to_str().unwrap(),
        ])
        .unwrap();
        run(&c).unwrap();
        let table = CsvTable::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(table.columns, vec!["snr_db", "capacity_bits"]);
        let cap = table.numbers("capacity_bits").unwrap();
        assert!((cap[0] - 0.5).abs() < 1e-9);
        assert_eq!(table.meta("taps"), Some("1"));
    }

    #[test]
    fn unwritable_path_is_runtime_error() {
        let c = parse(&[
            "--experiment", "capacity", "--snr-db", "0", "--out", "/nonexistent-dir/x.csv",
        ])
        .unwrap();
        assert_eq!(run(&c).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn csv_table_rejects_ragged_rows() {
        assert!(CsvTable::parse("a,b\n1\n").is_err());
        assert!(CsvTable::parse("# only: metadata\n").is_err());
        let t = CsvTable::parse("# k: v\na,b\n1,2\n").unwrap();
        assert_eq!(t.numbers("b").unwrap(), vec![2.0]);
        assert!(t.numbers("c").is_err());
    }
}
