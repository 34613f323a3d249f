//! The `hsic` command-line front end.
//!
//! Subcommands: `estimate`, `analytic`, `minimax`, `certify`. Exit codes are
//! a stable contract: 0 success, 1 certificate violation, 2 data error,
//! 3 usage error.

pub mod io;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;

use crate::analytic::{adversarial_hsic2, hsic2_gaussian, lecam_bound, theorem_constant};
use crate::error::Error;
use crate::estimators::{hsic_nystrom, Dataset, GramStats};
use crate::gaussian::{
    kl_adversarial_bound, kl_adversarial_exact, make_adversarial_cov, BlockStructure, GaussianMeasure,
};
use crate::kernels::{KernelFamily, KernelSpec, ProductKernel};
use crate::lecam::{self, Certificate, Estimator, ExperimentConfig, ExperimentReport, RateFit, KL_BUDGET};
use crate::spectral::gap_constant_partii;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CERTIFICATE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Certificate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Certificate(_) => EXIT_CERTIFICATE,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Certificate(m) => m,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Argument and precondition problems are usage errors; everything else
/// (numerics, malformed input) is a data error.
fn classify(err: Error) -> CliError {
    match err {
        Error::InvalidArgument(m) => CliError::Usage(m),
        Error::Structure(m) => CliError::Usage(m),
        other => CliError::Data(other.to_string()),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hsic",
    version,
    about = "HSIC/MMD for Gaussian models and two-point minimax experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate HSIC from a CSV dataset
    Estimate(EstimateArgs),
    /// Closed-form HSIC² of a Gaussian under the Gaussian product kernel
    Analytic(AnalyticArgs),
    /// Run the two-point risk simulation and fit convergence rates
    Minimax(MinimaxArgs),
    /// Tabulate the KL budget and HSIC separation certificates
    Certify(CertifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    Laplace,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Gaussian => KernelFamily::Gaussian,
            KernelArg::Laplace => KernelFamily::Laplace,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstArg {
    V,
    U,
    Nystrom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    Csv,
    #[default]
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct KernelOpts {
    /// Block dimensions, e.g. `1,1`
    #[arg(long)]
    pub blocks: Option<String>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelArg,
    /// Kernel bandwidth; repeat once per block or give a single value for all
    #[arg(long, num_args = 1)]
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputOpts {
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Worker threads (results do not depend on this)
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub kernel: KernelOpts,
    #[command(flatten)]
    pub out: OutputOpts,
    #[arg(long)]
    pub input: PathBuf,
    /// Skip one header line
    #[arg(long)]
    pub header: bool,
    #[arg(long = "est", value_enum)]
    pub est: Vec<EstArg>,
    /// Nyström landmark count (capped at n)
    #[arg(long, default_value_t = 100)]
    pub landmarks: usize,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyticArgs {
    #[command(flatten)]
    pub kernel: KernelOpts,
    #[command(flatten)]
    pub out: OutputOpts,
    /// Correlation of the coordinates straddling the first block boundary
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Covariance matrix as a d×d CSV (alternative to --rho)
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Clone, Args)]
pub struct MinimaxArgs {
    #[command(flatten)]
    pub kernel: KernelOpts,
    #[command(flatten)]
    pub out: OutputOpts,
    /// Sample sizes: comma list with optional inclusive ranges `a..b`
    #[arg(long)]
    pub n_grid: Option<String>,
    #[arg(long, default_value_t = lecam::DEFAULT_REPS)]
    pub reps: usize,
    #[arg(long = "est", value_enum)]
    pub est: Vec<EstArg>,
    #[arg(long, default_value_t = 100)]
    pub landmarks: usize,
    /// Frequencies for spectral estimates (Laplace kernel only)
    #[arg(long, default_value_t = 200_000)]
    pub spectral_samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub kernel: KernelOpts,
    #[command(flatten)]
    pub out: OutputOpts,
    #[arg(long, default_value = "2..1000")]
    pub n_grid: String,
    /// Frequencies for the spectral gap constant
    #[arg(long, default_value_t = 100_000)]
    pub spectral_samples: usize,
}

/// JSON envelope shared by every subcommand.
#[derive(Debug, Serialize)]
pub struct Report<C: Serialize, R: Serialize> {
    pub config: C,
    pub records: Vec<R>,
    pub certificates: Vec<Certificate>,
    pub rate_fits: BTreeMap<String, RateFit>,
    pub lecam_value: Option<f64>,
}

pub fn parse_blocks(s: &str) -> CliResult<BlockStructure> {
    let dims = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("invalid --blocks entry '{p}'")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let block = BlockStructure::new(dims).map_err(classify)?;
    block.require_hsic().map_err(classify)?;
    Ok(block)
}

/// Parse `64,128` or `2..1000` (inclusive) or mixtures of both.
pub fn parse_grid(s: &str) -> CliResult<Vec<usize>> {
    let bad = |p: &str| CliError::Usage(format!("invalid --n-grid entry '{p}'"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| bad(part))?;
            let b: usize = b.trim().parse().map_err(|_| bad(part))?;
            if a > b {
                return Err(bad(part));
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad(part))?);
        }
    }
    Ok(out)
}

fn require_blocks(opts: &KernelOpts) -> CliResult<BlockStructure> {
    let s = opts
        .blocks
        .as_deref()
        .ok_or_else(|| CliError::Usage("--blocks is required".into()))?;
    parse_blocks(s)
}

fn gammas(opts: &KernelOpts, blocks: usize) -> CliResult<Vec<f64>> {
    let g = match opts.gamma.len() {
        0 => vec![1.0; blocks],
        1 => vec![opts.gamma[0]; blocks],
        k if k == blocks => opts.gamma.clone(),
        k => return Err(CliError::Usage(format!("{k} --gamma values for {blocks} blocks"))),
    };
    if let Some(bad) = g.iter().find(|v| **v <= 0.0 || !v.is_finite()) {
        return Err(CliError::Usage(format!("gamma = {bad} must be positive")));
    }
    Ok(g)
}

fn common_gamma(opts: &KernelOpts, blocks: usize) -> CliResult<f64> {
    let g = gammas(opts, blocks)?;
    if g.iter().any(|v| *v != g[0]) {
        return Err(CliError::Usage(
            "this subcommand needs one bandwidth shared by all blocks".into(),
        ));
    }
    Ok(g[0])
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| CliError::Data(e.to_string()))
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v).map_err(|e| CliError::Data(e.to_string()))?;
    s.push(b'\n');
    Ok(s)
}

fn to_csv<T: Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Data(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

fn emit<C: Serialize, R: Serialize>(out: &OutputOpts, report: &Report<C, R>) -> CliResult<()> {
    let bytes = match out.format {
        Format::Json => to_json(report)?,
        Format::Csv => to_csv(&report.records)?,
    };
    write_output(out.output.as_deref(), &bytes)
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EstimateConfig {
    pub input: String,
    pub blocks: BlockStructure,
    pub kernel: KernelFamily,
    pub gamma: Vec<f64>,
    pub seed: u64,
    pub landmarks: usize,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct EstimateRecord {
    pub estimator: String,
    pub value_hsic2: Option<f64>,
    pub value_hsic: Option<f64>,
    pub n: usize,
    pub d: usize,
    pub blocks: String,
    pub gamma: String,
    pub seed: u64,
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn cmd_estimate(args: &EstimateArgs) -> CliResult<Report<EstimateConfig, EstimateRecord>> {
    let block = require_blocks(&args.kernel)?;
    let gamma = gammas(&args.kernel, block.num_blocks())?;
    let family: KernelFamily = args.kernel.kernel.into();
    let specs = gamma
        .iter()
        .map(|&g| KernelSpec::new(family, g))
        .collect::<crate::Result<Vec<_>>>()
        .map_err(classify)?;
    let pk = ProductKernel::new(block.clone(), specs).map_err(classify)?;
    let ests = if args.est.is_empty() {
        vec![EstArg::V]
    } else {
        args.est.clone()
    };

    let values = io::read_matrix_file(&args.input, args.header).map_err(classify)?;
    let data = Dataset::new(values, block.clone()).map_err(classify)?;
    let n = data.n();
    for e in &ests {
        match e {
            EstArg::V if n < 2 => return Err(CliError::Usage(format!("V-statistic requires n ≥ 2, got {n}"))),
            EstArg::U if n < 4 => return Err(CliError::Usage(format!("U-statistic requires n ≥ 4, got {n}"))),
            EstArg::U | EstArg::Nystrom if block.num_blocks() != 2 => {
                return Err(CliError::Usage(format!("{e:?} estimator requires exactly 2 blocks")))
            }
            EstArg::Nystrom if n < 2 || args.landmarks < 2 => {
                return Err(CliError::Usage("Nyström needs n ≥ 2 and --landmarks ≥ 2".into()))
            }
            _ => {}
        }
    }

    let records = in_pool(args.out.threads, || -> CliResult<Vec<EstimateRecord>> {
        let stats = if ests.iter().any(|e| matches!(e, EstArg::V | EstArg::U)) {
            Some(GramStats::compute(&pk, &data).map_err(classify)?)
        } else {
            None
        };
        let mut out = Vec::new();
        for e in &ests {
            let (name, h2, h) = match e {
                EstArg::V => {
                    let v = stats.as_ref().expect("stats").hsic_v().map_err(classify)?;
                    ("v", Some(v), Some(v.max(0.0).sqrt()))
                }
                EstArg::U => {
                    let v = stats.as_ref().expect("stats").hsic_u().map_err(classify)?;
                    ("u", Some(v), Some(v.max(0.0).sqrt()))
                }
                EstArg::Nystrom => {
                    let l = args.landmarks.min(n);
                    let (h, _) = hsic_nystrom(&pk, &data, l, crate::rng::derive_seed(args.out.seed, "cli.nystrom", 0))
                        .map_err(classify)?;
                    ("nystrom", None, Some(h))
                }
            };
            out.push(EstimateRecord {
                estimator: name.into(),
                value_hsic2: h2,
                value_hsic: h,
                n,
                d: data.dim(),
                blocks: block.to_string(),
                gamma: join(&gamma),
                seed: args.out.seed,
            });
        }
        Ok(out)
    })??;

    Ok(Report {
        config: EstimateConfig {
            input: args.input.display().to_string(),
            blocks: block,
            kernel: family,
            gamma,
            seed: args.out.seed,
            landmarks: args.landmarks,
        },
        records,
        certificates: vec![],
        rate_fits: BTreeMap::new(),
        lecam_value: None,
    })
}

#[derive(Debug, Serialize)]
pub struct AnalyticConfig {
    pub blocks: BlockStructure,
    pub gamma: f64,
    pub rho: Option<f64>,
    pub input: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct AnalyticRecord {
    pub hsic2: f64,
    pub hsic: f64,
    pub term_i: f64,
    pub term_ii: f64,
    pub term_iii: f64,
}

pub fn cmd_analytic(args: &AnalyticArgs) -> CliResult<Report<AnalyticConfig, AnalyticRecord>> {
    let block = require_blocks(&args.kernel)?;
    if args.kernel.kernel != KernelArg::Gaussian {
        return Err(CliError::Usage(
            "the closed form exists only for the gaussian kernel".into(),
        ));
    }
    let gamma = common_gamma(&args.kernel, block.num_blocks())?;
    let cov = match (&args.rho, &args.input) {
        (Some(rho), None) => make_adversarial_cov(&block, *rho).map_err(|e| CliError::Data(e.to_string()))?,
        (None, Some(path)) => io::read_matrix_file(path, args.header).map_err(|e| CliError::Data(e.to_string()))?,
        _ => return Err(CliError::Usage("give exactly one of --rho or --input".into())),
    };
    let d = block.total_dim();
    if cov.shape() != (d, d) {
        return Err(CliError::Usage(format!(
            "covariance is {}×{}, blocks need {d}×{d}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let g = GaussianMeasure::new(DVector::zeros(d), cov).map_err(|e| CliError::Data(e.to_string()))?;
    let h = hsic2_gaussian(&g, &block, gamma).map_err(classify)?;
    Ok(Report {
        config: AnalyticConfig {
            blocks: block,
            gamma,
            rho: args.rho,
            input: args.input.as_ref().map(|p| p.display().to_string()),
        },
        records: vec![AnalyticRecord {
            hsic2: h.value,
            hsic: h.hsic(),
            term_i: h.term_i,
            term_ii: h.term_ii,
            term_iii: h.term_iii,
        }],
        certificates: vec![],
        rate_fits: BTreeMap::new(),
        lecam_value: None,
    })
}

/// One CSV row per `(n, estimator)`.
#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct MinimaxRow {
    pub n: usize,
    pub rho_n: f64,
    pub kl_exact: f64,
    pub kl_bound: f64,
    pub analytic_gap: f64,
    pub theorem_c: f64,
    pub gap_lower: f64,
    pub estimator: Option<String>,
    pub reps: Option<usize>,
    pub threshold: Option<f64>,
    pub p0_rmse: Option<f64>,
    pub p1_rmse: Option<f64>,
    pub sup_risk: Option<f64>,
    pub p0_exceed_prob: Option<f64>,
    pub p1_exceed_prob: Option<f64>,
    pub sup_exceed_prob: Option<f64>,
    pub p1_rmse_hsic2: Option<f64>,
    pub slope: Option<f64>,
    pub r_squared: Option<f64>,
}

pub fn minimax_rows(report: &ExperimentReport) -> Vec<MinimaxRow> {
    let mut rows = Vec::new();
    for r in &report.records {
        let base = MinimaxRow {
            n: r.n,
            rho_n: r.rho_n,
            kl_exact: r.kl_exact,
            kl_bound: r.kl_bound,
            analytic_gap: r.analytic_gap,
            theorem_c: r.theorem_c,
            gap_lower: r.gap_lower,
            estimator: None,
            reps: None,
            threshold: None,
            p0_rmse: None,
            p1_rmse: None,
            sup_risk: None,
            p0_exceed_prob: None,
            p1_exceed_prob: None,
            sup_exceed_prob: None,
            p1_rmse_hsic2: None,
            slope: None,
            r_squared: None,
        };
        if r.risks.is_empty() {
            rows.push(base);
            continue;
        }
        for s in &r.risks {
            let fit = report.rate_fits.get(&s.estimator);
            rows.push(MinimaxRow {
                estimator: Some(s.estimator.clone()),
                reps: Some(s.reps),
                threshold: Some(s.threshold),
                p0_rmse: Some(s.p0.rmse),
                p1_rmse: Some(s.p1.rmse),
                sup_risk: Some(s.sup_risk),
                p0_exceed_prob: Some(s.p0.exceed_prob),
                p1_exceed_prob: Some(s.p1.exceed_prob),
                sup_exceed_prob: Some(s.sup_exceed_prob),
                p1_rmse_hsic2: Some(s.p1.rmse_hsic2),
                slope: fit.map(|f| f.slope),
                r_squared: fit.map(|f| f.r_squared),
                ..base.clone()
            });
        }
    }
    rows
}

fn estimators_from(args: &[EstArg], landmarks: usize) -> Vec<Estimator> {
    let list = if args.is_empty() {
        vec![EstArg::V, EstArg::U]
    } else {
        args.to_vec()
    };
    let mut out: Vec<Estimator> = Vec::new();
    for e in list {
        let est = match e {
            EstArg::V => Estimator::v(),
            EstArg::U => Estimator::u(),
            EstArg::Nystrom => Estimator::nystrom(landmarks),
        };
        if !out.contains(&est) {
            out.push(est);
        }
    }
    out
}

pub fn minimax_config(args: &MinimaxArgs) -> CliResult<ExperimentConfig> {
    let block = match &args.kernel.blocks {
        Some(s) => parse_blocks(s)?,
        None => BlockStructure::pair(1, 1).expect("valid"),
    };
    let gamma = common_gamma(&args.kernel, block.num_blocks())?;
    let n_grid = match &args.n_grid {
        Some(s) => parse_grid(s)?,
        None => lecam::DEFAULT_N_GRID.to_vec(),
    };
    let estimators = estimators_from(&args.est, args.landmarks);
    if !estimators.is_empty() && n_grid.len() < 3 {
        return Err(CliError::Usage(format!(
            "rate fit needs ≥ 3 grid points, got {}",
            n_grid.len()
        )));
    }
    Ok(ExperimentConfig {
        gamma,
        family: args.kernel.kernel.into(),
        block,
        n_grid,
        estimators,
        reps: args.reps,
        seed: args.out.seed,
        spectral_samples: args.spectral_samples,
    })
}

#[derive(Debug, Serialize)]
pub struct CertificateSummary {
    pub all_pass: bool,
    pub kl_chain: bool,
    pub gap: bool,
}

fn summary_of(certs: &[Certificate]) -> CertificateSummary {
    let ok = |pred: &dyn Fn(&Certificate) -> bool| certs.iter().filter(|c| pred(c)).all(|c| c.pass);
    CertificateSummary {
        all_pass: certs.iter().all(|c| c.pass),
        kl_chain: ok(&|c| c.name.starts_with("kl")),
        gap: ok(&|c| !c.name.starts_with("kl")),
    }
}

/// Runs the experiment and writes its outputs; `Err(Certificate)` when any
/// inequality fails.
pub fn cmd_minimax(args: &MinimaxArgs) -> CliResult<ExperimentReport> {
    let config = minimax_config(args)?;
    let report = in_pool(args.out.threads, || lecam::run_experiment(&config))?.map_err(classify)?;
    let rows = minimax_rows(&report);
    match args.out.format {
        Format::Json => {
            let full = Report {
                config: &report.config,
                records: report.records.clone(),
                certificates: report.certificates.clone(),
                rate_fits: report.rate_fits.clone(),
                lecam_value: Some(report.lecam_value),
            };
            write_output(args.out.output.as_deref(), &to_json(&full)?)?;
        }
        Format::Csv => {
            write_output(args.out.output.as_deref(), &to_csv(&rows)?)?;
            let summary = Report::<_, MinimaxRow> {
                config: serde_json::json!({
                    "experiment": &report.config,
                    "summary": summary_of(&report.certificates),
                }),
                records: vec![],
                certificates: report.certificates.clone(),
                rate_fits: report.rate_fits.clone(),
                lecam_value: Some(report.lecam_value),
            };
            let bytes = to_json(&summary)?;
            match &args.out.output {
                Some(p) => write_output(Some(&summary_path(p)), &bytes)?,
                None => eprint!("{}", String::from_utf8_lossy(&bytes)),
            }
        }
    }
    check_certificates(&report.certificates)?;
    Ok(report)
}

/// `<output>.summary.json` next to a CSV report.
pub fn summary_path(p: &Path) -> PathBuf {
    let mut s: OsString = p.as_os_str().to_owned();
    s.push(".summary.json");
    PathBuf::from(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

impl From<bool> for Verdict {
    fn from(b: bool) -> Self {
        if b {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct CertifyRow {
    pub n: usize,
    pub kl_exact: f64,
    pub kl_bound: f64,
    pub kl_budget: f64,
    pub kl_verdict: Verdict,
    pub hsic_gap: f64,
    pub gap_lower: f64,
    pub gap_verdict: Verdict,
    pub partii_hsic2: f64,
    /// `ρ² · (2c)²` with the Monte Carlo constant.
    pub partii_bound: f64,
    /// `ρ² · SE` of the Monte Carlo constant.
    pub partii_se: f64,
    pub partii_verdict: Verdict,
}

#[derive(Debug, Serialize)]
pub struct CertifyConfig {
    pub blocks: BlockStructure,
    pub gamma: f64,
    pub n_grid: Vec<usize>,
    pub excluded: Vec<usize>,
    pub spectral_samples: usize,
    pub seed: u64,
    pub gap_constant: f64,
    pub gap_constant_se: f64,
}

pub fn cmd_certify(args: &CertifyArgs) -> CliResult<Report<CertifyConfig, CertifyRow>> {
    let block = require_blocks(&args.kernel)?;
    if args.kernel.kernel != KernelArg::Gaussian {
        return Err(CliError::Usage(
            "certify needs the gaussian kernel (closed-form HSIC)".into(),
        ));
    }
    let gamma = common_gamma(&args.kernel, block.num_blocks())?;
    let requested = parse_grid(&args.n_grid)?;
    let (n_grid, excluded): (Vec<usize>, Vec<usize>) = requested.into_iter().partition(|&n| n >= 2);
    for n in &excluded {
        eprintln!("note: n = {n} excluded; the two-point bounds start at n = 2");
    }
    if n_grid.is_empty() {
        return Err(CliError::Usage("no grid entries with n ≥ 2".into()));
    }
    let d = block.total_dim();
    let spec = KernelSpec::gaussian(gamma).map_err(classify)?;
    let constant = in_pool(args.out.threads, || {
        gap_constant_partii(
            &spec,
            &block,
            args.spectral_samples,
            crate::rng::derive_seed(args.out.seed, "cli.certify", 0),
        )
    })?
    .map_err(classify)?;
    let c = theorem_constant(gamma, d);

    let mut rows = Vec::with_capacity(n_grid.len());
    let mut certificates = Vec::new();
    for &n in &n_grid {
        let rho = 1.0 / (n as f64).sqrt();
        let kl_exact = kl_adversarial_exact(n, rho, &block).map_err(classify)?;
        let kl_bound = kl_adversarial_bound(n, rho).map_err(classify)?;
        let h = adversarial_hsic2(rho, gamma, d).map_err(classify)?;
        let gap_lower = 2.0 * c / (n as f64).sqrt();
        let r2 = rho * rho;
        let partii_bound = r2 * constant.estimate;
        let partii_se = r2 * constant.standard_error;
        let kl_ok = kl_exact <= kl_bound && kl_bound <= KL_BUDGET;
        let gap_ok = h.hsic() >= gap_lower;
        let partii_ok = h.value >= partii_bound - 4.0 * partii_se;
        certificates.push(Certificate {
            name: "kl_exact <= kl_bound <= 5/4".into(),
            n,
            lhs: kl_exact,
            rhs: kl_bound.min(KL_BUDGET),
            pass: kl_ok,
        });
        certificates.push(Certificate {
            name: "hsic gap >= 2c/sqrt(n)".into(),
            n,
            lhs: h.hsic(),
            rhs: gap_lower,
            pass: gap_ok,
        });
        certificates.push(Certificate {
            name: "hsic^2 >= rho^2 ((2c)^2 - 4se)".into(),
            n,
            lhs: h.value,
            rhs: partii_bound - 4.0 * partii_se,
            pass: partii_ok,
        });
        rows.push(CertifyRow {
            n,
            kl_exact,
            kl_bound,
            kl_budget: KL_BUDGET,
            kl_verdict: kl_ok.into(),
            hsic_gap: h.hsic(),
            gap_lower,
            gap_verdict: gap_ok.into(),
            partii_hsic2: h.value,
            partii_bound,
            partii_se,
            partii_verdict: partii_ok.into(),
        });
    }
    Ok(Report {
        config: CertifyConfig {
            blocks: block,
            gamma,
            n_grid,
            excluded,
            spectral_samples: args.spectral_samples,
            seed: args.out.seed,
            gap_constant: constant.estimate,
            gap_constant_se: constant.standard_error,
        },
        records: rows,
        certificates,
        rate_fits: BTreeMap::new(),
        lecam_value: Some(lecam_bound(KL_BUDGET)),
    })
}

/// `Err(Certificate)` naming the first failed inequality, if any.
pub fn check_certificates(certs: &[Certificate]) -> CliResult<()> {
    match certs.iter().find(|c| !c.pass) {
        Some(c) => Err(CliError::Certificate(format!("certificate violated: {}", c.describe()))),
        None => Ok(()),
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Estimate(a) => emit(&a.out, &cmd_estimate(a)?),
        Command::Analytic(a) => emit(&a.out, &cmd_analytic(a)?),
        Command::Minimax(a) => cmd_minimax(a).map(|_| ()),
        Command::Certify(a) => {
            let report = cmd_certify(a)?;
            emit(&a.out, &report)?;
            let held = report.certificates.iter().filter(|c| c.pass).count();
            eprintln!(
                "{}: {held} of {} inequalities hold",
                if held == report.certificates.len() {
                    "PASS"
                } else {
                    "FAIL"
                },
                report.certificates.len()
            );
            check_certificates(&report.certificates)
        }
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("64,128").unwrap(), vec![64, 128]);
        assert_eq!(parse_grid("2..5,10").unwrap(), vec![2, 3, 4, 5, 10]);
        assert!(parse_grid("5..2").is_err());
        assert!(parse_grid("x").is_err());
    }

    #[test]
    fn block_parsing() {
        assert_eq!(parse_blocks("2, 1").unwrap().dims(), &[2, 1]);
        assert!(matches!(parse_blocks("2"), Err(CliError::Usage(_))));
        assert!(parse_blocks("1,0").is_err());
        assert!(parse_blocks("a,1").is_err());
    }

    #[test]
    fn summary_path_appends_suffix() {
        assert_eq!(
            summary_path(Path::new("out/run.csv")),
            PathBuf::from("out/run.csv.summary.json")
        );
    }

    #[test]
    fn usage_errors_exit_3() {
        assert_eq!(run(["hsic", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["hsic", "analytic", "--rho", "0.5"]), EXIT_USAGE);
        assert_eq!(run(["hsic", "--help"]), EXIT_OK);
    }

    #[test]
    fn analytic_exit_codes() {
        assert_eq!(run(["hsic", "analytic", "--blocks", "1,1", "--rho", "1.0"]), EXIT_DATA);
        assert_eq!(
            run(["hsic", "analytic", "--blocks", "1,1", "--rho", "0.5", "--kernel", "laplace"]),
            EXIT_USAGE
        );
    }

    #[test]
    fn covariance_from_matrix_matches_rho_shorthand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cov.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        io::write_matrix(&mut f, &DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0])).unwrap();
        let kernel = KernelOpts {
            blocks: Some("1,1".into()),
            kernel: KernelArg::Gaussian,
            gamma: vec![1.0],
        };
        let out = OutputOpts {
            output: None,
            format: Format::Json,
            threads: None,
            seed: 0,
        };
        let from_file = cmd_analytic(&AnalyticArgs {
            kernel: kernel.clone(),
            out: out.clone(),
            rho: None,
            input: Some(path),
            header: false,
        })
        .unwrap();
        let from_rho = cmd_analytic(&AnalyticArgs {
            kernel,
            out,
            rho: Some(0.6),
            input: None,
            header: false,
        })
        .unwrap();
        assert_eq!(from_file.records, from_rho.records);
    }
}
