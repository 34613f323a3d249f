//! Two-point minimax harness.
//!
//! For each sample size `n` the harness builds the pair
//! `p0 = N(0, I)`, `p1 = N((1/(√d n))·1, Σ(d₁, d₁+1, n^{-1/2}))`, checks the
//! KL budget and the HSIC separation, then simulates concrete estimators on
//! both members and fits the decay of their worst-case risk on a log-log
//! scale.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{adversarial_hsic2, hsic2_gaussian, lecam_bound, theorem_constant};
use crate::error::{Error, Result};
use crate::estimators::{hsic_nystrom, Dataset, GramStats};
use crate::gaussian::{kl_adversarial_bound, kl_adversarial_exact, AdversarialPair, BlockStructure};
use crate::kernels::{KernelFamily, KernelSpec, ProductKernel};
use crate::rng;
use crate::spectral::{gap_constant_partii, hsic2_spectral, McEstimate};

/// KL budget `α` of the two-point construction.
pub const KL_BUDGET: f64 = 1.25;

pub const DEFAULT_N_GRID: [usize; 7] = [64, 128, 256, 512, 1024, 2048, 4096];
pub const DEFAULT_REPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    V,
    U,
    Nystrom,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Estimator {
    pub name: String,
    pub kind: EstimatorKind,
    /// Landmark count for Nyström; capped at `n`.
    pub landmarks: Option<usize>,
}

impl Estimator {
    pub fn v() -> Self {
        Self {
            name: "v".into(),
            kind: EstimatorKind::V,
            landmarks: None,
        }
    }

    pub fn u() -> Self {
        Self {
            name: "u".into(),
            kind: EstimatorKind::U,
            landmarks: None,
        }
    }

    pub fn nystrom(landmarks: usize) -> Self {
        Self {
            name: "nystrom".into(),
            kind: EstimatorKind::Nystrom,
            landmarks: Some(landmarks),
        }
    }

    fn check(&self, block: &BlockStructure) -> Result<()> {
        match self.kind {
            EstimatorKind::V => block.require_hsic(),
            EstimatorKind::U | EstimatorKind::Nystrom if block.num_blocks() != 2 => Err(Error::Structure(format!(
                "estimator '{}' requires exactly 2 blocks, got {}",
                self.name,
                block.num_blocks()
            ))),
            EstimatorKind::Nystrom if self.landmarks.is_none_or(|l| l < 2) => Err(Error::InvalidArgument(format!(
                "estimator '{}' needs at least 2 landmarks",
                self.name
            ))),
            _ => Ok(()),
        }
    }

    /// Estimate on the HSIC scale plus the raw value on its native scale.
    fn estimate(&self, pk: &ProductKernel, data: &Dataset, stats: Option<&GramStats>, seed: u64) -> Result<(f64, f64)> {
        match self.kind {
            EstimatorKind::V => {
                let raw = stats.expect("gram stats computed for V").hsic_v()?;
                Ok((raw.max(0.0).sqrt(), raw))
            }
            EstimatorKind::U => {
                let raw = stats.expect("gram stats computed for U").hsic_u()?;
                Ok((raw.max(0.0).sqrt(), raw))
            }
            EstimatorKind::Nystrom => {
                let l = self.landmarks.unwrap_or(2).min(data.n());
                let (h, _) = hsic_nystrom(pk, data, l, seed)?;
                Ok((h, h * h))
            }
        }
    }
}

pub fn build_pair(n: usize, gamma: f64, block: &BlockStructure) -> Result<AdversarialPair> {
    AdversarialPair::new(n, gamma, block)
}

/// Kernel, ground truth and exceedance threshold for one pair.
#[derive(Debug, Clone)]
pub struct RiskContext {
    pub kernel: ProductKernel,
    /// True HSIC of `p0` (zero: independent blocks).
    pub truth_p0: f64,
    pub truth_p1: f64,
    /// Threshold `c/√n` for the exceedance probability.
    pub threshold: f64,
}

impl RiskContext {
    /// Gaussian kernels use the closed form and `c = γ/(2(2γ+1)^{d/4+1})`;
    /// Laplace kernels use a spectral estimate of the truth and
    /// `c = √(gap constant)/2`.
    pub fn for_pair(pair: &AdversarialPair, family: KernelFamily, spectral_samples: usize, seed: u64) -> Result<Self> {
        let spec = KernelSpec::new(family, pair.gamma)?;
        let kernel = ProductKernel::uniform(pair.block.clone(), spec);
        let sqrt_n = (pair.n as f64).sqrt();
        let (truth_p1, c) = match family {
            KernelFamily::Gaussian => (
                hsic2_gaussian(&pair.p1, &pair.block, pair.gamma)?.hsic(),
                theorem_constant(pair.gamma, pair.block.total_dim()),
            ),
            KernelFamily::Laplace => {
                let h2 = hsic2_spectral(
                    &pair.p1,
                    &kernel,
                    spectral_samples,
                    rng::derive_seed(seed, "lecam.truth", 0),
                )?;
                let gap = gap_constant_partii(
                    &spec,
                    &pair.block,
                    spectral_samples,
                    rng::derive_seed(seed, "lecam.gap", 0),
                )?;
                (h2.estimate.max(0.0).sqrt(), gap.estimate.max(0.0).sqrt() / 2.0)
            }
        };
        Ok(Self {
            kernel,
            truth_p0: 0.0,
            truth_p1,
            threshold: c / sqrt_n,
        })
    }
}

/// Error statistics of one estimator on one member of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistRisk {
    pub truth: f64,
    pub mean_estimate: f64,
    pub mean_abs_error: f64,
    /// RMSE on the HSIC scale.
    pub rmse: f64,
    /// RMSE of the native estimate against the true HSIC².
    pub rmse_hsic2: f64,
    pub exceed_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSummary {
    pub estimator: String,
    pub n: usize,
    pub reps: usize,
    pub threshold: f64,
    pub p0: DistRisk,
    pub p1: DistRisk,
    /// `max(p0.rmse, p1.rmse)`.
    pub sup_risk: f64,
    pub sup_exceed_prob: f64,
}

fn summarize(truth: f64, draws: &[(f64, f64)], threshold: f64) -> DistRisk {
    let r = draws.len() as f64;
    let (mut est, mut abs, mut sq, mut sq2, mut exceed) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for &(h, raw) in draws {
        let err = (h - truth).abs();
        est += h;
        abs += err;
        sq += err * err;
        sq2 += (raw - truth * truth).powi(2);
        if err >= threshold {
            exceed += 1;
        }
    }
    DistRisk {
        truth,
        mean_estimate: est / r,
        mean_abs_error: abs / r,
        rmse: (sq / r).sqrt(),
        rmse_hsic2: (sq2 / r).sqrt(),
        exceed_prob: exceed as f64 / r,
    }
}

/// Simulate several estimators on shared replicate datasets. Replicate `r`
/// of member `p` uses the stream `(seed, "lecam.p", r)` whatever the thread
/// count, and results are aggregated in replicate order.
pub fn risk_sim_many(
    estimators: &[Estimator],
    pair: &AdversarialPair,
    ctx: &RiskContext,
    reps: usize,
    seed: u64,
) -> Result<Vec<RiskSummary>> {
    if reps < 2 {
        return Err(Error::InvalidArgument(format!("reps = {reps} must be at least 2")));
    }
    if ctx.kernel.block() != &pair.block {
        return Err(Error::Structure("kernel and pair block structures differ".into()));
    }
    for e in estimators {
        e.check(&pair.block)?;
    }
    let need_stats = estimators
        .iter()
        .any(|e| matches!(e.kind, EstimatorKind::V | EstimatorKind::U));
    let members = [("lecam.p0", &pair.p0), ("lecam.p1", &pair.p1)];
    let mut per_member: Vec<Vec<Vec<(f64, f64)>>> = Vec::with_capacity(2);
    for (label, g) in members {
        let rows: Vec<Vec<(f64, f64)>> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let data_seed = rng::derive_seed(seed, label, r as u64);
                let data = Dataset::sample(g, &pair.block, pair.n, data_seed)?;
                let stats = if need_stats {
                    Some(GramStats::compute(&ctx.kernel, &data)?)
                } else {
                    None
                };
                estimators
                    .iter()
                    .map(|e| {
                        e.estimate(
                            &ctx.kernel,
                            &data,
                            stats.as_ref(),
                            rng::derive_seed(data_seed, "lecam.landmarks", 0),
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        per_member.push(rows);
    }
    Ok(estimators
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let col = |m: usize| -> Vec<(f64, f64)> { per_member[m].iter().map(|row| row[k]).collect() };
            let p0 = summarize(ctx.truth_p0, &col(0), ctx.threshold);
            let p1 = summarize(ctx.truth_p1, &col(1), ctx.threshold);
            RiskSummary {
                estimator: e.name.clone(),
                n: pair.n,
                reps,
                threshold: ctx.threshold,
                sup_risk: p0.rmse.max(p1.rmse),
                sup_exceed_prob: p0.exceed_prob.max(p1.exceed_prob),
                p0,
                p1,
            }
        })
        .collect())
}

pub fn risk_sim(
    est: &Estimator,
    pair: &AdversarialPair,
    ctx: &RiskContext,
    reps: usize,
    seed: u64,
) -> Result<RiskSummary> {
    Ok(risk_sim_many(std::slice::from_ref(est), pair, ctx, reps, seed)?.remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `ln risk = intercept + slope · ln n`.
pub fn rate_fit(points: &[(usize, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs ≥ 3 grid points, got {}",
            points.len()
        )));
    }
    if let Some(&(n, r)) = points.iter().find(|&&(n, r)| n == 0 || r <= 0.0 || !r.is_finite()) {
        return Err(Error::Data(format!("risk {r} at n = {n} is not positive")));
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, r)| r.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Data("rate fit needs at least two distinct sample sizes".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub gamma: f64,
    pub family: KernelFamily,
    pub block: BlockStructure,
    pub n_grid: Vec<usize>,
    pub estimators: Vec<Estimator>,
    pub reps: usize,
    pub seed: u64,
    /// Frequencies drawn for spectral truths and gap constants (Laplace runs).
    pub spectral_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            family: KernelFamily::Gaussian,
            block: BlockStructure::pair(1, 1).expect("valid"),
            n_grid: DEFAULT_N_GRID.to_vec(),
            estimators: vec![Estimator::v(), Estimator::u()],
            reps: DEFAULT_REPS,
            seed: 0,
            spectral_samples: 200_000,
        }
    }
}

/// One inequality checked by the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl Certificate {
    fn le(name: &str, n: usize, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            n,
            lhs,
            rhs,
            pass: lhs <= rhs,
        }
    }

    fn ge(name: &str, n: usize, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            n,
            lhs,
            rhs,
            pass: lhs >= rhs,
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "{} at n = {}: lhs = {:.9e}, rhs = {:.9e}",
            self.name, self.n, self.lhs, self.rhs
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NRecord {
    pub n: usize,
    pub rho_n: f64,
    pub kl_exact: f64,
    pub kl_bound: f64,
    /// HSIC(p1) − HSIC(p0).
    pub analytic_gap: f64,
    pub theorem_c: f64,
    /// `2c/√n`.
    pub gap_lower: f64,
    pub risks: Vec<RiskSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<NRecord>,
    pub certificates: Vec<Certificate>,
    pub rate_fits: BTreeMap<String, RateFit>,
    pub lecam_value: f64,
    /// Squared gap constant for non-Gaussian kernels.
    pub gap_constant: Option<McEstimate>,
}

impl ExperimentReport {
    pub fn all_certificates_pass(&self) -> bool {
        self.certificates.iter().all(|c| c.pass)
    }

    pub fn first_violation(&self) -> Option<&Certificate> {
        self.certificates.iter().find(|c| !c.pass)
    }

    pub fn sup_risks(&self, estimator: &str) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter_map(|r| {
                r.risks
                    .iter()
                    .find(|s| s.estimator == estimator)
                    .map(|s| (r.n, s.sup_risk))
            })
            .collect()
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.n_grid.is_empty() {
        return Err(Error::InvalidArgument("empty n grid".into()));
    }
    if let Some(&bad) = config.n_grid.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidArgument(format!(
            "grid entry n = {bad} must be at least 2"
        )));
    }
    config.block.require_hsic()?;
    if !config.estimators.is_empty() && config.n_grid.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs ≥ 3 grid points, got {}",
            config.n_grid.len()
        )));
    }
    let mut names = std::collections::BTreeSet::new();
    for e in &config.estimators {
        e.check(&config.block)?;
        if !names.insert(e.name.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate estimator name '{}'", e.name)));
        }
    }

    let d = config.block.total_dim();
    let spec = KernelSpec::new(config.family, config.gamma)?;
    let gap_constant = match config.family {
        KernelFamily::Gaussian => None,
        KernelFamily::Laplace => Some(gap_constant_partii(
            &spec,
            &config.block,
            config.spectral_samples,
            rng::derive_seed(config.seed, "lecam.gap_constant", 0),
        )?),
    };
    let theorem_c = match &gap_constant {
        None => theorem_constant(config.gamma, d),
        Some(g) => g.estimate.max(0.0).sqrt() / 2.0,
    };

    let mut records = Vec::with_capacity(config.n_grid.len());
    let mut certificates = Vec::new();
    for &n in &config.n_grid {
        let pair = build_pair(n, config.gamma, &config.block)?;
        let n_seed = rng::derive_seed(config.seed, "lecam.n", n as u64);
        let kl_exact = kl_adversarial_exact(n, pair.rho, &config.block)?;
        let kl_bound = kl_adversarial_bound(n, pair.rho)?;
        certificates.push(Certificate::le("kl_exact <= kl_bound", n, kl_exact, kl_bound));
        certificates.push(Certificate::le("kl_bound <= 5/4", n, kl_bound, KL_BUDGET));

        let ctx = RiskContext::for_pair(&pair, config.family, config.spectral_samples, n_seed)?;
        let gap_lower = 2.0 * theorem_c / (n as f64).sqrt();
        let analytic_gap = match config.family {
            KernelFamily::Gaussian => {
                let gap = adversarial_hsic2(pair.rho, config.gamma, d)?.hsic();
                certificates.push(Certificate::ge("hsic gap >= 2c/sqrt(n)", n, gap, gap_lower));
                gap
            }
            KernelFamily::Laplace => {
                // both sides are Monte Carlo; compare with 4-SE slack on each
                let h2 = hsic2_spectral(
                    &pair.p1,
                    &ctx.kernel,
                    config.spectral_samples,
                    rng::derive_seed(n_seed, "lecam.truth", 0),
                )?;
                let g = gap_constant.expect("set for laplace");
                certificates.push(Certificate::ge(
                    "hsic^2 + 4se >= rho^2 (gap - 4se)",
                    n,
                    h2.estimate + 4.0 * h2.standard_error,
                    pair.rho * pair.rho * (g.estimate - 4.0 * g.standard_error),
                ));
                ctx.truth_p1
            }
        };

        let risks = if config.estimators.is_empty() {
            Vec::new()
        } else {
            risk_sim_many(&config.estimators, &pair, &ctx, config.reps, n_seed)?
        };
        records.push(NRecord {
            n,
            rho_n: pair.rho,
            kl_exact,
            kl_bound,
            analytic_gap,
            theorem_c,
            gap_lower,
            risks,
        });
    }

    let mut rate_fits = BTreeMap::new();
    for e in &config.estimators {
        let pts: Vec<(usize, f64)> = records
            .iter()
            .map(|r| {
                (
                    r.n,
                    r.risks
                        .iter()
                        .find(|s| s.estimator == e.name)
                        .expect("risk per estimator")
                        .sup_risk,
                )
            })
            .collect();
        rate_fits.insert(e.name.clone(), rate_fit(&pts)?);
    }

    Ok(ExperimentReport {
        config: config.clone(),
        records,
        certificates,
        rate_fits,
        lecam_value: lecam_bound(KL_BUDGET),
        gap_constant,
    })
}
