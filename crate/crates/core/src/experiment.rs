//! Monte Carlo study: many simulated fields per truncation order, estimated
//! and aggregated.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fisher, mle, score, KlScoreBasis};
use crate::geometry::{DomainConfig, DEFAULT_GRID_POINTS};
use crate::quadrature::{QuadConfig, QuadFlags};
use crate::random_fields::{draw_kl, FieldModel, FieldSample};
use crate::regressors::{RegressorSet, RegressorSpec};
use crate::stochastic_integrals::StochIntConfig;

/// Quadrature for the KL score basis. Its errors enter ζ summed against
/// standard normals, so far looser settings than for `A` are harmless.
pub fn default_basis_quad() -> QuadConfig {
    QuadConfig {
        abs_tol: 1e-7,
        rel_tol: 1e-6,
        ..QuadConfig::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 200 replications at `n ∈ {25, 50}`.
    Desk,
    /// 1000 replications at `n ∈ {25, 50, 75, 100}`.
    Paper,
}

impl Profile {
    pub fn replications(self) -> usize {
        match self {
            Profile::Desk => 200,
            Profile::Paper => 1000,
        }
    }

    pub fn n_sweep(self) -> Vec<usize> {
        match self {
            Profile::Desk => vec![25, 50],
            Profile::Paper => vec![25, 50, 75, 100],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: FieldModel,
    pub domain: DomainConfig,
    pub regressors: Vec<RegressorSpec>,
    pub true_m: Vec<f64>,
    pub replications: usize,
    pub n_sweep: Vec<usize>,
    pub s_max: f64,
    pub t_max: f64,
    pub base_seed: u64,
    /// Worker threads; 0 lets the pool pick.
    #[serde(default)]
    pub workers: usize,
    /// Multiplies the simulated noise; 0 gives drift-only fields.
    #[serde(default = "one")]
    pub noise_scale: f64,
    #[serde(default)]
    pub quad: QuadConfig,
    #[serde(default = "default_basis_quad")]
    pub basis_quad: QuadConfig,
}

fn one() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.replications = profile.replications();
        self.n_sweep = profile.n_sweep();
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.replications < 2 {
            return Err(Error::InvalidArgument("at least 2 replications are required".into()));
        }
        if self.n_sweep.is_empty() || self.n_sweep[0] == 0 || self.n_sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "n_sweep must be a non-empty increasing list of positive orders".into(),
            ));
        }
        if self.true_m.len() != self.regressors.len() {
            return Err(Error::InvalidArgument(format!(
                "{} regressors but {} true coefficients",
                self.regressors.len(),
                self.true_m.len()
            )));
        }
        if !self.noise_scale.is_finite() {
            return Err(Error::InvalidArgument("noise_scale must be finite".into()));
        }
        self.quad.validate()?;
        self.basis_quad.validate()
    }
}

/// Seed of replication `i`. The same seeds are used for every `n`, so the
/// sweep compares truncations of the same underlying draws.
pub fn replication_seed(base: u64, i: usize) -> u64 {
    base ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    /// `None` when the estimate was not finite.
    pub m_hat: Option<Vec<f64>>,
    pub zeta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub successes: usize,
    pub failures: usize,
    pub mean_m_hat: Vec<f64>,
    pub mean_zeta: Vec<f64>,
    /// `1/(N−1) Σ (ζᵢ − ζ̄)(ζᵢ − ζ̄)ᵀ`.
    pub zeta_covariance: Vec<Vec<f64>>,
    /// `‖Cov(ζ) − Cov_theory(ζ)‖_F / ‖Cov_theory(ζ)‖_F`.
    pub covariance_rel_error: f64,
    /// `|mean(m̂) − m| / √(diag(cov)/N)` per coordinate.
    pub mean_z_scores: Vec<f64>,
}

impl SweepPoint {
    /// Every coordinate mean lies within `k` standard errors.
    pub fn means_within(&self, k: f64) -> bool {
        self.mean_z_scores.iter().all(|z| *z <= k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// The Fisher matrix `A`.
    pub fisher: Vec<Vec<f64>>,
    /// Covariance of `m̂` implied by the model.
    pub covariance: Vec<Vec<f64>>,
    /// Covariance of `ζ` implied by the model, `σ²/(αβ)·A` (`A` for Wiener).
    pub zeta_covariance_theory: Vec<Vec<f64>>,
    pub drift_zeta: Vec<f64>,
    pub sweep: Vec<SweepPoint>,
    pub replications: Vec<Replication>,
    pub diagnostics: QuadFlags,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Runs the study. Deterministic in `cfg`, whatever the worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let domain = cfg.domain.build()?.validate(DEFAULT_GRID_POINTS)?;
    let regs = RegressorSet::from_specs(&cfg.regressors)?;
    let p = regs.p();
    let model = cfg.model;

    let a = fisher(&model, &domain, &regs, &cfg.quad)?;
    let base = mle(&a, &DVector::zeros(p), &model)?;
    let drift = FieldSample::drift_only(model, cfg.s_max, cfg.t_max, regs.clone(), cfg.true_m.clone())?;
    let stoch = StochIntConfig {
        quad: cfg.quad,
        ..StochIntConfig::default()
    };
    let drift_zeta = score(&model, &drift, &domain, &regs, &stoch)?;
    let n_max = *cfg.n_sweep.last().expect("validated non-empty");
    let basis = KlScoreBasis::new(&model, &domain, &regs, cfg.s_max, cfg.t_max, n_max, &cfg.basis_quad)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;

    let chol = a.clone().cholesky().ok_or(Error::SingularMatrix)?;
    let simulate = |n: usize, i: usize| -> Result<Replication> {
        let seed = replication_seed(cfg.base_seed, i);
        let kl = draw_kl(n, cfg.s_max, cfg.t_max, seed)?;
        let zeta = &drift_zeta + basis.noise_score(&kl)? * cfg.noise_scale;
        let m_hat = chol.solve(&zeta);
        let ok = zeta.iter().chain(m_hat.iter()).all(|x| x.is_finite());
        Ok(Replication {
            n,
            replication: i,
            seed,
            m_hat: ok.then(|| m_hat.iter().copied().collect()),
            zeta: ok.then(|| zeta.iter().copied().collect()),
        })
    };

    let mut replications = Vec::with_capacity(cfg.replications * cfg.n_sweep.len());
    for &n in &cfg.n_sweep {
        let batch: Vec<Replication> = pool.install(|| {
            (0..cfg.replications)
                .into_par_iter()
                .map(|i| simulate(n, i))
                .collect::<Result<Vec<_>>>()
        })?;
        replications.extend(batch);
    }

    let scale = model.scale();
    let theory = &a * scale;
    let cov_m = base.covariance_matrix();
    let sweep = cfg
        .n_sweep
        .iter()
        .map(|&n| aggregate(n, &replications, &cfg.true_m, &theory, &cov_m))
        .collect();

    Ok(ExperimentResult {
        config: cfg.clone(),
        fisher: rows(&a),
        covariance: rows(&cov_m),
        zeta_covariance_theory: rows(&theory),
        drift_zeta: drift_zeta.iter().copied().collect(),
        sweep,
        replications,
        diagnostics: basis.flags(),
    })
}

/// Fixed-order fold over the replications of one truncation order.
fn aggregate(n: usize, reps: &[Replication], true_m: &[f64], theory: &DMatrix<f64>, cov_m: &DMatrix<f64>) -> SweepPoint {
    let p = true_m.len();
    let mut ok: Vec<(&Vec<f64>, &Vec<f64>)> = Vec::new();
    let mut failures = 0;
    for r in reps.iter().filter(|r| r.n == n) {
        match (&r.m_hat, &r.zeta) {
            (Some(m), Some(z)) => ok.push((m, z)),
            _ => failures += 1,
        }
    }
    let count = ok.len();
    let denom = count.max(1) as f64;
    let mut mean_m = vec![0.0; p];
    for (m, _) in &ok {
        for i in 0..p {
            mean_m[i] += m[i];
        }
    }
    mean_m.iter_mut().for_each(|x| *x /= denom);
    // deviations from the first sample, so that identical samples give an
    // exactly zero covariance
    let origin = ok.first().map(|(_, z)| (*z).clone()).unwrap_or_else(|| vec![0.0; p]);
    let dev: Vec<Vec<f64>> = ok.iter().map(|(_, z)| (0..p).map(|i| z[i] - origin[i]).collect()).collect();
    let mut mean_d = vec![0.0; p];
    for d in &dev {
        for i in 0..p {
            mean_d[i] += d[i];
        }
    }
    mean_d.iter_mut().for_each(|x| *x /= denom);
    let mean_z: Vec<f64> = (0..p).map(|i| origin[i] + mean_d[i]).collect();
    let mut cov = DMatrix::zeros(p, p);
    for d in &dev {
        for i in 0..p {
            for j in i..p {
                cov[(i, j)] += (d[i] - mean_d[i]) * (d[j] - mean_d[j]);
            }
        }
    }
    let dof = count.saturating_sub(1).max(1) as f64;
    for i in 0..p {
        for j in i..p {
            cov[(i, j)] /= dof;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    let covariance_rel_error = (&cov - theory).norm() / theory.norm();
    let mean_z_scores = (0..p)
        .map(|i| (mean_m[i] - true_m[i]).abs() / (cov_m[(i, i)] / denom).sqrt())
        .collect();
    SweepPoint {
        n,
        successes: count,
        failures,
        mean_m_hat: mean_m,
        mean_zeta: mean_z,
        zeta_covariance: rows(&cov),
        covariance_rel_error,
        mean_z_scores,
    }
}

/// One row of the long-format aggregate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub n: usize,
    pub stat: String,
    pub i: usize,
    /// Empty for vector statistics.
    pub j: Option<usize>,
    pub value: f64,
}

/// `mean_m_hat` rows: `p` per truncation order.
pub fn mean_rows(result: &ExperimentResult) -> Vec<AggregateRow> {
    result
        .sweep
        .iter()
        .flat_map(|pt| {
            pt.mean_m_hat.iter().enumerate().map(move |(i, v)| AggregateRow {
                n: pt.n,
                stat: "mean_m_hat".into(),
                i: i + 1,
                j: None,
                value: *v,
            })
        })
        .collect()
}

/// `cov_zeta` rows: the upper triangle, `p(p+1)/2` per truncation order.
pub fn covariance_rows(result: &ExperimentResult) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    for pt in &result.sweep {
        let p = pt.zeta_covariance.len();
        for i in 0..p {
            for j in i..p {
                out.push(AggregateRow {
                    n: pt.n,
                    stat: "cov_zeta".into(),
                    i: i + 1,
                    j: Some(j + 1),
                    value: pt.zeta_covariance[i][j],
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Serialize)]
struct ReplicationRow {
    n: usize,
    replication: usize,
    param_index: usize,
    m_hat: f64,
}

/// Writes the result tables into `dir` and returns the paths written.
///
/// CSV gives `replications.csv` (`n, replication, param_index, m_hat`) and
/// `aggregate.csv` (`n, stat, i, j, value`); JSON gives `result.json`.
pub fn emit_tables(result: &ExperimentResult, dir: &Path, format: TableFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    match format {
        TableFormat::Csv => {
            let reps = dir.join("replications.csv");
            let mut w = csv::Writer::from_path(&reps)?;
            for r in &result.replications {
                if let Some(m) = &r.m_hat {
                    for (k, v) in m.iter().enumerate() {
                        w.serialize(ReplicationRow {
                            n: r.n,
                            replication: r.replication,
                            param_index: k + 1,
                            m_hat: *v,
                        })?;
                    }
                }
            }
            w.flush()?;
            let agg = dir.join("aggregate.csv");
            let mut w = csv::Writer::from_path(&agg)?;
            for row in mean_rows(result).into_iter().chain(covariance_rows(result)) {
                w.serialize(row)?;
            }
            w.flush()?;
            Ok(vec![reps, agg])
        }
        TableFormat::Json => {
            let path = dir.join("result.json");
            fs::write(&path, serde_json::to_string_pretty(result)?)?;
            Ok(vec![path])
        }
    }
}
