//! Seeded simulation studies: method comparison on linear models, solution
//! paths on the correlated-features fixture, path nonequivalence between
//! CLOT and EN, and the exact-recovery scaling test on a DeVore matrix.
//!
//! Every replication draws from its own ChaCha stream `(seed, index)`, so
//! results do not depend on thread count or scheduling.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::inf_norm;
use crate::matrices::{devore_matrix, DeVoreParams};
use crate::regularizers::{RegularizerKind, RegularizerSpec};
use crate::solvers::{
    log_grid_desc, solution_path, solve_constrained, solve_lagrangian_from, Form, LambdaSide, Problem,
    SolveResult, SolverOptions,
};

/// Stream reserved for the bootstrap so it never collides with a replication.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Covariance {
    Identity,
    /// `Σᵢⱼ = ρ^{|i−j|}`
    Ar { rho: f64 },
    /// `Σᵢⱼ = ρ` off the diagonal.
    Equicorrelated { rho: f64 },
    /// Consecutive blocks of `sizes[b]` features equal to a shared `N(0,1)`
    /// factor plus `N(0, noise_sd²)`; remaining features are i.i.d. `N(0,1)`.
    LatentGroups { sizes: Vec<usize>, noise_sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub beta: Vec<f64>,
    pub covariance: Covariance,
    pub noise_sigma: f64,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingFixture {
    pub m: usize,
    /// Standard deviation of the feature noise (`1/4` gives variance `1/16`).
    #[serde(default = "default_feature_noise")]
    pub feature_noise_sd: f64,
    #[serde(default = "default_path_points")]
    pub path_points: usize,
    /// Smallest λ on the grid relative to the largest.
    #[serde(default = "default_path_ratio")]
    pub path_ratio: f64,
}

fn default_feature_noise() -> f64 {
    0.25
}
fn default_path_points() -> usize {
    60
}
fn default_path_ratio() -> f64 {
    1e-4
}

impl Default for GroupingFixture {
    fn default() -> Self {
        GroupingFixture {
            m: 100,
            feature_noise_sd: default_feature_noise(),
            path_points: default_path_points(),
            path_ratio: default_path_ratio(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFixture {
    pub p: u64,
    pub r: u32,
    pub n: usize,
    pub x_head: Vec<f64>,
    pub c_list: Vec<i32>,
}

impl ScalingFixture {
    /// `p = 23`, `r = 2`, `n = 4000`: a 529 × 4000 matrix.
    pub fn full() -> Self {
        ScalingFixture {
            p: 23,
            r: 2,
            n: 4000,
            x_head: vec![0.8147, 0.9058, 0.1270],
            c_list: vec![0, 1, 2, 3, 4],
        }
    }

    /// `p = 11`, `r = 2`, `n = 1000`: a 121 × 1000 matrix.
    pub fn small() -> Self {
        ScalingFixture {
            p: 11,
            n: 1000,
            ..ScalingFixture::full()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    LinearModel(LinearModel),
    GroupingFixture(GroupingFixture),
    PathFixture(GroupingFixture),
    ScalingFixture(ScalingFixture),
}

/// One method of a study. Without `mu`, mixing penalties are tuned over
/// [`Tuning::mu_grid`] in the comparison study and use 0.5 elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub name: String,
    pub kind: RegularizerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

impl MethodSpec {
    pub fn new(name: &str, kind: RegularizerKind, mu: Option<f64>) -> Self {
        MethodSpec {
            name: name.to_string(),
            kind,
            mu,
        }
    }

    fn mu_candidates(&self, tuning: &Tuning) -> Vec<f64> {
        match (self.kind, self.mu) {
            (_, Some(mu)) => vec![mu],
            (RegularizerKind::ElasticNet | RegularizerKind::Clot | RegularizerKind::SparseGroupLasso, None) => {
                tuning.mu_grid.clone()
            }
            _ => vec![0.0],
        }
    }

    fn spec(&self, mu: f64, n: usize) -> Result<RegularizerSpec> {
        let spec = match self.kind {
            RegularizerKind::L1 => RegularizerSpec::l1(),
            RegularizerKind::L2Sq => RegularizerSpec::ridge(),
            RegularizerKind::ElasticNet => RegularizerSpec::elastic_net(mu),
            RegularizerKind::Clot => RegularizerSpec::clot(mu),
            kind => {
                return Err(Error::InvalidParameter(format!(
                    "method '{}' needs a partition; {} is not supported in studies",
                    self.name,
                    kind.name()
                )))
            }
        };
        spec.validate(n)?;
        Ok(spec)
    }
}

fn default_methods() -> Vec<MethodSpec> {
    vec![
        MethodSpec::new("clot", RegularizerKind::Clot, None),
        MethodSpec::new("en", RegularizerKind::ElasticNet, None),
        MethodSpec::new("lasso", RegularizerKind::L1, None),
    ]
}

/// Validation-set selection of `(λ, μ)`: `λ = frac·λ_max` with `frac` over
/// `lambda_points` log-spaced values in `[10^lo, 10^hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tuning {
    pub lambda_points: usize,
    pub log10_lo: f64,
    pub log10_hi: f64,
    pub mu_grid: Vec<f64>,
    pub bootstrap_resamples: usize,
    /// Drop replications whose selected solve did not converge.
    pub exclude_unconverged: bool,
    pub solver: SolverOptions,
}

impl Default for Tuning {
    fn default() -> Self {
        Tuning {
            lambda_points: 20,
            log10_lo: -4.0,
            log10_hi: 0.0,
            mu_grid: vec![0.2, 0.5, 0.8],
            bootstrap_resamples: 200,
            exclude_unconverged: false,
            solver: SolverOptions {
                kkt_tol: 1e-7,
                max_iters: 20_000,
                ..SolverOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub generator: Generator,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub tuning: Tuning,
}

fn one() -> usize {
    1
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replications must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("at least one method is required".into()));
        }
        let t = &self.tuning;
        if t.lambda_points == 0 || !(t.log10_lo <= t.log10_hi) || t.mu_grid.is_empty() {
            return Err(Error::InvalidParameter("empty or inverted tuning grid".into()));
        }
        if let Generator::LinearModel(lm) = &self.generator {
            if lm.beta.is_empty() || lm.n_train == 0 || lm.n_validation == 0 || lm.n_test == 0 {
                return Err(Error::InvalidParameter("linear model needs β and nonempty splits".into()));
            }
            if let Covariance::LatentGroups { sizes, .. } = &lm.covariance {
                if sizes.iter().sum::<usize>() > lm.beta.len() {
                    return Err(Error::InvalidParameter("latent groups exceed the feature count".into()));
                }
            }
        }
        Ok(())
    }
}

/// Generator for replication `index`.
pub fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

// ---------------------------------------------------------------------------
// statistics

/// Median of a nonempty sample; mean of the two middle values for even sizes.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

/// Standard deviation (n − 1 denominator) of the median over `resamples`
/// bootstrap resamples.
pub fn bootstrap_median_sd(values: &[f64], resamples: usize, rng: &mut impl Rng) -> f64 {
    if values.len() < 2 || resamples < 2 {
        return 0.0;
    }
    let mut buf = vec![0.0; values.len()];
    let meds: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = values[rng.random_range(0..values.len())];
            }
            median(&buf)
        })
        .collect();
    let mean = meds.iter().sum::<f64>() / meds.len() as f64;
    (meds.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (meds.len() - 1) as f64).sqrt()
}

/// Entries larger than `1e-6·‖x‖∞` in magnitude.
pub fn support_size(x: &[f64]) -> usize {
    let cut = 1e-6 * inf_norm(x);
    x.iter().filter(|v| v.abs() > cut).count()
}

// ---------------------------------------------------------------------------
// data generation

pub struct Split {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

pub struct LinearData {
    pub train: Split,
    pub validation: Split,
    pub test: Split,
}

fn draw_features(model: &LinearModel, rows: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let p = model.beta.len();
    let z = DMatrix::from_fn(rows, p, |_, _| StandardNormal.sample(rng));
    Ok(match &model.covariance {
        Covariance::Identity => z,
        Covariance::Ar { rho } => z * cholesky_upper(p, |i, j| rho.powi((i as i32 - j as i32).abs()))?,
        Covariance::Equicorrelated { rho } => z * cholesky_upper(p, |i, j| if i == j { 1.0 } else { *rho })?,
        Covariance::LatentGroups { sizes, noise_sd } => {
            let mut x = z;
            let mut start = 0;
            for &size in sizes {
                for i in 0..rows {
                    let factor: f64 = StandardNormal.sample(rng);
                    for j in start..start + size {
                        x[(i, j)] = factor + noise_sd * x[(i, j)];
                    }
                }
                start += size;
            }
            x
        }
    })
}

/// `Lᵀ` for `Σ = LLᵀ`, so rows of `Z·Lᵀ` have covariance `Σ`.
fn cholesky_upper(p: usize, entry: impl Fn(usize, usize) -> f64) -> Result<DMatrix<f64>> {
    let sigma = DMatrix::from_fn(p, p, entry);
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("covariance is not positive definite".into()))?;
    Ok(chol.l().transpose())
}

pub fn generate_linear(model: &LinearModel, rng: &mut ChaCha8Rng) -> Result<LinearData> {
    let beta = DVector::from_column_slice(&model.beta);
    let mut split = |rows: usize| -> Result<Split> {
        let x = draw_features(model, rows, rng)?;
        let noise = Normal::new(0.0, model.noise_sigma)
            .map_err(|e| Error::InvalidParameter(format!("noise sigma: {e}")))?;
        let y = &x * &beta + DVector::from_fn(rows, |_, _| noise.sample(rng));
        Ok(Split { x, y })
    };
    Ok(LinearData {
        train: split(model.n_train)?,
        validation: split(model.n_validation)?,
        test: split(model.n_test)?,
    })
}

/// Six features built from two latent `U(0,20)` factors:
/// `(Z₁, −Z₁, Z₁, Z₂, −Z₂, Z₂)` plus noise, with `y ~ N(Z₁ + 0.1Z₂, 1)`.
pub fn generate_grouping(fixture: &GroupingFixture, rng: &mut ChaCha8Rng) -> Result<Split> {
    let u = Uniform::new(0.0, 20.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let noise = Normal::new(0.0, fixture.feature_noise_sd)
        .map_err(|e| Error::InvalidParameter(format!("feature noise: {e}")))?;
    let m = fixture.m;
    let mut x = DMatrix::zeros(m, 6);
    let mut y = DVector::zeros(m);
    for i in 0..m {
        let z1: f64 = u.sample(rng);
        let z2: f64 = u.sample(rng);
        let e: f64 = StandardNormal.sample(rng);
        y[i] = z1 + 0.1 * z2 + e;
        for (j, base) in [z1, -z1, z1, z2, -z2, z2].into_iter().enumerate() {
            x[(i, j)] = base + noise.sample(rng);
        }
    }
    Ok(Split { x, y })
}

// ---------------------------------------------------------------------------
// comparison study

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub method: String,
    pub mse: f64,
    pub nnz: usize,
    pub lambda: f64,
    pub mu: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub median_mse: f64,
    pub bootstrap_sd: f64,
    pub median_nnz: f64,
    pub used: usize,
    pub unconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub true_nnz: usize,
    pub summaries: Vec<MethodSummary>,
    pub records: Vec<ReplicationRecord>,
    pub note: String,
}

impl ComparisonReport {
    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// One row per replication and method; the MSE columns are the box-plot data.
    pub fn records_csv(&self) -> String {
        let mut s = String::from("replication,method,mse,nnz,lambda,mu,converged\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{:e},{},{:e},{},{}",
                r.replication, r.method, r.mse, r.nnz, r.lambda, r.mu, r.converged
            );
        }
        s
    }
}

fn mean_sq(v: &DVector<f64>) -> f64 {
    v.norm_squared() / v.len() as f64
}

fn fit_one(
    data: &LinearData,
    method: &MethodSpec,
    tuning: &Tuning,
    beta: &DVector<f64>,
) -> Result<(f64, usize, f64, f64, bool)> {
    let p = beta.len();
    let template = Problem::lagrangian(data.train.x.clone(), data.train.y.clone(), 1.0, LambdaSide::OnPenalty)?;
    let fracs = log_grid_desc(10f64.powf(tuning.log10_hi), 10f64.powf(tuning.log10_lo), tuning.lambda_points);
    let mut best: Option<(f64, Vec<f64>, f64, f64, bool)> = None;
    for mu in method.mu_candidates(tuning) {
        let spec = method.spec(mu, p)?;
        let lmax = template.lambda_max(&spec)?;
        if !(lmax > 0.0) {
            continue;
        }
        let grid: Vec<f64> = fracs.iter().map(|f| f * lmax).collect();
        for point in solution_path(&template, &spec, &grid, &tuning.solver)? {
            let Some(res) = point.result else { continue };
            let x = DVector::from_column_slice(&res.x_hat);
            let val = mean_sq(&(&data.validation.y - &data.validation.x * &x));
            if best.as_ref().is_none_or(|b| val < b.0) {
                best = Some((val, res.x_hat, point.lambda, mu, res.converged));
            }
        }
    }
    let (_, x_hat, lambda, mu, converged) =
        best.ok_or_else(|| Error::InvalidParameter(format!("no usable fit for method '{}'", method.name)))?;
    let err = DVector::from_column_slice(&x_hat) - beta;
    let mse = mean_sq(&(&data.test.x * err));
    Ok((mse, support_size(&x_hat), lambda, mu, converged))
}

pub fn run_comparison(config: &ScenarioConfig) -> Result<ComparisonReport> {
    config.validate()?;
    let Generator::LinearModel(model) = &config.generator else {
        return Err(Error::InvalidParameter("comparison needs a linear_model generator".into()));
    };
    let beta = DVector::from_column_slice(&model.beta);
    let per_rep: Vec<Result<Vec<ReplicationRecord>>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(config.seed, rep as u64);
            let data = generate_linear(model, &mut rng)?;
            config
                .methods
                .iter()
                .map(|method| {
                    let (mse, nnz, lambda, mu, converged) = fit_one(&data, method, &config.tuning, &beta)?;
                    Ok(ReplicationRecord {
                        replication: rep,
                        method: method.name.clone(),
                        mse,
                        nnz,
                        lambda,
                        mu,
                        converged,
                    })
                })
                .collect()
        })
        .collect();
    let mut records = Vec::new();
    for r in per_rep {
        records.extend(r?);
    }
    let mut boot_rng = replication_rng(config.seed, BOOTSTRAP_STREAM);
    let summaries = config
        .methods
        .iter()
        .map(|method| {
            let mine: Vec<&ReplicationRecord> = records.iter().filter(|r| r.method == method.name).collect();
            let used: Vec<&&ReplicationRecord> =
                mine.iter().filter(|r| r.converged || !config.tuning.exclude_unconverged).collect();
            let mses: Vec<f64> = used.iter().map(|r| r.mse).collect();
            let nnzs: Vec<f64> = used.iter().map(|r| r.nnz as f64).collect();
            MethodSummary {
                method: method.name.clone(),
                median_mse: median(&mses),
                bootstrap_sd: bootstrap_median_sd(&mses, config.tuning.bootstrap_resamples, &mut boot_rng),
                median_nnz: median(&nnzs),
                used: used.len(),
                unconverged: mine.iter().filter(|r| !r.converged).count(),
            }
        })
        .collect();
    Ok(ComparisonReport {
        scenario: config.name.clone(),
        true_nnz: model.beta.iter().filter(|b| **b != 0.0).count(),
        summaries,
        records,
        note: "tuning protocol and scenario transcription affect absolute MSE values; only orderings are comparable"
            .into(),
    })
}

// ---------------------------------------------------------------------------
// grouping paths

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSeries {
    pub method: String,
    pub mu: f64,
    pub lambda_max: f64,
    pub lambdas: Vec<f64>,
    /// `coefficients[i]` is the solution at `lambdas[i]` (NaN where the solve failed).
    pub coefficients: Vec<Vec<f64>>,
    pub converged: Vec<bool>,
}

impl PathSeries {
    /// `lambda,beta_1,…` rows.
    pub fn to_csv(&self) -> String {
        let width = self.coefficients.first().map_or(0, Vec::len);
        let mut s = String::from("lambda");
        for j in 1..=width {
            let _ = write!(s, ",beta_{j}");
        }
        s.push('\n');
        for (l, c) in self.lambdas.iter().zip(&self.coefficients) {
            let _ = write!(s, "{l:e}");
            for v in c {
                let _ = write!(s, ",{v:e}");
            }
            s.push('\n');
        }
        s
    }

    /// Relative spread of `(|β₁|, |β₂|, |β₃|)` at every point, `None` where
    /// the signs are not `(+, −, +)` up to a global flip or the block is zero.
    pub fn proportionality(&self) -> Vec<Option<f64>> {
        self.coefficients
            .iter()
            .map(|c| {
                let s = [c[0], -c[1], c[2]];
                let aligned = s.iter().all(|v| *v > 0.0) || s.iter().all(|v| *v < 0.0);
                if !aligned {
                    return None;
                }
                let mags = s.map(f64::abs);
                let mean = mags.iter().sum::<f64>() / 3.0;
                let spread = mags.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - mags.iter().cloned().fold(f64::INFINITY, f64::min);
                Some(spread / mean)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingPathsReport {
    pub seed: u64,
    pub m: usize,
    pub series: Vec<PathSeries>,
}

fn method_mu(method: &MethodSpec) -> f64 {
    match method.kind {
        RegularizerKind::L1 | RegularizerKind::L2Sq | RegularizerKind::GroupLasso => 0.0,
        _ => method.mu.unwrap_or(0.5),
    }
}

fn path_series(data: &Split, method: &MethodSpec, fixture: &GroupingFixture, opts: &SolverOptions) -> Result<PathSeries> {
    let template = Problem::lagrangian(data.x.clone(), data.y.clone(), 1.0, LambdaSide::OnPenalty)?;
    let mu = method_mu(method);
    let spec = method.spec(mu, data.x.ncols())?;
    let lambda_max = template.lambda_max(&spec)?;
    let lambdas = log_grid_desc(1.2 * lambda_max, 1.2 * lambda_max * fixture.path_ratio, fixture.path_points);
    let points = solution_path(&template, &spec, &lambdas, opts)?;
    let p = data.x.ncols();
    Ok(PathSeries {
        method: method.name.clone(),
        mu,
        lambda_max,
        coefficients: points
            .iter()
            .map(|pt| pt.result.as_ref().map_or(vec![f64::NAN; p], |r| r.x_hat.clone()))
            .collect(),
        converged: points.iter().map(|pt| pt.result.as_ref().is_some_and(|r| r.converged)).collect(),
        lambdas,
    })
}

/// Solution paths of every configured method on one draw of the fixture,
/// λ on the penalty, each grid running from `1.2·λ_max` down.
pub fn run_grouping_paths(config: &ScenarioConfig) -> Result<GroupingPathsReport> {
    config.validate()?;
    let fixture = match &config.generator {
        Generator::GroupingFixture(f) | Generator::PathFixture(f) => f,
        _ => return Err(Error::InvalidParameter("grouping paths need a grouping_fixture generator".into())),
    };
    let data = generate_grouping(fixture, &mut replication_rng(config.seed, 0))?;
    let series = config
        .methods
        .par_iter()
        .map(|m| path_series(&data, m, fixture, &config.tuning.solver))
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupingPathsReport {
        seed: config.seed,
        m: fixture.m,
        series,
    })
}

// ---------------------------------------------------------------------------
// path nonequivalence

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPoint {
    pub lambda_clot: f64,
    pub lambda_en: f64,
    pub beta_clot: Vec<f64>,
    pub beta_en: Vec<f64>,
    /// `‖β_C(λ_C) − β_EN(λ_EN)‖₂`
    pub difference: f64,
    /// `|β₁,C − β₁,EN|` after matching.
    pub first_component_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonequivalenceReport {
    pub seed: u64,
    pub mu_clot: f64,
    pub mu_en: f64,
    pub points: Vec<MatchedPoint>,
    /// `max ‖β_C‖₂` over the matched range.
    pub max_beta_norm: f64,
    pub max_difference: f64,
    pub map_monotone: bool,
}

impl NonequivalenceReport {
    /// `lambda_clot,lambda_en,difference` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda_clot,lambda_en,difference\n");
        for p in &self.points {
            let _ = writeln!(s, "{:e},{:e},{:e}", p.lambda_clot, p.lambda_en, p.difference);
        }
        s
    }
}

/// Longest run of grid points, starting at the top of a descending grid,
/// over which `β₁` is nondecreasing as λ decreases. Returns its end index.
fn monotone_prefix(first: &[f64]) -> usize {
    let mut end = 1;
    while end < first.len() && first[end] >= first[end - 1] && first[end].is_finite() {
        end += 1;
    }
    end
}

/// Maps the CLOT path onto the EN path by equating first components and
/// reports how far apart the full vectors are.
///
/// For each CLOT grid point whose `β₁` is positive and within the range the
/// monotone part of the EN path attains, `λ_EN` is located by bisection on
/// `log λ` between the bracketing EN grid points, with fresh EN solves, until
/// the first components agree to `1e-9` relative.
pub fn run_path_nonequivalence(config: &ScenarioConfig) -> Result<NonequivalenceReport> {
    config.validate()?;
    let fixture = match &config.generator {
        Generator::PathFixture(f) | Generator::GroupingFixture(f) => f,
        _ => return Err(Error::InvalidParameter("path study needs a path_fixture generator".into())),
    };
    let clot = config
        .methods
        .iter()
        .find(|m| m.kind == RegularizerKind::Clot)
        .cloned()
        .unwrap_or_else(|| MethodSpec::new("clot", RegularizerKind::Clot, None));
    let en = config
        .methods
        .iter()
        .find(|m| m.kind == RegularizerKind::ElasticNet)
        .cloned()
        .unwrap_or_else(|| MethodSpec::new("en", RegularizerKind::ElasticNet, None));
    let opts = &config.tuning.solver;
    let data = generate_grouping(fixture, &mut replication_rng(config.seed, 0))?;
    let c_path = path_series(&data, &clot, fixture, opts)?;
    let e_path = path_series(&data, &en, fixture, opts)?;

    let orient = |c: &[f64]| if c_path.coefficients.last().map_or(1.0, |l| l[0].signum()) < 0.0 { -c[0] } else { c[0] };
    let e_first: Vec<f64> = e_path.coefficients.iter().map(|c| orient(c)).collect();
    let c_first: Vec<f64> = c_path.coefficients.iter().map(|c| orient(c)).collect();
    let e_end = monotone_prefix(&e_first);
    let c_end = monotone_prefix(&c_first);
    let e_top = e_first[e_end - 1];
    if !(e_top > 0.0) || c_end < 2 {
        return Err(Error::NonMonotone("first components are not monotone on any nontrivial range".into()));
    }

    let template = Problem::lagrangian(data.x.clone(), data.y.clone(), 1.0, LambdaSide::OnPenalty)?;
    let en_spec = en.spec(e_path.mu, 6)?;
    let solve_en = |lambda: f64, warm: &[f64]| -> Result<SolveResult> {
        let p = template.with(data.y.clone(), Form::Lagrangian { lambda, side: LambdaSide::OnPenalty })?;
        solve_lagrangian_from(&p, &en_spec, opts, Some(warm))
    };

    let mut points = Vec::new();
    for (i, &target) in c_first.iter().enumerate().take(c_end) {
        if !(target > 0.0) || target > e_top {
            continue;
        }
        // e_first[hi] ≤ target ≤ e_first[lo] with lo = hi + 1 on the descending grid
        let Some(k) = (1..e_end).find(|&k| e_first[k] >= target) else { continue };
        let (mut hi_l, mut lo_l) = (e_path.lambdas[k - 1].ln(), e_path.lambdas[k].ln());
        let mut warm = e_path.coefficients[k].clone();
        let mut best = solve_en(e_path.lambdas[k], &warm)?;
        for _ in 0..80 {
            let mid = 0.5 * (hi_l + lo_l);
            let res = solve_en(mid.exp(), &warm)?;
            let v = orient(&res.x_hat);
            warm = res.x_hat.clone();
            best = res;
            if (v - target).abs() <= 1e-9 * target {
                lo_l = mid;
                hi_l = mid;
                break;
            }
            if v > target {
                lo_l = mid;
            } else {
                hi_l = mid;
            }
        }
        let lambda_en = (0.5 * (hi_l + lo_l)).exp();
        let beta_c = c_path.coefficients[i].clone();
        let diff = beta_c.iter().zip(&best.x_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        points.push(MatchedPoint {
            lambda_clot: c_path.lambdas[i],
            lambda_en,
            first_component_gap: (orient(&beta_c) - orient(&best.x_hat)).abs(),
            beta_en: best.x_hat,
            beta_clot: beta_c,
            difference: diff,
        });
    }
    if points.is_empty() {
        return Err(Error::NonMonotone("no CLOT point falls inside the monotone EN range".into()));
    }
    let max_beta_norm = points
        .iter()
        .map(|p| p.beta_clot.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let max_difference = points.iter().map(|p| p.difference).fold(0.0, f64::max);
    let map_monotone = points.windows(2).all(|w| w[1].lambda_en <= w[0].lambda_en * (1.0 + 1e-9));
    Ok(NonequivalenceReport {
        seed: config.seed,
        mu_clot: c_path.mu,
        mu_en: e_path.mu,
        points,
        max_beta_norm,
        max_difference,
        map_monotone,
    })
}

// ---------------------------------------------------------------------------
// scaling

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub c: i32,
    pub method: String,
    pub head: Vec<f64>,
    pub relative_error: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual_l2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub m: usize,
    pub n: usize,
    pub p: u64,
    pub r: u32,
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    pub fn row(&self, method: &str, c: i32) -> Option<&ScalingRow> {
        self.rows.iter().find(|r| r.method == method && r.c == c)
    }
}

/// Exact-recovery test `min R(z) s.t. Az = y` with `y = A·10^c·x` for each
/// `c`, on a normalized DeVore matrix.
///
/// `methods` defaults to CLOT with `μ = 0.2` and EN weighted
/// `0.8‖z‖₁ + 0.2‖z‖₂²`, i.e. μ = 0.2 on the squared term.
pub fn run_scaling(fixture: &ScalingFixture, methods: &[(String, RegularizerSpec)], opts: &SolverOptions) -> Result<ScalingReport> {
    let a = devore_matrix(
        &DeVoreParams {
            p: fixture.p,
            r: fixture.r,
            n_truncate: Some(fixture.n),
        },
        true,
    )?;
    let (m, n) = a.shape();
    if fixture.x_head.len() > n {
        return Err(Error::InvalidParameter("x_head is longer than the signal".into()));
    }
    let mut x = DVector::zeros(n);
    x.rows_mut(0, fixture.x_head.len()).copy_from_slice(&fixture.x_head);
    let base = Problem::constrained(a, DVector::zeros(m), 0.0)?;
    let jobs: Vec<(i32, &(String, RegularizerSpec))> =
        fixture.c_list.iter().flat_map(|&c| methods.iter().map(move |mth| (c, mth))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(c, (name, spec))| {
            let truth = &x * 10f64.powi(c);
            let y = base.design().apply(&truth);
            let outcome = base
                .with(y, Form::Constrained { epsilon: 0.0 })
                .and_then(|p| solve_constrained(&p, spec, opts));
            Ok(match outcome {
                Ok(res) => {
                    let xh = DVector::from_column_slice(&res.x_hat);
                    ScalingRow {
                        c,
                        method: name.clone(),
                        head: res.x_hat[..fixture.x_head.len()].to_vec(),
                        relative_error: (&xh - &truth).norm() / truth.norm(),
                        converged: res.converged,
                        iterations: res.iterations,
                        residual_l2: res.residual_l2,
                        error: None,
                    }
                }
                Err(e) => ScalingRow {
                    c,
                    method: name.clone(),
                    head: Vec::new(),
                    relative_error: f64::INFINITY,
                    converged: false,
                    iterations: 0,
                    residual_l2: f64::INFINITY,
                    error: Some(e.to_string()),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingReport {
        m,
        n,
        p: fixture.p,
        r: fixture.r,
        rows,
    })
}

pub fn default_scaling_methods() -> Vec<(String, RegularizerSpec)> {
    vec![
        ("clot".into(), RegularizerSpec::clot(0.2)),
        ("en".into(), RegularizerSpec::elastic_net(0.8)),
    ]
}

// ---------------------------------------------------------------------------
// dispatch

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "study", rename_all = "snake_case")]
pub enum StudyReport {
    Comparison(ComparisonReport),
    GroupingPaths(GroupingPathsReport),
    PathNonequivalence(NonequivalenceReport),
    Scaling(ScalingReport),
}

/// Runs the study implied by the generator kind.
pub fn run_study(config: &ScenarioConfig) -> Result<StudyReport> {
    Ok(match &config.generator {
        Generator::LinearModel(_) => StudyReport::Comparison(run_comparison(config)?),
        Generator::GroupingFixture(_) => StudyReport::GroupingPaths(run_grouping_paths(config)?),
        Generator::PathFixture(_) => StudyReport::PathNonequivalence(run_path_nonequivalence(config)?),
        Generator::ScalingFixture(f) => {
            let methods = if config.methods.iter().all(|m| m.mu.is_some() || m.kind == RegularizerKind::L1) {
                config
                    .methods
                    .iter()
                    .map(|m| Ok((m.name.clone(), m.spec(method_mu(m), f.n)?)))
                    .collect::<Result<Vec<_>>>()?
            } else {
                default_scaling_methods()
            };
            StudyReport::Scaling(run_scaling(f, &methods, &SolverOptions::default())?)
        }
    })
}
