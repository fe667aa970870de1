//! LASSO by cyclic coordinate descent.
//!
//! Covariates are standardized to zero mean and unit (population) variance,
//! the target is centered and the intercept is left unpenalized. The objective
//! on the standardized scale is
//!
//! ```text
//! (1 / 2T) · ‖y_c − X_s b‖² + λ · ‖b‖₁
//! ```
//!
//! Fits are reported on the original scale. A fit is `converged` only when a
//! full sweep moves no coefficient by more than the tolerance *and* the KKT
//! conditions hold to within the tolerance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_N_LAMBDAS: usize = 100;
pub const DEFAULT_LAMBDA_MIN_RATIO: f64 = 1e-3;

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A target and its covariates together with the fitted standardization.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    columns: Vec<Vec<f64>>,
    y: Vec<f64>,
    standardized: Vec<Vec<f64>>,
    y_centered: Vec<f64>,
    column_means: Vec<f64>,
    column_sds: Vec<f64>,
    y_mean: f64,
}

impl DesignMatrix {
    /// Builds a design from covariate columns (each of length T) and a target.
    /// Constant columns are kept but excluded from fitting (their coefficient
    /// is always zero).
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C], y: &[f64]) -> Result<Self> {
        let t = y.len();
        if t < 2 {
            return Err(Error::InvalidConfig(format!("design needs T >= 2, got {t}")));
        }
        if columns.is_empty() {
            return Err(Error::InvalidConfig("design needs at least one column".into()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("target value {i} is not finite")));
        }
        let tf = t as f64;
        let mut out = DesignMatrix {
            columns: Vec::with_capacity(columns.len()),
            y: y.to_vec(),
            standardized: Vec::with_capacity(columns.len()),
            y_centered: Vec::new(),
            column_means: Vec::with_capacity(columns.len()),
            column_sds: Vec::with_capacity(columns.len()),
            y_mean: y.iter().sum::<f64>() / tf,
        };
        out.y_centered = y.iter().map(|v| v - out.y_mean).collect();
        for (j, col) in columns.iter().enumerate() {
            let col = col.as_ref();
            if col.len() != t {
                return Err(Error::LengthMismatch {
                    expected: t,
                    found: col.len(),
                });
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "column {j} has a non-finite value at row {i}"
                )));
            }
            let mean = col.iter().sum::<f64>() / tf;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / tf).sqrt();
            let constant = col.iter().all(|&v| v == col[0]);
            let (sd, std_col) = if constant {
                (0.0, vec![0.0; t])
            } else {
                (sd, col.iter().map(|v| (v - mean) / sd).collect())
            };
            out.columns.push(col.to_vec());
            out.column_means.push(mean);
            out.column_sds.push(sd);
            out.standardized.push(std_col);
        }
        Ok(out)
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }

    pub fn column_sds(&self) -> &[f64] {
        &self.column_sds
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn is_included(&self, j: usize) -> bool {
        self.column_sds[j] > 0.0
    }

    /// A new design over a subset of rows, re-standardized on that subset.
    pub fn subset_rows(&self, rows: &[usize]) -> Result<DesignMatrix> {
        let cols: Vec<Vec<f64>> = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|&r| c[r]).collect())
            .collect();
        let y: Vec<f64> = rows.iter().map(|&r| self.y[r]).collect();
        DesignMatrix::from_columns(&cols, &y)
    }

    /// Standardized-scale gradient component `⟨x_j, r⟩ / T`.
    fn correlation_with(&self, j: usize, residual: &[f64]) -> f64 {
        dot(&self.standardized[j], residual) / self.n_rows() as f64
    }
}

/// Smallest penalty whose solution is entirely zero: `max_j |⟨x_j, y − ȳ⟩| / T`
/// over the standardized columns.
pub fn lambda_max(design: &DesignMatrix) -> f64 {
    (0..design.n_cols())
        .map(|j| design.correlation_with(j, &design.y_centered).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub lambda: f64,
    /// Original-scale coefficients.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub active_set: Vec<usize>,
    pub n_iterations: usize,
    pub converged: bool,
    /// Coefficients on the standardized scale, used for warm starts.
    pub standardized_coefficients: Vec<f64>,
}

impl LassoFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + dot(&self.coefficients, row)
    }

    /// Predictions for `n` rows given column-major covariates.
    pub fn predict_columns<C: AsRef<[f64]>>(&self, columns: &[C], n: usize) -> Vec<f64> {
        (0..n)
            .map(|t| {
                self.intercept
                    + columns
                        .iter()
                        .zip(&self.coefficients)
                        .map(|(c, b)| c.as_ref()[t] * b)
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Coordinate-descent state for one design and penalty. Exposed so callers
/// can step sweeps and inspect the objective.
pub struct CoordinateDescent<'a> {
    design: &'a DesignMatrix,
    lambda: f64,
    coef: Vec<f64>,
    residual: Vec<f64>,
}

impl<'a> CoordinateDescent<'a> {
    pub fn new(design: &'a DesignMatrix, lambda: f64, warm_start: Option<&[f64]>) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda {lambda} must be finite and >= 0")));
        }
        let p = design.n_cols();
        let mut coef = match warm_start {
            Some(w) if w.len() != p => {
                return Err(Error::LengthMismatch {
                    expected: p,
                    found: w.len(),
                })
            }
            Some(w) => w.to_vec(),
            None => vec![0.0; p],
        };
        let mut residual = design.y_centered.clone();
        for (j, b) in coef.iter_mut().enumerate() {
            if !design.is_included(j) {
                *b = 0.0;
            } else if *b != 0.0 {
                for (r, x) in residual.iter_mut().zip(&design.standardized[j]) {
                    *r -= *b * x;
                }
            }
        }
        Ok(CoordinateDescent {
            design,
            lambda,
            coef,
            residual,
        })
    }

    /// One cyclic pass; returns the largest absolute coefficient change.
    pub fn sweep(&mut self) -> f64 {
        let mut max_delta: f64 = 0.0;
        for j in 0..self.design.n_cols() {
            if !self.design.is_included(j) {
                continue;
            }
            let old = self.coef[j];
            let rho = self.design.correlation_with(j, &self.residual) + old;
            let new = soft_threshold(rho, self.lambda);
            let delta = new - old;
            if delta != 0.0 {
                for (r, x) in self.residual.iter_mut().zip(&self.design.standardized[j]) {
                    *r -= delta * x;
                }
                self.coef[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        max_delta
    }

    pub fn objective(&self) -> f64 {
        let t = self.design.n_rows() as f64;
        dot(&self.residual, &self.residual) / (2.0 * t)
            + self.lambda * self.coef.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// Largest KKT violation on the standardized scale.
    pub fn kkt_violation(&self) -> f64 {
        kkt_from(self.design, self.lambda, &self.coef, &self.residual)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    fn finish(self, n_iterations: usize, converged: bool) -> LassoFit {
        let d = self.design;
        let coefficients: Vec<f64> = self
            .coef
            .iter()
            .zip(&d.column_sds)
            .map(|(&b, &sd)| if sd > 0.0 { b / sd } else { 0.0 })
            .collect();
        let intercept = d.y_mean
            - coefficients
                .iter()
                .zip(&d.column_means)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        let active_set = self
            .coef
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0.0)
            .map(|(j, _)| j)
            .collect();
        LassoFit {
            lambda: self.lambda,
            coefficients,
            intercept,
            active_set,
            n_iterations,
            converged,
            standardized_coefficients: self.coef,
        }
    }
}

fn kkt_from(design: &DesignMatrix, lambda: f64, coef: &[f64], residual: &[f64]) -> f64 {
    (0..design.n_cols())
        .filter(|&j| design.is_included(j))
        .map(|j| {
            let g = design.correlation_with(j, residual);
            if coef[j] == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g - lambda * coef[j].signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// KKT residual of a finished fit, recomputed from scratch.
pub fn kkt_residual(design: &DesignMatrix, fit: &LassoFit) -> f64 {
    let mut residual = design.y_centered.clone();
    for (j, &b) in fit.standardized_coefficients.iter().enumerate() {
        if b != 0.0 {
            for (r, x) in residual.iter_mut().zip(&design.standardized[j]) {
                *r -= b * x;
            }
        }
    }
    kkt_from(design, fit.lambda, &fit.standardized_coefficients, &residual)
}

pub fn fit(
    design: &DesignMatrix,
    lambda: f64,
    options: &FitOptions,
    warm_start: Option<&[f64]>,
) -> Result<LassoFit> {
    if options.tolerance.is_nan() || options.tolerance <= 0.0 {
        return Err(Error::InvalidConfig("tolerance must be positive".into()));
    }
    let mut cd = CoordinateDescent::new(design, lambda, warm_start)?;
    for iter in 1..=options.max_iter {
        let delta = cd.sweep();
        if delta < options.tolerance && cd.kkt_violation() <= options.tolerance {
            return Ok(cd.finish(iter, true));
        }
    }
    Ok(cd.finish(options.max_iter, false))
}

/// Log-spaced penalties from `lambda_max` down to `lambda_max · ratio`.
pub fn lambda_grid(design: &DesignMatrix, n_lambdas: usize, lambda_min_ratio: f64) -> Result<Vec<f64>> {
    if n_lambdas < 2 {
        return Err(Error::InvalidConfig("n_lambdas must be at least 2".into()));
    }
    if !(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0) {
        return Err(Error::InvalidConfig("lambda_min_ratio must lie in (0, 1)".into()));
    }
    let top = lambda_max(design);
    if top == 0.0 {
        // nothing correlates with the target: the zero fit is the whole path
        return Ok(vec![0.0]);
    }
    let step = lambda_min_ratio.ln() / (n_lambdas - 1) as f64;
    Ok((0..n_lambdas)
        .map(|k| if k == 0 { top } else { top * (step * k as f64).exp() })
        .collect())
}

/// Fits each penalty in order, warm-starting from the previous solution.
pub fn fit_lambdas(design: &DesignMatrix, lambdas: &[f64], options: &FitOptions) -> Result<Vec<LassoFit>> {
    let mut out: Vec<LassoFit> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let warm = out.last().map(|f| f.standardized_coefficients.as_slice());
        out.push(fit(design, lambda, options, warm)?);
    }
    Ok(out)
}

pub fn fit_path(
    design: &DesignMatrix,
    n_lambdas: usize,
    lambda_min_ratio: f64,
    options: &FitOptions,
) -> Result<Vec<LassoFit>> {
    let grid = lambda_grid(design, n_lambdas, lambda_min_ratio)?;
    fit_lambdas(design, &grid, options)
}

/// How to pick one fit from a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionRule {
    /// `T·ln(RSS/T) + |active|·ln(T)`
    Bic,
    /// Contiguous-block K-fold cross-validation on mean validation MSE.
    Cv { folds: usize },
}

impl SelectionRule {
    pub const DEFAULT_FOLDS: usize = 5;
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionRule::Bic => f.write_str("bic"),
            SelectionRule::Cv { folds } => write!(f, "cv:{folds}"),
        }
    }
}

impl FromStr for SelectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bic" => Ok(SelectionRule::Bic),
            "cv" => Ok(SelectionRule::Cv {
                folds: SelectionRule::DEFAULT_FOLDS,
            }),
            other => match other.strip_prefix("cv:").map(str::parse::<usize>) {
                Some(Ok(folds)) if folds >= 2 => Ok(SelectionRule::Cv { folds }),
                _ => Err(Error::InvalidConfig(format!(
                    "unknown selection rule `{s}` (expected bic, cv or cv:<folds>=2..)"
                ))),
            },
        }
    }
}

fn residual_sum_of_squares(design: &DesignMatrix, fit: &LassoFit) -> f64 {
    (0..design.n_rows())
        .map(|t| {
            let pred = fit.intercept
                + design
                    .columns
                    .iter()
                    .zip(&fit.coefficients)
                    .map(|(c, b)| c[t] * b)
                    .sum::<f64>();
            (design.y[t] - pred).powi(2)
        })
        .sum()
}

pub fn bic_score(design: &DesignMatrix, fit: &LassoFit) -> f64 {
    let t = design.n_rows() as f64;
    let rss = residual_sum_of_squares(design, fit).max(f64::MIN_POSITIVE);
    t * (rss / t).ln() + fit.active_set.len() as f64 * t.ln()
}

/// Contiguous fold boundaries: fold `f` covers rows `bounds[f]..bounds[f+1]`.
pub fn block_folds(n_rows: usize, folds: usize) -> Result<Vec<usize>> {
    if folds < 2 || folds > n_rows {
        return Err(Error::InvalidConfig(format!(
            "cannot split {n_rows} rows into {folds} folds"
        )));
    }
    Ok((0..=folds).map(|f| f * n_rows / folds).collect())
}

/// Mean validation MSE per penalty of `lambdas` under blocked K-fold CV.
pub fn cv_scores(
    design: &DesignMatrix,
    lambdas: &[f64],
    folds: usize,
    options: &FitOptions,
) -> Result<Vec<f64>> {
    let n = design.n_rows();
    let bounds = block_folds(n, folds)?;
    let mut scores = vec![0.0; lambdas.len()];
    for f in 0..folds {
        let (lo, hi) = (bounds[f], bounds[f + 1]);
        let train: Vec<usize> = (0..lo).chain(hi..n).collect();
        let sub = design.subset_rows(&train)?;
        let fits = fit_lambdas(&sub, lambdas, options)?;
        for (score, fit) in scores.iter_mut().zip(&fits) {
            let mse = (lo..hi)
                .map(|t| {
                    let row: Vec<f64> = design.columns.iter().map(|c| c[t]).collect();
                    (design.y[t] - fit.predict_row(&row)).powi(2)
                })
                .sum::<f64>()
                / (hi - lo) as f64;
            *score += mse / folds as f64;
        }
    }
    Ok(scores)
}

/// Index of the lowest score; ties go to the earliest (largest-penalty) fit.
fn argmin_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s < scores[best] {
            best = i;
        }
    }
    best
}

pub fn select_index(
    path: &[LassoFit],
    design: &DesignMatrix,
    rule: SelectionRule,
    options: &FitOptions,
) -> Result<usize> {
    if path.is_empty() {
        return Err(Error::EmptySelection("empty regularization path"));
    }
    if path.len() == 1 {
        return Ok(0);
    }
    let scores = match rule {
        SelectionRule::Bic => path.iter().map(|f| bic_score(design, f)).collect::<Vec<_>>(),
        SelectionRule::Cv { folds } => {
            let lambdas: Vec<f64> = path.iter().map(|f| f.lambda).collect();
            cv_scores(design, &lambdas, folds, options)?
        }
    };
    Ok(argmin_first(&scores))
}

pub fn select_lambda(
    path: &[LassoFit],
    design: &DesignMatrix,
    rule: SelectionRule,
) -> Result<LassoFit> {
    let i = select_index(path, design, rule, &FitOptions::default())?;
    Ok(path[i].clone())
}

/// Path parameters plus a selection rule: everything needed to go from a
/// design to one chosen fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub n_lambdas: usize,
    pub lambda_min_ratio: f64,
    pub rule: SelectionRule,
    pub options: FitOptions,
}

impl LassoConfig {
    pub fn with_rule(rule: SelectionRule) -> Self {
        LassoConfig {
            n_lambdas: DEFAULT_N_LAMBDAS,
            lambda_min_ratio: DEFAULT_LAMBDA_MIN_RATIO,
            rule,
            options: FitOptions::default(),
        }
    }

    pub fn fit_and_select(&self, design: &DesignMatrix) -> Result<LassoFit> {
        let path = fit_path(design, self.n_lambdas, self.lambda_min_ratio, &self.options)?;
        let i = select_index(&path, design, self.rule, &self.options)?;
        Ok(path.into_iter().nth(i).expect("index within path"))
    }
}
