//! Nowcasting a delayed target from contemporaneous search indices.
//!
//! One LASSO model is fitted per sample of the covariates and one on their
//! average. Models are fitted on a training window and projected over a later
//! evaluation window using the covariates observed there; nothing from the
//! evaluation window's target enters a fit.

use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::mean_columns;
use crate::error::{Error, Result};
use crate::lasso::{DesignMatrix, LassoConfig, LassoFit, SelectionRule};
use crate::model::{Frequency, SamplePool, TimeGrid};
use crate::sampler::LatentPanel;

pub const DEFAULT_DAILY_WINDOW: usize = 7;
pub const DEFAULT_MONTHLY_WINDOW: usize = 3;
pub const AVERAGE_LABEL: &str = "average";

pub fn default_window(frequency: Frequency) -> usize {
    match frequency {
        Frequency::Daily => DEFAULT_DAILY_WINDOW,
        Frequency::Monthly => DEFAULT_MONTHLY_WINDOW,
    }
}

/// Centered moving average of odd width; near the ends the window shrinks
/// symmetrically to whatever fits.
pub fn trend_smooth(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window.is_multiple_of(2) {
        return Err(Error::InvalidWindow(format!(
            "smoothing window must be odd and at least 1, got {window}"
        )));
    }
    if window > values.len() {
        return Err(Error::InvalidWindow(format!(
            "smoothing window {window} exceeds series length {}",
            values.len()
        )));
    }
    let half = window / 2;
    let n = values.len();
    Ok((0..n)
        .map(|t| {
            let h = half.min(t).min(n - 1 - t);
            let span = &values[t - h..=t + h];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect())
}

pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch {
            expected: actual.len(),
            found: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::InvalidWindow("RMSE needs at least one period".into()));
    }
    let sse: f64 = predicted.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum();
    Ok((sse / actual.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSeries {
    pub name: String,
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub trend_values: Vec<f64>,
    pub window: usize,
}

impl TargetSeries {
    pub fn new(name: impl Into<String>, grid: TimeGrid, values: Vec<f64>, window: usize) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::series(Some(i), "target value is not finite"));
        }
        let trend_values = trend_smooth(&values, window)?;
        Ok(TargetSeries {
            name: name.into(),
            grid,
            values,
            trend_values,
            window,
        })
    }

    /// Parses `period,value` with a header row. The frequency is taken from
    /// the first period label; `window` defaults to the frequency's default.
    pub fn from_csv(name: impl Into<String>, text: &str, window: Option<usize>) -> Result<Self> {
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, header)) if header.trim().eq_ignore_ascii_case("period,value") => {}
            Some((i, header)) => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected header `period,value`, found `{}`", header.trim()),
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "empty target file".into(),
                })
            }
        }
        let mut frequency = None;
        let mut periods = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines {
            let parse_err = |message: String| Error::Parse { line: i + 1, message };
            let (label, value) = line
                .trim()
                .split_once(',')
                .ok_or_else(|| parse_err(format!("expected `period,value`, found `{}`", line.trim())))?;
            let freq = *frequency.get_or_insert(
                Frequency::detect(label).ok_or_else(|| parse_err(format!("bad period `{label}`")))?,
            );
            let date = freq
                .parse_label(label)
                .ok_or_else(|| parse_err(format!("bad period `{label}`")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad value `{}`", value.trim())))?;
            periods.push(date);
            values.push(value);
        }
        let frequency = frequency.ok_or(Error::Parse {
            line: 2,
            message: "target file has no rows".into(),
        })?;
        let grid = TimeGrid::new(frequency, periods)?;
        Self::new(name, grid, values, window.unwrap_or_else(|| default_window(frequency)))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("period,value\n");
        for (label, v) in self.grid.labels().zip(&self.values) {
            let _ = writeln!(out, "{label},{v}");
        }
        out
    }
}

/// Which version of the target the models fit and are scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    #[default]
    Trend,
    Raw,
}

impl std::str::FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trend" => Ok(TargetKind::Trend),
            "raw" => Ok(TargetKind::Raw),
            other => Err(Error::InvalidConfig(format!("target kind must be trend or raw, got `{other}`"))),
        }
    }
}

/// Half-open period index ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NowcastWindows {
    pub train: Range<usize>,
    pub eval: Range<usize>,
}

impl NowcastWindows {
    pub fn validate(&self, n_periods: usize) -> Result<()> {
        let (tr, ev) = (&self.train, &self.eval);
        if tr.len() < 3 {
            return Err(Error::InvalidWindow(format!(
                "training window {tr:?} needs at least 3 periods"
            )));
        }
        if ev.is_empty() {
            return Err(Error::InvalidWindow(format!("evaluation window {ev:?} is empty")));
        }
        if tr.start < ev.end && ev.start < tr.end {
            return Err(Error::InvalidWindow(format!(
                "training window {tr:?} overlaps evaluation window {ev:?}"
            )));
        }
        if tr.end > ev.start {
            return Err(Error::InvalidWindow(format!(
                "training window {tr:?} must precede evaluation window {ev:?}"
            )));
        }
        if ev.end > n_periods {
            return Err(Error::InvalidWindow(format!(
                "evaluation window {ev:?} runs past the {n_periods} available periods"
            )));
        }
        Ok(())
    }

    /// Windows from inclusive period labels on `grid`.
    pub fn from_labels(grid: &TimeGrid, train: (&str, &str), eval: (&str, &str)) -> Result<Self> {
        let idx = |label: &str| {
            grid.frequency()
                .parse_label(label)
                .and_then(|d| grid.index_of(d))
                .ok_or_else(|| Error::InvalidWindow(format!("period `{label}` is not on the grid")))
        };
        let w = NowcastWindows {
            train: idx(train.0)?..idx(train.1)? + 1,
            eval: idx(eval.0)?..idx(eval.1)? + 1,
        };
        w.validate(grid.len())?;
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NowcastConfig {
    pub windows: NowcastWindows,
    pub lasso: LassoConfig,
    pub target_kind: TargetKind,
}

impl NowcastConfig {
    /// Blocked 5-fold CV on the smoothed trend.
    pub fn new(windows: NowcastWindows) -> Self {
        NowcastConfig {
            windows,
            lasso: LassoConfig::with_rule(SelectionRule::Cv { folds: 5 }),
            target_kind: TargetKind::Trend,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NowcastFit {
    pub fit: LassoFit,
    /// Predictions over the evaluation window.
    pub predictions: Vec<f64>,
}

fn training_target(target: &TargetSeries, cfg: &NowcastConfig) -> Result<Vec<f64>> {
    let raw = &target.values[cfg.windows.train.clone()];
    match cfg.target_kind {
        TargetKind::Raw => Ok(raw.to_vec()),
        // smoothing inside the window keeps evaluation values out of the fit
        TargetKind::Trend => trend_smooth(raw, target.window.min(odd_floor(raw.len()))),
    }
}

fn odd_floor(n: usize) -> usize {
    if n % 2 == 1 {
        n
    } else {
        n - 1
    }
}

/// What the evaluation window is scored against.
pub fn evaluation_truth(target: &TargetSeries, cfg: &NowcastConfig) -> Vec<f64> {
    let src = match cfg.target_kind {
        TargetKind::Trend => &target.trend_values,
        TargetKind::Raw => &target.values,
    };
    src[cfg.windows.eval.clone()].to_vec()
}

pub fn fit_nowcast<C: AsRef<[f64]>>(
    target: &TargetSeries,
    covariates: &[C],
    cfg: &NowcastConfig,
) -> Result<NowcastFit> {
    let w = &cfg.windows;
    w.validate(target.grid.len())?;
    if covariates.is_empty() {
        return Err(Error::InvalidConfig("no covariates given".into()));
    }
    for (j, c) in covariates.iter().enumerate() {
        let c = c.as_ref();
        if c.len() != target.grid.len() {
            return Err(Error::InvalidWindow(format!(
                "covariate {j} has {} periods, target has {}",
                c.len(),
                target.grid.len()
            )));
        }
        let used = c[w.train.clone()].iter().chain(&c[w.eval.clone()]);
        if used.clone().any(|v| !v.is_finite()) {
            return Err(Error::InvalidWindow(format!("covariate {j} has gaps inside the windows")));
        }
    }
    let train_cols: Vec<&[f64]> = covariates.iter().map(|c| &c.as_ref()[w.train.clone()]).collect();
    let y = training_target(target, cfg)?;
    let design = DesignMatrix::from_columns(&train_cols, &y)?;
    let fit = cfg.lasso.fit_and_select(&design)?;
    let eval_cols: Vec<&[f64]> = covariates.iter().map(|c| &c.as_ref()[w.eval.clone()]).collect();
    let predictions = fit.predict_columns(&eval_cols, w.eval.len());
    Ok(NowcastFit { fit, predictions })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    /// Sample id, or `average` for the averaged-covariate model.
    pub label: String,
    pub rmse: f64,
    pub active_set: Vec<usize>,
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NowcastReport {
    pub target: String,
    pub eval_periods: Vec<String>,
    pub actual: Vec<f64>,
    pub proposed: ModelResult,
    pub singles: Vec<ModelResult>,
    pub worst: f64,
    pub best: f64,
    pub average: f64,
}

impl NowcastReport {
    /// Table layout: `target,proposed,worst,best,average`.
    pub fn table_csv(reports: &[NowcastReport]) -> String {
        let mut out = String::from("target,proposed,worst,best,average\n");
        for r in reports {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6}",
                r.target, r.proposed.rmse, r.worst, r.best, r.average
            );
        }
        out
    }

    /// Wide per-period predictions: `period,actual,average,<sample ids>...`.
    pub fn predictions_csv(&self) -> String {
        let mut out = String::from("period,actual,");
        out.push_str(&self.proposed.label);
        for m in &self.singles {
            out.push(',');
            out.push_str(&m.label);
        }
        out.push('\n');
        for (t, label) in self.eval_periods.iter().enumerate() {
            let _ = write!(out, "{label},{:.6},{:.6}", self.actual[t], self.proposed.predictions[t]);
            for m in &self.singles {
                let _ = write!(out, ",{:.6}", m.predictions[t]);
            }
            out.push('\n');
        }
        out
    }
}

/// Fits one model per sample and one on the average of all samples.
pub fn compare_samples(target: &TargetSeries, pool: &SamplePool, cfg: &NowcastConfig) -> Result<NowcastReport> {
    if pool.grid() != target.grid {
        return Err(Error::InvalidWindow(format!(
            "target covers {}..{} ({} periods) but the pool covers {}..{} ({} periods)",
            target.grid.start(),
            target.grid.end(),
            target.grid.len(),
            pool.grid().start(),
            pool.grid().end(),
            pool.n_periods()
        )));
    }
    let actual = evaluation_truth(target, cfg);
    let ids = pool.sample_ids();
    let model = |label: &str, cols: &[&[f64]]| -> Result<ModelResult> {
        let nf = fit_nowcast(target, cols, cfg)?;
        Ok(ModelResult {
            label: label.to_string(),
            rmse: rmse(&nf.predictions, &actual)?,
            active_set: nf.fit.active_set,
            predictions: nf.predictions,
        })
    };
    let singles = (0..pool.n_samples())
        .into_par_iter()
        .map(|s| model(ids[s], &pool.columns(s)))
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<usize> = (0..pool.n_samples()).collect();
    let averaged = mean_columns(pool, &all);
    let avg_refs: Vec<&[f64]> = averaged.iter().map(Vec::as_slice).collect();
    let proposed = model(AVERAGE_LABEL, &avg_refs)?;
    let rmses: Vec<f64> = singles.iter().map(|m| m.rmse).collect();
    let worst = rmses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best = rmses.iter().copied().fold(f64::INFINITY, f64::min);
    let average = (rmses.iter().sum::<f64>() / rmses.len() as f64).clamp(best, worst);
    Ok(NowcastReport {
        target: target.name.clone(),
        eval_periods: target.grid.labels().skip(cfg.windows.eval.start).take(cfg.windows.eval.len()).collect(),
        actual,
        proposed,
        singles,
        worst,
        best,
        average,
    })
}

/// A target driven by the true (unsampled) index of `terms` with weights
/// `beta`, plus Gaussian noise with `noise_ratio` times the signal variance.
pub fn synthetic_target(
    panel: &LatentPanel,
    terms: &[usize],
    beta: &[f64],
    noise_ratio: f64,
    seed: u64,
    window: usize,
) -> Result<TargetSeries> {
    if terms.iter().any(|&p| p >= panel.n_terms()) {
        return Err(Error::InvalidConfig(format!(
            "target terms {terms:?} out of range for {} terms",
            panel.n_terms()
        )));
    }
    let truth = panel.normalized_truth()?;
    let cols: Vec<&[f64]> = terms.iter().map(|&p| truth[p].as_slice()).collect();
    let values = crate::sim::build_dgp(&cols, beta, seed, noise_ratio)?;
    TargetSeries::new("synthetic", panel.grid.clone(), values, window)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoother_examples() {
        let x = [0.0, 0.0, 0.0, 9.0, 0.0, 0.0, 0.0];
        assert_eq!(trend_smooth(&x, 3).unwrap(), vec![0.0, 0.0, 3.0, 3.0, 3.0, 0.0, 0.0]);
        assert_eq!(trend_smooth(&x, 1).unwrap(), x.to_vec());
        assert_eq!(trend_smooth(&[4.0; 9], 7).unwrap(), vec![4.0; 9]);
        // ends shrink symmetrically: t=0 is itself, t=1 averages 0..=2
        let y = [1.0, 2.0, 6.0, 3.0, 5.0];
        let s = trend_smooth(&y, 5).unwrap();
        assert_eq!(s[0], 1.0);
        assert_eq!(s[1], 3.0);
        assert_eq!(s[2], 17.0 / 5.0);
        assert!(trend_smooth(&x, 4).is_err());
        assert!(trend_smooth(&x, 0).is_err());
        assert!(trend_smooth(&x, 9).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[3.5, 0.5, 2.5], &[1.0, -2.0, 0.0]).unwrap(), 2.5);
        assert_eq!(rmse(&[1.0, 2.0], &[3.0, 2.0]).unwrap(), 2f64.sqrt());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn window_rules() {
        let ok = NowcastWindows { train: 0..10, eval: 10..15 };
        ok.validate(15).unwrap();
        assert!(NowcastWindows { train: 0..10, eval: 8..15 }.validate(20).is_err());
        assert!(NowcastWindows { train: 10..20, eval: 0..5 }.validate(20).is_err());
        assert!(NowcastWindows { train: 0..10, eval: 10..25 }.validate(20).is_err());
        assert!(NowcastWindows { train: 0..2, eval: 5..8 }.validate(20).is_err());
        assert!(NowcastWindows { train: 0..5, eval: 5..5 }.validate(20).is_err());
    }

    #[test]
    fn target_csv_round_trip() {
        let text = "period,value\n2020-02-01,3\n2020-02-02,4.5\n2020-02-03,1\n";
        let t = TargetSeries::from_csv("cases", text, Some(3)).unwrap();
        assert_eq!(t.grid.frequency(), Frequency::Daily);
        assert_eq!(t.values, vec![3.0, 4.5, 1.0]);
        // the daily default window needs a week of data
        assert!(TargetSeries::from_csv("x", text, None).is_err());
        let week: String = (1..=7).map(|d| format!("2020-02-0{d},{d}\n")).collect();
        let w = TargetSeries::from_csv("x", &format!("period,value\n{week}"), None).unwrap();
        assert_eq!(w.window, 7);
        assert_eq!(w.trend_values[3], 4.0);
        assert!(TargetSeries::from_csv("x", "period,value\n2020-01,1\n2020-02,2\n2020-03,3\n", Some(1)).is_ok());
        assert_eq!(t.to_csv(), "period,value\n2020-02-01,3\n2020-02-02,4.5\n2020-02-03,1\n");
        let err = TargetSeries::from_csv("x", "date,cases\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = TargetSeries::from_csv("x", "period,value\n2020-02-01,abc\n", Some(1)).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(TargetSeries::from_csv("x", "period,value\n2020-02-01,1\n2020-02-03,2\n", Some(1)).is_err());
    }

    #[test]
    fn perfect_covariate_predicts_exactly() {
        let grid = TimeGrid::monthly(2015, 1, 60).unwrap();
        let values: Vec<f64> = (0..60).map(|t| 50.0 + 20.0 * (t as f64 * 0.7).sin() + t as f64).collect();
        let target = TargetSeries::new("y", grid, values.clone(), 1).unwrap();
        let noise: Vec<f64> = (0..60).map(|t| ((t * 37 % 11) as f64) - 5.0).collect();
        let mut cfg = NowcastConfig::new(NowcastWindows { train: 0..48, eval: 48..60 });
        cfg.target_kind = TargetKind::Raw;
        // the smallest penalty bounds the shrinkage bias left in the fit
        cfg.lasso.lambda_min_ratio = 1e-9;
        let nf = fit_nowcast(&target, &[values.clone(), noise], &cfg).unwrap();
        let err = rmse(&nf.predictions, &values[48..]).unwrap();
        let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-6 * scale, "rmse {err}");
    }

    #[test]
    fn empty_active_set_predicts_training_mean() {
        let grid = TimeGrid::monthly(2015, 1, 40).unwrap();
        let values: Vec<f64> = (0..40).map(|t| if t % 2 == 0 { 10.0 } else { 14.0 }).collect();
        let target = TargetSeries::new("y", grid, values, 1).unwrap();
        let mut cfg = NowcastConfig::new(NowcastWindows { train: 0..30, eval: 30..40 });
        cfg.target_kind = TargetKind::Raw;
        // constant over the training window, so it carries no information
        let x: Vec<f64> = (0..40).map(|t| if t < 30 { 1.0 } else { t as f64 }).collect();
        let nf = fit_nowcast(&target, &[x], &cfg).unwrap();
        assert!(nf.fit.active_set.is_empty());
        assert!(nf.predictions.iter().all(|&p| (p - 12.0).abs() < 1e-12));
    }

    #[test]
    fn covariate_gaps_are_rejected() {
        let grid = TimeGrid::monthly(2015, 1, 20).unwrap();
        let target = TargetSeries::new("y", grid, (0..20).map(f64::from).collect(), 1).unwrap();
        let cfg = NowcastConfig::new(NowcastWindows { train: 0..15, eval: 15..20 });
        let mut x: Vec<f64> = (0..20).map(|t| (t * t) as f64).collect();
        x[17] = f64::NAN;
        assert!(matches!(fit_nowcast(&target, &[x], &cfg), Err(Error::InvalidWindow(_))));
        assert!(fit_nowcast(&target, &[vec![1.0; 12]], &cfg).is_err());
    }
}
