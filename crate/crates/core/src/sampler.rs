//! Synthetic ground truth and Trends-like repeated sampling.
//!
//! A [`LatentPanel`] holds true search counts. Each sample keeps every search
//! event independently with probability `sampling_fraction` (binomial
//! thinning) and normalizes the thinned shares to a 0–100 index. Rare terms
//! end up with few surviving events per period, so their samples disagree.
//! The thinning scheme is a modeling assumption, not a description of how the
//! real service samples its logs.

use std::f64::consts::PI;
use std::fmt::Write as _;

use chrono::NaiveDate;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::draws::{binomial, poisson};
use crate::error::{Error, Result};
use crate::model::{normalize, SamplePool, SampleSeries, TermQuery, TimeGrid};
use crate::seed::{rng_for, stream};

/// Download date given to synthetic sample 0; sample `i` is dated `i` days later.
pub const SYNTHETIC_EPOCH: NaiveDate = match NaiveDate::from_ymd_opt(2021, 1, 4) {
    Some(d) => d,
    None => unreachable!(),
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentTermSpec {
    pub name: String,
    /// Expected searches per period before trend, season and shocks.
    pub base_rate: f64,
    /// Multiplicative drift per period.
    pub trend_slope: f64,
    pub seasonal_amplitude: f64,
    pub seasonal_period: u32,
    /// Standard deviation of the multiplicative log shocks.
    pub shock_sd: f64,
}

impl LatentTermSpec {
    pub fn flat(name: impl Into<String>, base_rate: f64) -> Self {
        LatentTermSpec {
            name: name.into(),
            base_rate,
            trend_slope: 0.0,
            seasonal_amplitude: 0.0,
            seasonal_period: 12,
            shock_sd: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::InvalidConfig("term name is empty".into()));
        }
        if !(self.base_rate > 0.0 && self.base_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "term `{}`: base_rate must be positive",
                self.name
            )));
        }
        if !(0.0..1.0).contains(&self.seasonal_amplitude) {
            return Err(Error::InvalidConfig(format!(
                "term `{}`: seasonal_amplitude must lie in [0, 1)",
                self.name
            )));
        }
        if self.seasonal_period == 0 {
            return Err(Error::InvalidConfig(format!(
                "term `{}`: seasonal_period must be at least 1",
                self.name
            )));
        }
        if !(self.shock_sd >= 0.0 && self.shock_sd.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "term `{}`: shock_sd must be nonnegative",
                self.name
            )));
        }
        if !(self.trend_slope > -1.0 && self.trend_slope.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "term `{}`: trend_slope must exceed -1",
                self.name
            )));
        }
        Ok(())
    }

    /// Expected count at period `t` given the log shock for that period.
    pub fn intensity(&self, t: usize, shock: f64) -> f64 {
        let tf = t as f64;
        let season =
            1.0 + self.seasonal_amplitude * (2.0 * PI * tf / self.seasonal_period as f64).sin();
        self.base_rate * (1.0 + self.trend_slope).powf(tf) * season * shock.exp()
    }
}

/// True search counts: `term_counts[p][t]` and the period totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPanel {
    pub geo: String,
    pub grid: TimeGrid,
    pub term_names: Vec<String>,
    pub term_counts: Vec<Vec<u64>>,
    pub total_counts: Vec<u64>,
}

impl LatentPanel {
    pub fn n_terms(&self) -> usize {
        self.term_counts.len()
    }

    pub fn n_periods(&self) -> usize {
        self.grid.len()
    }

    pub fn with_geo(mut self, geo: impl Into<String>) -> Self {
        self.geo = geo.into();
        self
    }

    pub fn query(&self, p: usize) -> TermQuery {
        TermQuery::for_grid(self.term_names[p].clone(), self.geo.clone(), &self.grid)
    }

    /// The index an unsampled series would show, per term.
    pub fn normalized_truth(&self) -> Result<Vec<Vec<f64>>> {
        self.term_counts
            .iter()
            .map(|c| normalize(c, &self.total_counts))
            .collect()
    }

    /// Long format: `period,term,count,total`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("period,term,count,total\n");
        for (t, label) in self.grid.labels().enumerate() {
            for (name, counts) in self.term_names.iter().zip(&self.term_counts) {
                let _ = writeln!(out, "{label},{name},{},{}", counts[t], self.total_counts[t]);
            }
        }
        out
    }

    fn check(&self) -> Result<()> {
        if self.term_counts.is_empty() {
            return Err(Error::InvalidConfig("panel has no terms".into()));
        }
        let t = self.grid.len();
        for counts in &self.term_counts {
            if counts.len() != t {
                return Err(Error::LengthMismatch {
                    expected: t,
                    found: counts.len(),
                });
            }
        }
        if self.total_counts.len() != t {
            return Err(Error::LengthMismatch {
                expected: t,
                found: self.total_counts.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub sampling_fraction: f64,
    pub seed: u64,
    pub n_samples: usize,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_fraction > 0.0 && self.sampling_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "sampling_fraction {} outside (0, 1]",
                self.sampling_fraction
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Draws a latent panel. Term counts are Poisson around the term's intensity;
/// totals are a Poisson background plus every term count.
pub fn gen_latent_panel(
    specs: &[LatentTermSpec],
    grid: &TimeGrid,
    background_rate: f64,
    seed: u64,
) -> Result<LatentPanel> {
    if specs.is_empty() {
        return Err(Error::InvalidConfig("no term specs".into()));
    }
    for spec in specs {
        spec.validate()?;
    }
    let base_sum: f64 = specs.iter().map(|s| s.base_rate).sum();
    if !(background_rate >= base_sum && background_rate.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "background_rate {background_rate} is below the summed base rates {base_sum}"
        )));
    }
    let t_len = grid.len();
    let term_counts: Vec<Vec<u64>> = specs
        .par_iter()
        .enumerate()
        .map(|(p, spec)| {
            let mut rng = rng_for(seed, &[stream::LATENT_TERM, p as u64]);
            (0..t_len)
                .map(|t| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    poisson(&mut rng, spec.intensity(t, spec.shock_sd * z))
                })
                .collect()
        })
        .collect();
    let mut rng = rng_for(seed, &[stream::LATENT_TOTAL]);
    let total_counts = (0..t_len)
        .map(|t| {
            let terms: u64 = term_counts.iter().map(|c| c[t]).sum();
            (poisson(&mut rng, background_rate) + terms).max(1)
        })
        .collect();
    Ok(LatentPanel {
        geo: "SYN".into(),
        grid: grid.clone(),
        term_names: specs.iter().map(|s| s.name.clone()).collect(),
        term_counts,
        total_counts,
    })
}

/// Thins periods `start..=end` of the panel under the stream rooted at
/// `path` and normalizes each term within that window.
pub(crate) fn thin_window(
    panel: &LatentPanel,
    fraction: f64,
    seed: u64,
    path: &[u64],
    start: usize,
    end: usize,
) -> Result<Vec<Vec<f64>>> {
    let p_len = panel.n_terms();
    let key = |p: usize| {
        let mut k = path.to_vec();
        k.push(p as u64);
        k
    };
    let thinned: Vec<Vec<u64>> = (0..p_len)
        .map(|p| {
            let mut rng = rng_for(seed, &key(p));
            panel.term_counts[p][start..=end]
                .iter()
                .map(|&n| binomial(&mut rng, n, fraction))
                .collect()
        })
        .collect();
    // remaining searches are thinned as one more independent stream, so the
    // thinned total always covers the thinned terms
    let mut rng = rng_for(seed, &key(p_len));
    let totals: Vec<u64> = (start..=end)
        .map(|t| {
            let terms: u64 = panel.term_counts.iter().map(|c| c[t]).sum();
            let rest = panel.total_counts[t].saturating_sub(terms);
            let kept_terms: u64 = thinned.iter().map(|c| c[t - start]).sum();
            (kept_terms + binomial(&mut rng, rest, fraction)).max(1)
        })
        .collect();
    thinned.iter().map(|c| normalize(c, &totals)).collect()
}

pub fn sample_id(sample_index: usize) -> String {
    format!("s{:02}", sample_index + 1)
}

/// One Trends-like download of every term in the panel.
pub fn draw_sample(
    panel: &LatentPanel,
    cfg: &SamplerConfig,
    sample_index: usize,
) -> Result<Vec<SampleSeries>> {
    cfg.validate()?;
    panel.check()?;
    if sample_index >= cfg.n_samples {
        return Err(Error::InvalidConfig(format!(
            "sample_index {sample_index} >= n_samples {}",
            cfg.n_samples
        )));
    }
    let values = thin_window(
        panel,
        cfg.sampling_fraction,
        cfg.seed,
        &[stream::THIN, sample_index as u64],
        0,
        panel.n_periods() - 1,
    )?;
    let date = SYNTHETIC_EPOCH + chrono::Days::new(sample_index as u64);
    let id = sample_id(sample_index);
    Ok(values
        .into_iter()
        .enumerate()
        .map(|(p, v)| SampleSeries::new(panel.query(p), v, date, id.clone()))
        .collect())
}

pub fn draw_pool(panel: &LatentPanel, cfg: &SamplerConfig) -> Result<SamplePool> {
    cfg.validate()?;
    let samples = (0..cfg.n_samples)
        .into_par_iter()
        .map(|s| draw_sample(panel, cfg, s))
        .collect::<Result<Vec<_>>>()?;
    SamplePool::new(samples)
}
