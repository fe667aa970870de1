//! Multi-sample averaging and cross-sample correlation diagnostics.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SamplePool, TermQuery};
use crate::seed::{rng_for, stream};

/// Per-period mean of one term over a set of samples. Values stay real-valued
/// and are not rescaled to peak at 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedSeries {
    pub query: TermQuery,
    pub values: Vec<f64>,
    pub member_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub entries: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn off_diagonal(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.entries[i][j])
            .collect()
    }

    pub fn mean_off_diagonal(&self) -> f64 {
        let off = self.off_diagonal();
        off.iter().sum::<f64>() / off.len() as f64
    }

    pub fn min_off_diagonal(&self) -> f64 {
        self.off_diagonal().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_off_diagonal(&self) -> f64 {
        self.off_diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Square matrix with a header row and a label column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(&self.entries) {
            out.push_str(label);
            for v in row {
                let _ = write!(out, ",{v:.6}");
            }
            out.push('\n');
        }
        out
    }
}

/// Per-period means over the samples at `indices`, one vector per term.
/// Indices are summed in ascending order, so the result does not depend on
/// the order they are given in.
pub fn mean_columns(pool: &SamplePool, indices: &[usize]) -> Vec<Vec<f64>> {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    (0..pool.n_terms())
        .map(|p| {
            let mut acc = vec![0.0; pool.n_periods()];
            for &s in &sorted {
                for (a, v) in acc.iter_mut().zip(&pool.series(s, p).values) {
                    *a += v;
                }
            }
            acc.iter_mut().for_each(|a| *a /= n);
            acc
        })
        .collect()
}

pub fn average_pool(pool: &SamplePool, sample_ids: &[&str]) -> Result<Vec<AveragedSeries>> {
    if sample_ids.is_empty() {
        return Err(Error::EmptySelection("no sample ids to average"));
    }
    let mut seen = HashSet::new();
    let mut indices = Vec::with_capacity(sample_ids.len());
    for &id in sample_ids {
        let s = pool
            .position(id)
            .ok_or_else(|| Error::UnknownSample(id.to_string()))?;
        if !seen.insert(s) {
            return Err(Error::InvalidConfig(format!("sample id `{id}` listed twice")));
        }
        indices.push(s);
    }
    indices.sort_unstable();
    let member_ids: Vec<String> = indices
        .iter()
        .map(|&s| pool.series(s, 0).sample_id.clone())
        .collect();
    Ok(mean_columns(pool, &indices)
        .into_iter()
        .zip(pool.queries())
        .map(|(values, q)| AveragedSeries {
            query: q.clone(),
            values,
            member_ids: member_ids.clone(),
        })
        .collect())
}

/// Seeded random partition of the pool's samples into `n_groups` disjoint
/// groups of `group_size`, each averaged per term. `result[g][p]` is group
/// `g`'s average of term `p`.
pub fn disjoint_group_averages(
    pool: &SamplePool,
    group_size: usize,
    n_groups: usize,
    seed: u64,
) -> Result<Vec<Vec<AveragedSeries>>> {
    if group_size == 0 || n_groups == 0 {
        return Err(Error::EmptySelection("group_size and n_groups must be positive"));
    }
    let needed = group_size * n_groups;
    if needed > pool.n_samples() {
        return Err(Error::InsufficientSamples {
            needed,
            available: pool.n_samples(),
        });
    }
    let mut order: Vec<usize> = (0..pool.n_samples()).collect();
    order.shuffle(&mut rng_for(seed, &[stream::GROUPS]));
    let ids = pool.sample_ids();
    order
        .chunks(group_size)
        .take(n_groups)
        .map(|chunk| {
            let members: Vec<&str> = chunk.iter().map(|&s| ids[s]).collect();
            average_pool(pool, &members)
        })
        .collect()
}

/// Long format: `group,term,period,value`.
pub fn averages_to_csv(groups: &[Vec<AveragedSeries>]) -> Result<String> {
    let mut out = String::from("group,term,period,value\n");
    for (g, group) in groups.iter().enumerate() {
        for avg in group {
            let grid = avg.query.grid()?;
            for (label, v) in grid.labels().zip(&avg.values) {
                let _ = writeln!(out, "g{},{},{label},{v}", g + 1, avg.query.term);
            }
        }
    }
    Ok(out)
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

fn pearson_labeled(x: &[f64], y: &[f64], lx: &str, ly: &str) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "correlation needs at least 2 points, got {}",
            x.len()
        )));
    }
    if is_constant(x) {
        return Err(Error::ConstantSeries(lx.to_string()));
    }
    if is_constant(y) {
        return Err(Error::ConstantSeries(ly.to_string()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson product-moment correlation. Constant inputs are an error.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson_labeled(x, y, "x", "y")
}

pub fn correlation_matrix<S: AsRef<[f64]>>(labels: &[String], series: &[S]) -> Result<CorrelationMatrix> {
    if series.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "correlation matrix needs at least 2 series, got {}",
            series.len()
        )));
    }
    if labels.len() != series.len() {
        return Err(Error::LengthMismatch {
            expected: series.len(),
            found: labels.len(),
        });
    }
    let n = series.len();
    let mut entries = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let r = pearson_labeled(series[i].as_ref(), series[j].as_ref(), &labels[i], &labels[j])?;
            entries[i][j] = r;
            entries[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        labels: labels.to_vec(),
        entries,
    })
}

/// Cross-sample correlation of term `p`, labeled by sample id.
pub fn term_correlation(pool: &SamplePool, p: usize) -> Result<CorrelationMatrix> {
    let members = pool.term_samples(p);
    let labels: Vec<String> = members.iter().map(|s| s.sample_id.clone()).collect();
    let values: Vec<&[f64]> = members.iter().map(|s| s.values.as_slice()).collect();
    correlation_matrix(&labels, &values)
}

/// Correlation of term `p` across disjoint group averages, labeled `g1..`.
pub fn group_correlation(groups: &[Vec<AveragedSeries>], p: usize) -> Result<CorrelationMatrix> {
    let labels: Vec<String> = (1..=groups.len()).map(|g| format!("g{g}")).collect();
    let values: Vec<&[f64]> = groups.iter().map(|g| g[p].values.as_slice()).collect();
    correlation_matrix(&labels, &values)
}
