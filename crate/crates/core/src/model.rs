//! Domain types shared by every module: queries, time grids, sampled series,
//! pools of repeated samples, and the 0–100 index normalization.

use std::collections::HashSet;
use std::fmt;

use chrono::{Datelike, Days, Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling frequency of a grid. Monthly periods are stored as the first day
/// of the month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Monthly,
    Daily,
}

impl Frequency {
    pub fn advance(self, date: NaiveDate, steps: u32) -> Option<NaiveDate> {
        match self {
            Frequency::Monthly => date.checked_add_months(Months::new(steps)),
            Frequency::Daily => date.checked_add_days(Days::new(steps as u64)),
        }
    }

    pub fn is_aligned(self, date: NaiveDate) -> bool {
        match self {
            Frequency::Monthly => date.day() == 1,
            Frequency::Daily => true,
        }
    }

    /// `YYYY-MM` for monthly grids, `YYYY-MM-DD` for daily ones.
    pub fn label(self, date: NaiveDate) -> String {
        match self {
            Frequency::Monthly => date.format("%Y-%m").to_string(),
            Frequency::Daily => date.format("%Y-%m-%d").to_string(),
        }
    }

    pub fn parse_label(self, text: &str) -> Option<NaiveDate> {
        match self {
            Frequency::Monthly => {
                let (y, m) = text.split_once('-')?;
                if y.len() != 4 || m.len() != 2 {
                    return None;
                }
                NaiveDate::from_ymd_opt(y.parse().ok()?, m.parse().ok()?, 1)
            }
            Frequency::Daily => {
                if text.len() != 10 {
                    return None;
                }
                NaiveDate::parse_from_str(text, "%Y-%m-%d").ok()
            }
        }
    }

    /// Infers the frequency from a period label's shape.
    pub fn detect(text: &str) -> Option<Frequency> {
        [Frequency::Monthly, Frequency::Daily]
            .into_iter()
            .find(|f| f.parse_label(text).is_some())
    }

    /// Number of grid steps from `from` to `to` (`to >= from`), if aligned.
    pub fn steps_between(self, from: NaiveDate, to: NaiveDate) -> Option<usize> {
        if to < from || !self.is_aligned(from) || !self.is_aligned(to) {
            return None;
        }
        let steps = match self {
            Frequency::Monthly => {
                (to.year() - from.year()) * 12 + to.month() as i32 - from.month() as i32
            }
            Frequency::Daily => (to - from).num_days() as i32,
        };
        Some(steps as usize)
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frequency::Monthly => "monthly",
            Frequency::Daily => "daily",
        })
    }
}

/// An ordered, contiguous run of at least two periods.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    frequency: Frequency,
    periods: Vec<NaiveDate>,
}

impl TimeGrid {
    pub fn new(frequency: Frequency, periods: Vec<NaiveDate>) -> Result<Self> {
        if periods.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 periods, got {}",
                periods.len()
            )));
        }
        for (i, p) in periods.iter().enumerate() {
            if !frequency.is_aligned(*p) {
                return Err(Error::InvalidGrid(format!(
                    "period {i} ({p}) is not aligned to a {frequency} grid"
                )));
            }
        }
        for (i, w) in periods.windows(2).enumerate() {
            if frequency.advance(w[0], 1) != Some(w[1]) {
                return Err(Error::InvalidGrid(format!(
                    "periods {} and {} ({} -> {}) are not contiguous",
                    i,
                    i + 1,
                    frequency.label(w[0]),
                    frequency.label(w[1])
                )));
            }
        }
        Ok(TimeGrid { frequency, periods })
    }

    pub fn from_start(frequency: Frequency, start: NaiveDate, len: usize) -> Result<Self> {
        let periods = (0..len)
            .map(|i| {
                frequency
                    .advance(start, i as u32)
                    .ok_or_else(|| Error::InvalidGrid("date overflow".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        TimeGrid::new(frequency, periods)
    }

    pub fn monthly(year: i32, month: u32, len: usize) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(year, month, 1)
            .ok_or_else(|| Error::InvalidGrid(format!("bad month {year}-{month}")))?;
        TimeGrid::from_start(Frequency::Monthly, start, len)
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn periods(&self) -> &[NaiveDate] {
        &self.periods
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn start(&self) -> NaiveDate {
        self.periods[0]
    }

    pub fn end(&self) -> NaiveDate {
        self.periods[self.periods.len() - 1]
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let i = self.frequency.steps_between(self.start(), date)?;
        (i < self.len()).then_some(i)
    }

    /// Sub-grid over `start..=end` (indices).
    pub fn slice(&self, start: usize, end: usize) -> Result<TimeGrid> {
        if start > end || end >= self.len() {
            return Err(Error::InvalidWindow(format!(
                "index range {start}..={end} outside grid of length {}",
                self.len()
            )));
        }
        TimeGrid::new(self.frequency, self.periods[start..=end].to_vec())
    }

    pub fn labels(&self) -> impl Iterator<Item = String> + '_ {
        self.periods.iter().map(|p| self.frequency.label(*p))
    }
}

/// What was asked of the index: a term, a region, an inclusive window and a
/// frequency.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TermQuery {
    pub term: String,
    pub geo: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub frequency: Frequency,
}

impl TermQuery {
    pub fn new(
        term: impl Into<String>,
        geo: impl Into<String>,
        start: NaiveDate,
        end: NaiveDate,
        frequency: Frequency,
    ) -> Result<Self> {
        let query = TermQuery {
            term: term.into(),
            geo: geo.into(),
            start,
            end,
            frequency,
        };
        query.validate()?;
        Ok(query)
    }

    pub fn for_grid(term: impl Into<String>, geo: impl Into<String>, grid: &TimeGrid) -> Self {
        TermQuery {
            term: term.into(),
            geo: geo.into(),
            start: grid.start(),
            end: grid.end(),
            frequency: grid.frequency(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.term.trim().is_empty() {
            return Err(Error::InvalidQuery("term is empty".into()));
        }
        if self.start > self.end {
            return Err(Error::InvalidQuery(format!(
                "window start {} is after end {}",
                self.start, self.end
            )));
        }
        if !self.frequency.is_aligned(self.start) || !self.frequency.is_aligned(self.end) {
            return Err(Error::InvalidQuery(format!(
                "window {}..{} is not aligned to a {} grid",
                self.start, self.end, self.frequency
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        self.validate()?;
        let steps = self
            .frequency
            .steps_between(self.start, self.end)
            .ok_or_else(|| Error::InvalidQuery("unaligned window".into()))?;
        TimeGrid::from_start(self.frequency, self.start, steps + 1)
    }

    pub fn len(&self) -> usize {
        self.frequency
            .steps_between(self.start, self.end)
            .map_or(0, |s| s + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same term and region over a different window.
    pub fn with_window(&self, grid: &TimeGrid) -> TermQuery {
        TermQuery::for_grid(self.term.clone(), self.geo.clone(), grid)
    }
}

/// One download (or synthetic draw) of a 0–100 index series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSeries {
    pub query: TermQuery,
    pub values: Vec<f64>,
    /// Periods reported as `<1` in an export; their value is stored as 0.5.
    pub low_volume: Vec<bool>,
    pub download_date: NaiveDate,
    pub sample_id: String,
}

impl SampleSeries {
    pub fn new(
        query: TermQuery,
        values: Vec<f64>,
        download_date: NaiveDate,
        sample_id: impl Into<String>,
    ) -> Self {
        let low_volume = vec![false; values.len()];
        SampleSeries {
            query,
            values,
            low_volume,
            download_date,
            sample_id: sample_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn has_low_volume(&self) -> bool {
        self.low_volume.iter().any(|&f| f)
    }
}

/// Checks every [`SampleSeries`] invariant and returns the series unchanged.
/// The first violated invariant is reported, with its period index when it
/// concerns a single value.
pub fn assert_series_valid(series: SampleSeries) -> Result<SampleSeries> {
    series
        .query
        .validate()
        .map_err(|e| Error::series(None, e.to_string()))?;
    let expected = series.query.len();
    if series.values.len() != expected {
        return Err(Error::series(
            None,
            format!(
                "length {} does not match grid length {expected}",
                series.values.len()
            ),
        ));
    }
    if series.low_volume.len() != expected {
        return Err(Error::series(
            None,
            format!(
                "low-volume flag length {} does not match grid length {expected}",
                series.low_volume.len()
            ),
        ));
    }
    for (i, &v) in series.values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::series(i, format!("value {v} is not finite")));
        }
        if !(0.0..=100.0).contains(&v) {
            return Err(Error::series(i, format!("value {v} outside [0, 100]")));
        }
    }
    let max = series.values.iter().copied().fold(0.0_f64, f64::max);
    if max > 0.0 && max != 100.0 {
        return Err(Error::series(
            None,
            format!("maximum is {max}; a nonzero series must peak at 100"),
        ));
    }
    Ok(series)
}

/// Converts raw term counts to a 0–100 index: shares of the period totals,
/// rescaled so the largest share maps to 100 and rounded half away from zero.
///
/// Integer arithmetic keeps the result exact, so multiplying counts or totals
/// by a common factor never changes the output.
pub fn normalize(term_counts: &[u64], total_counts: &[u64]) -> Result<Vec<f64>> {
    if term_counts.len() != total_counts.len() {
        return Err(Error::LengthMismatch {
            expected: term_counts.len(),
            found: total_counts.len(),
        });
    }
    for (i, (&c, &n)) in term_counts.iter().zip(total_counts).enumerate() {
        if n == 0 {
            return Err(Error::ZeroTotal { index: i });
        }
        if c > n {
            return Err(Error::TermExceedsTotal {
                index: i,
                term: c,
                total: n,
            });
        }
    }
    // argmax of c_i / n_i by cross-multiplication
    let mut top = 0usize;
    for i in 1..term_counts.len() {
        let lhs = term_counts[i] as u128 * total_counts[top] as u128;
        let rhs = term_counts[top] as u128 * total_counts[i] as u128;
        if lhs > rhs {
            top = i;
        }
    }
    let (c_max, n_max) = match term_counts.get(top) {
        Some(&c) if c > 0 => (c as u128, total_counts[top] as u128),
        _ => return Ok(vec![0.0; term_counts.len()]),
    };
    Ok(term_counts
        .iter()
        .zip(total_counts)
        .map(|(&c, &n)| scaled_share(c as u128, n as u128, c_max, n_max))
        .collect())
}

/// round(100 · (c/n) / (c_max/n_max)), ties away from zero.
fn scaled_share(c: u128, n: u128, c_max: u128, n_max: u128) -> f64 {
    let exact = c
        .checked_mul(n_max)
        .and_then(|v| v.checked_mul(200))
        .zip(n.checked_mul(c_max))
        .map(|(twice_num, den)| (twice_num + den) / (2 * den));
    match exact {
        Some(v) => v as f64,
        None => (100.0 * (c as f64 / n as f64) / (c_max as f64 / n_max as f64)).round(),
    }
}

/// Repeated samples of the same query set: `samples[s][p]` is sample `s` of
/// term `p`. Every member shares one grid and region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePool {
    queries: Vec<TermQuery>,
    samples: Vec<Vec<SampleSeries>>,
}

impl SamplePool {
    pub fn new(samples: Vec<Vec<SampleSeries>>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InvalidPool("pool has no samples".into()))?;
        if first.is_empty() {
            return Err(Error::InvalidPool("pool has no terms".into()));
        }
        let queries: Vec<TermQuery> = first.iter().map(|s| s.query.clone()).collect();
        let geo = &queries[0].geo;
        let (start, end, freq) = (queries[0].start, queries[0].end, queries[0].frequency);
        let mut terms = HashSet::new();
        for q in &queries {
            if &q.geo != geo {
                return Err(Error::InvalidPool(format!(
                    "mixed regions `{geo}` and `{}`",
                    q.geo
                )));
            }
            if (q.start, q.end, q.frequency) != (start, end, freq) {
                return Err(Error::InvalidPool(format!(
                    "term `{}` does not share the pool grid",
                    q.term
                )));
            }
            if !terms.insert(q.term.as_str()) {
                return Err(Error::InvalidPool(format!("term `{}` appears twice", q.term)));
            }
        }
        let mut ids = HashSet::new();
        for (s, row) in samples.iter().enumerate() {
            if row.len() != queries.len() {
                return Err(Error::InvalidPool(format!(
                    "sample {s} has {} terms, expected {}",
                    row.len(),
                    queries.len()
                )));
            }
            let id = &row[0].sample_id;
            for (series, q) in row.iter().zip(&queries) {
                if &series.query != q {
                    return Err(Error::InvalidPool(format!(
                        "sample {s} is not aligned with the query set at term `{}`",
                        q.term
                    )));
                }
                if &series.sample_id != id {
                    return Err(Error::InvalidPool(format!(
                        "sample {s} mixes ids `{id}` and `{}`",
                        series.sample_id
                    )));
                }
                if series.values.len() != q.len() {
                    return Err(Error::InvalidPool(format!(
                        "series `{}`/{id} has length {}, grid has {}",
                        q.term,
                        series.values.len(),
                        q.len()
                    )));
                }
            }
            if !ids.insert(id.as_str()) {
                return Err(Error::InvalidPool(format!("duplicate sample id `{id}`")));
            }
        }
        Ok(SamplePool { queries, samples })
    }

    pub fn queries(&self) -> &[TermQuery] {
        &self.queries
    }

    pub fn geo(&self) -> &str {
        &self.queries[0].geo
    }

    pub fn grid(&self) -> TimeGrid {
        self.queries[0]
            .grid()
            .expect("pool queries are validated on construction")
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn n_terms(&self) -> usize {
        self.queries.len()
    }

    pub fn n_periods(&self) -> usize {
        self.queries[0].len()
    }

    pub fn samples(&self) -> &[Vec<SampleSeries>] {
        &self.samples
    }

    pub fn sample(&self, s: usize) -> &[SampleSeries] {
        &self.samples[s]
    }

    pub fn series(&self, s: usize, p: usize) -> &SampleSeries {
        &self.samples[s][p]
    }

    pub fn sample_ids(&self) -> Vec<&str> {
        self.samples.iter().map(|r| r[0].sample_id.as_str()).collect()
    }

    pub fn position(&self, sample_id: &str) -> Option<usize> {
        self.samples.iter().position(|r| r[0].sample_id == sample_id)
    }

    /// All samples of term `p`, in pool order.
    pub fn term_samples(&self, p: usize) -> Vec<&SampleSeries> {
        self.samples.iter().map(|row| &row[p]).collect()
    }

    /// The `p`-th term's values in sample `s`, as columns of a design.
    pub fn columns(&self, s: usize) -> Vec<&[f64]> {
        self.samples[s].iter().map(|x| x.values.as_slice()).collect()
    }
}
