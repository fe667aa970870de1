//! Real-time vintages of one term.
//!
//! A forecaster who downloads the same term every month gets a window that
//! has slid forward by one period, drawn from a fresh sample and rescaled so
//! its own maximum is 100. Comparing the vintages on the periods they share
//! shows how much of the history changes between downloads.

use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{correlation_matrix, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::model::{TermQuery, TimeGrid};
use crate::sampler::{thin_window, LatentPanel, SamplerConfig};
use crate::seed::stream;

pub const DEFAULT_N_VINTAGES: usize = 3;
pub const DEFAULT_STEP: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vintage {
    /// Offset of this window from the base window, in grid periods.
    pub shift: usize,
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    /// Draws behind the values: one for a single download, several once averaged.
    pub members: Vec<String>,
}

impl Vintage {
    pub fn id(&self) -> String {
        format!("v{}", self.shift)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VintageSet {
    pub base_query: TermQuery,
    pub shifts: Vec<usize>,
    pub vintages: Vec<Vintage>,
    /// Periods covered by every vintage; `None` when fewer than two are shared.
    pub overlap: Option<TimeGrid>,
}

impl VintageSet {
    /// Values of vintage `k` restricted to the common periods.
    pub fn overlap_values(&self, k: usize) -> Result<&[f64]> {
        let overlap = self.overlap.as_ref().ok_or_else(|| {
            Error::InvalidWindow("vintages share fewer than 2 periods".into())
        })?;
        let v = &self.vintages[k];
        let offset = v
            .grid
            .index_of(overlap.start())
            .ok_or_else(|| Error::MisalignedVintages(format!("vintage {} misses the overlap", v.id())))?;
        Ok(&v.values[offset..offset + overlap.len()])
    }

    /// Long format: `vintage_id,period,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vintage_id,period,value\n");
        for v in &self.vintages {
            let id = v.id();
            for (label, x) in v.grid.labels().zip(&v.values) {
                let _ = writeln!(out, "{id},{label},{x}");
            }
        }
        out
    }
}

fn overlap_of(base: &Range<usize>, shifts: &[usize], grid: &TimeGrid) -> Result<Option<TimeGrid>> {
    let last = *shifts.last().unwrap_or(&0);
    let start = base.start + last;
    let end = base.end - 1;
    if end < start + 1 {
        return Ok(None);
    }
    grid.slice(start, end).map(Some)
}

/// Draws `n_vintages` downloads of term `term`, the `k`-th over
/// `base_window` shifted by `k·step` periods. Each download is an independent
/// sample normalized within its own window. Only the fraction and seed of
/// `cfg` are used.
pub fn build_vintages(
    panel: &LatentPanel,
    cfg: &SamplerConfig,
    term: usize,
    base_window: Range<usize>,
    n_vintages: usize,
    step: usize,
) -> Result<VintageSet> {
    cfg.validate()?;
    if term >= panel.n_terms() {
        return Err(Error::InvalidConfig(format!(
            "term index {term} out of range for {} terms",
            panel.n_terms()
        )));
    }
    if n_vintages == 0 {
        return Err(Error::InvalidConfig("n_vintages must be at least 1".into()));
    }
    if step == 0 && n_vintages > 1 {
        return Err(Error::InvalidConfig("step must be at least 1".into()));
    }
    if base_window.len() < 2 {
        return Err(Error::InvalidWindow(format!(
            "base window {base_window:?} needs at least 2 periods"
        )));
    }
    let shifts: Vec<usize> = (0..n_vintages).map(|k| k * step).collect();
    let last_end = base_window.end + shifts[n_vintages - 1];
    if last_end > panel.n_periods() {
        return Err(Error::InvalidWindow(format!(
            "shifted window ends at period {last_end}, panel has {}",
            panel.n_periods()
        )));
    }
    let vintages = shifts
        .par_iter()
        .enumerate()
        .map(|(k, &shift)| {
            let (start, end) = (base_window.start + shift, base_window.end - 1 + shift);
            let mut all = thin_window(
                panel,
                cfg.sampling_fraction,
                cfg.seed,
                &[stream::VINTAGE, k as u64],
                start,
                end,
            )?;
            Ok(Vintage {
                shift,
                grid: panel.grid.slice(start, end)?,
                values: all.swap_remove(term),
                members: vec![format!("{:016x}/v{k}", cfg.seed)],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let base_grid = panel.grid.slice(base_window.start, base_window.end - 1)?;
    Ok(VintageSet {
        base_query: TermQuery::for_grid(panel.term_names[term].clone(), panel.geo.clone(), &base_grid),
        overlap: overlap_of(&base_window, &shifts, &panel.grid)?,
        shifts,
        vintages,
    })
}

/// Pairwise Pearson correlations on the common periods only.
pub fn vintage_correlations(set: &VintageSet) -> Result<CorrelationMatrix> {
    let labels: Vec<String> = set.vintages.iter().map(Vintage::id).collect();
    let series = (0..set.vintages.len())
        .map(|k| set.overlap_values(k))
        .collect::<Result<Vec<_>>>()?;
    correlation_matrix(&labels, &series)
}

/// Averages corresponding vintages across independently drawn sets. The
/// averages are not rescaled, so they need not reach 100.
pub fn average_vintages(sets: &[VintageSet]) -> Result<VintageSet> {
    let first = sets
        .first()
        .ok_or(Error::EmptySelection("no vintage sets to average"))?;
    for s in &sets[1..] {
        if s.shifts != first.shifts {
            return Err(Error::MisalignedVintages(format!(
                "shifts {:?} differ from {:?}",
                s.shifts, first.shifts
            )));
        }
        if s.base_query != first.base_query {
            return Err(Error::MisalignedVintages(format!(
                "base query `{}` differs from `{}`",
                s.base_query.term, first.base_query.term
            )));
        }
    }
    let vintages = (0..first.vintages.len())
        .map(|k| {
            let n = sets.len() as f64;
            let len = first.vintages[k].values.len();
            let mut values = vec![0.0; len];
            let mut members = Vec::new();
            for s in sets {
                for (acc, x) in values.iter_mut().zip(&s.vintages[k].values) {
                    *acc += x;
                }
                members.extend(s.vintages[k].members.iter().cloned());
            }
            values.iter_mut().for_each(|v| *v /= n);
            Vintage {
                shift: first.vintages[k].shift,
                grid: first.vintages[k].grid.clone(),
                values,
                members,
            }
        })
        .collect();
    Ok(VintageSet {
        base_query: first.base_query.clone(),
        shifts: first.shifts.clone(),
        vintages,
        overlap: first.overlap.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{gen_latent_panel, LatentTermSpec};

    fn panel(rate: f64, seed: u64) -> LatentPanel {
        let grid = TimeGrid::monthly(2004, 1, 40).unwrap();
        let spec = LatentTermSpec {
            seasonal_amplitude: 0.4,
            shock_sd: 0.3,
            ..LatentTermSpec::flat("oil", rate)
        };
        gen_latent_panel(&[spec, LatentTermSpec::flat("other", rate)], &grid, 1e6, seed).unwrap()
    }

    fn cfg(fraction: f64, seed: u64) -> SamplerConfig {
        SamplerConfig {
            sampling_fraction: fraction,
            seed,
            n_samples: 1,
        }
    }

    #[test]
    fn shapes_and_overlap() {
        let p = panel(500.0, 1);
        let set = build_vintages(&p, &cfg(0.05, 2), 0, 0..30, 3, 2).unwrap();
        assert_eq!(set.shifts, vec![0, 2, 4]);
        assert_eq!(set.vintages[2].grid.start(), p.grid.periods()[4]);
        let overlap = set.overlap.as_ref().unwrap();
        assert_eq!(overlap.len(), 26);
        assert_eq!(overlap.start(), p.grid.periods()[4]);
        for v in &set.vintages {
            assert_eq!(v.values.len(), 30);
            assert_eq!(v.values.iter().cloned().fold(0.0, f64::max), 100.0);
        }
        assert_eq!(set.base_query.term, "oil");
        let m = vintage_correlations(&set).unwrap();
        assert_eq!(m.labels, vec!["v0", "v2", "v4"]);
        let csv = set.to_csv();
        assert_eq!(csv.lines().count(), 1 + 90);
        assert!(csv.starts_with("vintage_id,period,value\nv0,2004-01,"));

        let one = build_vintages(&p, &cfg(0.05, 2), 0, 0..30, 1, 1).unwrap();
        assert_eq!(one.vintages.len(), 1);
        assert_eq!(one.vintages[0].values, set.vintages[0].values);
    }

    #[test]
    fn argument_errors() {
        let p = panel(500.0, 1);
        let c = cfg(0.05, 2);
        assert!(build_vintages(&p, &c, 0, 0..38, 3, 2).is_err());
        assert!(build_vintages(&p, &c, 0, 0..30, 3, 0).is_err());
        assert!(build_vintages(&p, &c, 5, 0..30, 3, 1).is_err());
        assert!(build_vintages(&p, &c, 0, 0..30, 0, 1).is_err());
        assert!(build_vintages(&p, &c, 0, 3..4, 1, 1).is_err());
        let disjoint = build_vintages(&p, &c, 0, 0..5, 3, 5).unwrap();
        assert!(disjoint.overlap.is_none());
        assert!(vintage_correlations(&disjoint).is_err());
    }

    #[test]
    fn full_sampling_gives_near_identical_vintages() {
        let p = panel(20_000.0, 4);
        let set = build_vintages(&p, &cfg(1.0, 9), 0, 0..36, 3, 1).unwrap();
        assert!(vintage_correlations(&set).unwrap().min_off_diagonal() > 0.99);
    }

    #[test]
    fn only_overlap_periods_matter() {
        let p = panel(300.0, 5);
        let mut set = build_vintages(&p, &cfg(0.05, 1), 0, 0..30, 3, 1).unwrap();
        let before = vintage_correlations(&set).unwrap();
        set.vintages[0].values[0] = 0.0;
        set.vintages[0].values[1] = 77.0;
        set.vintages[2].values[29] = 3.0;
        assert_eq!(vintage_correlations(&set).unwrap(), before);
    }

    #[test]
    fn averaging_sets() {
        let p = panel(300.0, 5);
        let a = build_vintages(&p, &cfg(0.05, 1), 0, 0..30, 3, 1).unwrap();
        let b = build_vintages(&p, &cfg(0.05, 2), 0, 0..30, 3, 1).unwrap();
        let single = average_vintages(std::slice::from_ref(&a)).unwrap();
        assert_eq!(single, a);
        let avg = average_vintages(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(avg.vintages[1].values[3], (a.vintages[1].values[3] + b.vintages[1].values[3]) / 2.0);
        assert_eq!(avg.vintages[0].members.len(), 2);
        let c = build_vintages(&p, &cfg(0.05, 3), 0, 0..30, 3, 2).unwrap();
        assert!(matches!(average_vintages(&[a, c]), Err(Error::MisalignedVintages(_))));
        assert!(average_vintages(&[]).is_err());
    }
}
