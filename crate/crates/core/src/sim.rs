//! Variable-selection recovery experiment.
//!
//! Each replication picks five of the pool's terms as the true support and
//! builds three targets (one per coefficient rule `k`) from one set of
//! covariates. LASSO then tries to recover the support from a *different*
//! set of covariates for the same terms:
//!
//! * setup 1: targets come from one random sample; each of the other samples
//!   is used on its own for a separate fit.
//! * setup 2: the samples are split into two random halves; targets come from
//!   the first half's average and a single fit uses the second half's average.
//!
//! Targets have unit signal-to-noise ratio: the Gaussian noise variance equals
//! the sample variance of the signal.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::mean_columns;
use crate::error::{Error, Result};
use crate::lasso::{DesignMatrix, LassoConfig, SelectionRule};
use crate::model::SamplePool;
use crate::seed::{derive_seed, label_key, rng_for, stream};

pub const SUPPORT_SIZE: usize = 5;
pub const DGP_RULES: [u8; 3] = [1, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Setup {
    SingleSample,
    Averaged,
}

impl Setup {
    pub fn id(self) -> u8 {
        match self {
            Setup::SingleSample => 1,
            Setup::Averaged => 2,
        }
    }
}

impl From<Setup> for u8 {
    fn from(s: Setup) -> u8 {
        s.id()
    }
}

impl TryFrom<u8> for Setup {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Setup::SingleSample),
            2 => Ok(Setup::Averaged),
            other => Err(Error::InvalidConfig(format!("setup must be 1 or 2, got {other}"))),
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// One data-generating process: which terms matter and with what weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub k: u8,
    pub true_support: Vec<usize>,
    pub beta: Vec<f64>,
    pub noise_seed: u64,
}

/// Coefficients for rule `k`:
/// 1. integers uniform on [−10, 10], zero redrawn;
/// 2. 1 or 2 with equal probability;
/// 3. continuous uniform on [0, 1].
pub fn draw_beta(k: u8, seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng_for(seed, &[stream::BETA, k as u64]);
    let beta = match k {
        1 => (0..SUPPORT_SIZE)
            .map(|_| loop {
                let v: i32 = rng.random_range(-10..=10);
                if v != 0 {
                    break v as f64;
                }
            })
            .collect(),
        2 => (0..SUPPORT_SIZE)
            .map(|_| if rng.random::<bool>() { 2.0 } else { 1.0 })
            .collect(),
        3 => (0..SUPPORT_SIZE).map(|_| rng.random_range(0.0..=1.0)).collect(),
        other => {
            return Err(Error::InvalidConfig(format!(
                "DGP rule must be 1, 2 or 3, got {other}"
            )))
        }
    };
    Ok(beta)
}

fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// `signal = X·β` over the support columns plus Gaussian noise whose variance
/// is `noise_ratio` times the signal's sample variance (1 gives SNR 1).
pub fn build_dgp<C: AsRef<[f64]>>(
    support_columns: &[C],
    beta: &[f64],
    noise_seed: u64,
    noise_ratio: f64,
) -> Result<Vec<f64>> {
    if support_columns.len() != beta.len() {
        return Err(Error::LengthMismatch {
            expected: beta.len(),
            found: support_columns.len(),
        });
    }
    let t = support_columns.first().map_or(0, |c| c.as_ref().len());
    if t < 2 {
        return Err(Error::DegenerateSignal("need at least 2 periods".into()));
    }
    let signal: Vec<f64> = (0..t)
        .map(|i| {
            support_columns
                .iter()
                .zip(beta)
                .map(|(c, b)| c.as_ref()[i] * b)
                .sum()
        })
        .collect();
    let var = sample_variance(&signal);
    if var.is_nan() || var <= 0.0 {
        return Err(Error::DegenerateSignal(
            "signal has zero variance (degenerate covariates or coefficients)".into(),
        ));
    }
    if noise_ratio == 0.0 {
        return Ok(signal);
    }
    let noise = Normal::new(0.0, (noise_ratio * var).sqrt())
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = rng_for(noise_seed, &[stream::NOISE]);
    Ok(signal.into_iter().map(|s| s + noise.sample(&mut rng)).collect())
}

/// Recall in percent: `100 · |selected ∩ true| / |true|`.
pub fn selection_accuracy(selected: &[usize], true_support: &[usize]) -> Result<f64> {
    if true_support.is_empty() {
        return Err(Error::EmptySelection("true support is empty"));
    }
    let truth: BTreeSet<usize> = true_support.iter().copied().collect();
    let hits = selected.iter().collect::<BTreeSet<_>>().into_iter().filter(|j| truth.contains(j)).count();
    Ok(100.0 * hits as f64 / truth.len() as f64)
}

pub fn false_positives(selected: &[usize], true_support: &[usize]) -> usize {
    let truth: BTreeSet<usize> = true_support.iter().copied().collect();
    selected.iter().collect::<BTreeSet<_>>().into_iter().filter(|j| !truth.contains(j)).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replication: usize,
    pub k: u8,
    pub geo: String,
    pub setup: Setup,
    /// Sample ids whose covariates generated the target.
    pub generator: Vec<String>,
    /// One selected set per fit: all other samples for setup 1, one for setup 2.
    pub selected_sets: Vec<Vec<usize>>,
    pub true_support: Vec<usize>,
    pub beta: Vec<f64>,
    pub recall: f64,
    pub false_positives: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub geo: String,
    pub k: u8,
    pub mean_recall: f64,
    pub mean_false_positives: f64,
    pub n_replications: usize,
}

impl CellSummary {
    pub fn label(&self) -> String {
        format!("{}_{}", self.geo, self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupReport {
    pub setup: Setup,
    pub cells: Vec<CellSummary>,
    pub replications: Vec<ReplicationResult>,
}

impl SetupReport {
    pub fn cell(&self, geo: &str, k: u8) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.geo == geo && c.k == k)
    }

    pub fn n_replications(&self) -> usize {
        self.cells.first().map_or(0, |c| c.n_replications)
    }

    /// One row per replication with recall and false positives per cell.
    pub fn replications_csv(&self) -> String {
        let mut out = String::from("replication,setup");
        for c in &self.cells {
            let _ = write!(out, ",{0}_recall,{0}_false_positives", c.label());
        }
        out.push('\n');
        let per_rep = self.cells.len();
        for chunk in self.replications.chunks(per_rep) {
            let _ = write!(out, "{},{}", chunk[0].replication, self.setup);
            for r in chunk {
                let _ = write!(out, ",{:.4},{:.4}", r.recall, r.false_positives);
            }
            out.push('\n');
        }
        out
    }

    /// Long format: one row per fit with its selected and true sets.
    pub fn selections_csv(&self) -> String {
        let mut out = String::from("replication,setup,geo,k,fit,selected,true_support\n");
        let join = |v: &[usize]| v.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(" ");
        for r in &self.replications {
            for (i, sel) in r.selected_sets.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.replication,
                    self.setup,
                    r.geo,
                    r.k,
                    i,
                    join(sel),
                    join(&r.true_support)
                );
            }
        }
        out
    }
}

/// Rows = setups, columns = region × rule, values = mean recall in percent.
pub fn table_csv(reports: &[SetupReport]) -> String {
    let mut out = String::from("setup");
    if let Some(first) = reports.first() {
        for c in &first.cells {
            let _ = write!(out, ",{}", c.label());
        }
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{}", r.setup);
        for c in &r.cells {
            let _ = write!(out, ",{:.2}", c.mean_recall);
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub n_replications: usize,
    pub seed: u64,
    pub lasso: LassoConfig,
    /// Noise variance as a multiple of the signal variance.
    pub noise_ratio: f64,
}

impl HarnessConfig {
    pub const DEFAULT_REPLICATIONS: usize = 1000;
    pub const DESK_REPLICATIONS: usize = 200;

    pub fn new(n_replications: usize, seed: u64, rule: SelectionRule) -> Self {
        HarnessConfig {
            n_replications,
            seed,
            lasso: LassoConfig::with_rule(rule),
            noise_ratio: 1.0,
        }
    }
}

fn check_pools(pools: &[SamplePool], setup: Setup) -> Result<()> {
    let first = pools
        .first()
        .ok_or_else(|| Error::InvalidPool("no pools given".into()))?;
    let shape = (first.n_samples(), first.n_terms(), first.n_periods());
    if shape.0 < 2 {
        return Err(Error::InvalidPool(format!(
            "setup {setup} needs at least 2 samples, pool has {}",
            shape.0
        )));
    }
    if shape.1 < SUPPORT_SIZE {
        return Err(Error::InvalidPool(format!(
            "need at least {SUPPORT_SIZE} terms, pool has {}",
            shape.1
        )));
    }
    let mut geos = BTreeSet::new();
    for p in pools {
        if (p.n_samples(), p.n_terms(), p.n_periods()) != shape {
            return Err(Error::InvalidPool(format!(
                "pool for {} has shape {}x{}x{}, expected {}x{}x{}",
                p.geo(),
                p.n_samples(),
                p.n_terms(),
                p.n_periods(),
                shape.0,
                shape.1,
                shape.2
            )));
        }
        if !geos.insert(p.geo()) {
            return Err(Error::InvalidPool(format!("region {} given twice", p.geo())));
        }
    }
    Ok(())
}

/// The shared random draws of one replication.
struct Draw {
    generator: Vec<usize>,
    estimators: Vec<usize>,
    support: Vec<usize>,
}

fn draw_replication(setup: Setup, seed: u64, r: usize, n_samples: usize, n_terms: usize) -> Draw {
    let mut rng = rng_for(seed, &[stream::REPLICATION, r as u64]);
    let (generator, estimators) = match setup {
        Setup::SingleSample => {
            let s = rng.random_range(0..n_samples);
            (vec![s], (0..n_samples).filter(|&m| m != s).collect())
        }
        Setup::Averaged => {
            let mut order: Vec<usize> = (0..n_samples).collect();
            order.shuffle(&mut rng);
            let (g, e) = order.split_at(n_samples / 2);
            let (mut g, mut e) = (g.to_vec(), e.to_vec());
            g.sort_unstable();
            e.sort_unstable();
            (g, e)
        }
    };
    let mut support = index::sample(&mut rng, n_terms, SUPPORT_SIZE).into_vec();
    support.sort_unstable();
    Draw {
        generator,
        estimators,
        support,
    }
}

fn run_replication(
    setup: Setup,
    pools: &[SamplePool],
    cfg: &HarnessConfig,
    r: usize,
) -> Result<Vec<ReplicationResult>> {
    let n_samples = pools[0].n_samples();
    let draw = draw_replication(setup, cfg.seed, r, n_samples, pools[0].n_terms());
    let mut out = Vec::with_capacity(pools.len() * DGP_RULES.len());
    for pool in pools {
        let geo_key = label_key(pool.geo());
        let generator_cols = mean_columns(pool, &draw.generator);
        let estimator_designs: Vec<Vec<Vec<f64>>> = match setup {
            Setup::SingleSample => draw
                .estimators
                .iter()
                .map(|&m| pool.columns(m).into_iter().map(<[f64]>::to_vec).collect())
                .collect(),
            Setup::Averaged => vec![mean_columns(pool, &draw.estimators)],
        };
        let support_cols: Vec<&[f64]> = draw.support.iter().map(|&j| generator_cols[j].as_slice()).collect();
        let ids = pool.sample_ids();
        for k in DGP_RULES {
            let path = [r as u64, geo_key, k as u64];
            let beta = draw_beta(k, derive_seed(cfg.seed, &path))?;
            let noise_seed = derive_seed(cfg.seed, &[stream::NOISE, path[0], path[1], path[2]]);
            let y = build_dgp(&support_cols, &beta, noise_seed, cfg.noise_ratio)?;
            let mut selected_sets = Vec::with_capacity(estimator_designs.len());
            let (mut recall, mut fp) = (0.0, 0.0);
            for cols in &estimator_designs {
                let design = DesignMatrix::from_columns(cols, &y)?;
                let fit = cfg.lasso.fit_and_select(&design)?;
                recall += selection_accuracy(&fit.active_set, &draw.support)?;
                fp += false_positives(&fit.active_set, &draw.support) as f64;
                selected_sets.push(fit.active_set);
            }
            let n = selected_sets.len() as f64;
            out.push(ReplicationResult {
                replication: r,
                k,
                geo: pool.geo().to_string(),
                setup,
                generator: draw.generator.iter().map(|&s| ids[s].to_string()).collect(),
                selected_sets,
                true_support: draw.support.clone(),
                beta,
                recall: recall / n,
                false_positives: fp / n,
            });
        }
    }
    Ok(out)
}

/// Runs `cfg.n_replications` replications of `setup` over one pool per
/// region. The support and the sample split of a replication are shared by
/// all regions; coefficients and noise are drawn per region and rule.
pub fn run_setup(setup: Setup, pools: &[SamplePool], cfg: &HarnessConfig) -> Result<SetupReport> {
    check_pools(pools, setup)?;
    if cfg.n_replications == 0 {
        return Err(Error::InvalidConfig("n_replications must be at least 1".into()));
    }
    let per_rep = (0..cfg.n_replications)
        .into_par_iter()
        .map(|r| run_replication(setup, pools, cfg, r))
        .collect::<Result<Vec<_>>>()?;
    let replications: Vec<ReplicationResult> = per_rep.into_iter().flatten().collect();
    let cells = pools
        .iter()
        .flat_map(|p| DGP_RULES.map(|k| (p.geo(), k)))
        .map(|(geo, k)| {
            let rows: Vec<&ReplicationResult> = replications
                .iter()
                .filter(|r| r.geo == geo && r.k == k)
                .collect();
            let n = rows.len() as f64;
            CellSummary {
                geo: geo.to_string(),
                k,
                mean_recall: rows.iter().map(|r| r.recall).sum::<f64>() / n,
                mean_false_positives: rows.iter().map(|r| r.false_positives).sum::<f64>() / n,
                n_replications: rows.len(),
            }
        })
        .collect();
    Ok(SetupReport {
        setup,
        cells,
        replications,
    })
}

pub fn run_setup1(pools: &[SamplePool], cfg: &HarnessConfig) -> Result<SetupReport> {
    run_setup(Setup::SingleSample, pools, cfg)
}

pub fn run_setup2(pools: &[SamplePool], cfg: &HarnessConfig) -> Result<SetupReport> {
    run_setup(Setup::Averaged, pools, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_rules() {
        for seed in 0..2_000 {
            let b1 = draw_beta(1, seed).unwrap();
            assert!(b1.iter().all(|&b| b != 0.0 && b.fract() == 0.0 && (-10.0..=10.0).contains(&b)));
            let b2 = draw_beta(2, seed).unwrap();
            assert!(b2.iter().all(|&b| b == 1.0 || b == 2.0));
            let b3 = draw_beta(3, seed).unwrap();
            assert!(b3.iter().all(|&b| (0.0..=1.0).contains(&b)));
            assert_eq!(b1.len(), SUPPORT_SIZE);
        }
        assert!(draw_beta(0, 1).is_err());
        assert!(draw_beta(4, 1).is_err());
        assert_eq!(draw_beta(3, 9).unwrap(), draw_beta(3, 9).unwrap());
    }

    #[test]
    fn k1_covers_both_signs_and_extremes() {
        let all: Vec<f64> = (0..2_000).flat_map(|s| draw_beta(1, s).unwrap()).collect();
        for v in [-10.0, -1.0, 1.0, 10.0] {
            assert!(all.contains(&v), "{v} never drawn");
        }
    }

    #[test]
    fn dgp_guards_and_determinism() {
        let cols = vec![vec![1.0, 2.0, 3.0, 4.0], vec![0.5, 0.1, 0.9, 0.3]];
        assert!(matches!(
            build_dgp(&cols, &[0.0, 0.0], 1, 1.0),
            Err(Error::DegenerateSignal(_))
        ));
        let flat = vec![vec![3.0; 4], vec![7.0; 4]];
        assert!(build_dgp(&flat, &[1.0, 2.0], 1, 1.0).is_err());
        let a = build_dgp(&cols, &[1.0, 2.0], 5, 1.0).unwrap();
        assert_eq!(a, build_dgp(&cols, &[1.0, 2.0], 5, 1.0).unwrap());
        assert_ne!(a, build_dgp(&cols, &[1.0, 2.0], 6, 1.0).unwrap());
        let exact = build_dgp(&cols, &[1.0, 2.0], 5, 0.0).unwrap();
        assert_eq!(exact, vec![2.0, 2.2, 4.8, 4.6]);
    }

    #[test]
    fn accuracy_examples() {
        let truth = [1, 4, 7, 9, 12];
        assert_eq!(selection_accuracy(&truth, &truth).unwrap(), 100.0);
        assert_eq!(selection_accuracy(&[0, 2, 3], &truth).unwrap(), 0.0);
        assert_eq!(selection_accuracy(&[1, 4, 9, 15], &truth).unwrap(), 60.0);
        assert_eq!(false_positives(&[1, 4, 9, 15], &truth), 1);
        assert!(selection_accuracy(&[1], &[]).is_err());
    }

    #[test]
    fn setup_ids() {
        assert_eq!(Setup::try_from(1).unwrap(), Setup::SingleSample);
        assert_eq!(Setup::try_from(2).unwrap(), Setup::Averaged);
        assert!(Setup::try_from(3).is_err());
        assert_eq!(serde_json::to_string(&Setup::Averaged).unwrap(), "2");
    }

    #[test]
    fn averaged_split_is_a_partition() {
        for r in 0..50 {
            let d = draw_replication(Setup::Averaged, 3, r, 14, 20);
            assert_eq!(d.generator.len(), 7);
            assert_eq!(d.estimators.len(), 7);
            let mut all: Vec<usize> = d.generator.iter().chain(&d.estimators).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..14).collect::<Vec<_>>());
            assert_eq!(d.support.len(), SUPPORT_SIZE);

            let s = draw_replication(Setup::SingleSample, 3, r, 14, 20);
            assert_eq!(s.estimators.len(), 13);
            assert!(!s.estimators.contains(&s.generator[0]));
        }
    }
}
