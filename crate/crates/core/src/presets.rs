//! Default synthetic regions.
//!
//! Two regions stand in for a less and a more connected market: "BR" has
//! rarer searches than "US", so its single downloads disagree more. Both
//! share 20 economics-flavoured terms over 120 months starting January 2009.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Frequency, SamplePool, TimeGrid};
use crate::sampler::{draw_pool, gen_latent_panel, LatentPanel, LatentTermSpec, SamplerConfig};
use crate::seed::{derive_seed, label_key};

pub const DEFAULT_GEOS: [&str; 2] = ["US", "BR"];
pub const DEFAULT_N_SAMPLES: usize = 14;
pub const DEFAULT_N_PERIODS: usize = 120;
pub const DEFAULT_SAMPLING_FRACTION: f64 = 0.01;

const TERMS: [&str; 20] = [
    "gdp growth",
    "inflation",
    "unemployment",
    "interest rate",
    "exchange rate",
    "stock market",
    "recession",
    "mortgage",
    "consumer credit",
    "retail sales",
    "job offers",
    "fuel price",
    "car sales",
    "housing market",
    "public debt",
    "tax refund",
    "minimum wage",
    "exports",
    "industrial production",
    "bankruptcy",
];

const SEASONAL_PERIODS: [u32; 7] = [12, 6, 4, 24, 3, 18, 9];

/// Relative base rate per term, cycled; spreads popularity within a region.
const RATE_SHAPE: [f64; 5] = [0.7, 1.0, 1.3, 0.85, 1.15];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPreset {
    pub geo: String,
    pub specs: Vec<LatentTermSpec>,
    pub background_rate: f64,
    pub sampling_fraction: f64,
    pub grid: TimeGrid,
}

impl RegionPreset {
    /// Terms whose mean latent rate is `term_rate` searches per period.
    pub fn with_rate(geo: &str, term_rate: f64) -> Result<Self> {
        if !(term_rate > 0.0 && term_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("term rate {term_rate} must be positive")));
        }
        let specs: Vec<LatentTermSpec> = TERMS
            .iter()
            .enumerate()
            .map(|(p, name)| LatentTermSpec {
                name: (*name).to_string(),
                base_rate: term_rate * RATE_SHAPE[p % RATE_SHAPE.len()],
                trend_slope: 0.0,
                seasonal_amplitude: [0.25, 0.15, 0.3, 0.1][p % 4],
                seasonal_period: SEASONAL_PERIODS[p % SEASONAL_PERIODS.len()],
                shock_sd: [0.35, 0.45, 0.4][p % 3],
            })
            .collect();
        let base_sum: f64 = specs.iter().map(|s| s.base_rate).sum();
        Ok(RegionPreset {
            geo: geo.to_string(),
            specs,
            background_rate: 100.0 * base_sum,
            sampling_fraction: DEFAULT_SAMPLING_FRACTION,
            grid: TimeGrid::monthly(2009, 1, DEFAULT_N_PERIODS)?,
        })
    }

    /// The built-in "US" or "BR" region.
    pub fn region(geo: &str) -> Result<Self> {
        let rate = match geo {
            "US" => 900.0,
            "BR" => 550.0,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "no preset for region `{other}` (known: US, BR)"
                )))
            }
        };
        Self::with_rate(geo, rate)
    }

    pub fn with_grid(mut self, grid: TimeGrid) -> Self {
        self.grid = grid;
        self
    }

    /// Latent panel for this region; the seed is mixed with the region code
    /// so regions drawn from one master seed are independent.
    pub fn panel(&self, seed: u64) -> Result<LatentPanel> {
        let panel = gen_latent_panel(
            &self.specs,
            &self.grid,
            self.background_rate,
            derive_seed(seed, &[label_key(&self.geo), 0]),
        )?;
        Ok(panel.with_geo(self.geo.clone()))
    }

    pub fn sampler_config(&self, seed: u64, n_samples: usize) -> SamplerConfig {
        SamplerConfig {
            sampling_fraction: self.sampling_fraction,
            seed: derive_seed(seed, &[label_key(&self.geo), 1]),
            n_samples,
        }
    }

    pub fn pool(&self, seed: u64, n_samples: usize) -> Result<(LatentPanel, SamplePool)> {
        let panel = self.panel(seed)?;
        let pool = draw_pool(&panel, &self.sampler_config(seed, n_samples))?;
        Ok((panel, pool))
    }
}

const WAVE_TERMS: [&str; 10] = [
    "covid symptoms",
    "covid icu",
    "coronavirus hospital",
    "fever",
    "loss of smell",
    "covid test",
    "shortness of breath",
    "oxygen saturation",
    "sick leave",
    "pharmacy",
];

const WAVE_PERIODS: [u32; 5] = [60, 90, 45, 120, 75];

/// Wave-term rate giving single downloads a pairwise correlation near 0.5.
pub const DEFAULT_WAVE_RATE: f64 = 600.0;
/// Wave terms and weights behind the synthetic nowcast target.
pub const WAVE_TARGET_TERMS: [usize; 3] = [1, 4, 9];
pub const WAVE_TARGET_BETA: [f64; 3] = [3.0, 2.0, 4.0];
/// Days from 2020-02-01 through 2020-06-30.
pub const WAVE_N_DAYS: usize = 151;
/// February to May trains, June evaluates.
pub const WAVE_TRAIN_DAYS: usize = 121;

impl RegionPreset {
    /// Daily symptom-style terms driven by slow waves, for nowcasting. The
    /// mean latent rate per term and day is `term_rate`.
    pub fn daily_waves(geo: &str, term_rate: f64) -> Result<Self> {
        if !(term_rate > 0.0 && term_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("term rate {term_rate} must be positive")));
        }
        let specs: Vec<LatentTermSpec> = WAVE_TERMS
            .iter()
            .enumerate()
            .map(|(p, name)| LatentTermSpec {
                name: (*name).to_string(),
                base_rate: term_rate * RATE_SHAPE[p % RATE_SHAPE.len()],
                trend_slope: [0.004, -0.003, 0.0, 0.002, -0.002][p % 5],
                seasonal_amplitude: [0.5, 0.4, 0.6][p % 3],
                seasonal_period: WAVE_PERIODS[p % WAVE_PERIODS.len()],
                shock_sd: 0.15,
            })
            .collect();
        let base_sum: f64 = specs.iter().map(|s| s.base_rate).sum();
        let start = chrono::NaiveDate::from_ymd_opt(2020, 2, 1).expect("valid date");
        Ok(RegionPreset {
            geo: geo.to_string(),
            specs,
            background_rate: 100.0 * base_sum,
            sampling_fraction: DEFAULT_SAMPLING_FRACTION,
            grid: TimeGrid::from_start(Frequency::Daily, start, WAVE_N_DAYS)?,
        })
    }
}

/// Monthly vintages: January 2004 through March 2014, so three windows of
/// 121 months shifted by one month fit.
pub const VINTAGE_N_MONTHS: usize = 123;
pub const VINTAGE_BASE_MONTHS: usize = 121;
pub const VINTAGE_RARE_RATE: f64 = 120.0;
const VINTAGE_BACKGROUND: f64 = 1e7;

impl RegionPreset {
    /// A single slowly growing term for vintage experiments.
    pub fn vintage_term(geo: &str, term_rate: f64) -> Result<Self> {
        let spec = LatentTermSpec {
            name: "crude oil".into(),
            base_rate: term_rate,
            trend_slope: 0.003,
            seasonal_amplitude: 0.3,
            seasonal_period: 12,
            shock_sd: 0.3,
        };
        spec.validate()?;
        Ok(RegionPreset {
            geo: geo.to_string(),
            specs: vec![spec],
            background_rate: VINTAGE_BACKGROUND.max(100.0 * term_rate),
            sampling_fraction: DEFAULT_SAMPLING_FRACTION,
            grid: TimeGrid::monthly(2004, 1, VINTAGE_N_MONTHS)?,
        })
    }
}

/// One pool per default region, in table column order.
pub fn default_pools(seed: u64, n_samples: usize) -> Result<Vec<SamplePool>> {
    DEFAULT_GEOS
        .iter()
        .map(|g| RegionPreset::region(g)?.pool(seed, n_samples).map(|(_, p)| p))
        .collect()
}
