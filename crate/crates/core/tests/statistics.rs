//! Monte-Carlo checks of the sampler, the averaging remedy and LASSO selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trends_core::aggregate::{disjoint_group_averages, group_correlation, term_correlation};
use trends_core::lasso::{fit_path, DesignMatrix, FitOptions, LassoConfig, SelectionRule};
use trends_core::model::TimeGrid;
use trends_core::presets::RegionPreset;
use trends_core::sampler::{draw_pool, gen_latent_panel, LatentTermSpec, SamplerConfig};

fn term(rate: f64) -> LatentTermSpec {
    LatentTermSpec {
        seasonal_amplitude: 0.3,
        shock_sd: 0.3,
        ..LatentTermSpec::flat("t", rate)
    }
}

fn mean_sample_correlation(rate: f64, seed: u64) -> f64 {
    let grid = TimeGrid::monthly(2009, 1, 120).unwrap();
    let panel = gen_latent_panel(&[term(rate)], &grid, 1e7, seed).unwrap();
    let cfg = SamplerConfig {
        sampling_fraction: 0.01,
        seed,
        n_samples: 5,
    };
    let pool = draw_pool(&panel, &cfg).unwrap();
    term_correlation(&pool, 0).unwrap().mean_off_diagonal()
}

#[test]
fn agreement_grows_with_popularity() {
    let rates = [100.0, 1_000.0, 10_000.0];
    let means: Vec<f64> = rates
        .iter()
        .map(|&r| (0..50).map(|s| mean_sample_correlation(r, s)).sum::<f64>() / 50.0)
        .collect();
    assert!(means[0] <= means[1] && means[1] <= means[2], "{means:?}");
    assert!(means[2] > means[0]);
}

#[test]
fn deviation_from_truth_shrinks_with_fraction() {
    let grid = TimeGrid::monthly(2009, 1, 120).unwrap();
    let mad = |fraction: f64| {
        let mut total = 0.0;
        for seed in 0..20 {
            let panel = gen_latent_panel(&[term(2_000.0)], &grid, 1e6, seed).unwrap();
            let truth = panel.normalized_truth().unwrap();
            let cfg = SamplerConfig {
                sampling_fraction: fraction,
                seed,
                n_samples: 1,
            };
            let pool = draw_pool(&panel, &cfg).unwrap();
            let drawn = &pool.series(0, 0).values;
            total += drawn.iter().zip(&truth[0]).map(|(a, b)| (a - b).abs()).sum::<f64>() / 120.0;
        }
        total / 20.0
    };
    let (half, nearly_all) = (mad(0.5), mad(0.99));
    assert!(half > nearly_all, "MAD {half} at 0.5 vs {nearly_all} at 0.99");
}

#[test]
fn larger_groups_agree_more() {
    let preset = RegionPreset::region("BR").unwrap();
    let mut sums = [0.0; 3];
    let mut above_single = 0;
    for seed in 0..50 {
        let (_, pool) = preset.pool(seed, 14).unwrap();
        let mut per_g = [0.0; 3];
        for (i, (g, n)) in [(1, 14), (3, 4), (7, 2)].into_iter().enumerate() {
            let groups = disjoint_group_averages(&pool, g, n, seed).unwrap();
            // a handful of terms keeps the run short
            per_g[i] = (0..20)
                .step_by(4)
                .map(|p| group_correlation(&groups, p).unwrap().mean_off_diagonal())
                .sum::<f64>()
                / 5.0;
            sums[i] += per_g[i];
        }
        if per_g[2] > per_g[0] {
            above_single += 1;
        }
    }
    assert!(sums[0] <= sums[1] && sums[1] <= sums[2], "{sums:?}");
    assert!(above_single >= 48, "7-averages beat single samples in {above_single}/50 seeds");
}

fn gaussian_design(rng: &mut ChaCha8Rng, t: usize, p: usize, common: f64) -> Vec<Vec<f64>> {
    let factor: Vec<f64> = (0..t).map(|_| rng.sample(StandardNormal)).collect();
    (0..p)
        .map(|_| {
            factor
                .iter()
                .map(|f| common * f + rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

#[test]
fn bic_stays_empty_on_pure_noise() {
    let cfg = LassoConfig::with_rule(SelectionRule::Bic);
    let mut sparse = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = gaussian_design(&mut rng, 120, 20, 0.0);
        let y: Vec<f64> = (0..120).map(|_| rng.sample(StandardNormal)).collect();
        let d = DesignMatrix::from_columns(&cols, &y).unwrap();
        if cfg.fit_and_select(&d).unwrap().active_set.len() <= 1 {
            sparse += 1;
        }
    }
    assert!(sparse >= 90, "near-empty selection in {sparse}/100 seeds");
}

#[test]
fn bic_recovers_most_of_a_strong_signal() {
    let cfg = LassoConfig::with_rule(SelectionRule::Bic);
    let mut good = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + seed);
        let cols = gaussian_design(&mut rng, 120, 20, 0.0);
        let support = [2, 5, 11, 14, 19];
        // five unit coefficients on unit-variance columns: signal variance 5
        let y: Vec<f64> = (0..120)
            .map(|t| support.iter().map(|&j| cols[j][t]).sum::<f64>() + 5f64.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let d = DesignMatrix::from_columns(&cols, &y).unwrap();
        let active = cfg.fit_and_select(&d).unwrap().active_set;
        if support.iter().filter(|j| active.contains(j)).count() >= 3 {
            good += 1;
        }
    }
    assert!(good >= 80, "recovered >= 3 of 5 in {good}/100 seeds");
}

#[test]
fn active_sets_grow_along_the_path() {
    let mut quarter_sizes = [0.0; 4];
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let cols = gaussian_design(&mut rng, 120, 20, 1.0);
        let y: Vec<f64> = (0..120)
            .map(|t| cols[0][t] - 0.5 * cols[3][t] + 0.3 * cols[7][t] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let d = DesignMatrix::from_columns(&cols, &y).unwrap();
        let path = fit_path(&d, 100, 1e-3, &FitOptions::default()).unwrap();
        for (k, f) in path.iter().enumerate() {
            quarter_sizes[k * 4 / path.len()] += f.active_set.len() as f64;
        }
    }
    assert!(quarter_sizes.windows(2).all(|w| w[0] <= w[1]), "{quarter_sizes:?}");
    assert!(quarter_sizes[3] > quarter_sizes[0]);
}
