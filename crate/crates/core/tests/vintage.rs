use trends_core::model::TimeGrid;
use trends_core::presets::{RegionPreset, VINTAGE_BASE_MONTHS, VINTAGE_RARE_RATE};
use trends_core::sampler::{gen_latent_panel, LatentTermSpec, SamplerConfig};
use trends_core::seed::derive_seed;
use trends_core::vintage::{average_vintages, build_vintages, vintage_correlations, VintageSet};

fn rare_sets(seed: u64, n_sets: usize) -> Vec<VintageSet> {
    let preset = RegionPreset::vintage_term("US", VINTAGE_RARE_RATE).unwrap();
    let panel = preset.panel(seed).unwrap();
    (0..n_sets as u64)
        .map(|i| {
            let cfg = preset.sampler_config(derive_seed(seed, &[i]), 1);
            build_vintages(&panel, &cfg, 0, 0..VINTAGE_BASE_MONTHS, 3, 1).unwrap()
        })
        .collect()
}

#[test]
fn each_vintage_peaks_at_100_and_the_peak_can_move() {
    let mut moved = 0;
    for seed in 0..10 {
        let set = &rare_sets(seed, 1)[0];
        let peaks: Vec<usize> = set
            .vintages
            .iter()
            .map(|v| {
                assert_eq!(v.values.iter().cloned().fold(0.0, f64::max), 100.0);
                // absolute period index of the peak
                v.values.iter().position(|&x| x == 100.0).unwrap() + v.shift
            })
            .collect();
        if peaks.iter().any(|&p| p != peaks[0]) {
            moved += 1;
        }
    }
    assert!(moved > 0, "the peak never moved across vintages");
}

#[test]
fn averaging_sets_raises_vintage_agreement() {
    let mut wins = 0;
    for seed in 0..50 {
        let sets = rare_sets(seed, 5);
        let single = vintage_correlations(&sets[0]).unwrap().mean_off_diagonal();
        let avg = vintage_correlations(&average_vintages(&sets).unwrap())
            .unwrap()
            .mean_off_diagonal();
        if avg >= single {
            wins += 1;
        }
    }
    assert!(wins >= 45, "averaged vintages agreed more in {wins}/50 seeds");
}

#[test]
fn later_windows_with_more_volume_agree_more() {
    let grid = TimeGrid::monthly(2004, 1, 240).unwrap();
    let spec = LatentTermSpec {
        trend_slope: 0.012,
        seasonal_amplitude: 0.3,
        shock_sd: 0.3,
        ..LatentTermSpec::flat("crude oil", 60.0)
    };
    let (mut early_sum, mut late_sum, mut later) = (0.0, 0.0, 0);
    for seed in 0..20 {
        let panel = gen_latent_panel(std::slice::from_ref(&spec), &grid, 1e7, seed).unwrap();
        let cfg = SamplerConfig {
            sampling_fraction: 0.01,
            seed,
            n_samples: 1,
        };
        let early = vintage_correlations(&build_vintages(&panel, &cfg, 0, 0..60, 3, 1).unwrap())
            .unwrap()
            .mean_off_diagonal();
        let late = vintage_correlations(&build_vintages(&panel, &cfg, 0, 170..230, 3, 1).unwrap())
            .unwrap()
            .mean_off_diagonal();
        early_sum += early;
        late_sum += late;
        if late > early {
            later += 1;
        }
    }
    assert!(late_sum > early_sum);
    assert!(later >= 16, "late windows agreed more in {later}/20 seeds");
}

#[test]
fn vintages_are_reproducible() {
    let a = rare_sets(7, 2);
    let b = rare_sets(7, 2);
    assert_eq!(a, b);
    assert_ne!(a[0].vintages[0].values, a[1].vintages[0].values);
}
