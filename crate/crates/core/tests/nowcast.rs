use trends_core::model::SamplePool;
use trends_core::nowcast::{
    compare_samples, fit_nowcast, rmse, synthetic_target, NowcastConfig, NowcastWindows, TargetKind,
    TargetSeries,
};
use trends_core::presets::{RegionPreset, DEFAULT_WAVE_RATE, WAVE_N_DAYS, WAVE_TRAIN_DAYS};

fn windows() -> NowcastWindows {
    NowcastWindows {
        train: 0..WAVE_TRAIN_DAYS,
        eval: WAVE_TRAIN_DAYS..WAVE_N_DAYS,
    }
}

fn preset() -> RegionPreset {
    RegionPreset::daily_waves("BR", DEFAULT_WAVE_RATE).unwrap()
}

#[test]
fn evaluation_rows_never_reach_the_fit() {
    let (panel, pool) = preset().pool(3, 2).unwrap();
    let target = synthetic_target(&panel, &[0, 2, 5], &[1.0, 2.0, 1.5], 1.0, 3, 7).unwrap();
    for kind in [TargetKind::Trend, TargetKind::Raw] {
        let cfg = NowcastConfig {
            target_kind: kind,
            ..NowcastConfig::new(windows())
        };
        let cols = pool.columns(0);
        let clean = fit_nowcast(&target, &cols, &cfg).unwrap();
        let mut poisoned = target.clone();
        for v in &mut poisoned.values[WAVE_TRAIN_DAYS..] {
            *v = 1e12;
        }
        let dirty = fit_nowcast(&poisoned, &cols, &cfg).unwrap();
        assert_eq!(clean, dirty);
    }
}

#[test]
fn model_beats_intercept_only_on_signal_targets() {
    let mut wins = 0;
    for seed in 0..50 {
        let (panel, pool) = preset().pool(seed, 1).unwrap();
        let target = synthetic_target(&panel, &[1, 4, 9], &[3.0, 2.0, 4.0], 1.0, seed, 7).unwrap();
        let cfg = NowcastConfig::new(windows());
        let nf = fit_nowcast(&target, &pool.columns(0), &cfg).unwrap();
        let actual = &target.trend_values[WAVE_TRAIN_DAYS..];
        let train_mean = target.trend_values[..WAVE_TRAIN_DAYS].iter().sum::<f64>() / WAVE_TRAIN_DAYS as f64;
        let naive = rmse(&vec![train_mean; actual.len()], actual).unwrap();
        if rmse(&nf.predictions, actual).unwrap() < naive {
            wins += 1;
        }
    }
    assert!(wins >= 45, "beat intercept-only in {wins}/50 seeds");
}

#[test]
fn averaged_model_beats_mean_single_sample_model() {
    let mut wins = 0;
    for seed in 0..50 {
        let (panel, pool) = preset().pool(seed, 8).unwrap();
        let target = synthetic_target(&panel, &[1, 4, 9], &[3.0, 2.0, 4.0], 1.0, seed, 7).unwrap();
        let report = compare_samples(&target, &pool, &NowcastConfig::new(windows())).unwrap();
        assert!(report.worst >= report.average && report.average >= report.best);
        assert_eq!(report.singles.len(), 8);
        if report.proposed.rmse < report.average {
            wins += 1;
        }
    }
    assert!(wins >= 45, "averaged model won in {wins}/50 seeds");
}

#[test]
fn identical_samples_give_identical_models() {
    let (panel, pool) = preset().pool(5, 1).unwrap();
    let mut twin = pool.sample(0).to_vec();
    for s in &mut twin {
        s.sample_id = "twin".into();
    }
    let pool = SamplePool::new(vec![pool.sample(0).to_vec(), twin]).unwrap();
    let target = synthetic_target(&panel, &[0, 3, 6], &[1.0, 1.0, 2.0], 1.0, 5, 7).unwrap();
    let report = compare_samples(&target, &pool, &NowcastConfig::new(windows())).unwrap();
    assert_eq!(report.singles[0].rmse, report.singles[1].rmse);
    assert!((report.proposed.rmse - report.singles[0].rmse).abs() < 1e-9);
    assert_eq!(report.best, report.worst);

    let csv = report.predictions_csv();
    assert!(csv.starts_with("period,actual,average,s01,twin\n"));
    assert_eq!(csv.lines().count(), 1 + WAVE_N_DAYS - WAVE_TRAIN_DAYS);
    let table = trends_core::nowcast::NowcastReport::table_csv(&[report]);
    assert!(table.starts_with("target,proposed,worst,best,average\nsynthetic,"));
}

#[test]
fn target_grid_must_match_pool() {
    let (panel, pool) = preset().pool(1, 2).unwrap();
    let target = synthetic_target(&panel, &[0, 1, 2], &[1.0, 1.0, 1.0], 1.0, 1, 7).unwrap();
    let short = TargetSeries::new(
        "short",
        target.grid.slice(0, WAVE_N_DAYS - 2).unwrap(),
        target.values[..WAVE_N_DAYS - 1].to_vec(),
        7,
    )
    .unwrap();
    let cfg = NowcastConfig::new(NowcastWindows { train: 0..100, eval: 100..140 });
    assert!(compare_samples(&short, &pool, &cfg).is_err());
}
