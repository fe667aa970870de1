use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::NaiveDate;
use trends_core::aggregate::{disjoint_group_averages, group_correlation, term_correlation, CorrelationMatrix};
use trends_core::ingest::{parse_trends_csv, slug, AddOutcome, Catalog};
use trends_core::lasso::{LassoConfig, SelectionRule};
use trends_core::model::{SamplePool, TermQuery, TimeGrid};
use trends_core::nowcast::{compare_samples, NowcastConfig, NowcastReport, NowcastWindows, TargetKind, TargetSeries};
use trends_core::presets::{
    RegionPreset, DEFAULT_GEOS, DEFAULT_N_SAMPLES, DEFAULT_WAVE_RATE, WAVE_TARGET_BETA, WAVE_TARGET_TERMS,
};
use trends_core::seed::{derive_seed, label_key};
use trends_core::sim::{run_setup, table_csv, HarnessConfig, Setup};
use trends_core::vintage::{average_vintages, build_vintages, vintage_correlations, VintageSet};

use crate::args::{CorrArgs, IngestArgs, NowcastArgs, Preset, SimulateArgs, SynthArgs, VintagesArgs};
use crate::config::usage;

/// Where a command writes and which seed it draws from.
pub struct Ctx {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl Ctx {
    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.out_dir.join(name);
        fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }
}

fn positive(name: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(usage(format!("--{name} must be at least 1")));
    }
    Ok(v)
}

fn rule(text: &str) -> Result<SelectionRule> {
    text.parse().map_err(|e: trends_core::Error| usage(e.to_string()))
}

fn open_catalog(path: Option<&Path>) -> Result<Catalog> {
    let path = path.ok_or_else(|| usage("--catalog is required"))?;
    if !path.is_dir() {
        return Err(usage(format!("catalog {} does not exist", path.display())));
    }
    Ok(Catalog::open(path)?)
}

fn catalog_geos(catalog: &Catalog) -> Vec<String> {
    let mut geos: Vec<String> = catalog.queries(None).into_iter().map(|q| q.geo).collect();
    geos.dedup();
    geos
}

fn pick_geo(catalog: &Catalog, geo: Option<&str>) -> Result<String> {
    if let Some(g) = geo {
        return Ok(g.to_string());
    }
    match catalog_geos(catalog).as_slice() {
        [only] => Ok(only.clone()),
        [] => Err(usage("the catalog is empty")),
        many => Err(usage(format!(
            "the catalog holds several regions ({}); pass --geo",
            many.join(", ")
        ))),
    }
}

/// Queries of `geo`, restricted to `terms` when given, in catalog order.
fn select_queries(catalog: &Catalog, geo: &str, terms: &[String]) -> Result<Vec<TermQuery>> {
    let all = catalog.queries(Some(geo));
    if all.is_empty() {
        return Err(anyhow::anyhow!(trends_core::Error::Catalog(format!("no downloads for region {geo}"))));
    }
    if terms.is_empty() {
        return Ok(all);
    }
    terms
        .iter()
        .map(|t| {
            let mut hits = all.iter().filter(|q| &q.term == t);
            match (hits.next(), hits.next()) {
                (Some(q), None) => Ok(q.clone()),
                (None, _) => Err(anyhow::anyhow!(trends_core::Error::Catalog(format!(
                    "term `{t}` has no downloads for region {geo}"
                )))),
                (Some(_), Some(_)) => Err(anyhow::anyhow!(trends_core::Error::Catalog(format!(
                    "term `{t}` was downloaded for several windows in {geo}"
                )))),
            }
        })
        .collect()
}

pub fn synth(args: &SynthArgs, ctx: &mut Ctx) -> Result<()> {
    let geos: Vec<String> = if args.geo.is_empty() {
        match args.preset {
            Preset::Regions => DEFAULT_GEOS.iter().map(|g| g.to_string()).collect(),
            Preset::Waves => vec!["BR".to_string()],
        }
    } else {
        args.geo.clone()
    };
    let n_samples = positive(
        "n-samples",
        args.n_samples.unwrap_or(match args.preset {
            Preset::Regions => DEFAULT_N_SAMPLES,
            Preset::Waves => 8,
        }),
    )?;
    let root = args.catalog.clone().unwrap_or_else(|| ctx.out_dir.join("catalog"));
    let mut catalog = Catalog::open(&root)?;
    let (mut added, mut duplicates) = (0, 0);
    for geo in &geos {
        let mut preset = match (args.preset, args.term_rate) {
            (Preset::Regions, None) => RegionPreset::region(geo).map_err(|e| usage(e.to_string()))?,
            (Preset::Regions, Some(rate)) => RegionPreset::with_rate(geo, rate)?,
            (Preset::Waves, rate) => RegionPreset::daily_waves(geo, rate.unwrap_or(DEFAULT_WAVE_RATE))?,
        };
        if let Some(f) = args.sampling_fraction {
            preset.sampling_fraction = f;
        }
        let (panel, pool) = preset.pool(ctx.seed, n_samples)?;
        ctx.write(&format!("latent_{}.csv", slug(geo)), &panel.to_csv())?;
        let downloads: Vec<_> = pool
            .samples()
            .iter()
            .flatten()
            .map(|s| (s.clone(), s.download_date))
            .collect();
        for outcome in catalog.add_all(&downloads)? {
            match outcome {
                AddOutcome::Added(_) => added += 1,
                AddOutcome::Duplicate(_) => duplicates += 1,
            }
        }
        if args.preset == Preset::Waves {
            let target = trends_core::nowcast::synthetic_target(
                &panel,
                &WAVE_TARGET_TERMS,
                &WAVE_TARGET_BETA,
                1.0,
                derive_seed(ctx.seed, &[label_key(geo)]),
                trends_core::nowcast::DEFAULT_DAILY_WINDOW,
            )?;
            ctx.write(&format!("target_{}.csv", slug(geo)), &target.to_csv())?;
        }
    }
    println!(
        "catalog {}: {added} downloads added, {duplicates} already present",
        root.display()
    );
    Ok(())
}

fn date_for(file: &Path, date: Option<NaiveDate>) -> Result<NaiveDate> {
    if let Some(d) = date {
        return Ok(d);
    }
    let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    NaiveDate::parse_from_str(stem, "%Y-%m-%d").map_err(|_| {
        usage(format!(
            "cannot tell when {} was downloaded; name it YYYY-MM-DD.csv or pass --date",
            file.display()
        ))
    })
}

pub fn ingest(args: &IngestArgs, ctx: &mut Ctx) -> Result<()> {
    let root = args.catalog.as_deref().ok_or_else(|| usage("--catalog is required"))?;
    if args.files.is_empty() && !args.rebuild {
        return Err(usage("no files given"));
    }
    let date = args
        .date
        .as_deref()
        .map(|d| {
            NaiveDate::parse_from_str(d, "%Y-%m-%d").map_err(|_| usage(format!("--date `{d}` is not YYYY-MM-DD")))
        })
        .transpose()?;
    let mut catalog = if args.rebuild {
        fs::create_dir_all(root)?;
        Catalog::rebuild(root)?
    } else {
        Catalog::open(root)?
    };
    let mut downloads = Vec::new();
    for file in &args.files {
        let d = date_for(file, date)?;
        let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
        let series = parse_trends_csv(&text, d).with_context(|| format!("parsing {}", file.display()))?;
        downloads.push((series, d));
    }
    let outcomes = catalog.add_all(&downloads)?;
    let mut report = String::from("file,term,geo,download_date,status\n");
    for (file, outcome) in args.files.iter().zip(&outcomes) {
        let e = outcome.entry();
        let status = match outcome {
            AddOutcome::Added(_) => "added",
            AddOutcome::Duplicate(_) => "duplicate",
        };
        report.push_str(&format!(
            "{},{},{},{},{status}\n",
            file.display(),
            e.query.term,
            e.query.geo,
            e.download_date
        ));
    }
    ctx.write("ingest.csv", &report)?;
    println!("catalog {}: {} entries", catalog.root().display(), catalog.entries().len());
    Ok(())
}

pub fn corr(args: &CorrArgs, ctx: &mut Ctx) -> Result<()> {
    let catalog = open_catalog(args.catalog.as_deref())?;
    let geo = pick_geo(&catalog, args.geo.as_deref())?;
    let queries = select_queries(&catalog, &geo, &args.terms)?;
    let pool = catalog.load_pool(&queries)?;
    let matrices: Vec<CorrelationMatrix> = match args.group_size {
        None => (0..pool.n_terms())
            .map(|p| term_correlation(&pool, p))
            .collect::<trends_core::Result<_>>()?,
        Some(g) => {
            let g = positive("group-size", g)?;
            let n = args.n_groups.unwrap_or(pool.n_samples() / g);
            let groups = disjoint_group_averages(&pool, g, n, ctx.seed)?;
            (0..pool.n_terms())
                .map(|p| group_correlation(&groups, p))
                .collect::<trends_core::Result<_>>()?
        }
    };
    let mut summary = String::from("term,mean,min,max\n");
    for (q, m) in queries.iter().zip(&matrices) {
        ctx.write(&format!("corr_{}.csv", slug(&q.term)), &m.to_csv())?;
        summary.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            q.term,
            m.mean_off_diagonal(),
            m.min_off_diagonal(),
            m.max_off_diagonal()
        ));
    }
    ctx.write("corr_summary.csv", &summary)?;
    Ok(())
}

fn simulation_pools(args: &SimulateArgs, seed: u64) -> Result<Vec<SamplePool>> {
    if let Some(path) = &args.catalog {
        let catalog = open_catalog(Some(path))?;
        let geos = if args.geo.is_empty() { catalog_geos(&catalog) } else { args.geo.clone() };
        return geos
            .iter()
            .map(|g| Ok(catalog.load_pool(&select_queries(&catalog, g, &[])?)?))
            .collect();
    }
    let n = positive("n-samples", args.n_samples)?;
    let geos: Vec<String> = if args.geo.is_empty() {
        DEFAULT_GEOS.iter().map(|g| g.to_string()).collect()
    } else {
        args.geo.clone()
    };
    geos.iter()
        .map(|g| {
            let preset = RegionPreset::region(g).map_err(|e| usage(e.to_string()))?;
            Ok(preset.pool(seed, n)?.1)
        })
        .collect()
}

pub fn simulate(args: &SimulateArgs, ctx: &mut Ctx) -> Result<()> {
    let setups = match args.setup.as_str() {
        "1" => vec![Setup::SingleSample],
        "2" => vec![Setup::Averaged],
        "both" => vec![Setup::SingleSample, Setup::Averaged],
        other => return Err(usage(format!("setup must be 1, 2 or both, got `{other}`"))),
    };
    let cfg = HarnessConfig::new(positive("reps", args.reps)?, ctx.seed, rule(&args.rule)?);
    let pools = simulation_pools(args, ctx.seed)?;
    let mut reports = Vec::new();
    for setup in setups {
        let report = run_setup(setup, &pools, &cfg)?;
        ctx.write(&format!("replications_setup{setup}.csv"), &report.replications_csv())?;
        ctx.write(&format!("selections_setup{setup}.csv"), &report.selections_csv())?;
        reports.push(report);
    }
    ctx.write("selection_table.csv", &table_csv(&reports))?;
    Ok(())
}

fn label_range(text: &str, flag: &str) -> Result<(String, String)> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| usage(format!("--{flag} must be START:END, got `{text}`")))?;
    Ok((a.trim().to_string(), b.trim().to_string()))
}

fn nowcast_windows(args: &NowcastArgs, grid: &TimeGrid) -> Result<NowcastWindows> {
    let labels: Vec<String> = grid.labels().collect();
    let n = labels.len();
    let default_eval_start = n - n.div_ceil(5);
    let (train, eval) = match (&args.train, &args.eval) {
        (Some(t), Some(e)) => (label_range(t, "train")?, label_range(e, "eval")?),
        (Some(t), None) => {
            let t = label_range(t, "train")?;
            let end = labels.iter().position(|l| *l == t.1).map_or(n - 1, |i| (i + 1).min(n - 1));
            (t, (labels[end].clone(), labels[n - 1].clone()))
        }
        (None, Some(e)) => {
            let e = label_range(e, "eval")?;
            let start = labels.iter().position(|l| *l == e.0).unwrap_or(0).max(1);
            ((labels[0].clone(), labels[start - 1].clone()), e)
        }
        (None, None) => (
            (labels[0].clone(), labels[default_eval_start - 1].clone()),
            (labels[default_eval_start].clone(), labels[n - 1].clone()),
        ),
    };
    NowcastWindows::from_labels(grid, (&train.0, &train.1), (&eval.0, &eval.1)).map_err(|e| usage(e.to_string()))
}

pub fn nowcast(args: &NowcastArgs, ctx: &mut Ctx) -> Result<()> {
    let path = args.target.as_deref().ok_or_else(|| usage("--target is required"))?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("target");
    let target = TargetSeries::from_csv(name, &text, args.window)?;
    let catalog = open_catalog(args.catalog.as_deref())?;
    let geo = pick_geo(&catalog, args.geo.as_deref())?;
    let pool = catalog.load_pool(&select_queries(&catalog, &geo, &args.terms)?)?;
    let kind: TargetKind = args.target_kind.parse().map_err(|e: trends_core::Error| usage(e.to_string()))?;
    let cfg = NowcastConfig {
        windows: nowcast_windows(args, &target.grid)?,
        lasso: LassoConfig::with_rule(rule(&args.rule)?),
        target_kind: kind,
    };
    let report = compare_samples(&target, &pool, &cfg)?;
    ctx.write("nowcast_table.csv", &NowcastReport::table_csv(std::slice::from_ref(&report)))?;
    ctx.write("predictions.csv", &report.predictions_csv())?;
    Ok(())
}

pub fn vintages(args: &VintagesArgs, ctx: &mut Ctx) -> Result<()> {
    let n = positive("n-vintages", args.n_vintages)?;
    let step = positive("step", args.step)?;
    let n_sets = positive("n-sets", args.n_sets)?;
    if args.window_months < 2 {
        return Err(usage("--window-months must be at least 2"));
    }
    let len = args.window_months + (n - 1) * step;
    let mut preset = RegionPreset::vintage_term(&args.geo, args.term_rate)
        .map_err(|e| usage(e.to_string()))?
        .with_grid(TimeGrid::monthly(2004, 1, len)?);
    if let Some(f) = args.sampling_fraction {
        preset.sampling_fraction = f;
    }
    let panel = preset.panel(ctx.seed)?;
    let sets: Vec<VintageSet> = (0..n_sets as u64)
        .map(|i| {
            let cfg = preset.sampler_config(derive_seed(ctx.seed, &[i]), 1);
            build_vintages(&panel, &cfg, 0, 0..args.window_months, n, step)
        })
        .collect::<trends_core::Result<_>>()?;
    ctx.write("vintage_latent.csv", &panel.to_csv())?;
    ctx.write("vintages.csv", &sets[0].to_csv())?;
    ctx.write("vintage_corr.csv", &vintage_correlations(&sets[0])?.to_csv())?;
    if n_sets > 1 {
        let avg = average_vintages(&sets)?;
        ctx.write("vintages_averaged.csv", &avg.to_csv())?;
        ctx.write("vintage_corr_averaged.csv", &vintage_correlations(&avg)?.to_csv())?;
    }
    Ok(())
}
