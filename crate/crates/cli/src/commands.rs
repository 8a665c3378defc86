use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clpu_core::customer::Pdf1D;
use clpu_core::data::{
    aggregate_feeder, cell_of, ingest_meter_files, partition, read_outages_csv, read_temperature_csv,
    write_meter_csv, write_outages_csv, write_temperature_csv, DemandSeries, Flag, HolidayCalendar,
    OutageRecord, TemperatureSeries,
};
use clpu_core::feeder::{
    monitored_fraction_study, outage_count_study, read_results_csv, robustness_study, surface_terms,
    write_results_csv, ClpuRatioResult, MonitoredInputs, RatioSurface, SurfacePoint,
};
use clpu_core::lssvm::LssvmModel;
use clpu_core::pipeline::{analyse_customers, assess_outages, split_rows, train_for_date};
use clpu_core::tclsim::{generate_case_grid, run_scenario, write_outputs, GroundTruth, Scenario};
use log::{info, warn};
use serde::Serialize;

use crate::config::{RunConfig, Stream};
use crate::plot::{self, Series};

pub struct Inputs {
    pub customers: Vec<DemandSeries>,
    pub feeder: DemandSeries,
    pub temp: TemperatureSeries,
    pub outages: Vec<OutageRecord>,
    pub calendar: HolidayCalendar,
}

/// Reads meters, temperature and outages named in the config.
///
/// A single meter series is taken as the feeder itself; several are summed.
pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    cfg.check_paths()?;
    if cfg.meters.is_empty() {
        bail!("no meter files: pass --meters or set \"meters\" in the config");
    }
    let temp_path = cfg
        .temperature
        .as_ref()
        .context("no temperature file: pass --temperature or set \"temperature\" in the config")?;
    let outages = match &cfg.outages {
        Some(p) => read_outages_csv(p).with_context(|| format!("reading {}", p.display()))?,
        None => Vec::new(),
    };
    let customers = ingest_meter_files(&cfg.meters, &outages).context("reading meter files")?;
    let feeder = if customers.len() == 1 {
        customers[0].clone()
    } else {
        aggregate_feeder(&customers, "feeder")?
    };
    let temp = read_temperature_csv(temp_path)
        .with_context(|| format!("reading {}", temp_path.display()))?
        .align_to(&feeder)
        .context("temperature series does not cover the meter period")?;
    info!(
        "{} meter series, {} slots from {}, {} outage records",
        customers.len(),
        feeder.len(),
        feeder.start(),
        outages.len()
    );
    Ok(Inputs {
        customers,
        feeder,
        temp,
        outages,
        calendar: cfg.calendar(),
    })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_file(path, s)
}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out)
}

/// The outage whose id is `case`, or the only one on record.
fn pick_outage<'a>(outages: &'a [OutageRecord], case: Option<&str>) -> Result<&'a OutageRecord> {
    match case {
        Some(id) => outages
            .iter()
            .find(|o| o.case_id == id)
            .with_context(|| format!("case {id:?} is not in the outage file")),
        None => match outages {
            [one] => Ok(one),
            [] => bail!("no outage records: pass --outages"),
            _ => bail!("{} outages on record: choose one with --case", outages.len()),
        },
    }
}

/// `date`, or the restoration date of the latest outage.
fn cell_date(date: Option<NaiveDate>, outages: &[OutageRecord]) -> Result<NaiveDate> {
    if let Some(d) = date {
        return Ok(d);
    }
    outages
        .iter()
        .map(|o| o.end.date_naive())
        .max()
        .context("no outage records to pick a partition from: pass --date")
}

fn load_truths(paths: &[PathBuf]) -> Result<BTreeMap<String, GroundTruth>> {
    let mut out = BTreeMap::new();
    for p in paths {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let t: GroundTruth =
            serde_json::from_str(&text).with_context(|| format!("invalid ground truth {}", p.display()))?;
        out.insert(t.case_id.clone(), t);
    }
    Ok(out)
}

fn safe_name(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

pub fn ingest(cfg: &RunConfig) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let out = prepare_out(cfg)?;
    write_meter_csv(out.join("feeder.csv"), std::slice::from_ref(&inputs.feeder))?;
    write_temperature_csv(out.join("temperature.csv"), &inputs.temp)?;
    write_outages_csv(out.join("outages.csv"), &inputs.outages)?;
    let count = |f: Flag| inputs.feeder.flags().iter().filter(|&&g| g == f).count();
    let cells: Vec<_> = partition(&inputs.feeder, &inputs.calendar)
        .into_iter()
        .map(|p| serde_json::json!({"season": p.season, "day_type": p.day_type, "slots": p.indices.len()}))
        .collect();
    let summary = serde_json::json!({
        "meters": inputs.customers.iter().map(|c| c.entity_id()).collect::<Vec<_>>(),
        "start": inputs.feeder.start(),
        "slots": inputs.feeder.len(),
        "normal": count(Flag::Normal),
        "missing": count(Flag::Missing),
        "outage": count(Flag::Outage),
        "partitions": cells,
        "outages": inputs.outages,
    });
    write_json(&out.join("summary.json"), &summary)?;
    info!("wrote feeder.csv, temperature.csv, outages.csv and summary.json to {}", out.display());
    Ok(())
}

pub struct GridArgs {
    pub durations: Vec<u32>,
    pub temps: Vec<f64>,
    pub date: Option<NaiveDate>,
}

pub fn simulate(cfg: &RunConfig, scenario: &Path, grid: &GridArgs) -> Result<()> {
    let mut sc = Scenario::load(scenario).with_context(|| format!("reading scenario {}", scenario.display()))?;
    if cfg.seed.is_some() {
        sc.seed = cfg.seed_for("simulate", Stream::Simulate)?;
    }
    let out = prepare_out(cfg)?;
    write_file(&out.join("scenario.json"), sc.to_json()? + "\n")?;
    if grid.durations.is_empty() != grid.temps.is_empty() {
        bail!("a case grid needs both --durations and --temps");
    }
    if grid.durations.is_empty() {
        let result = run_scenario(&sc)?;
        write_outputs(&out, &result)?;
        info!("simulated {} houses over {} days into {}", result.houses.len(), sc.days, out.display());
        return Ok(());
    }
    let date = grid.date.context("a case grid needs --date for the outage day")?;
    let cases = generate_case_grid(&grid.durations, &grid.temps, &sc, date)?;
    let mut index = String::from("case_id,O_min,T_c,true_ratio\n");
    for case in &cases {
        let result = run_scenario(case)?;
        write_outputs(out.join(&case.case_id), &result)?;
        let truth = result.truth.as_ref().context("simulated case has no ground truth")?;
        let _ = writeln!(index, "{},{},{},{}", truth.case_id, truth.duration_min, truth.temp_c, truth.ratio);
        info!("{}: O = {} min, T = {} °C, ratio {:.3}", truth.case_id, truth.duration_min, truth.temp_c, truth.ratio);
    }
    write_file(&out.join("cases.csv"), index)
}

pub fn train(cfg: &RunConfig, date: Option<NaiveDate>) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let date = cell_date(date, &inputs.outages)?;
    let trained = train_for_date(&inputs.feeder, &inputs.temp, &inputs.calendar, date, &inputs.outages, &cfg.pipeline)?;
    let out = prepare_out(cfg)?;
    let model_path = out.join("model.json");
    trained.model.save(&model_path)?;
    LssvmModel::load(&model_path).context("written model does not reload")?;
    let mut csv = String::from("season,day_type,n_lag,sigma,gamma,cv_mape,test_mape,n_train,n_test\n");
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{},{},{},{}",
        serde_json::to_value(trained.season)?.as_str().unwrap_or_default(),
        serde_json::to_value(trained.day_type)?.as_str().unwrap_or_default(),
        trained.cv.n_lag,
        trained.cv.sigma,
        trained.cv.gamma,
        trained.cv.mape,
        trained.test_mape,
        trained.n_train,
        trained.n_test
    );
    write_file(&out.join("mape.csv"), csv)?;
    info!(
        "{:?}/{:?}: n_lag {}, sigma {}, gamma {}, test MAPE {:.3}%",
        trained.season, trained.day_type, trained.cv.n_lag, trained.cv.sigma, trained.cv.gamma, trained.test_mape
    );
    Ok(())
}

pub struct RatioArgs {
    pub cases: Vec<String>,
    pub ground_truth: Vec<PathBuf>,
    pub from_results: Option<PathBuf>,
}

pub fn ratio(cfg: &RunConfig, args: &RatioArgs) -> Result<()> {
    let results = match &args.from_results {
        Some(p) => read_results_csv(p).with_context(|| format!("reading {}", p.display()))?,
        None => {
            let inputs = load_inputs(cfg)?;
            for id in &args.cases {
                pick_outage(&inputs.outages, Some(id))?;
            }
            let outages: Vec<OutageRecord> = inputs
                .outages
                .iter()
                .filter(|o| args.cases.is_empty() || args.cases.contains(&o.case_id))
                .cloned()
                .collect();
            if outages.is_empty() {
                bail!("no outage cases to assess: pass --outages");
            }
            let (results, models) =
                assess_outages(&inputs.feeder, &inputs.temp, &outages, &inputs.calendar, &cfg.pipeline)?;
            for m in &models {
                info!("{:?}/{:?} model: test MAPE {:.3}%", m.season, m.day_type, m.test_mape);
            }
            results
        }
    };
    let out = prepare_out(cfg)?;
    let csv_path = out.join("ratios.csv");
    write_results_csv(&csv_path, &results)?;
    read_results_csv(&csv_path).context("written ratio table does not reload")?;
    info!("{} case ratios written to {}", results.len(), csv_path.display());

    let mut truth_paths = cfg.ground_truth.clone();
    truth_paths.extend(args.ground_truth.iter().cloned());
    let truths = load_truths(&truth_paths)?;
    if !truths.is_empty() {
        check_against_truth(&out, &results, &truths)?;
    }

    let points: Vec<SurfacePoint> = results
        .iter()
        .map(|r| SurfacePoint {
            duration_min: r.duration_min,
            temp_c: r.temp_c,
            ratio: r.ratio,
        })
        .collect();
    write_file(
        &out.join("ratio_vs_duration.svg"),
        plot::scatter(
            "CLPU ratio by outage duration",
            "outage duration (min)",
            "ratio",
            &[Series::new("cases", points.iter().map(|p| (p.duration_min, p.ratio)).collect())],
        ),
    )?;
    let needed = surface_terms(cfg.surface_degree).len();
    if points.len() < needed {
        warn!(
            "{} case(s) are fewer than the {needed} a degree-{} surface needs; no surface fitted",
            points.len(),
            cfg.surface_degree
        );
        return Ok(());
    }
    let surface = RatioSurface::fit(&points, cfg.surface_degree)?;
    let path = out.join("surface.json");
    surface.save(&path)?;
    RatioSurface::load(&path).context("written surface does not reload")?;
    info!("surface over {} cases: R² = {:.4}", surface.n_cases(), surface.r_squared());
    write_file(
        &out.join("surface_fit.svg"),
        plot::scatter(
            "Surface fit",
            "observed ratio",
            "fitted ratio",
            &[Series::new(
                "cases",
                points.iter().map(|p| (p.ratio, surface.eval(p.duration_min, p.temp_c))).collect(),
            )],
        ),
    )
}

fn check_against_truth(out: &Path, results: &[ClpuRatioResult], truths: &BTreeMap<String, GroundTruth>) -> Result<()> {
    let mut csv = String::from("case_id,true_ratio,ratio,pe\n");
    let mut pairs = Vec::new();
    for r in results {
        match truths.get(&r.case_id) {
            Some(t) => {
                let pe = 100.0 * (r.ratio - t.ratio).abs() / t.ratio;
                let _ = writeln!(csv, "{},{},{},{}", r.case_id, t.ratio, r.ratio, pe);
                pairs.push((t.ratio, r.ratio));
            }
            None => warn!("no ground truth for case {}", r.case_id),
        }
    }
    write_file(&out.join("ratio_check.csv"), csv)?;
    write_file(
        &out.join("ratio_check.svg"),
        plot::scatter("Estimated vs true ratio", "true ratio", "estimated ratio", &[Series::new("cases", pairs)]),
    )
}

#[derive(Serialize)]
struct CustomerSummary<'a> {
    customer_id: &'a str,
    components: usize,
    p_u: f64,
    mean_demand: f64,
    mean_increase: f64,
    increase_entropy_bits: f64,
    truncation: f64,
}

pub fn customer(cfg: &RunConfig, case: Option<&str>) -> Result<()> {
    let mut ccfg = cfg.customer.clone();
    ccfg.em.seed = cfg.seed_for("customer", Stream::Gmm)?;
    let inputs = load_inputs(cfg)?;
    if inputs.customers.len() < 2 {
        bail!("customer analysis needs the individual customer meters, found one series");
    }
    let record = pick_outage(&inputs.outages, case)?;
    let trained = train_for_date(
        &inputs.feeder,
        &inputs.temp,
        &inputs.calendar,
        record.end.date_naive(),
        &inputs.outages,
        &cfg.pipeline,
    )?;
    let an = analyse_customers(
        &inputs.customers,
        &inputs.feeder,
        &inputs.temp,
        record,
        &inputs.outages,
        &inputs.calendar,
        &trained,
        &ccfg,
    )?;
    let out = prepare_out(cfg)?;
    let dir = out.join("customers");
    std::fs::create_dir_all(&dir)?;
    let mut summary = String::from("customer_id,components,p_u,mean_demand,mean_increase,increase_entropy_bits,truncation\n");
    for c in &an.customers {
        let name = safe_name(&c.customer_id);
        c.demand.write_csv(dir.join(format!("{name}_demand.csv")))?;
        c.increase.write_csv(dir.join(format!("{name}_increase.csv")))?;
        let row = CustomerSummary {
            customer_id: &c.customer_id,
            components: c.components,
            p_u: c.p_u,
            mean_demand: c.demand.mean(),
            mean_increase: c.increase.mean(),
            increase_entropy_bits: c.increase.entropy_bits(),
            truncation: c.diagnostics.truncation,
        };
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{}",
            row.customer_id,
            row.components,
            row.p_u,
            row.mean_demand,
            row.mean_increase,
            row.increase_entropy_bits,
            row.truncation
        );
    }
    write_file(&out.join("customers.csv"), summary)?;
    let agg_path = out.join("aggregate_increase.csv");
    an.aggregate.write_csv(&agg_path)?;
    Pdf1D::read_csv(&agg_path).context("written aggregate density does not reload")?;
    write_json(&out.join("diversity.json"), &an.diversity)?;

    let d = &an.diversity;
    write_file(
        &out.join("diversity_boxes.svg"),
        plot::boxes(
            "Probability of a demand increase above I0",
            "I0 (kW)",
            "P(I ≥ I0)",
            &d.i0.iter().copied().zip(d.quartiles.iter().copied()).collect::<Vec<_>>(),
        ),
    )?;
    write_file(
        &out.join("r_lb.svg"),
        plot::line(
            "Share of customers with an increase above I0",
            "I0 (kW)",
            "R_lb (%)",
            &[Series::new("R_lb", d.i0.iter().copied().zip(d.r_lb.iter().copied()).collect())],
        ),
    )?;
    match &an.entropy {
        Some(e) => {
            write_json(&out.join("entropy.json"), e)?;
            write_file(
                &out.join("entropy_scatter.svg"),
                plot::scatter(
                    &format!("Entropy of increase vs normal demand (r = {:.3})", e.r),
                    "increase entropy (bits)",
                    "normal demand entropy (bits)",
                    &[Series::new("customers", e.pairs.clone())],
                ),
            )?;
        }
        None => warn!("entropy correlation not available"),
    }
    match &an.energy {
        Some(e) => {
            write_json(&out.join("energy.json"), e)?;
            let pts: Vec<(f64, f64)> = e.post_restoration.iter().copied().zip(e.normal_average.iter().copied()).collect();
            let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
            write_file(
                &out.join("energy_scatter.svg"),
                plot::scatter(
                    &format!("Post-restoration vs normal energy (slope {:.3})", e.slope),
                    "post-restoration energy (kWh)",
                    "normal-day average (kWh)",
                    &[
                        Series::new("customers", pts),
                        Series::new("fit", vec![(lo, e.intercept + e.slope * lo), (hi, e.intercept + e.slope * hi)]),
                    ],
                ),
            )?;
        }
        None => warn!("energy comparison not available"),
    }
    info!(
        "{} customers analysed; R_lb(0) = {:.1}%; outputs in {}",
        an.customers.len(),
        d.r_lb.first().copied().unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}

pub fn study_robustness(cfg: &RunConfig, date: Option<NaiveDate>) -> Result<()> {
    let mut rc = cfg.robustness.clone();
    rc.seed = cfg.seed_for("study robustness", Stream::Robustness)?;
    let inputs = load_inputs(cfg)?;
    let date = cell_date(date, &inputs.outages)?;
    let cell = cell_of(date, &inputs.calendar);
    let part = partition(&inputs.feeder, &inputs.calendar)
        .into_iter()
        .find(|p| (p.season, p.day_type) == cell)
        .context("partition cell not found")?;
    let split = split_rows(&inputs.feeder, &inputs.temp, &part, &inputs.outages, &cfg.pipeline)?;
    let report = robustness_study(&split.train, &split.test, &cfg.pipeline.cv, &rc)?;
    let out = prepare_out(cfg)?;
    let mut csv = String::from("k_m,sigma,gamma,test_mape,k_sigma,k_gamma,k_mape\n");
    for p in &report.points {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            p.k_m, p.sigma, p.gamma, p.test_mape, p.k_sigma, p.k_gamma, p.k_mape
        );
    }
    write_file(&out.join("robustness.csv"), csv)?;
    write_json(&out.join("robustness.json"), &report)?;
    let series = |name: &str, f: fn(&clpu_core::feeder::RobustnessPoint) -> f64| {
        Series::new(name, report.points.iter().map(|p| (p.k_m, f(p))).collect())
    };
    write_file(
        &out.join("robustness.svg"),
        plot::line(
            "Hyperparameters and MAPE under contamination",
            "contamination coefficient K_m",
            "ratio to uncontaminated (%)",
            &[
                series("K_sigma", |p| p.k_sigma),
                series("K_gamma", |p| p.k_gamma),
                series("K_MAPE", |p| p.k_mape),
            ],
        ),
    )?;
    info!("robustness study at n_lag {} over {} contaminated rows", report.n_lag, report.contaminated_rows.len());
    Ok(())
}

pub fn study_monitored(
    cfg: &RunConfig,
    case: Option<&str>,
    ground_truth: &[PathBuf],
    true_ratio: Option<f64>,
) -> Result<()> {
    let seed = cfg.seed_for("study monitored", Stream::Monitored)?;
    let inputs = load_inputs(cfg)?;
    let record = pick_outage(&inputs.outages, case)?;
    let true_ratio = match true_ratio {
        Some(r) => r,
        None => {
            let mut paths = cfg.ground_truth.clone();
            paths.extend(ground_truth.iter().cloned());
            load_truths(&paths)?
                .get(&record.case_id)
                .map(|t| t.ratio)
                .with_context(|| format!("no true ratio for case {}: pass --true-ratio or --ground-truth", record.case_id))?
        }
    };
    let study = MonitoredInputs {
        houses: &inputs.customers,
        temp: &inputs.temp,
        outage: record,
        calendar: &inputs.calendar,
        true_ratio,
    };
    let points = monitored_fraction_study(&study, &cfg.monitored_fractions, cfg.monitored_subsets, seed, &cfg.pipeline)?;
    let out = prepare_out(cfg)?;
    let mut csv = String::from("fraction,monitored,subset,error\n");
    for p in &points {
        for (i, e) in p.errors.iter().enumerate() {
            let _ = writeln!(csv, "{},{},{},{}", p.fraction, p.monitored, i, e);
        }
    }
    write_file(&out.join("monitored.csv"), csv)?;
    write_file(
        &out.join("monitored.svg"),
        plot::line(
            "Ratio error vs monitored share",
            "monitored fraction",
            "mean ratio error (%)",
            &[Series::new("mean", points.iter().map(|p| (p.fraction, p.mean_error)).collect())],
        ),
    )
}

pub fn study_outage_count(cfg: &RunConfig, results: &Path) -> Result<()> {
    let seed = cfg.seed_for("study outage-count", Stream::OutageCount)?;
    let pool: Vec<SurfacePoint> = read_results_csv(results)
        .with_context(|| format!("reading {}", results.display()))?
        .iter()
        .map(|r| SurfacePoint {
            duration_min: r.duration_min,
            temp_c: r.temp_c,
            ratio: r.ratio,
        })
        .collect();
    let points = outage_count_study(&pool, &cfg.outage_counts, cfg.outage_count_repeats, cfg.surface_degree, seed)?;
    let out = prepare_out(cfg)?;
    let mut csv = String::from("n,mean_mpe,draws,skipped\n");
    for p in &points {
        let _ = writeln!(csv, "{},{},{},{}", p.n, p.mean_mpe, p.draws, p.skipped);
    }
    write_file(&out.join("outage_count.csv"), csv)?;
    write_file(
        &out.join("outage_count.svg"),
        plot::line(
            "Surface error vs number of training outages",
            "training outages",
            "mean MPE (%)",
            &[Series::new("MPE", points.iter().map(|p| (p.n as f64, p.mean_mpe)).collect())],
        ),
    )
}
