//! Config-driven experiment orchestration.
//!
//! A JSON config fully determines a run: identical configs produce
//! byte-identical CSV bodies (the manifest alone carries timings). Schema
//! validation collects every problem without running anything; resource
//! caps are checked before any basis is built.
//!
//! Experiment kinds: `basis`, `kernel-scaling`, `jpd`, `measures-selftest`,
//! `tian`, `supnorm`, `kodaira-probe`.

use crate::global_asymptotics::{kodaira_separation_probe, supnorm_statistics, tian_pullback_error, SupnormConfig};
use crate::jpd_universality::{covariance_limit, empirical_jpd, scaling_convergence};
use crate::kernel_engine::{scaling_study, KernelEvaluator, ScalingGrid};
use crate::measure_lab::{
    generalized_gaussian, ks_vs_standard_normal, pushforward, sample_real_sphere,
    sphere_projection_density, sphere_tail_frequency, sphere_tail_prob, EnsembleKind,
    EnsembleSampler, PushMap,
};
use crate::model_geometry::section_dimension;
use crate::report::{CsvField, CsvWriter, PhaseClock, RunManifest};
use crate::section_space::{SectionBasis, DIMENSION_CAP};
use crate::{C64, Error, Result, Workbench};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Basis,
    KernelScaling,
    Jpd,
    MeasuresSelftest,
    Tian,
    Supnorm,
    KodairaProbe,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Option<ExperimentKind> {
        Some(match s {
            "basis" => ExperimentKind::Basis,
            "kernel-scaling" => ExperimentKind::KernelScaling,
            "jpd" => ExperimentKind::Jpd,
            "measures-selftest" => ExperimentKind::MeasuresSelftest,
            "tian" => ExperimentKind::Tian,
            "supnorm" => ExperimentKind::Supnorm,
            "kodaira-probe" => ExperimentKind::KodairaProbe,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Basis => "basis",
            ExperimentKind::KernelScaling => "kernel-scaling",
            ExperimentKind::Jpd => "jpd",
            ExperimentKind::MeasuresSelftest => "measures-selftest",
            ExperimentKind::Tian => "tian",
            ExperimentKind::Supnorm => "supnorm",
            ExperimentKind::KodairaProbe => "kodaira-probe",
        }
    }
}

/// One schema problem; `field` names the offending entry. Issues flagged
/// `resource_cap` map to exit code 3 instead of 2 when running.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SchemaIssue {
    pub field: String,
    pub message: String,
    pub resource_cap: bool,
}

/// Fully parsed experiment configuration.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub m: usize,
    pub n_power: Option<u32>,
    pub n_list: Vec<u32>,
    pub weight: String,
    pub base_point: Vec<C64>,
    pub points: Vec<Vec<C64>>,
    pub grid: ScalingGrid,
    pub ensemble: EnsembleKind,
    pub samples: usize,
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub direction: Vec<C64>,
    pub t_steps: usize,
    pub raw: serde_json::Value,
}

fn get_complex_pair(v: &serde_json::Value) -> Option<C64> {
    let arr = v.as_array()?;
    if arr.len() != 2 {
        return None;
    }
    Some(C64::new(arr[0].as_f64()?, arr[1].as_f64()?))
}

fn get_point(v: &serde_json::Value, m: usize) -> Option<Vec<C64>> {
    let arr = v.as_array()?;
    if arr.len() != m {
        return None;
    }
    arr.iter().map(get_complex_pair).collect()
}

/// Validate a raw config; never fails, returns the full list of problems.
pub fn validate(raw: &serde_json::Value) -> Vec<SchemaIssue> {
    let mut issues = Vec::new();
    let mut issue = |field: &str, message: String| {
        let resource_cap = message.contains("above the cap");
        issues.push(SchemaIssue { field: field.into(), message, resource_cap });
    };
    let obj = match raw.as_object() {
        Some(o) => o,
        None => {
            issue("<root>", "config must be a JSON object".into());
            return issues;
        }
    };
    let kind = match obj.get("kind").and_then(|v| v.as_str()) {
        None => {
            issue("kind", "missing or non-string; one of basis | kernel-scaling | jpd | measures-selftest | tian | supnorm | kodaira-probe".into());
            None
        }
        Some(s) => match ExperimentKind::parse(s) {
            None => {
                issue("kind", format!("unknown experiment kind '{s}'"));
                None
            }
            Some(k) => Some(k),
        },
    };
    if obj.get("seed").and_then(|v| v.as_u64()).is_none() {
        issue("seed", "missing or non-integer 64-bit seed".into());
    }
    let needs_model = kind.map(|k| k != ExperimentKind::MeasuresSelftest).unwrap_or(false);
    let m = obj.get("m").and_then(|v| v.as_u64()).map(|v| v as usize);
    if needs_model {
        match m {
            None => issue("m", "missing dimension (1 or 2)".into()),
            Some(m) if !(1..=2).contains(&m) => {
                issue("m", format!("dimension {m} unsupported (quadrature feasible for m <= 2)"))
            }
            _ => {}
        }
        // weight grammar
        if let Some(ws) = obj.get("weight") {
            match ws.as_str() {
                None => issue("weight", "must be a string in the weight grammar".into()),
                Some(s) => {
                    if let Err(e) = crate::weight::Weight::parse(s, m.unwrap_or(1)) {
                        issue("weight", format!("{e}"));
                    }
                }
            }
        }
        let list_kinds = [
            ExperimentKind::KernelScaling,
            ExperimentKind::Jpd,
            ExperimentKind::Tian,
            ExperimentKind::Supnorm,
        ];
        if kind.map(|k| list_kinds.contains(&k)).unwrap_or(false) {
            match obj.get("n_list").and_then(|v| v.as_array()) {
                None => issue("n_list", "missing power list".into()),
                Some(arr) => {
                    let ns: Option<Vec<u64>> = arr.iter().map(|v| v.as_u64()).collect();
                    match ns {
                        None => issue("n_list", "entries must be positive integers".into()),
                        Some(ns) => {
                            if ns.is_empty() {
                                issue("n_list", "power list is empty".into());
                            }
                            if ns.windows(2).any(|w| w[1] <= w[0]) {
                                issue("n_list", "power list must be strictly increasing".into());
                            }
                            if let Some(m) = m {
                                for &n in &ns {
                                    let d = section_dimension(m, n as u32);
                                    if d > DIMENSION_CAP as u64 {
                                        issue(
                                            "n_list",
                                            format!("N = {n} gives dimension {d} above the cap {DIMENSION_CAP}"),
                                        );
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let scalar_kinds = [ExperimentKind::Basis, ExperimentKind::KodairaProbe];
        if kind.map(|k| scalar_kinds.contains(&k)).unwrap_or(false) {
            match obj.get("n_power").and_then(|v| v.as_u64()) {
                None => issue("n_power", "missing bundle power".into()),
                Some(n) => {
                    if n == 0 {
                        issue("n_power", "power must be at least 1".into());
                    } else if let Some(m) = m {
                        let d = section_dimension(m, n as u32);
                        if d > DIMENSION_CAP as u64 {
                            issue(
                                "n_power",
                                format!("dimension {d} above the cap {DIMENSION_CAP}"),
                            );
                        }
                    }
                }
            }
        }
        if kind == Some(ExperimentKind::Jpd) {
            match obj.get("points").and_then(|v| v.as_array()) {
                None => issue("points", "missing configuration points".into()),
                Some(arr) => {
                    if arr.is_empty() {
                        issue("points", "need at least one configuration point".into());
                    }
                    if let Some(m) = m {
                        for (i, p) in arr.iter().enumerate() {
                            if get_point(p, m).is_none() {
                                issue(
                                    "points",
                                    format!("point {i} is not an array of {m} [re, im] pairs"),
                                );
                            }
                        }
                    }
                }
            }
            if obj.get("samples").and_then(|v| v.as_u64()).is_none() {
                issue("samples", "missing Monte Carlo sample count".into());
            }
        }
        if kind == Some(ExperimentKind::Supnorm) {
            if obj.get("samples").and_then(|v| v.as_u64()).is_none() {
                issue("samples", "missing sample count".into());
            }
            let w = obj.get("weight").and_then(|v| v.as_str()).unwrap_or("0");
            if w.trim() != "0" {
                issue(
                    "weight",
                    "sup-norm study supports the flat weight only (its grid covers the chart at infinity)".into(),
                );
            }
        }
    }
    if let Some(g) = obj.get("grid") {
        if serde_json::from_value::<ScalingGrid>(g.clone()).is_err() {
            issue("grid", "grid must have radius, step, angles".into());
        }
    }
    if let Some(e) = obj.get("ensemble") {
        if serde_json::from_value::<EnsembleKind>(e.clone()).is_err() {
            issue(
                "ensemble",
                "must be one of sphere | normalized-gaussian | ball".into(),
            );
        }
    }
    issues
}

/// Parse a validated config into the typed form.
pub fn parse_config(raw: &serde_json::Value) -> Result<ExperimentConfig> {
    let issues = validate(raw);
    if !issues.is_empty() {
        let text = issues
            .iter()
            .map(|i| format!("{}: {}", i.field, i.message))
            .collect::<Vec<_>>()
            .join("; ");
        // caps are reported before any compute and carry their own exit code
        if issues.iter().all(|i| i.resource_cap) {
            return Err(Error::ResourceCap(text));
        }
        return Err(Error::Schema(text));
    }
    let obj = raw.as_object().unwrap();
    let kind = ExperimentKind::parse(obj["kind"].as_str().unwrap()).unwrap();
    let m = obj.get("m").and_then(|v| v.as_u64()).unwrap_or(1) as usize;
    let base_point = obj
        .get("base_point")
        .and_then(|v| get_point(v, m))
        .unwrap_or_else(|| vec![C64::new(0.0, 0.0); m]);
    let points: Vec<Vec<C64>> = obj
        .get("points")
        .and_then(|v| v.as_array())
        .map(|arr| arr.iter().filter_map(|p| get_point(p, m)).collect())
        .unwrap_or_default();
    let direction = obj
        .get("direction")
        .and_then(|v| get_point(v, m))
        .unwrap_or_else(|| vec![C64::new(1.0, 0.0); m]);
    Ok(ExperimentConfig {
        kind,
        m,
        n_power: obj.get("n_power").and_then(|v| v.as_u64()).map(|v| v as u32),
        n_list: obj
            .get("n_list")
            .and_then(|v| v.as_array())
            .map(|a| a.iter().filter_map(|v| v.as_u64()).map(|v| v as u32).collect())
            .unwrap_or_default(),
        weight: obj
            .get("weight")
            .and_then(|v| v.as_str())
            .unwrap_or("0")
            .to_string(),
        base_point,
        points,
        grid: obj
            .get("grid")
            .and_then(|g| serde_json::from_value(g.clone()).ok())
            .unwrap_or_default(),
        ensemble: obj
            .get("ensemble")
            .and_then(|e| serde_json::from_value(e.clone()).ok())
            .unwrap_or(EnsembleKind::Sphere),
        samples: obj.get("samples").and_then(|v| v.as_u64()).unwrap_or(20_000) as usize,
        seed: obj["seed"].as_u64().unwrap(),
        workers: obj.get("workers").and_then(|v| v.as_u64()).unwrap_or(0) as usize,
        out: obj.get("out").and_then(|v| v.as_str()).map(PathBuf::from),
        direction,
        t_steps: obj.get("t_steps").and_then(|v| v.as_u64()).unwrap_or(20) as usize,
        raw: raw.clone(),
    })
}

fn build_stacks(cfg: &ExperimentConfig) -> Result<Vec<Workbench>> {
    cfg.n_list
        .iter()
        .map(|&n| Workbench::new(cfg.m, n, &cfg.weight, &cfg.base_point))
        .collect()
}

/// Execute a config, writing reports and the manifest into `out_dir`.
/// The manifest is written regardless of success.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new(cfg.raw.clone());
    let result = run_inner(cfg, out_dir, &mut manifest);
    match &result {
        Ok(()) => manifest.status = "ok".into(),
        Err(e) => {
            manifest.status = "error".into();
            manifest.error = Some(format!("{e}"));
        }
    }
    manifest.write_to(out_dir)?;
    result.map(|_| manifest)
}

fn run_inner(cfg: &ExperimentConfig, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    match cfg.kind {
        ExperimentKind::Basis => {
            let clock = PhaseClock::start();
            let bench = Workbench::new(cfg.m, cfg.n_power.unwrap(), &cfg.weight, &cfg.base_point)?;
            clock.finish(manifest, "build-basis");
            let path = out.join("basis.json");
            crate::report::write_json(&path, &bench.basis.export_json())?;
            manifest.record_output(&path)?;
        }
        ExperimentKind::KernelScaling => {
            let clock = PhaseClock::start();
            let stacks = build_stacks(cfg)?;
            clock.finish(manifest, "build-bases");
            let clock = PhaseClock::start();
            let refs: Vec<(&SectionBasis, &crate::model_geometry::HeisenbergChart)> =
                stacks.iter().map(|wb| (&wb.basis, &wb.chart)).collect();
            let report = scaling_study(&refs, &cfg.grid)?;
            clock.finish(manifest, "scaling-study");
            let mut csv = CsvWriter::new(&["n", "sup_error", "slope_running"]);
            for i in 0..report.n_list.len() {
                csv.row(&[
                    CsvField::Int(report.n_list[i] as i64),
                    CsvField::Float(report.sup_errors[i]),
                    CsvField::Float(report.running_slopes[i]),
                ]);
            }
            let csv_path = out.join("scaling.csv");
            csv.write_to(&csv_path)?;
            manifest.record_output(&csv_path)?;
            let json_path = out.join("scaling.json");
            crate::report::write_json(&json_path, &serde_json::to_value(&report).unwrap())?;
            manifest.record_output(&json_path)?;
        }
        ExperimentKind::Jpd => {
            let clock = PhaseClock::start();
            let stacks = build_stacks(cfg)?;
            clock.finish(manifest, "build-bases");
            let clock = PhaseClock::start();
            let refs: Vec<(&SectionBasis, &crate::model_geometry::HeisenbergChart)> =
                stacks.iter().map(|wb| (&wb.basis, &wb.chart)).collect();
            let series = scaling_convergence(&refs, &cfg.points)?;
            clock.finish(manifest, "covariance-series");
            let clock = PhaseClock::start();
            let last = stacks.last().unwrap();
            let rn = (last.model.n_power() as f64).sqrt();
            let scaled: Vec<Vec<C64>> = cfg
                .points
                .iter()
                .map(|z| z.iter().map(|c| c / rn).collect())
                .collect();
            let emp = empirical_jpd(
                &last.basis,
                &last.chart,
                &scaled,
                cfg.ensemble,
                cfg.samples,
                cfg.seed,
            )?;
            clock.finish(manifest, "empirical-moments");
            let mut csv = CsvWriter::new(&["n", "max_dev", "spectral_dev", "n_samples"]);
            for dev in &series {
                let samples =
                    if dev.n_power == emp.n_power { emp.samples as i64 } else { 0 };
                csv.row(&[
                    CsvField::Int(dev.n_power as i64),
                    CsvField::Float(dev.max_dev),
                    CsvField::Float(dev.spectral_dev),
                    CsvField::Int(samples),
                ]);
            }
            let csv_path = out.join("jpd.csv");
            csv.write_to(&csv_path)?;
            manifest.record_output(&csv_path)?;
            let limit = covariance_limit(&cfg.points, cfg.m, 1.0);
            let emp_rows: Vec<Vec<[f64; 2]>> = (0..emp.exact.len())
                .map(|i| {
                    (0..emp.exact.len())
                        .map(|j| [emp.empirical[(i, j)].re, emp.empirical[(i, j)].im])
                        .collect()
                })
                .collect();
            let json_path = out.join("jpd.json");
            crate::report::write_json(
                &json_path,
                &serde_json::json!({
                    "series": series,
                    "limit": limit.to_json(),
                    "exact_at_last_n": emp.exact.to_json(),
                    "empirical_at_last_n": emp_rows,
                    "standard_errors": emp.se,
                    "ensemble": cfg.ensemble,
                    "samples": emp.samples,
                }),
            )?;
            manifest.record_output(&json_path)?;
        }
        ExperimentKind::MeasuresSelftest => {
            let clock = PhaseClock::start();
            let checks = measures_selftest(cfg.seed);
            clock.finish(manifest, "measures-selftest");
            let mut csv = CsvWriter::new(&["check", "passed", "statistic", "threshold"]);
            let mut all_ok = true;
            for c in &checks {
                all_ok &= c.passed;
                csv.row(&[
                    CsvField::Str(c.name.clone()),
                    CsvField::Str(if c.passed { "pass" } else { "fail" }.into()),
                    CsvField::Float(c.statistic),
                    CsvField::Float(c.threshold),
                ]);
            }
            let path = out.join("measures.csv");
            csv.write_to(&path)?;
            manifest.record_output(&path)?;
            if !all_ok {
                let failed: Vec<&str> = checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name.as_str())
                    .collect();
                return Err(Error::Numerical(format!(
                    "measure self-test failures: {}",
                    failed.join(", ")
                )));
            }
        }
        ExperimentKind::Tian => {
            let clock = PhaseClock::start();
            let stacks = build_stacks(cfg)?;
            let test_points: Vec<Vec<C64>> = if cfg.points.is_empty() {
                vec![
                    vec![C64::new(0.0, 0.0); cfg.m],
                    vec![C64::new(0.3, -0.2); cfg.m],
                    vec![C64::new(-0.5, 0.4); cfg.m],
                ]
            } else {
                cfg.points.clone()
            };
            let mut csv = CsvWriter::new(&["n", "statistic", "value", "stderr"]);
            for wb in &stacks {
                let err = tian_pullback_error(&wb.basis, &wb.chart, &test_points);
                csv.row(&[
                    CsvField::Int(wb.model.n_power() as i64),
                    CsvField::Str("pullback_sup_rel_error".into()),
                    CsvField::Float(err),
                    CsvField::Float(0.0),
                ]);
            }
            clock.finish(manifest, "tian-series");
            let path = out.join("tian.csv");
            csv.write_to(&path)?;
            manifest.record_output(&path)?;
        }
        ExperimentKind::Supnorm => {
            let clock = PhaseClock::start();
            let stacks = build_stacks(cfg)?;
            let refs: Vec<&SectionBasis> = stacks.iter().map(|wb| &wb.basis).collect();
            let sup_cfg = SupnormConfig { samples: cfg.samples, ..Default::default() };
            let report = supnorm_statistics(&refs, &sup_cfg, cfg.seed)?;
            clock.finish(manifest, "supnorm-study");
            let mut csv = CsvWriter::new(&["n", "statistic", "value", "stderr"]);
            for i in 0..report.n_list.len() {
                let n = report.n_list[i] as i64;
                csv.row(&[
                    CsvField::Int(n),
                    CsvField::Str("sup_ratio_value_median".into()),
                    CsvField::Float(report.ratio_value_median[i]),
                    CsvField::Float(report.median_se[i]),
                ]);
                csv.row(&[
                    CsvField::Int(n),
                    CsvField::Str("sup_ratio_grad_median".into()),
                    CsvField::Float(report.ratio_grad_median[i]),
                    CsvField::Float(0.0),
                ]);
                csv.row(&[
                    CsvField::Int(n),
                    CsvField::Str("sup_ratio_hess_median".into()),
                    CsvField::Float(report.ratio_hess_median[i]),
                    CsvField::Float(0.0),
                ]);
            }
            let csv_path = out.join("supnorm.csv");
            csv.write_to(&csv_path)?;
            manifest.record_output(&csv_path)?;
            let json_path = out.join("supnorm.json");
            crate::report::write_json(&json_path, &serde_json::to_value(&report).unwrap())?;
            manifest.record_output(&json_path)?;
        }
        ExperimentKind::KodairaProbe => {
            let clock = PhaseClock::start();
            let bench = Workbench::new(cfg.m, cfg.n_power.unwrap(), &cfg.weight, &cfg.base_point)?;
            let eval = KernelEvaluator::new(&bench.basis, &bench.chart);
            let ts: Vec<f64> =
                (0..=cfg.t_steps).map(|i| i as f64 / cfg.t_steps as f64).collect();
            let profile = kodaira_separation_probe(&eval, &cfg.direction, &ts);
            clock.finish(manifest, "kodaira-probe");
            let v2: f64 = cfg.direction.iter().map(|c| c.norm_sqr()).sum();
            let mut csv = CsvWriter::new(&["t", "f", "gauss_reference"]);
            for (t, f) in &profile {
                csv.row(&[
                    CsvField::Float(*t),
                    CsvField::Float(*f),
                    CsvField::Float((-v2 * t * t).exp()),
                ]);
            }
            let path = out.join("kodaira.csv");
            csv.write_to(&path)?;
            manifest.record_output(&path)?;
        }
    }
    Ok(())
}

/// One self-test row of the measures experiment.
pub struct MeasureCheck {
    pub name: String,
    pub passed: bool,
    pub statistic: f64,
    pub threshold: f64,
}

/// The measure-lemma battery: tail law, Poincare-Borel, pushforward
/// identity, projection-density normalization, moment identity,
/// determinism.
pub fn measures_selftest(seed: u64) -> Vec<MeasureCheck> {
    let mut checks = Vec::new();
    // (a) sphere tail law at three parameter sets
    for (d, lambda) in [(3usize, 0.5f64), (4, 0.3), (10, 0.2)] {
        let (freq, se) = sphere_tail_frequency(d, lambda, 100_000, seed ^ d as u64);
        let expected = sphere_tail_prob(lambda, d);
        let dev = (freq - expected).abs() / se;
        checks.push(MeasureCheck {
            name: format!("sphere-tail-d{d}-lambda{lambda}"),
            passed: dev < 4.0,
            statistic: dev,
            threshold: 4.0,
        });
    }
    // (b) Poincare-Borel at d = 2000, k = 2
    {
        let map = PushMap::scaled_projection(2000, 2);
        let sphere = sample_real_sphere(2000, 10_000, seed ^ 0xb0);
        let mut worst = 0.0f64;
        for coord in 0..2 {
            let xs: Vec<f64> = sphere.iter().map(|x| map.apply(x)[coord]).collect();
            worst = worst.max(ks_vs_standard_normal(&xs));
        }
        checks.push(MeasureCheck {
            name: "poincare-borel-ks".into(),
            passed: worst < 0.02,
            statistic: worst,
            threshold: 0.02,
        });
    }
    // (c) pushforward covariance identity, exact and Monte Carlo
    {
        let g = generalized_gaussian(&[2.0, 0.5, 0.5, 1.0], 2).unwrap();
        let t = [1.0, -1.0, 0.5, 2.0];
        let pushed = pushforward(&t, 2, &g).unwrap();
        // closed form T Delta T^T for T = [[1,-1],[1/2,2]], Delta = [[2,1/2],[1/2,1]]
        let want = [
            [2.0 - 0.5 - 0.5 + 1.0, 2.0 * 0.5 + 0.5 * 2.0 - 0.5 * 0.5 - 1.0 * 2.0],
            [0.0, 0.25 * 2.0 + 2.0 * 0.5 * 2.0 * 0.5 + 4.0 * 1.0],
        ];
        let exact_dev = ((pushed.covariance()[(0, 0)].re - want[0][0]).abs())
            .max((pushed.covariance()[(0, 1)].re - want[0][1]).abs())
            .max((pushed.covariance()[(1, 1)].re - want[1][1]).abs());
        checks.push(MeasureCheck {
            name: "pushforward-exact".into(),
            passed: exact_dev < 1e-12,
            statistic: exact_dev,
            threshold: 1e-12,
        });
        let rows = g.sample(10_000, seed ^ 0xc1);
        let mapped: Vec<[f64; 2]> = rows
            .iter()
            .map(|r| [r[0] - r[1], 0.5 * r[0] + 2.0 * r[1]])
            .collect();
        let n = mapped.len() as f64;
        let mut dev_sigma = 0.0f64;
        for (i, j, w) in [(0, 0, want[0][0]), (0, 1, want[0][1]), (1, 1, want[1][1])] {
            let mean: f64 = mapped.iter().map(|r| r[i] * r[j]).sum::<f64>() / n;
            let var: f64 = mapped
                .iter()
                .map(|r| (r[i] * r[j] - mean) * (r[i] * r[j] - mean))
                .sum::<f64>()
                / n;
            let se = (var / n).sqrt();
            dev_sigma = dev_sigma.max((mean - w).abs() / se);
        }
        checks.push(MeasureCheck {
            name: "pushforward-monte-carlo".into(),
            passed: dev_sigma < 4.0,
            statistic: dev_sigma,
            threshold: 4.0,
        });
    }
    // (d) projection density: mass and the d=3 axis value
    {
        let d = 7;
        let lim = (d as f64).sqrt();
        let steps = 200_000;
        let h = 2.0 * lim / steps as f64;
        let mut total = 0.0;
        for i in 0..=steps {
            let x = -lim + i as f64 * h;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            total += w * h * sphere_projection_density(&[x], d, 1);
        }
        let mass_err = (total - 1.0).abs();
        checks.push(MeasureCheck {
            name: "projection-density-mass".into(),
            passed: mass_err < 1e-8,
            statistic: mass_err,
            threshold: 1e-8,
        });
        let v = sphere_projection_density(&[0.0], 3, 1);
        let dev = (v - 1.0 / (2.0 * 3.0f64.sqrt())).abs();
        checks.push(MeasureCheck {
            name: "projection-density-archimedes".into(),
            passed: dev < 1e-12,
            statistic: dev,
            threshold: 1e-12,
        });
    }
    // moment identity for a generalized Gaussian
    {
        let g = generalized_gaussian(&[1.5, -0.4, -0.4, 0.7], 2).unwrap();
        let rows = g.sample(20_000, seed ^ 0xd2);
        let n = rows.len() as f64;
        let mut worst = 0.0f64;
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let want = g.covariance()[(i, j)].re;
            let mean: f64 = rows.iter().map(|r| r[i] * r[j]).sum::<f64>() / n;
            let var: f64 = rows
                .iter()
                .map(|r| (r[i] * r[j] - mean) * (r[i] * r[j] - mean))
                .sum::<f64>()
                / n;
            let se = (var / n).sqrt();
            worst = worst.max((mean - want).abs() / se);
        }
        checks.push(MeasureCheck {
            name: "generalized-gaussian-moments".into(),
            passed: worst < 4.0,
            statistic: worst,
            threshold: 4.0,
        });
    }
    // spherical-vs-Gaussian convergence across a projection family
    {
        // dimensions low enough that the O(1/d) bias stands clear of the
        // energy-statistic noise at this budget
        let target = generalized_gaussian(&[1.0, 0.0, 0.0, 1.0], 2).unwrap();
        let maps: Vec<PushMap> =
            [3usize, 6, 24].iter().map(|&d| PushMap::scaled_projection(d, 2)).collect();
        let dists =
            crate::measure_lab::spherical_vs_gaussian_check(&maps, &target, 8000, seed ^ 0xe3);
        let decreasing = dists.windows(2).all(|w| w[1] < w[0]);
        checks.push(MeasureCheck {
            name: "spherical-vs-gaussian-decreasing".into(),
            passed: decreasing && dists[2] < 0.5 * dists[0],
            statistic: dists[2],
            threshold: dists[0],
        });
    }
    // determinism: same seed, different pool size, identical bits
    {
        let s = EnsembleSampler::new(EnsembleKind::Sphere, 6, seed);
        let a = s.sample(2000);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| s.sample(2000));
        let identical = a == b;
        checks.push(MeasureCheck {
            name: "determinism-bit-exact".into(),
            passed: identical,
            statistic: if identical { 0.0 } else { 1.0 },
            threshold: 0.0,
        });
    }
    checks
}

/// Resolve the worker count: CLI flag, then config, then the environment
/// variable `SZEGOLAB_WORKERS`, then all cores (0).
pub fn resolve_workers(cli: Option<usize>, cfg: &ExperimentConfig) -> usize {
    if let Some(k) = cli {
        return k;
    }
    if cfg.workers > 0 {
        return cfg.workers;
    }
    std::env::var("SZEGOLAB_WORKERS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config() -> serde_json::Value {
        serde_json::json!({
            "kind": "kernel-scaling",
            "m": 1,
            "n_list": [4, 8],
            "weight": "0",
            "seed": 7,
            "grid": {"radius": 1.0, "step": 0.5, "angles": [0.0]},
        })
    }

    #[test]
    fn validate_passes_good_config() {
        assert!(validate(&base_config()).is_empty());
    }

    #[test]
    fn validate_missing_seed() {
        let mut cfg = base_config();
        cfg.as_object_mut().unwrap().remove("seed");
        let issues = validate(&cfg);
        assert!(issues.iter().any(|i| i.field == "seed"), "{issues:?}");
    }

    #[test]
    fn validate_non_increasing_powers() {
        let mut cfg = base_config();
        cfg["n_list"] = serde_json::json!([8, 8]);
        let issues = validate(&cfg);
        assert!(issues.iter().any(|i| i.field == "n_list"));
    }

    #[test]
    fn validate_weight_with_position() {
        let mut cfg = base_config();
        cfg["weight"] = serde_json::json!("0.1 * (r2");
        let issues = validate(&cfg);
        let w = issues.iter().find(|i| i.field == "weight").unwrap();
        assert!(w.message.contains("byte"), "{}", w.message);
    }

    #[test]
    fn validate_dimension_cap() {
        let mut cfg = base_config();
        cfg["n_list"] = serde_json::json!([4, 2500]);
        let issues = validate(&cfg);
        assert!(issues.iter().any(|i| i.message.contains("cap")));
    }

    #[test]
    fn run_scaling_and_reproducibility() {
        let cfg = parse_config(&base_config()).unwrap();
        let dir1 = std::env::temp_dir().join("szegolab-test-run1");
        let dir2 = std::env::temp_dir().join("szegolab-test-run2");
        let _ = std::fs::remove_dir_all(&dir1);
        let _ = std::fs::remove_dir_all(&dir2);
        run(&cfg, &dir1).unwrap();
        run(&cfg, &dir2).unwrap();
        let a = std::fs::read(dir1.join("scaling.csv")).unwrap();
        let b = std::fs::read(dir2.join("scaling.csv")).unwrap();
        assert_eq!(a, b, "CSV bodies must be byte-identical");
        assert!(dir1.join("manifest.json").exists());
    }

    #[test]
    fn manifest_written_on_failure() {
        // jpd with coincident points fails numerically but still writes the
        // manifest
        let raw = serde_json::json!({
            "kind": "jpd",
            "m": 1,
            "n_list": [4],
            "weight": "0",
            "seed": 3,
            "samples": 1500,
            "points": [[[0.0, 0.0]], [[0.0, 0.0]]],
        });
        let cfg = parse_config(&raw).unwrap();
        let dir = std::env::temp_dir().join("szegolab-test-fail");
        let _ = std::fs::remove_dir_all(&dir);
        assert!(run(&cfg, &dir).is_err());
        let manifest = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
        assert!(manifest.contains("\"status\": \"error\""));
    }
}
