//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line. Tolerances are pinned here, not configurable.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::sync::Arc;
use szegolab::global_asymptotics::{supnorm_statistics, tian_pullback_error, SupnormConfig};
use szegolab::jpd_universality::{
    covariance_limit, empirical_jpd, oracle, scaling_convergence,
};
use szegolab::kernel_engine::{scaling_study, KernelEvaluator, ScalingGrid};
use szegolab::measure_lab::EnsembleKind;
use szegolab::model_geometry::{make_heisenberg_chart, make_model, section_dimension};
use szegolab::section_space::{build_basis, SectionBasis};
use szegolab::model_geometry::HeisenbergChart;
use szegolab::{C64, Workbench};

const ZERO: C64 = C64::new(0.0, 0.0);
const PI: f64 = std::f64::consts::PI;

struct Criterion {
    number: u32,
    name: &'static str,
}

impl Criterion {
    fn new(number: u32, name: &'static str) -> Criterion {
        Criterion { number, name }
    }

    fn check(&self, ok: bool, detail: &str) {
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!(
            "acceptance criterion {:>2} ({}): {} [{}]",
            self.number, self.name, verdict, detail
        );
        assert!(ok, "criterion {} ({}) failed: {}", self.number, self.name, detail);
    }
}

fn flat_stack(n: u32) -> (SectionBasis, HeisenbergChart) {
    let model = Arc::new(make_model(1, n, "0").unwrap());
    let basis = build_basis(&model).unwrap();
    let chart = make_heisenberg_chart(&model, &[ZERO]).unwrap();
    (basis, chart)
}

/// Independent binomial oracle by Pascal recurrence in u128.
fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut row = vec![0u128; k as usize + 1];
    row[0] = 1;
    for i in 1..=n {
        for j in (1..=k.min(i) as usize).rev() {
            row[j] += row[j - 1];
        }
    }
    row[k as usize]
}

#[test]
fn criterion_01_dimension_law() {
    let c = Criterion::new(1, "dimension law");
    let mut ok = true;
    for m in [1usize, 2] {
        let n_max = 256 / m as u32;
        for n in 1..=n_max {
            let got = section_dimension(m, n) as u128;
            let want = binomial((n as u64) + m as u64, m as u64);
            if got != want {
                ok = false;
            }
        }
    }
    // leading-order dimension law at N = 100, m = 1
    let ratio = section_dimension(1, 100) as f64 / 100.0;
    let ratio_ok = (ratio - 1.0).abs() < 0.05;
    c.check(
        ok && ratio_ok,
        &format!("binomial exact for m in 1..=2, d_N m!/N^m = {ratio:.4} at N=100"),
    );
}

#[test]
fn criterion_02_diagonal_density() {
    let c = Criterion::new(2, "diagonal density and expansion fit");
    // (a) exact diagonal at 10 pseudo-random points, N = 64
    let (basis, chart) = flat_stack(64);
    let eval = KernelEvaluator::new(&basis, &chart);
    let want = 65.0 / PI;
    let mut rng = szegolab::measure_lab::scalar_rng(2024);
    let mut worst_rel = 0.0f64;
    for _ in 0..10 {
        let z = C64::new(
            4.0 * szegolab::rng::uniform_01(&mut rng) - 2.0,
            4.0 * szegolab::rng::uniform_01(&mut rng) - 2.0,
        );
        let d = eval.diagonal(&[z]);
        worst_rel = worst_rel.max(((d - want) / want).abs());
    }
    // (b) flat expansion fit
    let n_list = [16u32, 32, 64, 128];
    let flat_diag: Vec<f64> = n_list
        .iter()
        .map(|&n| {
            let (b, ch) = flat_stack(n);
            KernelEvaluator::new(&b, &ch).diagonal(&[C64::new(0.3, -0.1)])
        })
        .collect();
    let (a0_flat, _, _) =
        szegolab::kernel_engine::density_expansion_fit(&n_list, &flat_diag, 1).unwrap();
    // (c) perturbed expansion fit; a0 is metric independent
    let weight = "0.1 * r2 / (1 + r2)";
    let pert_diag: Vec<f64> = n_list
        .iter()
        .map(|&n| {
            let wb = Workbench::new(1, n, weight, &[ZERO]).unwrap();
            KernelEvaluator::new(&wb.basis, &wb.chart).diagonal(&[C64::new(0.3, -0.1)])
        })
        .collect();
    let (a0_pert, _, _) =
        szegolab::kernel_engine::density_expansion_fit(&n_list, &pert_diag, 1).unwrap();
    let ok = worst_rel < 1e-9
        && (a0_flat - 1.0 / PI).abs() < 1e-6
        && ((a0_pert - 1.0 / PI) * PI).abs() < 0.02;
    c.check(
        ok,
        &format!(
            "diag rel err {worst_rel:.2e}, a0 flat {a0_flat:.8}, a0 perturbed {a0_pert:.6} vs {:.6}",
            1.0 / PI
        ),
    );
}

#[test]
fn criterion_03_near_diagonal_universality() {
    let c = Criterion::new(3, "near-diagonal kernel scaling");
    let stacks: Vec<(SectionBasis, HeisenbergChart)> =
        [16u32, 32, 64, 128, 256].iter().map(|&n| flat_stack(n)).collect();
    let refs: Vec<(&SectionBasis, &HeisenbergChart)> =
        stacks.iter().map(|(b, ch)| (b, ch)).collect();
    let report = scaling_study(&refs, &ScalingGrid::default()).unwrap();
    let at64 = report.sup_errors[2];
    let decreasing = report.sup_errors.windows(2).all(|w| w[1] < w[0]);
    let ok = at64 < 0.15 && decreasing && report.slope <= -0.4;
    c.check(
        ok,
        &format!(
            "sup error at N=64 is {at64:.4}, errors {:?}, slope {:.3}",
            report
                .sup_errors
                .iter()
                .map(|e| format!("{e:.3}"))
                .collect::<Vec<_>>(),
            report.slope
        ),
    );
}

#[test]
fn criterion_04_covariance_universality() {
    let c = Criterion::new(4, "jet covariance scaling limit");
    let config = vec![vec![ZERO], vec![C64::new(1.0, 0.0)]];
    // limit blocks must match the independent differentiation oracle
    let limit = covariance_limit(&config, 1, 1.0);
    let by_diff = oracle::covariance_limit_by_differentiation(&config, 1, 1.0);
    let oracle_dev = limit.entrywise_max_dev(&by_diff);
    // exact covariances approach the limit, decreasing over the power list
    let stacks: Vec<(SectionBasis, HeisenbergChart)> =
        [32u32, 64, 128, 256].iter().map(|&n| flat_stack(n)).collect();
    let refs: Vec<(&SectionBasis, &HeisenbergChart)> =
        stacks.iter().map(|(b, ch)| (b, ch)).collect();
    let devs = scaling_convergence(&refs, &config).unwrap();
    let decreasing = devs.windows(2).all(|w| w[1].max_dev < w[0].max_dev);
    let final_dev = devs.last().unwrap().max_dev;
    let tol = 0.05 * limit.max_abs();
    let ok = oracle_dev < 1e-10 && decreasing && final_dev <= tol;
    c.check(
        ok,
        &format!(
            "oracle dev {oracle_dev:.2e}, final dev {final_dev:.3e} vs tol {tol:.3e}, series {:?}",
            devs.iter().map(|d| format!("{:.2e}", d.max_dev)).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_05_ensemble_equivalence() {
    let c = Criterion::new(5, "sphere vs Gaussian ensemble moments");
    let (basis, chart) = flat_stack(64);
    let rn = 8.0;
    let config = vec![vec![ZERO], vec![C64::new(1.0 / rn, 0.0)]];
    let mut detail = String::new();
    let mut ok = true;
    for kind in [EnsembleKind::Sphere, EnsembleKind::NormalizedGaussian] {
        let report = empirical_jpd(&basis, &chart, &config, kind, 20_000, 4242).unwrap();
        let sigma = report.max_sigma_deviation(1e-9);
        detail.push_str(&format!("{kind:?}: {sigma:.2} sigma; "));
        ok &= sigma < 5.0;
    }
    c.check(ok, &detail);
}

#[test]
fn criterion_06_dbar_degeneracy() {
    let c = Criterion::new(6, "anti-holomorphic degeneracy");
    let (basis, chart) = flat_stack(64);
    let config = vec![vec![ZERO], vec![C64::new(0.125, 0.0)]];
    let exact = szegolab::jpd_universality::covariance_exact(&basis, &chart, &config).unwrap();
    let emp = empirical_jpd(&basis, &chart, &config, EnsembleKind::Sphere, 20_000, 7).unwrap();
    let scale = exact.max_abs();
    let exact_anti = exact.anti_holo_max() / scale;
    let emp_anti = emp.empirical_anti_holo_max() / scale;
    let ok = exact_anti < 1e-8 && emp_anti < 1e-8;
    c.check(ok, &format!("exact {exact_anti:.2e}, empirical {emp_anti:.2e} of max entry"));
}

#[test]
fn criterion_07_measure_lemmas() {
    let c = Criterion::new(7, "measure lemmas battery");
    let checks = szegolab::experiment::measures_selftest(20_260_808);
    let mut ok = true;
    let mut detail = String::new();
    for chk in &checks {
        ok &= chk.passed;
        if !chk.passed {
            detail.push_str(&format!("{} stat {:.3e}; ", chk.name, chk.statistic));
        }
    }
    if ok {
        detail = format!("{} checks passed", checks.len());
    }
    c.check(ok, &detail);
}

#[test]
fn criterion_08_tian_isometry() {
    let c = Criterion::new(8, "asymptotic isometry");
    let test_points: Vec<Vec<C64>> = vec![
        vec![ZERO],
        vec![C64::new(0.35, -0.15)],
        vec![C64::new(-0.6, 0.45)],
        vec![C64::new(0.1, 0.8)],
    ];
    // flat: machine-precision equality at every power
    let mut flat_worst = 0.0f64;
    for n in [16u32, 32, 64, 128] {
        let (basis, chart) = flat_stack(n);
        flat_worst = flat_worst.max(tian_pullback_error(&basis, &chart, &test_points));
    }
    // perturbed: error at 2N at most 0.6 of the error at N
    let weight = "0.1 * r2 / (1 + r2)";
    let errs: Vec<f64> = [16u32, 32, 64, 128]
        .iter()
        .map(|&n| {
            let wb = Workbench::new(1, n, weight, &[ZERO]).unwrap();
            tian_pullback_error(&wb.basis, &wb.chart, &test_points)
        })
        .collect();
    let rate_ok = errs.windows(2).all(|w| w[1] <= 0.6 * w[0]);
    let ok = flat_worst < 1e-8 && rate_ok;
    c.check(
        ok,
        &format!(
            "flat sup {flat_worst:.2e}; perturbed errors {:?}",
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_09_kodaira_probe() {
    let c = Criterion::new(9, "embedding separation probe");
    let mut ok = true;
    let mut detail = String::new();
    for n in [16u32, 64] {
        let (basis, chart) = flat_stack(n);
        let eval = KernelEvaluator::new(&basis, &chart);
        // N-matched scaling error bound from the near-diagonal study
        let refs = [(&basis, &chart)];
        let study = scaling_study(&refs, &ScalingGrid::default()).unwrap();
        let sup_err = study.sup_errors[0];
        for v_abs in [0.5f64, 1.75, 3.0] {
            let v = [C64::new(v_abs, 0.0)];
            let ts: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
            let profile = szegolab::global_asymptotics::kodaira_separation_probe(&eval, &v, &ts);
            ok &= (profile[0].1 - 1.0).abs() < 1e-12;
            for (t, f) in &profile {
                if *t >= 0.2 {
                    ok &= *f < 1.0 - 1e-6;
                }
                let gauss = (-v_abs * v_abs * t * t).exp();
                if (f - gauss).abs() > sup_err {
                    ok = false;
                    detail.push_str(&format!(
                        "N={n} |v|={v_abs} t={t}: |f - gauss| = {:.3e} > {sup_err:.3e}; ",
                        (f - gauss).abs()
                    ));
                }
            }
        }
        detail.push_str(&format!("N={n} sup_err {sup_err:.3e}; "));
    }
    c.check(ok, &detail);
}

#[test]
fn criterion_10_supnorm_growth() {
    let c = Criterion::new(10, "sup-norm growth statistics");
    let stacks: Vec<SectionBasis> = [32u32, 64, 128, 256, 512]
        .iter()
        .map(|&n| {
            let model = Arc::new(make_model(1, n, "0").unwrap());
            build_basis(&model).unwrap()
        })
        .collect();
    let refs: Vec<&SectionBasis> = stacks.iter().collect();
    let cfg = SupnormConfig { samples: 200, ..Default::default() };
    let report = supnorm_statistics(&refs, &cfg, 808).unwrap();
    let spread = |xs: &[f64]| -> f64 {
        let max = xs.iter().cloned().fold(0.0, f64::max);
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    };
    let value_spread = spread(&report.ratio_value_median);
    let grad_spread = spread(&report.ratio_grad_median);
    let grids_ok = report.refinement_rel_change.iter().all(|r| *r < 0.02);
    let ok = value_spread <= 1.5 && grad_spread <= 1.5 && grids_ok;
    c.check(
        ok,
        &format!(
            "median ratio spreads: value {value_spread:.3}, grad {grad_spread:.3}; refinement {:?}",
            report
                .refinement_rel_change
                .iter()
                .map(|r| format!("{r:.4}"))
                .collect::<Vec<_>>()
        ),
    );
}
