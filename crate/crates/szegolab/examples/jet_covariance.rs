//! Universality of the jet covariance: the exact covariance of
//! (values, scaled derivatives) at a scaled two-point configuration
//! converges to the universal limit assembled from the Heisenberg kernel;
//! the closed-form limit is cross-checked against mechanical jet
//! differentiation, and sphere / normalized-Gaussian Monte Carlo moments
//! agree with the exact covariance entrywise.
//!
//!     cargo run --release --example jet_covariance

use szegolab::jpd_universality::{covariance_limit, empirical_jpd, oracle, scaling_convergence};
use szegolab::measure_lab::EnsembleKind;
use szegolab::model_geometry::HeisenbergChart;
use szegolab::section_space::SectionBasis;
use szegolab::{C64, Workbench};

fn main() -> szegolab::Result<()> {
    let origin = [C64::new(0.0, 0.0)];
    let config = vec![vec![C64::new(0.0, 0.0)], vec![C64::new(1.0, 0.0)]];

    let limit = covariance_limit(&config, 1, 1.0);
    let by_diff = oracle::covariance_limit_by_differentiation(&config, 1, 1.0);
    println!(
        "limit blocks vs differentiation oracle: max deviation {:.2e}",
        limit.entrywise_max_dev(&by_diff)
    );
    println!(
        "A_12 = {:.6} (= exp(-1/2)/pi = {:.6});  C_11,11 = {:.6} (= 1/pi)",
        limit.a(0, 1).re,
        (-0.5f64).exp() / std::f64::consts::PI,
        limit.c(0, 0, 0, 0).re
    );

    let stacks: Vec<Workbench> = [32u32, 64, 128, 256]
        .iter()
        .map(|&n| Workbench::new(1, n, "0", &origin))
        .collect::<szegolab::Result<_>>()?;
    let refs: Vec<(&SectionBasis, &HeisenbergChart)> =
        stacks.iter().map(|wb| (&wb.basis, &wb.chart)).collect();
    println!("\nconfiguration z = (0, 1) scaled by 1/sqrt(N):");
    println!("  N    max |Delta^N - Delta^inf|   spectral");
    for dev in scaling_convergence(&refs, &config)? {
        println!(
            "{:>4}        {:>10.3e}          {:>10.3e}",
            dev.n_power, dev.max_dev, dev.spectral_dev
        );
    }

    let last = stacks.last().unwrap();
    let rn = (last.model.n_power() as f64).sqrt();
    let scaled: Vec<Vec<C64>> =
        config.iter().map(|z| z.iter().map(|c| c / rn).collect()).collect();
    println!("\nMonte Carlo second moments at N = 256, 20000 samples:");
    for kind in [EnsembleKind::Sphere, EnsembleKind::NormalizedGaussian] {
        let rep = empirical_jpd(&last.basis, &last.chart, &scaled, kind, 20_000, 11)?;
        println!(
            "  {kind:?}: worst entry deviation {:.2} standard errors; anti-holomorphic mass {:.1e}",
            rep.max_sigma_deviation(1e-9),
            rep.empirical_anti_holo_max()
        );
    }
    Ok(())
}
