//! The measure toolbox: sphere/Gaussian/ball ensembles, the exact tail law,
//! the scaled coordinate-projection density, generalized Gaussians and
//! their pushforwards, plus sample export in both columnar formats.
//!
//!     cargo run --release --example measures

use szegolab::measure_lab::{
    generalized_gaussian, ks_vs_standard_normal, sample_real_sphere, sphere_projection_density,
    sphere_tail_frequency, sphere_tail_prob, EnsembleKind, EnsembleSampler, PushMap,
};

fn main() -> szegolab::Result<()> {
    println!("sphere tail law P(|<P,A>| > lambda) = (1 - lambda^2)^(d-1):");
    for (d, lambda) in [(3usize, 0.5f64), (4, 0.3), (10, 0.2)] {
        let (freq, se) = sphere_tail_frequency(d, lambda, 100_000, 99);
        let exact = sphere_tail_prob(lambda, d);
        println!(
            "  d = {d:>2}, lambda = {lambda}: exact {exact:.6}, monte carlo {freq:.6} (se {se:.1e})"
        );
    }

    println!("\nPoincare-Borel: sqrt(d) (x_1, x_2) of a uniform sphere point -> standard Gaussian");
    for d in [50usize, 500, 2000] {
        let map = PushMap::scaled_projection(d, 2);
        let sphere = sample_real_sphere(d, 10_000, 7);
        let xs: Vec<f64> = sphere.iter().map(|x| map.apply(x)[0]).collect();
        println!("  d = {d:>4}: KS vs normal = {:.4}", ks_vs_standard_normal(&xs));
    }

    println!("\nscaled projection density (corrected normalization):");
    let v = sphere_projection_density(&[0.0], 3, 1);
    println!(
        "  d=3, k=1 at x=0: {v:.9} = 1/(2 sqrt 3) = {:.9} (Archimedes)",
        1.0 / (2.0 * 3.0f64.sqrt())
    );
    let g = sphere_projection_density(&[0.4], 20_000, 1);
    let gauss = (-0.5f64 * 0.16).exp() / (2.0 * std::f64::consts::PI).sqrt();
    println!("  d=20000, k=1 at x=0.4: {g:.8} vs Gaussian {gauss:.8}");

    println!("\ngeneralized Gaussian with covariance [[2, 1/2], [1/2, 1]]:");
    let gg = generalized_gaussian(&[2.0, 0.5, 0.5, 1.0], 2)?;
    println!("  support rank {}, eigenvalues {:?}", gg.support_rank, gg.eigenvalues());
    println!("  characteristic function at t = (1, 0): {:.6}", gg.characteristic_function(&[1.0, 0.0]));
    let degenerate = generalized_gaussian(&[1.0, 0.0, 0.0, 0.0], 2)?;
    let rows = degenerate.sample(5, 1);
    println!("  diag(1, 0) samples have exact zero second coordinate: {:?}", rows[0]);

    println!("\nensemble samplers (deterministic block streams):");
    for kind in [EnsembleKind::Sphere, EnsembleKind::NormalizedGaussian, EnsembleKind::Ball] {
        let batch = EnsembleSampler::new(kind, 6, 42).sample(10_000);
        let mean_norm2: f64 =
            batch.iter().map(|r| r.iter().map(|c| c.norm_sqr()).sum::<f64>()).sum::<f64>()
                / batch.len() as f64;
        println!("  {kind:?}: mean |c|^2 = {mean_norm2:.4}");
    }

    // columnar exports
    let batch = EnsembleSampler::new(EnsembleKind::Sphere, 4, 5).sample(256);
    let bin = std::env::temp_dir().join("szegolab_samples.f64le");
    let csv = std::env::temp_dir().join("szegolab_samples.csv");
    szegolab::report::write_samples_binary(&bin, &batch)?;
    szegolab::report::write_samples_csv(&csv, &batch)?;
    println!("\nexported 256 sphere samples to {} and {}", bin.display(), csv.display());
    Ok(())
}
