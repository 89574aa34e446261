//! Build orthonormal section bases on the projective line, flat and
//! perturbed, and verify their structure: dimensions, exact monomial norms,
//! and orthonormality re-checked on an independent finer quadrature grid.
//!
//!     cargo run --release --example basis_space

use std::sync::Arc;
use szegolab::linalg::CMatrix;
use szegolab::model_geometry::{build_quadrature, make_heisenberg_chart, make_model};
use szegolab::section_space::build_basis;
use szegolab::C64;

fn main() -> szegolab::Result<()> {
    let pi = std::f64::consts::PI;

    println!("flat model, m = 1, N = 2: exact monomial norms");
    let model = Arc::new(make_model(1, 2, "0")?);
    let basis = build_basis(&model)?;
    println!("  dimension d_N = {} (binomial(N + m, m))", basis.dim());
    for (g, n2) in basis.exponents().iter().zip(basis.mono_norms_sq().unwrap()) {
        println!("  |Z^{g:?}|^2 = {n2:.12}  ({:.6} pi)", n2 / pi);
    }

    println!("\ndimension growth: d_N m! / N^m -> 1");
    for n in [10u32, 40, 160, 640] {
        let d = szegolab::model_geometry::section_dimension(1, n);
        println!("  N = {n:>4}: d_N = {d:>5}, ratio = {:.5}", d as f64 / n as f64);
    }

    let weight = "0.1 * r2 / (1 + r2)";
    println!("\nperturbed model (weight {weight}), m = 1, N = 8");
    let pert = Arc::new(make_model(1, 8, weight)?);
    let pbasis = build_basis(&pert)?;
    let chart = make_heisenberg_chart(&pert, &[C64::new(0.0, 0.0)])?;

    // orthonormality against a finer grid than the one used to build
    let grid = build_quadrature(&pert, 2 * 8 + 10)?;
    let dim = pbasis.dim();
    let mut gram = CMatrix::zeros(dim, dim);
    for (z, w) in grid.nodes.iter().zip(grid.weights.iter()) {
        let wc = chart.chart_coords(z).unwrap();
        let f = pbasis.frame_values(&chart, &wc, 0.0);
        let density = w * pert.density_ratio(z);
        for j in 0..dim {
            for k in 0..dim {
                gram[(j, k)] += density * f[j] * f[k].conj();
            }
        }
    }
    let mut worst = 0.0f64;
    for j in 0..dim {
        for k in 0..dim {
            let want = if j == k { 1.0 } else { 0.0 };
            worst = worst.max((gram[(j, k)] - C64::new(want, 0.0)).norm());
        }
    }
    println!("  max |Gram - I| on an independent grid: {worst:.3e}");

    let out = std::env::temp_dir().join("szegolab_basis.json");
    szegolab::report::write_json(&out, &pbasis.export_json())?;
    println!("  basis exported to {}", out.display());
    Ok(())
}
