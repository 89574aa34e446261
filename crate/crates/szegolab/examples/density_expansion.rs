//! Diagonal density expansion: on the flat projective line the density is
//! exactly (N+1)/pi, and the fitted leading coefficient is 1/pi for the
//! perturbed metric as well (the leading term does not see the
//! perturbation).
//!
//!     cargo run --release --example density_expansion

use szegolab::kernel_engine::{density_expansion_fit, KernelEvaluator};
use szegolab::{C64, Workbench};

fn main() -> szegolab::Result<()> {
    let pi = std::f64::consts::PI;
    let origin = [C64::new(0.0, 0.0)];
    let z = [C64::new(0.3, -0.1)];
    let n_list = [16u32, 32, 64, 128];

    for weight in ["0", "0.1 * r2 / (1 + r2)"] {
        println!("weight: {weight}");
        let mut diag = Vec::new();
        for &n in &n_list {
            let wb = Workbench::new(1, n, weight, &origin)?;
            let d = KernelEvaluator::new(&wb.basis, &wb.chart).diagonal(&z);
            println!("  N = {n:>3}: Pi_N(x, x) = {d:>12.6}  ((N+1)/pi = {:.6})", (n as f64 + 1.0) / pi);
            diag.push(d);
        }
        let (a0, a1, residual) = density_expansion_fit(&n_list, &diag, 1)?;
        println!(
            "  fit: a0 = {a0:.8} (1/pi = {:.8}), a1 = {a1:.6}, residual {residual:.2e}\n",
            1.0 / pi
        );
    }
    Ok(())
}
