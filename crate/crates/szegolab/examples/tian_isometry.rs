//! Asymptotic isometry: the scaled pullback of the ambient Fubini-Study
//! form under the coherent-state map matches the model metric exactly on
//! the flat line (Veronese rigidity) and at rate O(1/N) for a perturbed
//! metric.
//!
//!     cargo run --release --example tian_isometry

use szegolab::global_asymptotics::tian_pullback_error;
use szegolab::{C64, Workbench};

fn main() -> szegolab::Result<()> {
    let origin = [C64::new(0.0, 0.0)];
    let test_points: Vec<Vec<C64>> = vec![
        vec![C64::new(0.0, 0.0)],
        vec![C64::new(0.35, -0.15)],
        vec![C64::new(-0.6, 0.45)],
        vec![C64::new(0.1, 0.8)],
    ];

    println!("flat metric: pullback error is pure roundoff at every N");
    for n in [4u32, 16, 64] {
        let wb = Workbench::new(1, n, "0", &origin)?;
        let err = tian_pullback_error(&wb.basis, &wb.chart, &test_points);
        println!("  N = {n:>3}: sup rel error {err:.3e}");
    }

    println!("\nperturbed metric (0.1 r2/(1+r2)): error contracts from N to 2N");
    let mut prev: Option<f64> = None;
    for n in [16u32, 32, 64, 128] {
        let wb = Workbench::new(1, n, "0.1 * r2 / (1 + r2)", &origin)?;
        let err = tian_pullback_error(&wb.basis, &wb.chart, &test_points);
        match prev {
            Some(p) => println!("  N = {n:>3}: {err:.4e}   ratio to previous {:.3}", err / p),
            None => println!("  N = {n:>3}: {err:.4e}"),
        }
        prev = Some(err);
    }
    Ok(())
}
