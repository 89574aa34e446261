//! Embedding-separation probe: the normalized squared kernel
//! f_N(t) = |Pi_N(x0, y_t)|^2 / (Pi_N(x0,x0) Pi_N(y_t,y_t)) equals 1 only
//! at coincidence and tracks exp(-|v|^2 t^2) within the near-diagonal
//! scaling error, which is the separation mechanism behind the embedding.
//!
//!     cargo run --release --example kodaira_probe

use szegolab::global_asymptotics::kodaira_separation_probe;
use szegolab::kernel_engine::KernelEvaluator;
use szegolab::{C64, Workbench};

fn main() -> szegolab::Result<()> {
    let origin = [C64::new(0.0, 0.0)];
    for n in [16u32, 64] {
        let wb = Workbench::new(1, n, "0", &origin)?;
        let eval = KernelEvaluator::new(&wb.basis, &wb.chart);
        let v = [C64::new(1.5, 0.0)];
        let ts: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        println!("N = {n}, direction |v| = 1.5:");
        println!("    t      f_N(t)        exp(-|v|^2 t^2)   1 - f_N(t)");
        for (t, f) in kodaira_separation_probe(&eval, &v, &ts) {
            let gauss = (-v[0].norm_sqr() * t * t).exp();
            println!("  {t:>5.3}  {f:>12.8}   {gauss:>12.8}   {:>10.3e}", 1.0 - f);
        }
        println!();
    }
    Ok(())
}
