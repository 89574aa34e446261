//! Near-diagonal scaling of the Szego kernel toward the Heisenberg model:
//! sup-error over the default grid per bundle power, with the fitted
//! log-log decay slope.
//!
//!     cargo run --release --example kernel_scaling

use szegolab::kernel_engine::{heisenberg_kernel, scaling_study, KernelEvaluator, ScalingGrid};
use szegolab::model_geometry::HeisenbergChart;
use szegolab::section_space::SectionBasis;
use szegolab::{C64, Workbench};

fn main() -> szegolab::Result<()> {
    let origin = [C64::new(0.0, 0.0)];
    let stacks: Vec<Workbench> = [16u32, 32, 64, 128, 256]
        .iter()
        .map(|&n| Workbench::new(1, n, "0", &origin))
        .collect::<szegolab::Result<_>>()?;

    // spot value: the dilated kernel at the center vs the model value 1/pi
    let eval = KernelEvaluator::new(&stacks[0].basis, &stacks[0].chart);
    let center = eval.scaled(&origin, 0.0, &origin, 0.0)?;
    let model = heisenberg_kernel(&origin, 0.0, &origin, 0.0);
    println!(
        "N = 16 center: scaled kernel {:.8}, Heisenberg model {:.8}",
        center.re, model.re
    );

    let refs: Vec<(&SectionBasis, &HeisenbergChart)> =
        stacks.iter().map(|wb| (&wb.basis, &wb.chart)).collect();
    let report = scaling_study(&refs, &ScalingGrid::default())?;
    println!("\n  N    sup |N^-1 Pi_N(scaled) - Pi_1^H|   running slope");
    for i in 0..report.n_list.len() {
        println!(
            "{:>4}          {:>12.6}                 {:>8.3}",
            report.n_list[i], report.sup_errors[i], report.running_slopes[i]
        );
    }
    println!("\nfitted slope of log(error) vs log(N): {:.3}", report.slope);
    Ok(())
}
