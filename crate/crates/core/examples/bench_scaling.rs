//! Per-step cost of full-grid training for a CP model and a monolithic MLP
//! as the grid grows, with fitted log-log slopes and the analytic estimate.
//!
//! cargo run --release --example bench_scaling -- [max_n]

use finr::bench::{run_bench, BenchSettings};
use finr::model::{predict_cost, Architecture};
use finr::tensor::Mode;

fn main() -> finr::Result<()> {
    let max_n: usize = std::env::args().nth(1).map_or(256, |s| s.parse().expect("max_n"));
    let ns: Vec<usize> = [64, 128, 256, 512].into_iter().filter(|&n| n <= max_n).collect();
    let settings = BenchSettings {
        ns: ns.clone(),
        reps: 3,
        ..BenchSettings::default()
    };
    let report = run_bench(&settings, |r| {
        println!("{:>10} n={:<4} step {:.4}s  forward {:.4}s", r.arch.to_string(), r.n, r.step_seconds, r.forward_seconds)
    })?;
    for w in &report.warnings {
        println!("warning: {w}");
    }
    print!("{}", report.slopes_csv());
    for n in ns {
        let cp = predict_cost(Architecture::Factorized(Mode::Cp), 2, n as u64, 256, 4, 64).macs;
        let mono = predict_cost(Architecture::Monolithic, 2, n as u64, 256, 4, 0).macs;
        println!("n={n}: predicted MAC ratio monolithic/CP = {:.1}", mono / cp);
    }
    Ok(())
}
