//! Runs a short size sweep and fits the log-log slope of the utility metric.

use chebsynth::cli::rates::{run_rates, ExperimentSpec};
use chebsynth::solver::SolverOptions;
use chebsynth::synth::Caps;

pub fn run_example() -> chebsynth::Result<()> {
    let spec = ExperimentSpec {
        d: 1,
        k: 1,
        epsilon: 1.0,
        delta: 1e-5,
        sizes: ExperimentSpec::powers_of_two(8, 11),
        repetitions: 3,
        seed: 1,
        caps: Caps::default(),
        solver: SolverOptions::default(),
    };
    let report = run_rates(&spec)?;
    for p in &report.points {
        println!("n = {:>5}, m = {:>3}: metric {:.3e} ± {:.1e}", p.n, p.m, p.mean_metric, p.sd_metric);
    }
    if let Some(fit) = report.metric_fit {
        println!("slope {:.3} (standard error {:?})", fit.slope, fit.standard_error);
    }
    Ok(())
}

fn main() {
    if let Err(err) = run_example() {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
