//! Computes the moment-release noise scale for a few privacy budgets.

use chebsynth::basis::MomentIndexSet;
use chebsynth::mechanism::{calibrate, compute_s, s_upper_bound, PrivacyBudget};

pub fn run_example() -> chebsynth::Result<()> {
    let (d, k, m, n) = (2, 2, 12, 10_000);
    let set = MomentIndexSet::new(d, m)?;
    let s = compute_s(&set, k);
    println!("{} moments, S = {s:.4} (closed-form bound {:.4})", set.len(), s_upper_bound(d, k, m));

    for (epsilon, delta) in [(0.1, 1e-6), (0.5, 1e-6), (1.0, 1e-6), (4.0, 1e-6)] {
        let cal = calibrate(PrivacyBudget::new(epsilon, delta)?, n, d, k, s)?;
        println!(
            "eps = {epsilon:>4}: sigma = {:.3e} ({:?} branch), noise sd at K = (3, 4): {:.3e}",
            cal.sigma,
            cal.branch,
            cal.variance_for(25).sqrt()
        );
    }
    Ok(())
}

fn main() {
    if let Err(err) = run_example() {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
