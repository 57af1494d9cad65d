//! Brackets the smooth-query distance between a dataset and its synthetic
//! copy: a certified upper bound from moments and lower estimates from
//! explicit query families.

use chebsynth::basis::MomentIndexSet;
use chebsynth::cli::rates::mixture_sample;
use chebsynth::synth::{run, MechanismConfig};
use chebsynth::utility::{dk_bound, dk_lower_estimate, gamma, BumpFamily, DiscreteMeasure, QueryFamily};

pub fn run_example() -> chebsynth::Result<()> {
    let (d, k) = (1, 2);
    let data = mixture_sample(3000, d, 5)?;
    let (synthetic, report) = run(&data, &MechanismConfig::new(d, k, 1.0, 1e-6, 9))?;
    let p = DiscreteMeasure::from(&data);
    let q = DiscreteMeasure::from(&synthetic);

    for degree in [4, 8, report.m] {
        let disc = gamma(&p, &q, &MomentIndexSet::new(d, degree)?, k)?;
        let bound = dk_bound(&disc, d);
        println!(
            "degree {degree:>3}: gamma {:.3e}, upper bound {:.3e} = {:.3e} + {:.3e}",
            disc.gamma, bound.value, bound.approximation_term, bound.moment_term
        );
    }
    for family in [QueryFamily::Linear, QueryFamily::Gaussian, QueryFamily::Logistic] {
        let est = dk_lower_estimate(&p, &q, &family.queries(d, k))?;
        println!("{family:>9}: lower estimate {:.3e} ({:?})", est.value, est.best_query);
    }
    let bumps = BumpFamily::new(8, d, k)?;
    println!("     bump: lower estimate {:.3e}", bumps.signed_sum_estimate(&p, &q));
    Ok(())
}

fn main() {
    if let Err(err) = run_example() {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
