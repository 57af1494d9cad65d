//! Expands a smooth function in the normalized Chebyshev basis and shows how
//! the truncation error falls with the degree.

use chebsynth::basis::{expand, MultiIndex};

pub fn run_example() -> chebsynth::Result<()> {
    let f = |x: &[f64]| (0.7 * x[0]).exp() * (1.3 * x[1]).sin() / 4.0;
    let expansion = expand(f, 2, 24, 64)?;

    let mut largest: Vec<(MultiIndex, f64)> = expansion.iter().collect();
    largest.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    println!("largest coefficients:");
    for (index, c) in largest.iter().take(5) {
        println!("  K = {:?}: {c:+.6}", index.entries());
    }

    let probes: Vec<[f64; 2]> = (0..41)
        .flat_map(|i| (0..41).map(move |j| [-1.0 + i as f64 * 0.05, -1.0 + j as f64 * 0.05]))
        .collect();
    for degree in [2, 4, 8, 16] {
        let mut worst = 0.0f64;
        for x in &probes {
            worst = worst.max((expansion.evaluate_truncated(x, degree)? - f(x)).abs());
        }
        println!("degree {degree:>2}: sup error {worst:.3e}");
    }
    println!("weighted energy (k = 2): {:.6}", expansion.weighted_energy(2));
    Ok(())
}

fn main() {
    if let Err(err) = run_example() {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
