//! End-to-end behaviour of the library pipeline.

use chebsynth::cli::rates::mixture_sample;
use chebsynth::grid::{snap, Grid};
use chebsynth::solver::solve;
use chebsynth::synth::{release, run, synthesize, MechanismConfig};
use chebsynth::utility::{gamma, DiscreteMeasure};

#[test]
fn fitted_distribution_stays_within_noise_scale() {
    let data = mixture_sample(4096, 1, 5).unwrap();
    for seed in 0..20 {
        let cfg = MechanismConfig::new(1, 1, 1.0, 1e-5, seed);
        let released = release(&data, &cfg).unwrap();
        let grid = Grid::for_mechanism(1, released.degree(), 1, cfg.caps.grid_cells).unwrap();
        let fit = solve(released.moments(), &grid, 1, &cfg.solver).unwrap();
        let snapped = snap(&data, &grid).unwrap();
        let disc = gamma(
            &DiscreteMeasure::from(&snapped),
            &DiscreteMeasure::from(&fit.distribution),
            released.moments().index_set(),
            1,
        )
        .unwrap();
        let cal = released.calibration();
        let scale = cal.sigma * cal.s.sqrt();
        assert!(disc.gamma <= 4.0 * scale, "seed {seed}: gamma {} vs scale {scale}", disc.gamma);
    }
}

#[test]
fn same_seed_same_output() {
    let data = mixture_sample(500, 2, 9).unwrap();
    let cfg = MechanismConfig::new(2, 1, 0.8, 1e-6, 42);
    let (a, ra) = run(&data, &cfg).unwrap();
    let (b, rb) = run(&data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra.objective, rb.objective);

    let other = MechanismConfig { seed: 43, ..cfg.clone() };
    let (c, _) = run(&data, &other).unwrap();
    assert_ne!(a.counts(), c.counts());
}

#[test]
fn synthetic_size_matches_report() {
    let data = mixture_sample(1000, 2, 3).unwrap();
    let cfg = MechanismConfig::new(2, 1, 1.0, 1e-5, 1);
    let (syn, report) = run(&data, &cfg).unwrap();
    assert_eq!(syn.len(), report.synthetic_size);
    assert_eq!(syn.grid().num_cells(), report.grid_cells);
    assert_eq!(syn.counts().iter().sum::<u64>(), report.synthetic_size);
}

#[test]
fn synthesis_reads_only_the_release() {
    let cfg = MechanismConfig::new(1, 1, 1.0, 1e-5, 8);
    let a = mixture_sample(800, 1, 1).unwrap();
    let released = release(&a, &cfg).unwrap();
    let (first, _) = synthesize(&released, &cfg).unwrap();
    let (second, _) = synthesize(&released, &cfg).unwrap();
    assert_eq!(first, second);
    let (end_to_end, _) = run(&a, &cfg).unwrap();
    assert_eq!(first, end_to_end);
}
