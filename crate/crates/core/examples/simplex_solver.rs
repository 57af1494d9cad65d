//! Fits a grid distribution to the moments of a known target and reports the
//! solver diagnostics.

use chebsynth::basis::MomentIndexSet;
use chebsynth::grid::Grid;
use chebsynth::mechanism::MomentVector;
use chebsynth::solver::{solve, DesignOperator, SolverOptions};

pub fn run_example() -> chebsynth::Result<()> {
    let (d, m, k) = (2, 6, 1);
    let grid = Grid::new(d, 6)?;
    let set = MomentIndexSet::new(d, m)?;

    // a lopsided target supported on a few cells
    let mut target = vec![0.0; grid.num_cells()];
    target[3] = 0.5;
    target[14] = 0.3;
    target[29] = 0.2;
    let op = DesignOperator::new(&set, &grid, k)?;
    let moments = MomentVector::new(set, op.moments(&target))?;

    let solution = solve(&moments, &grid, k, &SolverOptions::default())?;
    println!(
        "status {:?} after {} iterations, objective {:.3e}, KKT gap {:.3e}",
        solution.status, solution.iterations, solution.objective, solution.kkt_gap
    );
    for (cell, w) in solution.distribution.weights().iter().enumerate() {
        if *w > 1e-4 {
            println!("  cell {cell:>2} at {:?}: {w:.4} (target {:.4})", grid.point(cell), target[cell]);
        }
    }
    Ok(())
}

fn main() {
    if let Err(err) = run_example() {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
