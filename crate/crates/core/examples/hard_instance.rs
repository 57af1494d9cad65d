//! Builds a member of the sign-indexed hard family and shows how far one sign
//! flip moves the matching bump query.

use chebsynth::utility::{DiscreteMeasure, HardInstance};

pub fn run_example() -> chebsynth::Result<()> {
    let inst = HardInstance::from_seed(400, 2, 1, 4, 0.5, 1.0, 3)?;
    let fam = inst.family();
    println!(
        "{} cells, beta = {:.4}, {} rows move per flipped cell, C0 = {:.4}",
        fam.len(),
        inst.beta(),
        inst.moved_rows(),
        fam.c0()
    );
    let flipped = inst.flipped(0)?;
    let changed = inst
        .dataset()
        .rows()
        .zip(flipped.dataset().rows())
        .filter(|(a, b)| a != b)
        .count();
    let p = DiscreteMeasure::from(inst.dataset());
    let q = DiscreteMeasure::from(flipped.dataset());
    let shift = p.integrate(|x| fam.eval(0, x)) - q.integrate(|x| fam.eval(0, x));
    println!("theta_0 = {:+}: {changed} rows differ, bump 0 shifts by {shift:+.3e} (tau = {:.3e})", inst.theta()[0], inst.tau(0));
    Ok(())
}

fn main() {
    if let Err(err) = run_example() {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
