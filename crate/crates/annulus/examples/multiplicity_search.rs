//! Solution-count survey for a supercritical power-sum nonlinearity.
//!
//! For `f(s) = s^7 + s^2` in dimension 3 — far outside every uniqueness
//! region this crate knows — sweep a family of annuli and report, for each,
//! how many positive solutions the slope scan isolates and how many sign
//! changes the raw boundary residual has over the same grid. When the two
//! numbers differ, the extra sign changes belong to slopes whose refined
//! trajectory crosses zero strictly inside the annulus: sign-changing
//! solutions, filtered out by the positivity check.
//!
//! Run with `cargo run --release --example multiplicity_search`.

use annulus::ode::{integrate, Mode};
use annulus::shooting::{solve_annulus, AlphaGrid, AnnulusOutcome};
use annulus::{IntegratorControls, NonlinearitySpec, RadialProblem, Result};

/// Count sign changes of the boundary residual `u(b; α)` over the grid, the
/// same quantity the solver brackets, recomputed directly.
fn residual_sign_changes(
    problem: &RadialProblem,
    b: f64,
    grid: &AlphaGrid,
    controls: &IntegratorControls,
) -> Result<usize> {
    let controls = IntegratorControls { r_max: b, ..*controls };
    let mut changes = 0;
    let mut prev: Option<f64> = None;
    for alpha in grid.values() {
        let end = integrate(problem, alpha, &controls, Mode::RunToRMax)?.end_value();
        if let Some(p) = prev {
            if p != 0.0 && p.signum() != end.signum() {
                changes += 1;
            }
        }
        prev = Some(end);
    }
    Ok(changes)
}

fn main() -> Result<()> {
    let f = NonlinearitySpec::power_sum(2.0, 7.0)?;
    println!("f = {}", f.label());

    let annuli = [
        (1.0, 1.1),
        (1.0, 1.5),
        (1.0, 2.0),
        (1.0, 3.0),
        (5.0, 5.5),
        (10.0, 10.5),
        (20.0, 20.5),
        (50.0, 50.5),
    ];
    let grid = AlphaGrid::default();
    let controls = IntegratorControls::default();

    println!(
        "{:>6} {:>6} {:>10} {:>13} {:>9}",
        "a", "b", "count", "sign changes", "time"
    );
    for (a, b) in annuli {
        let problem = RadialProblem::new(3, a, f.clone())?;
        let started = std::time::Instant::now();
        let outcome = solve_annulus(&problem, b, &grid, &controls)?;
        let changes = residual_sign_changes(&problem, b, &grid, &controls)?;
        let elapsed = started.elapsed();
        match outcome {
            AnnulusOutcome::Solutions(sols) => {
                println!(
                    "{:>6} {:>6} {:>10} {:>13} {:>8.2?}",
                    a,
                    b,
                    sols.len(),
                    changes,
                    elapsed
                );
                for s in &sols {
                    println!(
                        "        α = {:<22} residual = {:+.2e}",
                        s.alpha, s.residual
                    );
                }
            }
            AnnulusOutcome::Continuum { residual_fraction } => {
                println!(
                    "{:>6} {:>6} {:>10} {:>13} {:>8.2?}",
                    a, b, "continuum", residual_fraction, elapsed
                );
            }
        }
    }
    Ok(())
}
