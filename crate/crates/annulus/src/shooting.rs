//! Shooting for boundary-value and exterior ground-state problems.
//!
//! Every tool here varies the initial slope `α = u'(a)` and watches what the
//! trajectory does:
//!
//! * the *first-zero map* sends `α` to the radius `b(α)` where `u` first
//!   returns to zero (when it does);
//! * the *annulus solver* finds the slopes whose trajectory vanishes exactly
//!   at a prescribed outer radius `b`, by bracketing sign changes of the
//!   boundary residual `u(b; α)` over a slope grid and refining each bracket;
//! * the *exterior solver* bisects between slopes whose trajectories cross
//!   zero and slopes whose trajectories bounce back up, squeezing the
//!   borderline slope whose trajectory decays to zero at infinity.
//!
//! Degenerate boundary-value problems — where the residual vanishes for
//! essentially every slope, as happens for a linear `f` at an eigenvalue
//! radius — are reported as a continuum rather than as a list of roots.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{
    integrate, IntegratorControls, Mode, RadialProblem, SolutionProfile, TailDiagnostics,
    Termination,
};
use crate::rootfind;

/// Width to which slope roots and brackets are refined: relative when
/// polishing annulus roots, absolute for the exterior bisection.
pub const ALPHA_TOL: f64 = 1e-12;
/// A boundary residual below this (for >90% of the grid) marks a continuum.
const CONTINUUM_RESIDUAL: f64 = 1e-9;
const CONTINUUM_FRACTION: f64 = 0.9;

/// Geometric grid of initial slopes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AlphaGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        AlphaGrid { lo: 1e-3, hi: 1e3, points: 512 }
    }
}

impl AlphaGrid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || points < 2 {
            return Err(Error::Domain(format!(
                "invalid slope grid [{lo}, {hi}] with {points} points"
            )));
        }
        Ok(AlphaGrid { lo, hi, points })
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points)
            .map(|i| self.lo * (self.hi / self.lo).powf(i as f64 / (self.points - 1) as f64))
            .collect()
    }
}

/// How a single shot ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotClass {
    /// `u` came back to zero at some finite radius.
    HitZero,
    /// `u` reached a positive interior minimum and turned up.
    Bounced,
    /// Still positive and descending at `r_max`.
    NoZeroBeforeRMax,
    /// State exceeded the overflow guard.
    Diverged,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanPoint {
    pub alpha: f64,
    pub class: ShotClass,
    /// `b(α)`, the first-zero radius, when the shot hit zero.
    pub first_zero: Option<f64>,
    /// Height of the first peak, when one occurred.
    pub peak_height: Option<f64>,
}

/// Shoot once and classify.
pub fn first_zero(
    problem: &RadialProblem,
    alpha: f64,
    controls: &IntegratorControls,
) -> Result<ScanPoint> {
    let profile = integrate(problem, alpha, controls, Mode::Shooting)?;
    let class = match profile.termination {
        Termination::ZeroHit { .. } => ShotClass::HitZero,
        Termination::Bounced { .. } => ShotClass::Bounced,
        Termination::ReachedRMax => ShotClass::NoZeroBeforeRMax,
        Termination::Overflow { .. } => ShotClass::Diverged,
    };
    Ok(ScanPoint {
        alpha,
        class,
        first_zero: match profile.termination {
            Termination::ZeroHit { r } => Some(r),
            _ => None,
        },
        peak_height: profile.peak().map(|(_, m)| m),
    })
}

/// Tabulate the first-zero map over a slope grid (in parallel; the output
/// order matches the grid).
pub fn scan(
    problem: &RadialProblem,
    grid: &AlphaGrid,
    controls: &IntegratorControls,
) -> Result<Vec<ScanPoint>> {
    grid.values()
        .par_iter()
        .map(|&alpha| first_zero(problem, alpha, controls))
        .collect()
}

/// One slope whose trajectory solves the annulus problem `u(a) = u(b) = 0`,
/// `u > 0` in between.
#[derive(Debug)]
pub struct AnnulusSolution {
    pub alpha: f64,
    /// Boundary residual `u(b)` at the refined slope.
    pub residual: f64,
    /// Slope bracket that isolated this root.
    pub bracket: (f64, f64),
    /// Trajectory integrated across the full annulus `[a, b]`.
    pub profile: SolutionProfile,
}

#[derive(Debug)]
pub enum AnnulusOutcome {
    /// All isolated solutions found over the slope grid, sorted by slope.
    /// Empty means the residual never changed sign: no solution detected.
    Solutions(Vec<AnnulusSolution>),
    /// The residual vanishes for essentially every slope: the boundary-value
    /// problem is degenerate at this `b` (linear `f` at an eigenvalue
    /// radius) and has a continuum of solutions.
    Continuum { residual_fraction: f64 },
}

impl AnnulusOutcome {
    pub fn count(&self) -> Option<usize> {
        match self {
            AnnulusOutcome::Solutions(v) => Some(v.len()),
            AnnulusOutcome::Continuum { .. } => None,
        }
    }
}

/// Find every slope in the grid range whose trajectory vanishes at `b`.
///
/// The residual `u(b; α)` is computed by integrating to exactly `r = b`
/// with the nonlinearity extended oddly past zero, so the residual is a
/// continuous function of the slope even for shots that cross zero early.
pub fn solve_annulus(
    problem: &RadialProblem,
    b: f64,
    grid: &AlphaGrid,
    controls: &IntegratorControls,
) -> Result<AnnulusOutcome> {
    if !(b.is_finite() && b > problem.a) {
        return Err(Error::Domain(format!(
            "outer radius b = {b} must exceed the inner radius {}",
            problem.a
        )));
    }
    let residual_controls = IntegratorControls { r_max: b, ..*controls };
    let shoot = |alpha: f64| -> Result<f64> {
        Ok(integrate(problem, alpha, &residual_controls, Mode::RunToRMax)?.end_value())
    };

    let alphas = grid.values();
    let residuals: Vec<f64> = alphas
        .par_iter()
        .map(|&alpha| shoot(alpha))
        .collect::<Result<Vec<_>>>()?;

    let near_zero = residuals
        .iter()
        .filter(|r| r.abs() < CONTINUUM_RESIDUAL)
        .count();
    let fraction = near_zero as f64 / residuals.len() as f64;
    if fraction > CONTINUUM_FRACTION {
        return Ok(AnnulusOutcome::Continuum { residual_fraction: fraction });
    }

    let mut solutions: Vec<AnnulusSolution> = Vec::new();
    for i in 1..alphas.len() {
        let (r0, r1) = (residuals[i - 1], residuals[i]);
        if r0 == 0.0 || r0.signum() == r1.signum() {
            continue;
        }
        let root = rootfind::brent(
            |alpha| shoot(alpha).unwrap_or(f64::NAN),
            alphas[i - 1],
            alphas[i],
            ALPHA_TOL * alphas[i].max(1.0),
        )?;
        if let Some(last) = solutions.last() {
            if (root.x - last.alpha).abs() <= 10.0 * ALPHA_TOL * root.x.max(1.0) {
                continue;
            }
        }
        let profile = integrate(problem, root.x, &residual_controls, Mode::RunToRMax)?;
        // Positivity on the open annulus: a zero well before b means the
        // trajectory changed sign inside and is not an admissible solution.
        let interior_margin = 1e-6 * (b - problem.a);
        let crosses_inside = profile
            .first_zero()
            .map(|r| r < b - interior_margin)
            .unwrap_or(false);
        if crosses_inside {
            continue;
        }
        solutions.push(AnnulusSolution {
            alpha: root.x,
            residual: profile.end_value(),
            bracket: root.bracket,
            profile,
        });
    }
    Ok(AnnulusOutcome::Solutions(solutions))
}

/// Number of isolated annulus solutions (`None` for a continuum).
pub fn count_solutions(
    problem: &RadialProblem,
    b: f64,
    grid: &AlphaGrid,
    controls: &IntegratorControls,
) -> Result<Option<usize>> {
    Ok(solve_annulus(problem, b, grid, controls)?.count())
}

/// Classification of one exterior probe shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeClass {
    /// Trajectory returned to zero at finite radius (slope too energetic).
    Crossing,
    /// Trajectory turned back up from a positive minimum (slope too weak).
    Bouncing,
    /// Still descending at the largest radius tried.
    Undetermined,
}

/// How far the probe radius may be pushed past `controls.r_max` while a shot
/// remains undetermined. Near the borderline slope a trajectory hugs the
/// ground state for a long stretch before departing, and the departure radius
/// grows as the bracket tightens.
const R_MAX_EXTENSION_CAP: f64 = 512.0;

/// Classify one slope, extending the probe radius (doubling, up to a cap)
/// while the trajectory is still positive and descending.
pub fn classify_exterior(
    problem: &RadialProblem,
    alpha: f64,
    controls: &IntegratorControls,
) -> Result<(ProbeClass, f64)> {
    let mut r_max = controls.r_max;
    let cap = controls.r_max * R_MAX_EXTENSION_CAP;
    loop {
        let c = IntegratorControls { r_max, ..*controls };
        let profile = integrate(problem, alpha, &c, Mode::Shooting)?;
        match profile.termination {
            Termination::ZeroHit { .. } => return Ok((ProbeClass::Crossing, r_max)),
            Termination::Bounced { .. } => return Ok((ProbeClass::Bouncing, r_max)),
            Termination::Overflow { r } => {
                return Err(Error::Integration(format!(
                    "exterior probe at α = {alpha} overflowed at r = {r}"
                )));
            }
            Termination::ReachedRMax => {
                let (u, v) = profile.eval(profile.r_end())?;
                if u > 0.0 && v >= 0.0 {
                    // Rising with no bounce event: it never descended, so it
                    // will not cross zero; treat as the non-crossing side.
                    return Ok((ProbeClass::Bouncing, r_max));
                }
                if r_max >= cap {
                    return Ok((ProbeClass::Undetermined, r_max));
                }
                r_max *= 2.0;
            }
        }
    }
}

/// A converged exterior ground-state slope.
#[derive(Debug)]
pub struct ExteriorSolution {
    pub alpha: f64,
    /// Final bisection bracket around the slope.
    pub bracket: (f64, f64),
    pub iterations: u32,
    /// Largest probe radius any classification required.
    pub r_max_used: f64,
    /// Trajectory at the converged slope, integrated until it departs from
    /// the ground state (or reaches the probe cap).
    pub profile: SolutionProfile,
    pub tail: TailDiagnostics,
}

/// Bisect between a bouncing and a crossing slope until the bracket is an
/// absolute `ALPHA_TOL` wide. The endpoints must classify differently.
pub fn solve_exterior(
    problem: &RadialProblem,
    alpha_lo: f64,
    alpha_hi: f64,
    controls: &IntegratorControls,
) -> Result<ExteriorSolution> {
    if !(alpha_lo > 0.0 && alpha_hi > alpha_lo) {
        return Err(Error::Domain(format!(
            "invalid slope range [{alpha_lo}, {alpha_hi}]"
        )));
    }
    let (class_lo, r_lo) = classify_exterior(problem, alpha_lo, controls)?;
    let (class_hi, r_hi) = classify_exterior(problem, alpha_hi, controls)?;
    let mut r_max_used = r_lo.max(r_hi);
    for (class, alpha) in [(class_lo, alpha_lo), (class_hi, alpha_hi)] {
        if class == ProbeClass::Undetermined {
            return Err(Error::Bracket(format!(
                "slope {alpha} undetermined even at r = {r_max_used}; widen the slope range"
            )));
        }
    }
    if class_lo == class_hi {
        return Err(Error::Bracket(format!(
            "both endpoints classify as {class_lo:?}; widen the slope range"
        )));
    }

    let (mut bounce, mut cross) = match class_lo {
        ProbeClass::Bouncing => (alpha_lo, alpha_hi),
        _ => (alpha_hi, alpha_lo),
    };
    let mut iterations = 0u32;
    // Absolute width target, floored at a few ulps of the slope so huge
    // slopes cannot demand spacing the float grid does not have.
    let target = |a: f64, b: f64| ALPHA_TOL.max(8.0 * f64::EPSILON * a.abs().max(b.abs()));
    while (bounce - cross).abs() > target(bounce, cross) && iterations < 200 {
        iterations += 1;
        let mid = 0.5 * (bounce + cross);
        let (class, r_used) = classify_exterior(problem, mid, controls)?;
        r_max_used = r_max_used.max(r_used);
        match class {
            ProbeClass::Bouncing => bounce = mid,
            ProbeClass::Crossing => cross = mid,
            ProbeClass::Undetermined => {
                // The departure radius outgrew the probe cap. Accept the
                // bracket if it is already close; otherwise give up honestly.
                if (bounce - cross).abs() <= 100.0 * target(bounce, cross) {
                    break;
                }
                return Err(Error::Bracket(format!(
                    "slope {mid} undetermined at probe cap r = {r_used}; bracket width {}",
                    (bounce - cross).abs()
                )));
            }
        }
    }

    let alpha = 0.5 * (bounce + cross);
    let final_controls = IntegratorControls { r_max: r_max_used, ..*controls };
    let profile = integrate(problem, alpha, &final_controls, Mode::Shooting)?;
    let tail = crate::ode::tail_diagnostics(&profile)?;
    Ok(ExteriorSolution {
        alpha,
        bracket: (bounce.min(cross), bounce.max(cross)),
        iterations,
        r_max_used,
        profile,
        tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::NonlinearitySpec;
    use std::f64::consts::PI;

    fn linear_problem() -> RadialProblem {
        RadialProblem::new(3, 1.0, NonlinearitySpec::linear(PI * PI)).unwrap()
    }

    fn minus31(n: u32) -> RadialProblem {
        RadialProblem::new(n, 1.0, NonlinearitySpec::power_diff(3.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn linear_first_zero_is_slope_independent() {
        // u = c sin(π(r-1))/r vanishes at r = 2 regardless of the slope.
        let controls = IntegratorControls::with_r_max(3.0);
        let grid = AlphaGrid::new(0.1, 10.0, 16).unwrap();
        let points = scan(&linear_problem(), &grid, &controls).unwrap();
        for pt in points {
            assert_eq!(pt.class, ShotClass::HitZero);
            let b = pt.first_zero.unwrap();
            assert!((b - 2.0).abs() < 1e-9, "b({}) = {b}", pt.alpha);
        }
    }

    #[test]
    fn linear_annulus_at_eigenvalue_radius_is_continuum() {
        let controls = IntegratorControls::with_r_max(3.0);
        let grid = AlphaGrid::new(0.1, 10.0, 64).unwrap();
        let outcome = solve_annulus(&linear_problem(), 2.0, &grid, &controls).unwrap();
        match outcome {
            AnnulusOutcome::Continuum { residual_fraction } => {
                assert!(residual_fraction > 0.99, "fraction {residual_fraction}")
            }
            other => panic!("expected continuum, got {other:?}"),
        }
    }

    #[test]
    fn linear_annulus_off_eigenvalue_has_no_solution() {
        // u(1.5; α) = (α/π) sin(π/2)/1.5 > 0 for every slope: no root.
        let controls = IntegratorControls::with_r_max(3.0);
        let grid = AlphaGrid::new(0.1, 10.0, 64).unwrap();
        let outcome = solve_annulus(&linear_problem(), 1.5, &grid, &controls).unwrap();
        match outcome {
            AnnulusOutcome::Solutions(sols) => assert!(sols.is_empty()),
            other => panic!("expected empty solution list, got {other:?}"),
        }
    }

    #[test]
    fn annulus_solver_recovers_scanned_slope() {
        // Pick a slope, read off its first-zero radius, then ask the solver
        // to find the slopes for that outer radius: it must recover the
        // original slope among them.
        let problem = minus31(3);
        let controls = IntegratorControls::with_r_max(60.0);
        let alpha0 = 6.0;
        let shot = first_zero(&problem, alpha0, &controls).unwrap();
        assert_eq!(shot.class, ShotClass::HitZero, "probe slope must cross");
        let b = shot.first_zero.unwrap();

        let grid = AlphaGrid::new(0.5, 50.0, 128).unwrap();
        let outcome = solve_annulus(&problem, b, &grid, &controls).unwrap();
        let sols = match outcome {
            AnnulusOutcome::Solutions(s) => s,
            other => panic!("expected solutions, got {other:?}"),
        };
        assert!(!sols.is_empty(), "no solutions recovered at b = {b}");
        let nearest = sols
            .iter()
            .map(|s| (s.alpha - alpha0).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-8 * alpha0, "nearest slope off by {nearest}");
        for s in &sols {
            assert!(s.residual.abs() < 1e-8, "residual {}", s.residual);
            // Positivity inside the annulus.
            for node in &s.profile.nodes {
                if node.r > problem.a && node.r < b * (1.0 - 1e-6) {
                    assert!(node.u > -1e-9, "u({}) = {}", node.r, node.u);
                }
            }
        }
    }

    #[test]
    fn exterior_ground_state_minus_family() {
        let problem = minus31(3);
        let controls = IntegratorControls::with_r_max(50.0);
        let sol = solve_exterior(&problem, 0.5, 5.0, &controls).unwrap();
        assert!(
            sol.bracket.1 - sol.bracket.0 <= 1e-10 * sol.alpha.max(1.0),
            "bracket width {}",
            sol.bracket.1 - sol.bracket.0
        );
        // The converged trajectory hugs the decaying ground state: monotone
        // flux on the decay window and a tiny |r u'| at its end.
        assert!(sol.tail.flux_monotone);
        assert!(sol.tail.flux_end <= 1e-12);
        assert!(sol.tail.r_u_prime_end < 1e-3, "|r u'| = {}", sol.tail.r_u_prime_end);
        assert!(sol.tail.r_u_prime_decreasing);
    }

    #[test]
    fn exterior_same_class_endpoints_rejected() {
        let problem = minus31(3);
        let controls = IntegratorControls::with_r_max(50.0);
        let err = solve_exterior(&problem, 0.01, 0.02, &controls);
        assert!(matches!(err, Err(Error::Bracket(_))), "{err:?}");
    }

    #[test]
    fn alpha_grid_shape() {
        let grid = AlphaGrid::default();
        let v = grid.values();
        assert_eq!(v.len(), 512);
        assert!((v[0] - 1e-3).abs() < 1e-18);
        assert!((v[511] - 1e3).abs() < 1e-9);
        // Geometric: constant ratio.
        let ratio = v[1] / v[0];
        for w in v.windows(2) {
            assert!((w[1] / w[0] - ratio).abs() < 1e-12 * ratio);
        }
        assert!(AlphaGrid::new(1.0, 0.5, 8).is_err());
    }
}
