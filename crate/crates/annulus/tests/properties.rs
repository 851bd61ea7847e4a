//! Randomized invariants over the trajectory machinery: the dense output
//! must differentiate to the stored slope, and branch inversion must be a
//! genuine right inverse of the height map.

use annulus::functionals::invert_branches;
use annulus::ode::{integrate, Mode};
use annulus::{IntegratorControls, NonlinearitySpec, RadialProblem};
use proptest::prelude::*;

fn family(idx: usize) -> NonlinearitySpec {
    match idx {
        0 => NonlinearitySpec::power_sum(3.0, 1.0).unwrap(),
        1 => NonlinearitySpec::power_diff(3.0, 1.0).unwrap(),
        2 => NonlinearitySpec::power_sum(2.0, 1.0).unwrap(),
        _ => NonlinearitySpec::power_diff(3.0, 2.0).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The dense output's value channel differentiates (by central
    /// differences) to its slope channel, at any interior radius of any
    /// trajectory.
    #[test]
    fn dense_output_derivative_matches_slope(
        fam in 0usize..4,
        n_idx in 0usize..3,
        log_alpha in -1.0f64..1.5,
        t in 0.05f64..0.95,
    ) {
        let n = [2u32, 3, 6][n_idx];
        let problem = RadialProblem::new(n, 1.0, family(fam)).unwrap();
        let alpha = 10f64.powf(log_alpha);
        let controls = IntegratorControls::default();
        let profile = integrate(&problem, alpha, &controls, Mode::Shooting).unwrap();
        let (lo, hi) = (profile.r_start(), profile.r_end());
        prop_assume!(hi - lo > 1e-3);

        let r = lo + t * (hi - lo);
        let h = (1e-6 * r.max(1.0)).min(0.25 * (hi - r).min(r - lo));
        prop_assume!(h > 0.0);
        let (_, v) = profile.eval(r).unwrap();
        let (up, _) = profile.eval(r + h).unwrap();
        let (um, _) = profile.eval(r - h).unwrap();
        let fd = (up - um) / (2.0 * h);
        let scale = v.abs().max(alpha).max(1.0);
        prop_assert!(
            (fd - v).abs() <= 1e-6 * scale,
            "fd {} vs v {} at r = {} (α = {}, n = {}, f = {})",
            fd, v, r, alpha, n, problem.f.label()
        );
    }

    /// Inverting a profile into monotone branches and mapping a height back
    /// through `r_at` reproduces that height.
    #[test]
    fn branch_inversion_round_trips(
        fam in 0usize..4,
        n_idx in 0usize..3,
        log_alpha in -0.5f64..1.2,
        t in 0.02f64..0.98,
    ) {
        let n = [2u32, 3, 6][n_idx];
        let problem = RadialProblem::new(n, 1.0, family(fam)).unwrap();
        let alpha = 10f64.powf(log_alpha);
        let controls = IntegratorControls::default();
        let profile = integrate(&problem, alpha, &controls, Mode::Shooting).unwrap();
        prop_assume!(profile.peak().is_some());

        let branches = invert_branches(&profile).unwrap();
        let m = branches.peak_height;
        for branch in std::iter::once(&branches.rising).chain(branches.falling.as_ref()) {
            let (lo, hi) = branch.u_range();
            let s = lo + t * (hi - lo);
            prop_assume!(branch.covers(s));
            let r = branch.r_at(s).unwrap();
            let (u, _) = profile.eval(r).unwrap();
            prop_assert!(
                (u - s).abs() <= 1e-9 * m.max(1.0),
                "u(r_at({})) = {} off by {} (α = {}, n = {})",
                s, u, (u - s).abs(), alpha, n
            );
        }
    }
}
