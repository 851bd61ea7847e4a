//! Comparison functionals along trajectories and between pairs.
//!
//! A positive single-peak trajectory can be read in two ways: as `u(r)`, or —
//! inverted on each monotone branch — as `r̄(s)`, the radius at which the
//! trajectory passes height `s`. Both views feed a family of Pohozaev-type
//! functionals:
//!
//! * `V(r) = r^(2(n-1)) (u'^2 + 2F(u))`, with `V' = 4(n-1) r^(2n-3) F(u)`;
//! * `P(r) = -2n (F/f)(u) r^(n-1) u' - r^n u'^2 - 2 r^n F(u)`, with
//!   `P' = (n - 2 - 2n (F/f)'(u)) r^(n-1) u'^2`;
//! * `W(r) = r sqrt(u'^2 + 2F(u))` where the energy is nonnegative.
//!
//! The derivative identities are exact for exact solutions, so their
//! finite-difference residuals measure the quality of a computed trajectory.
//!
//! `compare_pair` runs the step-by-step inequality chain that underlies
//! uniqueness arguments for a pair of ordered trajectories: height-matched
//! radius and flux orderings on the rising branches below and above `beta`,
//! a `P` comparison at the lower peak, orderings on the falling branches
//! above the largest intersection of the inverted branches, and the endpoint
//! comparison at `beta`. Every step reports verified / failed-at / skipped
//! honestly; nothing is assumed.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::nonlinearity::Landmarks;
use crate::ode::{SolutionProfile, Termination};

/// Half-width of the excluded band around `u = B`, where `F/f` diverges.
pub const GUARD_BAND: f64 = 1e-6;
/// Branch inversion polish target: `|u(r̄(s)) - s|` relative to `max(1, s)`.
const INVERT_TOL: f64 = 1e-13;

/// One monotone branch of a trajectory, inverted: height `s` to radius
/// `r̄(s)`. A monotone interpolant seeds a Newton iteration polished on the
/// profile itself, so the round-trip error is far below the interpolation
/// error of the seed alone.
pub struct Branch<'p> {
    profile: &'p SolutionProfile,
    seed: Pchip,
    knots_u: Vec<f64>,
    knots_r: Vec<f64>,
    /// Falling branches have `r̄` decreasing in `s`.
    pub falling: bool,
}

impl<'p> Branch<'p> {
    /// Height range covered by this branch (ascending).
    pub fn u_range(&self) -> (f64, f64) {
        (self.knots_u[0], *self.knots_u.last().unwrap())
    }

    pub fn covers(&self, s: f64) -> bool {
        let (lo, hi) = self.u_range();
        let tol = 1e-9 * hi.abs().max(1.0);
        s >= lo - tol && s <= hi + tol
    }

    /// `r̄(s)`: seeded by the interpolant, polished by safeguarded Newton on
    /// the profile within the bracketing knot interval.
    pub fn r_at(&self, s: f64) -> Result<f64> {
        let (u_lo, u_hi) = self.u_range();
        if !self.covers(s) {
            return Err(Error::Window(format!(
                "height s = {s} outside branch range [{u_lo}, {u_hi}]"
            )));
        }
        let s = s.clamp(u_lo, u_hi);
        let i = match self
            .knots_u
            .binary_search_by(|u| u.partial_cmp(&s).unwrap())
        {
            Ok(i) => return Ok(self.knots_r[i]),
            Err(0) => 0,
            Err(i) if i >= self.knots_u.len() => self.knots_u.len() - 2,
            Err(i) => i - 1,
        };
        let (mut lo, mut hi) = (self.knots_r[i], self.knots_r[i + 1]);
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        let mut r = self.seed.eval(s).clamp(lo, hi);
        let tol = INVERT_TOL * s.abs().max(1.0);
        for _ in 0..80 {
            let (u, v) = self.profile.eval(r)?;
            let g = u - s;
            if g.abs() <= tol {
                return Ok(r);
            }
            // Maintain the bracket: u is monotone in r on this branch.
            let g_positive_means_right = self.falling; // u decreasing in r
            if (g > 0.0) == g_positive_means_right {
                lo = r;
            } else {
                hi = r;
            }
            let newton = r - g / v;
            r = if v != 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
                break;
            }
        }
        let (u, _) = self.profile.eval(r)?;
        if (u - s).abs() <= 1e-9 * s.abs().max(1.0) {
            Ok(r)
        } else {
            Err(Error::Resolution(format!(
                "branch inversion stalled at s = {s}: residual {}",
                u - s
            )))
        }
    }

    /// `dr̄/ds = 1/u'(r̄(s))`.
    pub fn dr_ds(&self, s: f64) -> Result<f64> {
        let r = self.r_at(s)?;
        let (_, v) = self.profile.eval(r)?;
        if v == 0.0 {
            return Err(Error::Resolution(format!("branch slope infinite at s = {s}")));
        }
        Ok(1.0 / v)
    }
}

/// Both monotone branches of a single-peak trajectory.
pub struct ProfileBranches<'p> {
    pub rising: Branch<'p>,
    /// Absent when the trajectory ends at (or before) its peak.
    pub falling: Option<Branch<'p>>,
    pub peak_r: f64,
    pub peak_height: f64,
}

/// Invert a trajectory around its first peak. The falling branch extends to
/// the first descending zero or bounce after the peak (or the end of the
/// profile).
pub fn invert_branches(profile: &SolutionProfile) -> Result<ProfileBranches<'_>> {
    let (peak_r, peak_height) = profile
        .peak()
        .ok_or_else(|| Error::Structure("trajectory has no peak to invert around".into()))?;

    let mut rise_u = Vec::new();
    let mut rise_r = Vec::new();
    let mut rise_d = Vec::new();
    for node in &profile.nodes {
        if node.r >= peak_r {
            break;
        }
        if node.u >= peak_height {
            break;
        }
        if rise_u.last().map_or(true, |&last| node.u > last + 1e-14 * peak_height) {
            rise_u.push(node.u);
            rise_r.push(node.r);
            rise_d.push(if node.v != 0.0 { 1.0 / node.v } else { f64::INFINITY });
        }
    }
    rise_u.push(peak_height);
    rise_r.push(peak_r);
    rise_d.push(f64::INFINITY);
    if rise_u.len() < 2 {
        return Err(Error::Structure("rising branch has too few nodes".into()));
    }
    let rising = Branch {
        profile,
        seed: Pchip::with_slopes(rise_u.clone(), rise_r.clone(), rise_d)?,
        knots_u: rise_u,
        knots_r: rise_r,
        falling: false,
    };

    // Falling: from the peak to the first descending zero or bounce after it.
    let fall_end = profile
        .events
        .iter()
        .find(|e| {
            e.r > peak_r
                && matches!(
                    e.kind,
                    crate::ode::EventKind::Zero { ascending: false } | crate::ode::EventKind::Bounce
                )
        })
        .map(|e| e.r)
        .unwrap_or_else(|| profile.r_end());

    // Collected in descending-r order first, then reversed to ascending u.
    let mut fall_u = vec![peak_height];
    let mut fall_r = vec![peak_r];
    let mut fall_d = vec![f64::INFINITY];
    for node in &profile.nodes {
        if node.r <= peak_r || node.r > fall_end * (1.0 + 1e-15) {
            continue;
        }
        if fall_u.last().map_or(false, |&last| node.u < last - 1e-14 * peak_height) {
            fall_u.push(node.u);
            fall_r.push(node.r);
            fall_d.push(if node.v != 0.0 { 1.0 / node.v } else { f64::INFINITY });
        }
    }
    if (fall_r.last().unwrap() - fall_end).abs() > 1e-12 * fall_end {
        if let Ok((u, v)) = profile.eval(fall_end) {
            if u < *fall_u.last().unwrap() {
                fall_u.push(u);
                fall_r.push(fall_end);
                fall_d.push(if v != 0.0 { 1.0 / v } else { f64::INFINITY });
            }
        }
    }
    let falling = if fall_u.len() >= 3 {
        fall_u.reverse();
        fall_r.reverse();
        fall_d.reverse();
        Some(Branch {
            profile,
            seed: Pchip::with_slopes(fall_u.clone(), fall_r.clone(), fall_d)?,
            knots_u: fall_u,
            knots_r: fall_r,
            falling: true,
        })
    } else {
        None
    };

    Ok(ProfileBranches { rising, falling, peak_r, peak_height })
}

/// `V(r) = r^(2(n-1)) (u'^2 + 2F(u))`.
pub fn v_functional(profile: &SolutionProfile, r: f64) -> Result<f64> {
    let (u, v) = profile.eval(r)?;
    let n1 = profile.n as f64 - 1.0;
    Ok(r.powf(2.0 * n1) * (v * v + 2.0 * profile.f.big_f(u.abs())))
}

/// `P(r) = -2n (F/f)(u) r^(n-1) u' - r^n u'^2 - 2 r^n F(u)`; NaN inside the
/// guard band around `u = B` where `F/f` diverges.
pub fn p_functional(profile: &SolutionProfile, lm: &Landmarks, r: f64) -> Result<f64> {
    let (u, v) = profile.eval(r)?;
    if lm.b > 0.0 && (u - lm.b).abs() < GUARD_BAND {
        return Ok(f64::NAN);
    }
    if u < 0.0 {
        return Ok(f64::NAN);
    }
    let n = profile.n as f64;
    let big_f = profile.f.big_f(u);
    let ratio = profile.f.big_f_over_f(u);
    Ok(-2.0 * n * ratio * r.powf(n - 1.0) * v - r.powf(n) * (v * v + 2.0 * big_f))
}

/// `W(r) = r sqrt(u'^2 + 2F(u))`; NaN where the energy is negative.
pub fn w_functional(profile: &SolutionProfile, r: f64) -> Result<f64> {
    let (u, v) = profile.eval(r)?;
    let energy = v * v + 2.0 * profile.f.big_f(u.abs());
    Ok(if energy >= 0.0 { r * energy.sqrt() } else { f64::NAN })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FunctionalSample {
    pub r: f64,
    pub u: f64,
    pub u_prime: f64,
    pub energy: f64,
    pub v_functional: f64,
    /// NaN inside the guard band around `u = B`.
    pub p_functional: f64,
    /// NaN where the energy is negative.
    pub w_functional: f64,
    pub in_guard_band: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FunctionalTrace {
    pub samples: Vec<FunctionalSample>,
    /// Number of samples excluded from `P` by the guard band.
    pub excluded: usize,
}

/// Sample all functionals on an even radius grid across the profile.
pub fn functional_trace(profile: &SolutionProfile, samples: usize) -> Result<FunctionalTrace> {
    if samples < 2 {
        return Err(Error::Domain("functional trace needs at least 2 samples".into()));
    }
    let lm = profile.f.landmarks()?;
    let (lo, hi) = (profile.r_start(), profile.r_end());
    let mut out = Vec::with_capacity(samples);
    let mut excluded = 0;
    for i in 0..samples {
        let r = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
        let (u, v) = profile.eval(r)?;
        let p = p_functional(profile, &lm, r)?;
        let in_guard_band = p.is_nan() && lm.b > 0.0 && (u - lm.b).abs() < GUARD_BAND;
        if in_guard_band {
            excluded += 1;
        }
        out.push(FunctionalSample {
            r,
            u,
            u_prime: v,
            energy: v * v + 2.0 * profile.f.big_f(u.abs()),
            v_functional: v_functional(profile, r)?,
            p_functional: p,
            w_functional: w_functional(profile, r)?,
            in_guard_band,
        });
    }
    Ok(FunctionalTrace { samples: out, excluded })
}

/// Worst relative residuals of the exact derivative identities for `V` and
/// `P`, measured by Richardson-extrapolated central differences on the dense
/// output. Residuals are relative to the largest magnitude each exact
/// derivative attains over the checked samples.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityCheck {
    pub max_rel_v: f64,
    pub max_rel_p: f64,
    pub samples_checked: usize,
}

/// `P` samples closer to the interior zero of `f` than this (in height,
/// relative to `max(1, B)`) are excluded from the identity check: `(F/f)'`
/// diverges like `(u - B)^-2` there, so no finite-difference stencil is
/// well conditioned against it. `V` has no such pole and is checked
/// everywhere.
pub const P_IDENTITY_BAND: f64 = 0.05;

pub fn derivative_identity_check(
    profile: &SolutionProfile,
    samples: usize,
) -> Result<IdentityCheck> {
    let lm = profile.f.landmarks()?;
    let n = profile.n as f64;
    let (lo, hi) = (profile.r_start(), profile.r_end());
    let span = hi - lo;
    if !(span > 0.0) {
        return Err(Error::Window("profile has no radial extent".into()));
    }
    let p_band = if lm.b > 0.0 { P_IDENTITY_BAND * lm.b.max(1.0) } else { 0.0 };
    // (r, exact V', exact P' if outside the band)
    let mut scale_v = 0.0f64;
    let mut scale_p = 0.0f64;
    let mut checks: Vec<(f64, f64, Option<f64>)> = Vec::new();
    for i in 0..samples {
        let t = (i as f64 + 0.5) / samples as f64;
        let r = lo + span * t;
        let (u, v) = profile.eval(r)?;
        if u < 0.0 {
            continue;
        }
        let dv_exact = 4.0 * (n - 1.0) * r.powf(2.0 * n - 3.0) * profile.f.big_f(u);
        scale_v = scale_v.max(dv_exact.abs());
        let dp_exact = if (u - lm.b).abs() > p_band {
            let dp =
                (n - 2.0 - 2.0 * n * profile.f.big_f_over_f_prime(u)) * r.powf(n - 1.0) * v * v;
            scale_p = scale_p.max(dp.abs());
            Some(dp)
        } else {
            None
        };
        checks.push((r, dv_exact, dp_exact));
    }
    if checks.is_empty() {
        return Err(Error::Window("no usable sample points for identity check".into()));
    }

    let richardson = |g: &dyn Fn(f64) -> Result<f64>, r: f64, delta: f64| -> Result<f64> {
        let d = |h: f64| -> Result<f64> { Ok((g(r + h)? - g(r - h)?) / (2.0 * h)) };
        Ok((4.0 * d(delta / 2.0)? - d(delta)?) / 3.0)
    };

    let mut max_rel_v = 0.0f64;
    let mut max_rel_p = 0.0f64;
    let mut counted = 0usize;
    for (r, dv_exact, dp_exact) in checks {
        let delta = (2e-4 * r.abs().max(1.0))
            .min((r - lo).abs())
            .min((hi - r).abs());
        if delta <= 0.0 {
            continue;
        }
        let dv = richardson(&|x| v_functional(profile, x), r, delta)?;
        max_rel_v = max_rel_v.max((dv - dv_exact).abs() / scale_v.max(1e-300));
        if let Some(dp_exact) = dp_exact {
            let dp = richardson(&|x| p_functional(profile, &lm, x), r, delta)?;
            if dp.is_finite() {
                max_rel_p = max_rel_p.max((dp - dp_exact).abs() / scale_p.max(1e-300));
            }
        }
        counted += 1;
    }
    Ok(IdentityCheck { max_rel_v, max_rel_p, samples_checked: counted })
}

/// How strongly a pair of trajectories is tied together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    /// Both trajectories vanish at (numerically) the same outer radius: a
    /// genuine boundary-value pair, the setting of the uniqueness argument.
    BvpPair,
    /// Two trajectories of the same problem without a shared outer zero.
    IvpPair,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepStatus {
    Verified,
    /// First grid location where the claimed inequality fails.
    Failed { at: f64 },
    /// Premises for this step are not met on these trajectories.
    Skipped { why: String },
    /// Vacuous for this nonlinearity (e.g. the below-`beta` region is empty).
    TriviallyTrue,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepOutcome {
    pub name: &'static str,
    pub status: StepStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub class: PairClass,
    /// Peak heights, ordered (`m1 < m2`).
    pub m1: f64,
    pub m2: f64,
    /// Largest height where the falling branches cross, if found.
    pub s_intersection: Option<f64>,
    pub steps: Vec<StepOutcome>,
}

impl ComparisonReport {
    /// True when no step failed (skipped and vacuous steps do not count
    /// against consistency).
    pub fn consistent(&self) -> bool {
        !self
            .steps
            .iter()
            .any(|s| matches!(s.status, StepStatus::Failed { .. }))
    }

    pub fn step(&self, name: &str) -> Option<&StepOutcome> {
        self.steps.iter().find(|s| s.name == name)
    }
}

const STEP_GRID: usize = 512;
const INTERSECTION_GRID: usize = 2048;
/// Comparisons are asserted up to this relative tolerance.
const CMP_TOL: f64 = 1e-9;

struct Side<'p> {
    profile: &'p SolutionProfile,
    branches: ProfileBranches<'p>,
}

impl Side<'_> {
    fn flux_at(&self, branch: &Branch<'_>, s: f64) -> Result<(f64, f64)> {
        let r = branch.r_at(s)?;
        let (_, v) = self.profile.eval(r)?;
        Ok((r, r.powf(self.profile.n as f64 - 1.0) * v))
    }
}

/// Run the step-by-step comparison for two trajectories of the same problem.
/// The lower-peaked trajectory plays the role of side 1.
pub fn compare_pair(
    pa: &SolutionProfile,
    pb: &SolutionProfile,
) -> Result<ComparisonReport> {
    if pa.n != pb.n {
        return Err(Error::State(format!(
            "dimension mismatch: {} vs {}",
            pa.n, pb.n
        )));
    }
    if (pa.a - pb.a).abs() > 1e-12 * pa.a.max(1.0) {
        return Err(Error::State("inner radius mismatch between the pair".into()));
    }
    if pa.f.label() != pb.f.label() {
        return Err(Error::State(format!(
            "nonlinearity mismatch: {} vs {}",
            pa.f.label(),
            pb.f.label()
        )));
    }
    let lm = pa.f.landmarks()?;

    let ba = invert_branches(pa)?;
    let bb = invert_branches(pb)?;
    let (one, two) = if ba.peak_height <= bb.peak_height {
        (Side { profile: pa, branches: ba }, Side { profile: pb, branches: bb })
    } else {
        (Side { profile: pb, branches: bb }, Side { profile: pa, branches: ba })
    };
    let (m1, m2) = (one.branches.peak_height, two.branches.peak_height);
    if (m2 - m1).abs() <= 1e-10 * m2.max(1.0) {
        return Err(Error::State(format!(
            "peaks indistinguishable (M = {m1}); the pair cannot be ordered"
        )));
    }

    let ends_at_zero = |side: &Side<'_>| -> bool {
        matches!(side.profile.termination, Termination::ZeroHit { .. })
            || side.profile.end_value().abs() <= 1e-6 * side.branches.peak_height
    };
    let class = if ends_at_zero(&one)
        && ends_at_zero(&two)
        && (one.profile.r_end() - two.profile.r_end()).abs()
            <= 1e-6 * one.profile.r_end().max(two.profile.r_end())
    {
        PairClass::BvpPair
    } else {
        PairClass::IvpPair
    };

    let mut steps = Vec::new();

    // ---- Step 1: below beta (rising branches) ------------------------------
    steps.push(step_below_beta(&one, &two, &lm));

    // ---- Step 2: beta up to the lower peak (rising branches) ---------------
    steps.push(step_rising_flux(&one, &two, &lm, m1));

    // ---- Step 6 computed early: the falling intersection feeds step 4 ------
    let (s_i, step6) = step_intersection(&one, &two, &lm, m1, class);

    // ---- Step 3: P at the lower peak ---------------------------------------
    steps.push(step_p_at_peak(&one, &two, &lm, m1));

    // ---- Step 4: falling branches above the intersection -------------------
    steps.push(step_falling(&one, &two, &lm, m1, s_i));

    // ---- Step 5: endpoint comparison at beta (falling branches) ------------
    steps.push(step_at_beta(&one, &two, &lm));

    steps.push(step6);

    // ---- Exterior-only: decay-rate comparison of |u'|^2 --------------------
    steps.push(step_exterior_decay(&one, &two, class));

    Ok(ComparisonReport { class, m1, m2, s_intersection: s_i, steps })
}

fn step_below_beta(one: &Side<'_>, two: &Side<'_>, lm: &Landmarks) -> StepOutcome {
    let name = "below_beta";
    if lm.beta <= 0.0 {
        return StepOutcome {
            name,
            status: StepStatus::TriviallyTrue,
            detail: "no negative potential region: beta = 0".into(),
        };
    }
    if one.branches.peak_height <= lm.beta {
        return StepOutcome {
            name,
            status: StepStatus::Skipped { why: format!("lower peak {} below beta {}", one.branches.peak_height, lm.beta) },
            detail: String::new(),
        };
    }
    let n1 = one.profile.n as f64 - 1.0;
    let run = || -> Result<StepStatus> {
        for k in 1..=STEP_GRID {
            let s = lm.beta * k as f64 / STEP_GRID as f64;
            let (r1, fl1) = one.flux_at(&one.branches.rising, s)?;
            let (r2, fl2) = two.flux_at(&two.branches.rising, s)?;
            if r1 <= r2 - CMP_TOL * r2.abs().max(1.0) {
                return Ok(StepStatus::Failed { at: s });
            }
            let big_f = one.profile.f.big_f(s);
            let v1 = fl1 * fl1 + 2.0 * r1.powf(2.0 * n1) * big_f;
            let v2 = fl2 * fl2 + 2.0 * r2.powf(2.0 * n1) * big_f;
            let scale = v1.abs().max(v2.abs()).max(1e-300);
            if v1 >= v2 + CMP_TOL * scale {
                return Ok(StepStatus::Failed { at: s });
            }
            // At s = beta the V ordering reduces to the flux ordering.
            if k == STEP_GRID && fl1 - fl2 >= CMP_TOL * fl1.abs().max(fl2.abs()).max(1e-300) {
                return Ok(StepStatus::Failed { at: s });
            }
        }
        Ok(StepStatus::Verified)
    };
    match run() {
        Ok(status) => StepOutcome {
            name,
            status,
            detail: format!(
                "r̄1 > r̄2 and V1 < V2 on (0, beta = {}], flux ordering at beta",
                lm.beta
            ),
        },
        Err(e) => StepOutcome {
            name,
            status: StepStatus::Skipped { why: e.to_string() },
            detail: String::new(),
        },
    }
}

fn step_rising_flux(one: &Side<'_>, two: &Side<'_>, lm: &Landmarks, m1: f64) -> StepOutcome {
    let name = "rising_flux";
    if m1 <= lm.beta {
        return StepOutcome {
            name,
            status: StepStatus::Skipped { why: format!("lower peak {m1} does not exceed beta {}", lm.beta) },
            detail: String::new(),
        };
    }
    let run = || -> Result<StepStatus> {
        for k in 1..=STEP_GRID {
            let s = lm.beta + (m1 - lm.beta) * k as f64 / STEP_GRID as f64;
            let (r1, fl1) = one.flux_at(&one.branches.rising, s)?;
            let (r2, fl2) = two.flux_at(&two.branches.rising, s)?;
            if r1 <= r2 - CMP_TOL * r2.abs().max(1.0) {
                return Ok(StepStatus::Failed { at: s });
            }
            let scale = fl1.abs().max(fl2.abs()).max(1e-300);
            if fl1 - fl2 >= CMP_TOL * scale {
                return Ok(StepStatus::Failed { at: s });
            }
        }
        Ok(StepStatus::Verified)
    };
    match run() {
        Ok(status) => StepOutcome {
            name,
            status,
            detail: format!("flux1 < flux2 and r̄1 > r̄2 on (beta, M1 = {m1}]"),
        },
        Err(e) => StepOutcome {
            name,
            status: StepStatus::Skipped { why: e.to_string() },
            detail: String::new(),
        },
    }
}

fn step_p_at_peak(one: &Side<'_>, two: &Side<'_>, lm: &Landmarks, m1: f64) -> StepOutcome {
    let name = "p_at_lower_peak";
    let fall2 = match &two.branches.falling {
        Some(b) if b.covers(m1) => b,
        _ => {
            return StepOutcome {
                name,
                status: StepStatus::Skipped {
                    why: "upper trajectory's falling branch does not reach M1".into(),
                },
                detail: String::new(),
            }
        }
    };
    let n = one.profile.n as f64;
    let c1 = one.branches.peak_r;
    // At its own peak u' = 0, so P reduces to -2 r^n F(M).
    let p1 = -2.0 * c1.powf(n) * one.profile.f.big_f(m1);
    let run = || -> Result<StepStatus> {
        let r2 = fall2.r_at(m1)?;
        let p2 = p_functional(two.profile, lm, r2)?;
        if !p2.is_finite() {
            return Ok(StepStatus::Skipped {
                why: format!("P undefined at the comparison radius (u = {m1} near B)"),
            });
        }
        let scale = p1.abs().max(p2.abs()).max(1e-300);
        Ok(if p1 > p2 + CMP_TOL * scale {
            StepStatus::Verified
        } else {
            StepStatus::Failed { at: m1 }
        })
    };
    match run() {
        Ok(status) => StepOutcome {
            name,
            status,
            detail: format!("P1(M1) = {p1} vs P2 at the falling crossing of M1"),
        },
        Err(e) => StepOutcome {
            name,
            status: StepStatus::Skipped { why: e.to_string() },
            detail: String::new(),
        },
    }
}

fn step_falling(
    one: &Side<'_>,
    two: &Side<'_>,
    lm: &Landmarks,
    m1: f64,
    s_i: Option<f64>,
) -> StepOutcome {
    let name = "falling_above_intersection";
    let (fall1, fall2) = match (&one.branches.falling, &two.branches.falling) {
        (Some(f1), Some(f2)) => (f1, f2),
        _ => {
            return StepOutcome {
                name,
                status: StepStatus::Skipped { why: "a falling branch is missing".into() },
                detail: String::new(),
            }
        }
    };
    let s_lo = match s_i {
        Some(s) => s,
        None => {
            return StepOutcome {
                name,
                status: StepStatus::Skipped {
                    why: "no falling intersection found to anchor the interval".into(),
                },
                detail: String::new(),
            }
        }
    };
    let run = || -> Result<(StepStatus, usize)> {
        // Premise: at the top of the interval the lower trajectory's peak
        // sits inside the upper trajectory's falling crossing of M1.
        let r2_top = fall2.r_at(m1)?;
        if one.branches.peak_r >= r2_top {
            return Ok((
                StepStatus::Skipped {
                    why: format!(
                        "premise r̄1(M1) < r̄2(M1) fails: {} vs {r2_top}",
                        one.branches.peak_r
                    ),
                },
                0,
            ));
        }
        let mut excluded = 0usize;
        for k in 0..=STEP_GRID {
            let s = s_lo + (m1 - s_lo) * k as f64 / STEP_GRID as f64;
            if !(fall1.covers(s) && fall2.covers(s)) {
                continue;
            }
            if lm.b > 0.0 && (s - lm.b).abs() < GUARD_BAND {
                excluded += 1;
                continue;
            }
            let (r1, fl1) = one.flux_at(fall1, s)?;
            let (r2, fl2) = two.flux_at(fall2, s)?;
            // Falling fluxes are negative; the lower trajectory's is closer
            // to zero.
            let scale = fl1.abs().max(fl2.abs()).max(1e-300);
            if fl1 - fl2 <= -CMP_TOL * scale {
                return Ok((StepStatus::Failed { at: s }, excluded));
            }
            let p1 = p_functional(one.profile, lm, r1)?;
            let p2 = p_functional(two.profile, lm, r2)?;
            if p1.is_finite() && p2.is_finite() {
                let pscale = p1.abs().max(p2.abs()).max(1e-300);
                if p1 - p2 <= -CMP_TOL * pscale {
                    return Ok((StepStatus::Failed { at: s }, excluded));
                }
            }
        }
        Ok((StepStatus::Verified, excluded))
    };
    match run() {
        Ok((status, excluded)) => StepOutcome {
            name,
            status,
            detail: format!(
                "flux1 > flux2 and P̄1 > P̄2 on [{s_lo}, {m1}] ({excluded} guard-band samples excluded)"
            ),
        },
        Err(e) => StepOutcome {
            name,
            status: StepStatus::Skipped { why: e.to_string() },
            detail: String::new(),
        },
    }
}

fn step_at_beta(one: &Side<'_>, two: &Side<'_>, lm: &Landmarks) -> StepOutcome {
    let name = "at_beta";
    if lm.beta <= 0.0 {
        return StepOutcome {
            name,
            status: StepStatus::TriviallyTrue,
            detail: "beta = 0".into(),
        };
    }
    let (fall1, fall2) = match (&one.branches.falling, &two.branches.falling) {
        (Some(f1), Some(f2)) if f1.covers(lm.beta) && f2.covers(lm.beta) => (f1, f2),
        _ => {
            return StepOutcome {
                name,
                status: StepStatus::Skipped {
                    why: "falling branches do not both reach beta".into(),
                },
                detail: String::new(),
            }
        }
    };
    let run = || -> Result<StepStatus> {
        let r1 = fall1.r_at(lm.beta)?;
        let r2 = fall2.r_at(lm.beta)?;
        let (_, v1) = one.profile.eval(r1)?;
        let (_, v2) = two.profile.eval(r2)?;
        if r1 <= r2 - CMP_TOL * r2.abs().max(1.0) {
            return Ok(StepStatus::Failed { at: lm.beta });
        }
        // r u' at the beta crossings: both negative, the lower trajectory's
        // closer to zero.
        let (w1, w2) = (r1 * v1, r2 * v2);
        let scale = w1.abs().max(w2.abs()).max(1e-300);
        Ok(if w1 - w2 > -CMP_TOL * scale {
            StepStatus::Verified
        } else {
            StepStatus::Failed { at: lm.beta }
        })
    };
    match run() {
        Ok(status) => StepOutcome {
            name,
            status,
            detail: format!("falling crossings of beta = {}: radius and r·u' ordering", lm.beta),
        },
        Err(e) => StepOutcome {
            name,
            status: StepStatus::Skipped { why: e.to_string() },
            detail: String::new(),
        },
    }
}

fn step_intersection(
    one: &Side<'_>,
    two: &Side<'_>,
    lm: &Landmarks,
    m1: f64,
    class: PairClass,
) -> (Option<f64>, StepOutcome) {
    let name = "falling_intersection";
    let (fall1, fall2) = match (&one.branches.falling, &two.branches.falling) {
        (Some(f1), Some(f2)) => (f1, f2),
        _ => {
            return (
                None,
                StepOutcome {
                    name,
                    status: StepStatus::Skipped { why: "a falling branch is missing".into() },
                    detail: String::new(),
                },
            )
        }
    };
    // Search range: from just below the lower peak down to the landmark floor
    // (B for a finite boundary pair, near 0 for decaying trajectories), and
    // never below what both branches cover.
    let floor = match class {
        PairClass::BvpPair => lm.b.max(0.0) + GUARD_BAND,
        PairClass::IvpPair => (1e-3 * m1).max(lm.b + GUARD_BAND),
    };
    let lo = floor.max(fall1.u_range().0).max(fall2.u_range().0);
    let hi = m1 * (1.0 - 1e-9);
    if !(hi > lo) {
        return (
            None,
            StepOutcome {
                name,
                status: StepStatus::Skipped {
                    why: format!("empty search range [{lo}, {hi}]"),
                },
                detail: String::new(),
            },
        );
    }
    let delta = |s: f64| -> Result<f64> { Ok(fall1.r_at(s)? - fall2.r_at(s)?) };
    let run = || -> Result<Option<f64>> {
        let mut prev_s = hi;
        let mut prev_d = delta(hi)?;
        for k in 1..=INTERSECTION_GRID {
            let s = hi - (hi - lo) * k as f64 / INTERSECTION_GRID as f64;
            let d = delta(s)?;
            if prev_d != 0.0 && d != 0.0 && prev_d.signum() != d.signum() {
                let root = crate::rootfind::brent(
                    |x| delta(x).unwrap_or(f64::NAN),
                    s,
                    prev_s,
                    1e-12 * m1.max(1.0),
                )?;
                return Ok(Some(root.x));
            }
            prev_s = s;
            prev_d = d;
        }
        Ok(None)
    };
    match run() {
        Ok(Some(s)) => (
            Some(s),
            StepOutcome {
                name,
                status: StepStatus::Verified,
                detail: format!("largest falling intersection at s = {s}"),
            },
        ),
        Ok(None) => (
            None,
            StepOutcome {
                name,
                status: StepStatus::Skipped {
                    why: format!("inverted falling branches do not cross on [{lo}, {hi}]"),
                },
                detail: String::new(),
            },
        ),
        Err(e) => (
            None,
            StepOutcome {
                name,
                status: StepStatus::Skipped { why: e.to_string() },
                detail: String::new(),
            },
        ),
    }
}

fn step_exterior_decay(one: &Side<'_>, two: &Side<'_>, class: PairClass) -> StepOutcome {
    let name = "exterior_decay_rate";
    if class != PairClass::IvpPair {
        return StepOutcome {
            name,
            status: StepStatus::Skipped { why: "finite boundary pair".into() },
            detail: String::new(),
        };
    }
    let (fall1, fall2) = match (&one.branches.falling, &two.branches.falling) {
        (Some(f1), Some(f2)) => (f1, f2),
        _ => {
            return StepOutcome {
                name,
                status: StepStatus::Skipped { why: "a falling branch is missing".into() },
                detail: String::new(),
            }
        }
    };
    let lo = fall1.u_range().0.max(fall2.u_range().0).max(1e-9);
    let hi = (one.branches.peak_height * (1.0 - 1e-6)).min(fall1.u_range().1).min(fall2.u_range().1);
    if !(hi > lo * (1.0 + 1e-9)) {
        return StepOutcome {
            name,
            status: StepStatus::Skipped { why: "falling branches do not overlap".into() },
            detail: String::new(),
        };
    }
    const K: usize = 512;
    let run = || -> Result<(StepStatus, usize)> {
        // J(s) = u1'(r̄1)^2 - u2'(r̄2)^2 on the falling branches; where the
        // pair is ordered (J < 0 and r̄1 < r̄2), |J| must decay faster than
        // r̄1^-(n-1) grows, i.e. d/ds log|J| < -(n-1) d/ds log r̄1.
        let mut j_vals = Vec::with_capacity(K + 1);
        let mut r1_vals = Vec::with_capacity(K + 1);
        for k in 0..=K {
            let s = lo + (hi - lo) * k as f64 / K as f64;
            let r1 = fall1.r_at(s)?;
            let r2 = fall2.r_at(s)?;
            let (_, v1) = one.profile.eval(r1)?;
            let (_, v2) = two.profile.eval(r2)?;
            j_vals.push((s, v1 * v1 - v2 * v2, r2));
            r1_vals.push(r1);
        }
        let ds = (hi - lo) / K as f64;
        let n1 = one.profile.n as f64 - 1.0;
        let mut checked = 0usize;
        for k in 1..K {
            let (s, j, r2) = j_vals[k];
            let applicable = j < 0.0
                && j_vals[k - 1].1 < 0.0
                && j_vals[k + 1].1 < 0.0
                && r1_vals[k] < r2;
            if !applicable {
                continue;
            }
            checked += 1;
            let dlog_j = ((-j_vals[k + 1].1).ln() - (-j_vals[k - 1].1).ln()) / (2.0 * ds);
            let dlog_r1 = (r1_vals[k + 1].ln() - r1_vals[k - 1].ln()) / (2.0 * ds);
            let lhs = dlog_j;
            let rhs = -n1 * dlog_r1;
            let tol = 1e-6 * (lhs.abs() + rhs.abs() + 1.0);
            if lhs >= rhs + tol {
                return Ok((StepStatus::Failed { at: s }, checked));
            }
        }
        Ok((StepStatus::Verified, checked))
    };
    match run() {
        Ok((status, checked)) => StepOutcome {
            name,
            status,
            detail: format!(
                "d/ds log|J| < -(n-1) d/ds log r̄1 at {checked} applicable samples"
            ),
        },
        Err(e) => StepOutcome {
            name,
            status: StepStatus::Skipped { why: e.to_string() },
            detail: String::new(),
        },
    }
}
