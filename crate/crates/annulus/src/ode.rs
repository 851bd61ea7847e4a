//! Radial initial value problem and its adaptive integration.
//!
//! The PDE `Δu + f(u) = 0` restricted to radial functions on an annulus
//! becomes
//!
//! ```text
//! u'' + (n-1)/r u' + f(u) = 0,    u(a) = 0,  u'(a) = α > 0,
//! ```
//!
//! integrated here as the first-order system `(u, v)` with `v = u'`. The
//! right-hand side always uses the odd extension `f(-s) = -f(s)`, which is
//! the natural continuation when intermediate Runge-Kutta stages or a
//! boundary-residual integration dip below `u = 0`.
//!
//! Integration records a dense-output profile, detects and polishes the
//! events that structure the trajectory (peaks, bounces, zeros of `u`, and
//! crossings of the landmark levels `B` and `beta`), and terminates according
//! to the chosen mode. Energy and tail diagnostics quantify how faithfully a
//! computed trajectory obeys the identities an exact solution satisfies.

use serde::{Deserialize, Serialize};

use crate::dopri5::{self, DenseSegment, State};
use crate::error::{Error, Result};
use crate::interp;
use crate::nonlinearity::NonlinearitySpec;
use crate::rootfind;

/// Radial problem data: dimension, inner radius, nonlinearity.
#[derive(Debug, Clone)]
pub struct RadialProblem {
    pub n: u32,
    pub a: f64,
    pub f: NonlinearitySpec,
}

impl RadialProblem {
    pub fn new(n: u32, a: f64, f: NonlinearitySpec) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("dimension n = {n} below 2")));
        }
        if !a.is_finite() || a <= 0.0 {
            return Err(Error::Domain(format!("inner radius a = {a} must be positive")));
        }
        Ok(RadialProblem { n, a, f })
    }
}

/// Tolerances and guards for one integration run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntegratorControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Events are polished until the event function is below this.
    pub event_tol: f64,
    /// Outer radius at which integration stops unconditionally.
    pub r_max: f64,
    /// `|u|` or `|v|` beyond this terminates with `Termination::Overflow`.
    pub overflow_guard: f64,
    pub max_steps: usize,
    /// Upper bound on the step size (infinite by default); finite values are
    /// used by convergence studies.
    pub max_step: f64,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        IntegratorControls {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            event_tol: 1e-10,
            r_max: 100.0,
            overflow_guard: 1e8,
            max_steps: 2_000_000,
            max_step: f64::INFINITY,
        }
    }
}

impl IntegratorControls {
    pub fn with_r_max(r_max: f64) -> Self {
        IntegratorControls { r_max, ..Default::default() }
    }

    fn validate(&self, a: f64) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.event_tol > 0.0) {
            return Err(Error::Domain("tolerances must be positive".into()));
        }
        if !(self.r_max > a) {
            return Err(Error::Domain(format!(
                "r_max = {} does not lie beyond the start radius {a}",
                self.r_max
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::Domain("max_step must be positive".into()));
        }
        Ok(())
    }
}

/// What stops the integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Stop at the first zero of `u` or the first interior minimum (bounce).
    Shooting,
    /// Run to `r_max` regardless, recording events along the way; used for
    /// boundary residuals and tail studies.
    RunToRMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Local maximum of `u` (`v` crosses + to -).
    Peak,
    /// Local minimum of `u` (`v` crosses - to +).
    Bounce,
    /// `u` crosses 0; `ascending` is false for the usual first-zero hit.
    Zero { ascending: bool },
    /// `u` crosses the level `B` (largest zero of `f`).
    LevelB { ascending: bool },
    /// `u` crosses the level `beta` (zero of the potential).
    LevelBeta { ascending: bool },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub r: f64,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// `u` reached 0 while descending.
    ZeroHit { r: f64 },
    /// `u` attained a positive interior minimum and turned back up.
    Bounced { r: f64 },
    ReachedRMax,
    /// State magnitude exceeded the overflow guard.
    Overflow { r: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Node {
    pub r: f64,
    pub u: f64,
    pub v: f64,
}

/// A computed trajectory: nodes at the accepted steps, polished events, the
/// termination record, and (when produced by the integrator) dense output
/// valid between consecutive nodes.
#[derive(Debug, Clone)]
pub struct SolutionProfile {
    pub n: u32,
    pub a: f64,
    pub alpha: f64,
    pub f: NonlinearitySpec,
    pub nodes: Vec<Node>,
    pub events: Vec<Event>,
    pub termination: Termination,
    segments: Vec<DenseSegment>,
}

impl SolutionProfile {
    pub fn r_start(&self) -> f64 {
        self.nodes.first().map(|nd| nd.r).unwrap_or(self.a)
    }

    pub fn r_end(&self) -> f64 {
        self.nodes.last().map(|nd| nd.r).unwrap_or(self.a)
    }

    pub fn has_dense_output(&self) -> bool {
        !self.segments.is_empty()
    }

    /// Rebuild a profile from bare nodes (a profile file read back from
    /// disk). Evaluation between nodes then falls back to Hermite
    /// interpolation anchored by the ODE's own accelerations.
    pub fn from_nodes(
        n: u32,
        a: f64,
        alpha: f64,
        f: NonlinearitySpec,
        nodes: Vec<Node>,
        events: Vec<Event>,
        termination: Termination,
    ) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Data("profile needs at least two nodes".into()));
        }
        for w in nodes.windows(2) {
            if !(w[1].r > w[0].r) {
                return Err(Error::Data(format!(
                    "profile nodes not strictly increasing at r = {}",
                    w[1].r
                )));
            }
        }
        Ok(SolutionProfile { n, a, alpha, f, nodes, events, termination, segments: Vec::new() })
    }

    /// Evaluate `(u, u')` at `r` within the computed range.
    pub fn eval(&self, r: f64) -> Result<(f64, f64)> {
        let (lo, hi) = (self.r_start(), self.r_end());
        let slack = 1e-9 * hi.abs().max(1.0);
        if !(r >= lo - slack && r <= hi + slack) {
            return Err(Error::Window(format!(
                "evaluation point r = {r} outside the computed range [{lo}, {hi}]"
            )));
        }
        let r = r.clamp(lo, hi);
        if self.has_dense_output() {
            let idx = match self
                .segments
                .binary_search_by(|seg| seg.r0.partial_cmp(&r).unwrap())
            {
                Ok(i) => i,
                Err(0) => 0,
                Err(i) => i - 1,
            };
            let seg = &self.segments[idx.min(self.segments.len() - 1)];
            debug_assert!(seg.contains(r), "segment lookup missed r = {r}");
            let y = seg.eval(r);
            return Ok((y[0], y[1]));
        }
        self.eval_from_nodes(r)
    }

    fn eval_from_nodes(&self, r: f64) -> Result<(f64, f64)> {
        let i = match self
            .nodes
            .binary_search_by(|nd| nd.r.partial_cmp(&r).unwrap())
        {
            Ok(i) => return Ok((self.nodes[i].u, self.nodes[i].v)),
            Err(0) => 0,
            Err(i) if i >= self.nodes.len() => self.nodes.len() - 2,
            Err(i) => i - 1,
        };
        let (n0, n1) = (self.nodes[i], self.nodes[i + 1]);
        let acc = |nd: &Node| -> f64 {
            -(self.n as f64 - 1.0) / nd.r * nd.v - self.f.f_extended(nd.u)
        };
        let (a0, a1) = (acc(&n0), acc(&n1));
        let u = interp::quintic_hermite(n0.r, n1.r, (n0.u, n1.u), (n0.v, n1.v), (a0, a1), r);
        let v = interp::cubic_hermite(n0.r, n1.r, n0.v, n1.v, a0, a1, r);
        Ok((u, v))
    }

    /// First peak of the trajectory (radius and height), if one was recorded.
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.events
            .iter()
            .find(|e| e.kind == EventKind::Peak)
            .map(|e| (e.r, e.u))
    }

    /// Radius of the first descending zero of `u`, if any.
    pub fn first_zero(&self) -> Option<f64> {
        self.events
            .iter()
            .find(|e| e.kind == (EventKind::Zero { ascending: false }))
            .map(|e| e.r)
    }

    /// Terminal value of `u` (the boundary residual when the run reached
    /// `r_max = b`).
    pub fn end_value(&self) -> f64 {
        self.nodes.last().map(|nd| nd.u).unwrap_or(0.0)
    }
}

struct Rhs<'p> {
    n_minus_1: f64,
    f: &'p NonlinearitySpec,
}

impl Rhs<'_> {
    #[inline]
    fn eval(&self, r: f64, y: State) -> State {
        [y[1], -self.n_minus_1 / r * y[1] - self.f.f_extended(y[0])]
    }
}

/// Integrate the radial IVP from `(a, 0, α)`.
pub fn integrate(
    problem: &RadialProblem,
    alpha: f64,
    controls: &IntegratorControls,
    mode: Mode,
) -> Result<SolutionProfile> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::Domain(format!("initial slope α = {alpha} must be positive")));
    }
    controls.validate(problem.a)?;
    let landmarks = problem.f.landmarks()?;
    let rhs = Rhs { n_minus_1: problem.n as f64 - 1.0, f: &problem.f };

    let mut nodes = Vec::with_capacity(1024);
    let mut segments = Vec::with_capacity(1024);
    let mut events: Vec<Event> = Vec::new();

    // Analytic seed step away from u = 0, where f' may be unbounded and the
    // error estimator is unreliable. Over h ~ 1e-8 the quadratic Taylor
    // expansion is far below tolerance.
    let a = problem.a;
    let h_seed = 1e-8 * a.max(1.0);
    let v_slope = -rhs.n_minus_1 / a * alpha; // f(0) = 0 contributes nothing
    let y_seed = [
        alpha * h_seed + 0.5 * v_slope * h_seed * h_seed,
        alpha + v_slope * h_seed,
    ];
    nodes.push(Node { r: a, u: 0.0, v: alpha });
    segments.push(DenseSegment::linear(a, h_seed, [0.0, alpha], y_seed));
    nodes.push(Node { r: a + h_seed, u: y_seed[0], v: y_seed[1] });

    let mut r = a + h_seed;
    let mut y = y_seed;
    let mut k1 = rhs.eval(r, y);
    let mut h = (1e-3 * a.max(1.0)).min(controls.max_step);
    let mut steps = 0usize;

    let termination = loop {
        if r >= controls.r_max * (1.0 - 1e-14) {
            break Termination::ReachedRMax;
        }
        steps += 1;
        if steps > controls.max_steps {
            return Err(Error::Integration(format!(
                "step budget {} exhausted at r = {r}",
                controls.max_steps
            )));
        }

        h = h.min(controls.max_step).min(controls.r_max - r);
        let h_min = 1e-14 * r.abs().max(1.0);
        let step = loop {
            let trial = dopri5::step(
                &|rr, yy| rhs.eval(rr, yy),
                r,
                y,
                k1,
                h,
                controls.abs_tol,
                controls.rel_tol,
            );
            if trial.err_norm <= 1.0 {
                break trial;
            }
            h *= dopri5::step_factor(trial.err_norm);
            if h < h_min {
                return Err(Error::Integration(format!("step size underflow at r = {r}")));
            }
        };

        let r_new = r + h;
        if !(step.y[0].is_finite() && step.y[1].is_finite()) {
            return Err(Error::Integration(format!("non-finite state at r = {r_new}")));
        }

        // Locate events inside the accepted step before deciding how it ends.
        let step_events = scan_events(&step.dense, &landmarks, controls.event_tol);
        let stop = match mode {
            Mode::Shooting => step_events.iter().find(|e| {
                matches!(e.kind, EventKind::Zero { ascending: false } | EventKind::Bounce)
            }),
            Mode::RunToRMax => None,
        };

        if let Some(stop_event) = stop {
            let stop_event = *stop_event;
            for e in step_events {
                if e.r <= stop_event.r + 1e-15 * r_new.max(1.0) {
                    events.push(e);
                }
            }
            segments.push(step.dense);
            nodes.push(Node { r: stop_event.r, u: stop_event.u, v: stop_event.v });
            break match stop_event.kind {
                EventKind::Zero { .. } => Termination::ZeroHit { r: stop_event.r },
                _ => Termination::Bounced { r: stop_event.r },
            };
        }

        events.extend(step_events);
        segments.push(step.dense);
        nodes.push(Node { r: r_new, u: step.y[0], v: step.y[1] });

        if step.y[0].abs() > controls.overflow_guard || step.y[1].abs() > controls.overflow_guard {
            break Termination::Overflow { r: r_new };
        }

        r = r_new;
        y = step.y;
        k1 = step.k_last;
        h *= dopri5::step_factor(step.err_norm);
    };

    Ok(SolutionProfile {
        n: problem.n,
        a: problem.a,
        alpha,
        f: problem.f.clone(),
        nodes,
        events,
        termination,
        segments,
    })
}

/// Scan one accepted step for sign changes of the event functions and polish
/// each to a root of the dense output.
fn scan_events(dense: &DenseSegment, lm: &crate::Landmarks, event_tol: f64) -> Vec<Event> {
    const SUBDIVISIONS: usize = 8;
    let (r0, r1) = (dense.r0, dense.r_end());
    let mut found: Vec<Event> = Vec::new();

    // (component selector, level, event constructor from `ascending`)
    type Make = fn(bool) -> EventKind;
    let mut channels: Vec<(usize, f64, Make)> = vec![
        (1, 0.0, |asc| if asc { EventKind::Bounce } else { EventKind::Peak }),
        (0, 0.0, |asc| EventKind::Zero { ascending: asc }),
    ];
    if lm.b > 0.0 {
        channels.push((0, lm.b, |asc| EventKind::LevelB { ascending: asc }));
    }
    if lm.beta > lm.b {
        channels.push((0, lm.beta, |asc| EventKind::LevelBeta { ascending: asc }));
    }

    for (comp, level, make) in channels {
        let g = |r: f64| dense.eval(r)[comp] - level;
        let mut prev_r = r0;
        let mut prev_g = g(prev_r);
        for i in 1..=SUBDIVISIONS {
            let cur_r = r0 + (r1 - r0) * i as f64 / SUBDIVISIONS as f64;
            let cur_g = g(cur_r);
            if prev_g != 0.0 && cur_g != 0.0 && prev_g.signum() != cur_g.signum() {
                if let Ok(root) = rootfind::brent(g, prev_r, cur_r, 1e-13 * r1.abs().max(1.0)) {
                    debug_assert!(root.f_x.abs() <= event_tol * 10.0);
                    let y = dense.eval(root.x);
                    found.push(Event { kind: make(cur_g > prev_g), r: root.x, u: y[0], v: y[1] });
                }
            }
            prev_r = cur_r;
            prev_g = cur_g;
        }
    }

    found.sort_by(|a, b| a.r.partial_cmp(&b.r).unwrap());
    found
}

/// Conserved-quantity sample: the energy `I = u'^2 + 2F(u)` and the residual
/// of its exact dissipation identity `I' = -2(n-1) u'^2 / r`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergySample {
    pub r: f64,
    pub energy: f64,
    /// `|dI/dr - (-2(n-1)v^2/r)|` with `dI/dr` from centered differencing of
    /// the dense output.
    pub identity_residual: f64,
}

/// Energy at one radius.
pub fn energy(profile: &SolutionProfile, r: f64) -> Result<f64> {
    let (u, v) = profile.eval(r)?;
    Ok(v * v + 2.0 * profile.f.big_f(u.abs()) * u.signum().max(0.0)
        + if u < 0.0 { 2.0 * profile.f.big_f(-u) } else { 0.0 })
}

/// Sample the energy and its dissipation identity on an even grid across the
/// profile. The derivative is differenced on the dense output at a spacing
/// tuned to balance truncation against roundoff.
pub fn energy_trace(profile: &SolutionProfile, samples: usize) -> Result<Vec<EnergySample>> {
    if samples < 2 {
        return Err(Error::Domain("energy trace needs at least 2 samples".into()));
    }
    let (lo, hi) = (profile.r_start(), profile.r_end());
    let span = hi - lo;
    if !(span > 0.0) {
        return Err(Error::Window("profile has no radial extent".into()));
    }
    let energy_at = |r: f64| -> Result<f64> {
        let (u, v) = profile.eval(r)?;
        // F extended evenly: F(u) = F(|u|) matches the odd extension of f.
        Ok(v * v + 2.0 * profile.f.big_f(u.abs()))
    };
    let mut out = Vec::with_capacity(samples);
    for i in 0..samples {
        let t = i as f64 / (samples - 1) as f64;
        let r = lo + span * t;
        let delta = (6e-6 * r.abs().max(1.0)).min(0.45 * span);
        let (rm, rp) = ((r - delta).max(lo), (r + delta).min(hi));
        let d_i = (energy_at(rp)? - energy_at(rm)?) / (rp - rm);
        let (_, v) = profile.eval(r)?;
        let expected = -2.0 * (profile.n as f64 - 1.0) * v * v / r;
        out.push(EnergySample {
            r,
            energy: energy_at(r)?,
            identity_residual: (d_i - expected).abs(),
        });
    }
    Ok(out)
}

/// How a decaying trajectory behaves on its final stretch.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailDiagnostics {
    /// Decay window: from the last descending crossing of `u = B` (or the
    /// last peak when `B = 0`) to the end of the trajectory.
    pub window: (f64, f64),
    /// `r^(n-1) u'` at the window end; tends to the flux limit of a ground
    /// state (nonpositive, zero exactly in the decaying case for n > 2).
    pub flux_end: f64,
    /// Whether `r^(n-1) u'` is nondecreasing across the window, as it must be
    /// while `0 < u < B`.
    pub flux_monotone: bool,
    /// `|r u'|` at the window end.
    pub r_u_prime_end: f64,
    /// Whether `|r u'|` decreases over the last decade of the window.
    pub r_u_prime_decreasing: bool,
}

pub fn tail_diagnostics(profile: &SolutionProfile) -> Result<TailDiagnostics> {
    let start = profile
        .events
        .iter()
        .rev()
        .find(|e| e.kind == (EventKind::LevelB { ascending: false }))
        .map(|e| e.r)
        .or_else(|| {
            profile
                .events
                .iter()
                .rev()
                .find(|e| e.kind == EventKind::Peak)
                .map(|e| e.r)
        })
        .ok_or_else(|| {
            Error::Window("no decay window: trajectory never starts a final descent".into())
        })?;
    let end = profile.r_end();
    if !(end > start) {
        return Err(Error::Window(format!(
            "degenerate decay window [{start}, {end}]"
        )));
    }

    let n1 = profile.n as f64 - 1.0;
    const SAMPLES: usize = 256;
    let flux = |r: f64| -> Result<f64> {
        let (_, v) = profile.eval(r)?;
        Ok(r.powf(n1) * v)
    };

    let mut flux_monotone = true;
    let mut prev = flux(start)?;
    let mut scale = prev.abs();
    for i in 1..=SAMPLES {
        let r = start + (end - start) * i as f64 / SAMPLES as f64;
        let cur = flux(r)?;
        scale = scale.max(cur.abs());
        if cur < prev - 1e-9 * scale.max(1e-12) {
            flux_monotone = false;
        }
        prev = cur;
    }

    // |r u'| over the last decade of the window (or the whole window if it
    // spans less than a decade).
    let dec_start = (end / 10.0).max(start);
    let mut decreasing = true;
    let (_, v0) = profile.eval(dec_start)?;
    let mut prev_mag = (dec_start * v0).abs();
    let mag_scale = prev_mag.max(1e-300);
    for i in 1..=SAMPLES {
        let r = dec_start + (end - dec_start) * i as f64 / SAMPLES as f64;
        let (_, v) = profile.eval(r)?;
        let mag = (r * v).abs();
        if mag > prev_mag + 1e-9 * mag_scale {
            decreasing = false;
        }
        prev_mag = mag;
    }

    let (_, v_end) = profile.eval(end)?;
    Ok(TailDiagnostics {
        window: (start, end),
        flux_end: end.powf(n1) * v_end,
        flux_monotone,
        r_u_prime_end: (end * v_end).abs(),
        r_u_prime_decreasing: decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// With f(u) = π² u, n = 3, a = 1, α = π the trajectory is exactly
    /// u(r) = sin(π(r-1))/r, which first vanishes at r = 2.
    fn linear_problem() -> RadialProblem {
        RadialProblem::new(3, 1.0, NonlinearitySpec::linear(PI * PI)).unwrap()
    }

    fn exact_u(r: f64) -> f64 {
        (PI * (r - 1.0)).sin() / r
    }

    fn exact_v(r: f64) -> f64 {
        PI * (PI * (r - 1.0)).cos() / r - (PI * (r - 1.0)).sin() / (r * r)
    }

    #[test]
    fn linear_trajectory_matches_closed_form() {
        let profile = integrate(
            &linear_problem(),
            PI,
            &IntegratorControls::with_r_max(3.0),
            Mode::Shooting,
        )
        .unwrap();
        match profile.termination {
            Termination::ZeroHit { r } => assert!((r - 2.0).abs() < 1e-10, "zero at {r}"),
            other => panic!("expected zero hit, got {other:?}"),
        }
        let (u, _) = profile.eval(1.5).unwrap();
        assert!((u - 2.0 / 3.0).abs() < 1e-10, "u(1.5) = {u}");
        for i in 0..50 {
            let r = 1.0 + i as f64 / 50.0;
            let (u, v) = profile.eval(r).unwrap();
            assert!((u - exact_u(r)).abs() < 1e-9, "u({r}) = {u} vs {}", exact_u(r));
            assert!((v - exact_v(r)).abs() < 1e-8, "v({r}) = {v} vs {}", exact_v(r));
        }
    }

    #[test]
    fn linear_trajectory_derivative_at_boundary() {
        // Run past the zero in residual mode: u'(2) = -π/2 exactly.
        let profile = integrate(
            &linear_problem(),
            PI,
            &IntegratorControls::with_r_max(2.0),
            Mode::RunToRMax,
        )
        .unwrap();
        assert_eq!(profile.termination, Termination::ReachedRMax);
        let (u, v) = profile.eval(2.0).unwrap();
        assert!(u.abs() < 1e-10, "residual u(2) = {u}");
        assert!((v + PI / 2.0).abs() < 1e-9, "u'(2) = {v}");
    }

    #[test]
    fn events_on_linear_trajectory() {
        let profile = integrate(
            &linear_problem(),
            PI,
            &IntegratorControls::with_r_max(3.0),
            Mode::Shooting,
        )
        .unwrap();
        let peaks: Vec<_> = profile
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Peak)
            .collect();
        assert_eq!(peaks.len(), 1);
        // At the peak v = 0 and u equals the max of sin(π(r-1))/r.
        let peak = peaks[0];
        assert!(peak.v.abs() < 1e-9);
        assert!((peak.u - exact_u(peak.r)).abs() < 1e-9);
        assert!(exact_v(peak.r).abs() < 1e-7);
        assert_eq!(profile.first_zero(), Some(profile.r_end()));
    }

    #[test]
    fn energy_identity_on_linear_trajectory() {
        let profile = integrate(
            &linear_problem(),
            PI,
            &IntegratorControls::with_r_max(2.0),
            Mode::RunToRMax,
        )
        .unwrap();
        // I(1) = v(1)^2 = π²; I(2) = u'(2)^2 = π²/4.
        let i_start = energy(&profile, 1.0).unwrap();
        let i_end = energy(&profile, 2.0).unwrap();
        assert!((i_start - PI * PI).abs() < 1e-8);
        assert!((i_end - PI * PI / 4.0).abs() < 1e-8);
        // Monotone decreasing, and the differential identity holds to ~1e-6.
        let trace = energy_trace(&profile, 200).unwrap();
        let scale = trace.iter().map(|s| s.energy.abs()).fold(0.0, f64::max);
        for w in trace.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-9 * scale);
        }
        let worst = trace
            .iter()
            .map(|s| s.identity_residual)
            .fold(0.0, f64::max);
        assert!(worst < 1e-4 * scale, "identity residual {worst}");
    }

    #[test]
    fn shooting_stops_at_bounce_for_small_alpha() {
        // Minus family: small α can't climb over the potential barrier, so u
        // dips back up from a positive minimum.
        let problem = RadialProblem::new(
            3,
            1.0,
            NonlinearitySpec::power_diff(3.0, 1.0).unwrap(),
        )
        .unwrap();
        let profile = integrate(
            &problem,
            0.05,
            &IntegratorControls::with_r_max(50.0),
            Mode::Shooting,
        )
        .unwrap();
        match profile.termination {
            Termination::Bounced { r } => {
                let (u, v) = profile.eval(r).unwrap();
                assert!(u > 0.0, "bounce height {u}");
                assert!(v.abs() < 1e-9, "v at bounce = {v}");
            }
            other => panic!("expected bounce, got {other:?}"),
        }
    }

    #[test]
    fn landmark_crossings_recorded() {
        let problem = RadialProblem::new(
            3,
            1.0,
            NonlinearitySpec::power_diff(3.0, 1.0).unwrap(),
        )
        .unwrap();
        let profile = integrate(
            &problem,
            3.0,
            &IntegratorControls::with_r_max(50.0),
            Mode::Shooting,
        )
        .unwrap();
        // A trajectory that rises above beta and comes back down crosses B
        // and beta both ways.
        let kinds: Vec<EventKind> = profile.events.iter().map(|e| e.kind).collect();
        assert!(kinds.contains(&EventKind::LevelB { ascending: true }));
        assert!(kinds.contains(&EventKind::LevelBeta { ascending: true }));
        for e in &profile.events {
            if let EventKind::LevelB { .. } = e.kind {
                assert!((e.u - 1.0).abs() < 1e-9, "B crossing at u = {}", e.u);
            }
            if let EventKind::LevelBeta { .. } = e.kind {
                assert!((e.u - 2.0f64.sqrt()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn node_fallback_matches_dense_output() {
        let profile = integrate(
            &linear_problem(),
            PI,
            &IntegratorControls::with_r_max(2.0),
            Mode::RunToRMax,
        )
        .unwrap();
        let bare = SolutionProfile::from_nodes(
            profile.n,
            profile.a,
            profile.alpha,
            profile.f.clone(),
            profile.nodes.clone(),
            profile.events.clone(),
            profile.termination,
        )
        .unwrap();
        assert!(!bare.has_dense_output());
        for i in 0..40 {
            let r = 1.0 + i as f64 / 40.0;
            let (u_dense, v_dense) = profile.eval(r).unwrap();
            let (u_bare, v_bare) = bare.eval(r).unwrap();
            assert!((u_dense - u_bare).abs() < 1e-9, "fallback u at {r}");
            assert!((v_dense - v_bare).abs() < 1e-7, "fallback v at {r}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let problem = linear_problem();
        let c = IntegratorControls::with_r_max(2.0);
        assert!(integrate(&problem, 0.0, &c, Mode::Shooting).is_err());
        assert!(integrate(&problem, -1.0, &c, Mode::Shooting).is_err());
        let bad = IntegratorControls::with_r_max(0.5);
        assert!(integrate(&problem, 1.0, &bad, Mode::Shooting).is_err());
        assert!(RadialProblem::new(1, 1.0, NonlinearitySpec::linear(1.0)).is_err());
        assert!(RadialProblem::new(3, 0.0, NonlinearitySpec::linear(1.0)).is_err());
    }

    #[test]
    fn eval_outside_range_is_window_error() {
        let profile = integrate(
            &linear_problem(),
            PI,
            &IntegratorControls::with_r_max(2.0),
            Mode::RunToRMax,
        )
        .unwrap();
        assert!(matches!(profile.eval(0.5), Err(Error::Window(_))));
        assert!(matches!(profile.eval(5.0), Err(Error::Window(_))));
    }

    #[test]
    fn max_step_is_honored() {
        let controls = IntegratorControls {
            max_step: 0.01,
            ..IntegratorControls::with_r_max(2.0)
        };
        let profile = integrate(&linear_problem(), PI, &controls, Mode::RunToRMax).unwrap();
        for w in profile.nodes.windows(2) {
            assert!(w[1].r - w[0].r <= 0.01 + 1e-12);
        }
    }
}
