//! Nonlinearities `f` and their structural properties.
//!
//! Supported shapes: `s^p + s^q` ("plus" family), `s^p - s^q` ("minus"
//! family), and custom `(f, f', F)` evaluator triples. The module locates the
//! two landmarks that organize the dynamics —
//!
//! * `B`: the largest zero of `f` (`f <= 0` below it, `> 0` above), and
//! * `beta`: the zero of the potential `F(s) = ∫_0^s f` above `B`,
//!
//! — and decides four structural conditions used by the comparison machinery:
//!
//! * (f1) regularity: `f` continuous on `[0,∞)`, `C^1` on `(0,∞)`, `f'`
//!   integrable near 0;
//! * (f2) the sign structure above (either `f > 0` everywhere, or negative on
//!   an initial interval `(0, B]` with a single sign change);
//! * (f3) subcriticality: `(F/f)'(s) >= (n-2)/(2n)` for all `s > beta`;
//! * (f4) superlinearity: `f(s) <= f'(s)(s - B)` for `s > B`, not identically
//!   an equality on the initial interval.
//!
//! For the power families (f3) and (f4) reduce to explicit inequalities in
//! `(p, q, n)`; those closed forms are used when available, with dense
//! geometric sampling as the general fallback.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rootfind;

/// Tolerance for locating landmark roots.
const LANDMARK_TOL: f64 = 1e-12;
/// Relative slack when comparing a sampled or closed-form quantity against a
/// condition bound, so that exactly-critical parameters classify as holding.
const CONDITION_SLACK: f64 = 1e-11;
/// Below this s, `F/f` is replaced by its limit 0 when `B = 0`.
const RATIO_FLOOR: f64 = 1e-10;

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Kind {
    /// `f(s) = s^p + s^q` with `p > q > 0`.
    PowerSum { p: f64, q: f64 },
    /// `f(s) = s^p - s^q` with `p > q > 0`.
    PowerDiff { p: f64, q: f64 },
    /// User-supplied `(f, f', F)`.
    Custom {
        f: Evaluator,
        f_prime: Evaluator,
        big_f: Evaluator,
        label: String,
    },
}

#[derive(Clone)]
pub struct NonlinearitySpec {
    kind: Kind,
}

/// Pointwise values of the nonlinearity: `f`, `f'`, and the potential
/// `F(s) = ∫_0^s f`.
#[derive(Debug, Clone, Copy)]
pub struct Eval {
    pub f: f64,
    /// Infinite at s = 0 when the low exponent is below 1; that is a flag for
    /// the caller, not an error.
    pub f_prime: f64,
    pub big_f: f64,
}

/// The two organizing levels of the potential.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Landmarks {
    /// Largest zero of `f`; 0 when `f > 0` for all `s > 0`.
    pub b: f64,
    /// Zero of `F` above `b`; equals `b` (= 0) when `f` has no negative part.
    pub beta: f64,
    pub has_negative_part: bool,
}

/// Geometric sampling grid for the condition checks.
#[derive(Debug, Clone, Copy)]
pub struct SampleGrid {
    pub points_per_decade: usize,
    pub s_max: f64,
    /// Lower bounds are clamped up to this floor to stay away from s = 0.
    pub floor: f64,
}

impl Default for SampleGrid {
    fn default() -> Self {
        SampleGrid { points_per_decade: 256, s_max: 1e3, floor: 1e-6 }
    }
}

const MIN_POINTS_PER_DECADE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Sampled,
    /// Recorded as an assumption (custom specs are not regularity-checked).
    Assumed,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub condition: &'static str,
    pub verdict: Verdict,
    /// A concrete violating s when the condition fails, where one exists.
    pub witness_s: Option<f64>,
    pub method: Method,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub f: String,
    pub n: u32,
    pub landmarks: Landmarks,
    pub checks: Vec<ConditionCheck>,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == Verdict::Holds)
    }

    pub fn check(&self, condition: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

impl fmt::Debug for NonlinearitySpec {
    fn fmt(&self, fmt: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt.debug_struct("NonlinearitySpec").field("label", &self.label()).finish()
    }
}

fn check_exponents(p: f64, q: f64) -> Result<()> {
    if !(p.is_finite() && q.is_finite()) || p <= 0.0 || q <= 0.0 {
        return Err(Error::Domain(format!("exponents must be positive finite, got p={p}, q={q}")));
    }
    if p == q {
        return Err(Error::Domain(format!("degenerate exponents p = q = {p}")));
    }
    Ok(())
}

impl NonlinearitySpec {
    /// `f(s) = s^p + s^q`. The sum is symmetric in the two exponents, so the
    /// pair is stored with the larger one first; `p == q` is rejected.
    pub fn power_sum(p: f64, q: f64) -> Result<Self> {
        check_exponents(p, q)?;
        let (p, q) = if p > q { (p, q) } else { (q, p) };
        Ok(NonlinearitySpec { kind: Kind::PowerSum { p, q } })
    }

    /// `f(s) = s^p - s^q`, which requires `p > q > 0` for the supported sign
    /// structure (negative well below 1, positive above).
    pub fn power_diff(p: f64, q: f64) -> Result<Self> {
        check_exponents(p, q)?;
        if p < q {
            return Err(Error::Domain(format!(
                "difference family needs p > q (got p={p} < q={q}); f would be negative for large s"
            )));
        }
        Ok(NonlinearitySpec { kind: Kind::PowerDiff { p, q } })
    }

    /// Custom evaluator triple. `big_f` is verified against an adaptive
    /// quadrature of `f` on a fixed sample so inconsistent pairs are rejected
    /// up front.
    pub fn custom(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        big_f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        label: impl Into<String>,
    ) -> Result<Self> {
        let spec = NonlinearitySpec {
            kind: Kind::Custom {
                f: Arc::new(f),
                f_prime: Arc::new(f_prime),
                big_f: Arc::new(big_f),
                label: label.into(),
            },
        };
        spec.verify_antiderivative()?;
        Ok(spec)
    }

    /// Test hook: `f(s) = k s`, for which the radial problem is explicitly
    /// solvable and every inner radius carries a continuum of solutions.
    pub fn linear(k: f64) -> Self {
        NonlinearitySpec {
            kind: Kind::Custom {
                f: Arc::new(move |s| k * s),
                f_prime: Arc::new(move |_| k),
                big_f: Arc::new(move |s| 0.5 * k * s * s),
                label: format!("linear:k={k}"),
            },
        }
    }

    /// Parse the CLI syntax: `plus:p=3,q=1`, `minus:p=3,q=1`, `linear:k=9.87`.
    pub fn parse(text: &str) -> Result<Self> {
        let (family, rest) = text
            .split_once(':')
            .ok_or_else(|| Error::Domain(format!("nonlinearity '{text}' is missing ':' (expected e.g. plus:p=3,q=1)")))?;
        let mut kv = std::collections::BTreeMap::new();
        for part in rest.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Domain(format!("bad nonlinearity parameter '{part}'")))?;
            let val: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("bad numeric value '{v}' in nonlinearity")))?;
            kv.insert(k.trim().to_string(), val);
        }
        let get = |key: &str| {
            kv.get(key)
                .copied()
                .ok_or_else(|| Error::Domain(format!("nonlinearity '{text}' is missing {key}=")))
        };
        match family.trim() {
            "plus" => NonlinearitySpec::power_sum(get("p")?, get("q")?),
            "minus" => NonlinearitySpec::power_diff(get("p")?, get("q")?),
            "linear" => Ok(NonlinearitySpec::linear(get("k")?)),
            other => Err(Error::Domain(format!(
                "unknown nonlinearity family '{other}' (expected plus, minus, or linear)"
            ))),
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            Kind::PowerSum { p, q } => format!("plus:p={p},q={q}"),
            Kind::PowerDiff { p, q } => format!("minus:p={p},q={q}"),
            Kind::Custom { label, .. } => label.clone(),
        }
    }

    /// Exponent pair for the power families, `None` for custom specs.
    pub fn exponents(&self) -> Option<(f64, f64)> {
        match self.kind {
            Kind::PowerSum { p, q } | Kind::PowerDiff { p, q } => Some((p, q)),
            Kind::Custom { .. } => None,
        }
    }

    pub fn is_power_family(&self) -> bool {
        self.exponents().is_some()
    }

    /// Evaluate `f`, `f'`, `F` at `s >= 0`.
    pub fn eval(&self, s: f64) -> Result<Eval> {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::Domain(format!("nonlinearity evaluated at invalid s = {s}")));
        }
        Ok(self.eval_unchecked(s))
    }

    fn eval_unchecked(&self, s: f64) -> Eval {
        match &self.kind {
            Kind::PowerSum { p, q } => Eval {
                f: s.powf(*p) + s.powf(*q),
                f_prime: p * s.powf(p - 1.0) + q * s.powf(q - 1.0),
                big_f: s.powf(p + 1.0) / (p + 1.0) + s.powf(q + 1.0) / (q + 1.0),
            },
            Kind::PowerDiff { p, q } => Eval {
                f: s.powf(*p) - s.powf(*q),
                f_prime: p * s.powf(p - 1.0) - q * s.powf(q - 1.0),
                big_f: s.powf(p + 1.0) / (p + 1.0) - s.powf(q + 1.0) / (q + 1.0),
            },
            Kind::Custom { f, f_prime, big_f, .. } => {
                Eval { f: f(s), f_prime: f_prime(s), big_f: big_f(s) }
            }
        }
    }

    /// `f(s)` without the full triple; `s` must be nonnegative.
    pub fn f(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        match &self.kind {
            Kind::PowerSum { p, q } => s.powf(*p) + s.powf(*q),
            Kind::PowerDiff { p, q } => s.powf(*p) - s.powf(*q),
            Kind::Custom { f, .. } => f(s),
        }
    }

    /// `F(s)`; `s` must be nonnegative.
    pub fn big_f(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        match &self.kind {
            Kind::PowerSum { p, q } => {
                s.powf(p + 1.0) / (p + 1.0) + s.powf(q + 1.0) / (q + 1.0)
            }
            Kind::PowerDiff { p, q } => {
                s.powf(p + 1.0) / (p + 1.0) - s.powf(q + 1.0) / (q + 1.0)
            }
            Kind::Custom { big_f, .. } => big_f(s),
        }
    }

    /// Odd extension `f(-s) = -f(s)`, used by boundary-residual integration
    /// that continues a trajectory past its first zero.
    pub fn f_extended(&self, s: f64) -> f64 {
        if s >= 0.0 {
            self.f(s)
        } else {
            -self.f(-s)
        }
    }

    /// `F/f`, with the removable 0/0 at the origin replaced by its limit 0.
    /// Near a positive zero of `f` the ratio genuinely diverges; callers
    /// exclude a guard band around `B` there.
    pub fn big_f_over_f(&self, s: f64) -> f64 {
        if s < RATIO_FLOOR {
            return 0.0;
        }
        self.big_f(s) / self.f(s)
    }

    /// `(F/f)'(s) = 1 - F f'/f^2`, same guard conventions as `big_f_over_f`.
    pub fn big_f_over_f_prime(&self, s: f64) -> f64 {
        let e = self.eval_unchecked(s);
        1.0 - e.big_f * e.f_prime / (e.f * e.f)
    }

    fn verify_antiderivative(&self) -> Result<()> {
        for &s in &[1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let integral = simpson_adaptive(|x| self.f(x), 0.0, s, 1e-10);
            let claimed = self.big_f(s);
            if (claimed - integral).abs() > 1e-7 * (1.0 + claimed.abs()) {
                return Err(Error::Data(format!(
                    "custom antiderivative inconsistent with f: F({s}) = {claimed} but ∫f = {integral}"
                )));
            }
        }
        Ok(())
    }

    /// Locate `B` and `beta`. Closed forms for the power families, bracketed
    /// root finding on a sampled sign pattern for custom specs.
    pub fn landmarks(&self) -> Result<Landmarks> {
        match &self.kind {
            Kind::PowerSum { .. } => {
                Ok(Landmarks { b: 0.0, beta: 0.0, has_negative_part: false })
            }
            Kind::PowerDiff { p, q } => {
                // f = s^q (s^(p-q) - 1) turns positive at 1; F vanishes where
                // s^(p-q) = (p+1)/(q+1).
                let beta = ((p + 1.0) / (q + 1.0)).powf(1.0 / (p - q));
                Ok(Landmarks { b: 1.0, beta, has_negative_part: true })
            }
            Kind::Custom { .. } => self.landmarks_sampled(),
        }
    }

    fn landmarks_sampled(&self) -> Result<Landmarks> {
        // Sign pattern of f on a geometric sweep.
        let (lo, hi, per_decade) = (1e-8, 1e3, 64.0);
        let count = (per_decade * (hi / lo as f64).log10()).ceil() as usize;
        let pts: Vec<f64> = (0..=count)
            .map(|i| lo * (hi / lo).powf(i as f64 / count as f64))
            .collect();
        let vals: Vec<f64> = pts.iter().map(|&s| self.f(s)).collect();

        let mut changes = Vec::new();
        for i in 1..vals.len() {
            if vals[i - 1] != 0.0 && vals[i] != 0.0 && vals[i - 1].signum() != vals[i].signum() {
                changes.push(i);
            }
        }

        if vals.iter().all(|&v| v > 0.0) {
            return Ok(Landmarks { b: 0.0, beta: 0.0, has_negative_part: false });
        }

        if vals[0] >= 0.0 {
            return Err(Error::Structure(format!(
                "unsupported sign structure: f({}) = {} is not negative although f goes negative later",
                pts[0], vals[0]
            )));
        }
        if changes.len() != 1 {
            return Err(Error::Structure(format!(
                "unsupported sign structure: f changes sign {} times on ({lo}, {hi}] (need exactly one - to + change)",
                changes.len()
            )));
        }
        let i = changes[0];
        if vals[i] < 0.0 {
            return Err(Error::Structure(
                "unsupported sign structure: f changes sign + to - (must turn positive and stay)".into(),
            ));
        }
        let b = rootfind::brent(|s| self.f(s), pts[i - 1], pts[i], LANDMARK_TOL)?.x;

        // F is negative at B and increases afterwards; bracket its return to 0.
        let start = (b * (1.0 + 1e-9)).max(1e-12);
        let (blo, bhi) = rootfind::bracket_outward(|s| self.big_f(s), start, 1.3, 1e9)
            .map_err(|_| {
                Error::Structure(format!(
                    "potential F never returns to zero above B = {b}; no beta landmark"
                ))
            })?;
        let beta = rootfind::brent(|s| self.big_f(s), blo, bhi, LANDMARK_TOL)?.x;
        Ok(Landmarks { b, beta, has_negative_part: true })
    }

    /// Decide conditions (f1)-(f4) for dimension `n`. Closed forms where the
    /// family admits them, dense sampling otherwise.
    pub fn check_conditions(&self, n: u32, grid: &SampleGrid) -> Result<ConditionReport> {
        if n < 2 {
            return Err(Error::Domain(format!("dimension n = {n} below 2")));
        }
        if grid.points_per_decade < MIN_POINTS_PER_DECADE {
            return Err(Error::Resolution(format!(
                "sample grid too coarse: {} points per decade (minimum {MIN_POINTS_PER_DECADE})",
                grid.points_per_decade
            )));
        }
        let landmarks = self.landmarks()?;
        let checks = vec![
            self.check_f1(),
            self.check_f2(&landmarks),
            self.check_f3(n, &landmarks, grid),
            self.check_f4(&landmarks, grid),
        ];
        Ok(ConditionReport { f: self.label(), n, landmarks, checks })
    }

    fn check_f1(&self) -> ConditionCheck {
        match self.kind {
            Kind::PowerSum { q, .. } | Kind::PowerDiff { q, .. } => ConditionCheck {
                condition: "f1",
                verdict: Verdict::Holds,
                witness_s: None,
                method: Method::ClosedForm,
                detail: format!(
                    "powers are continuous on [0,∞) and C¹ on (0,∞); f' ~ s^{} is integrable near 0",
                    q - 1.0
                ),
            },
            Kind::Custom { .. } => ConditionCheck {
                condition: "f1",
                verdict: Verdict::Holds,
                witness_s: None,
                method: Method::Assumed,
                detail: "regularity of custom evaluators is assumed, not checked".into(),
            },
        }
    }

    fn check_f2(&self, lm: &Landmarks) -> ConditionCheck {
        let (method, detail) = if self.is_power_family() {
            (Method::ClosedForm, "sign structure is built into the family".to_string())
        } else {
            (
                Method::Sampled,
                format!("sampled sign pattern consistent with B = {}, beta = {}", lm.b, lm.beta),
            )
        };
        ConditionCheck { condition: "f2", verdict: Verdict::Holds, witness_s: None, method, detail }
    }

    fn check_f3(&self, n: u32, lm: &Landmarks, grid: &SampleGrid) -> ConditionCheck {
        let bound = subcritical_bound(n);
        match self.kind {
            Kind::PowerSum { p, q } => {
                // (F/f)' >= bound for all s > 0 is equivalent to
                // sup_s F f'/f^2 <= 1 - bound = (n+2)/(2n). The sup is
                // p/(p+1) (approached as s -> ∞) when p <= q+1, and
                // (p+q+1)^2 / (4(p+1)(q+1)) (attained) when p > q+1.
                let cap = 1.0 - bound;
                let (sup, attained_at) = if p > q + 1.0 {
                    let sup = (p + q + 1.0).powi(2) / (4.0 * (p + 1.0) * (q + 1.0));
                    let s_star = ((p - q + 1.0) / (p - q - 1.0)).powf(1.0 / (p - q));
                    (sup, Some(s_star))
                } else {
                    (p / (p + 1.0), None)
                };
                if leq_with_slack(sup, cap) {
                    ConditionCheck {
                        condition: "f3",
                        verdict: Verdict::Holds,
                        witness_s: None,
                        method: Method::ClosedForm,
                        detail: format!("sup F f'/f² = {sup} <= (n+2)/(2n) = {cap}"),
                    }
                } else {
                    let witness = attained_at
                        .or_else(|| self.tail_witness_below(bound, lm.beta.max(1.0)));
                    ConditionCheck {
                        condition: "f3",
                        verdict: Verdict::Fails,
                        witness_s: witness,
                        method: Method::ClosedForm,
                        detail: format!("sup F f'/f² = {sup} exceeds (n+2)/(2n) = {cap}"),
                    }
                }
            }
            Kind::PowerDiff { p, q } => {
                // In t = s^(p-q), (F/f)' = 1/(p+1) + A/(t-1) + B/(t-1)^2 with
                // A = (p-q)(p-q-1)/((p+1)(q+1)), B = (p-q)^2/((p+1)(q+1)).
                // For p >= q+1 every term is nonnegative and the infimum is
                // 1/(p+1); for q < p < q+1 the minimum value is
                // (1/(p+1)) (1 - (q+1-p)^2 / (4(q+1))), attained above beta.
                let (inf, attained_at) = if p >= q + 1.0 {
                    (1.0 / (p + 1.0), None)
                } else {
                    let inf = (1.0 / (p + 1.0)) * (1.0 - (q + 1.0 - p).powi(2) / (4.0 * (q + 1.0)));
                    let t_star = 1.0 + 2.0 * (p - q) / (q + 1.0 - p);
                    (inf, Some(t_star.powf(1.0 / (p - q))))
                };
                if geq_with_slack(inf, bound) {
                    ConditionCheck {
                        condition: "f3",
                        verdict: Verdict::Holds,
                        witness_s: None,
                        method: Method::ClosedForm,
                        detail: format!("inf (F/f)' = {inf} >= (n-2)/(2n) = {bound}"),
                    }
                } else {
                    let witness = attained_at
                        .or_else(|| self.tail_witness_below(bound, lm.beta));
                    ConditionCheck {
                        condition: "f3",
                        verdict: Verdict::Fails,
                        witness_s: witness,
                        method: Method::ClosedForm,
                        detail: format!("inf (F/f)' = {inf} below (n-2)/(2n) = {bound}"),
                    }
                }
            }
            Kind::Custom { .. } => {
                let lo = lm.beta.max(grid.floor);
                let points = geometric_grid(lo, grid.s_max, grid.points_per_decade);
                let mut worst = f64::INFINITY;
                let mut witness = None;
                for &s in &points {
                    let v = self.big_f_over_f_prime(s);
                    if v < worst {
                        worst = v;
                    }
                    if witness.is_none() && !geq_with_slack(v, bound) {
                        witness = Some(s);
                    }
                }
                if witness.is_none() {
                    ConditionCheck {
                        condition: "f3",
                        verdict: Verdict::Holds,
                        witness_s: None,
                        method: Method::Sampled,
                        detail: format!("min sampled (F/f)' = {worst} >= (n-2)/(2n) = {bound}"),
                    }
                } else {
                    ConditionCheck {
                        condition: "f3",
                        verdict: Verdict::Fails,
                        witness_s: witness,
                        method: Method::Sampled,
                        detail: format!("sampled (F/f)' dips to {worst} below (n-2)/(2n) = {bound}"),
                    }
                }
            }
        }
    }

    /// Find an s beyond `from` where `(F/f)'` sits below `bound`, for
    /// closed-form failures whose violation region is a tail at infinity.
    fn tail_witness_below(&self, bound: f64, from: f64) -> Option<f64> {
        let mut s = from.max(1.0) * 2.0;
        for _ in 0..60 {
            if self.big_f_over_f_prime(s) < bound {
                return Some(s);
            }
            s *= 4.0;
            if s > 1e14 {
                break;
            }
        }
        None
    }

    fn check_f4(&self, lm: &Landmarks, grid: &SampleGrid) -> ConditionCheck {
        if let Kind::PowerSum { p, q } = self.kind {
            // With B = 0 the condition reads (p-1)s^p + (q-1)s^q >= 0:
            // true exactly when the low exponent is at least 1.
            if q >= 1.0 {
                return ConditionCheck {
                    condition: "f4",
                    verdict: Verdict::Holds,
                    witness_s: None,
                    method: Method::ClosedForm,
                    detail: format!("(p-1)s^p + (q-1)s^q >= 0 since q = {q} >= 1"),
                };
            }
            // The deficit (1-q)s^q - (p-1)s^p is positive for small s.
            let witness = if p > 1.0 {
                0.5 * ((1.0 - q) / (p - 1.0)).powf(1.0 / (p - q))
            } else {
                1.0
            };
            return ConditionCheck {
                condition: "f4",
                verdict: Verdict::Fails,
                witness_s: Some(witness),
                method: Method::ClosedForm,
                detail: format!("low exponent q = {q} < 1 makes f/s decreasing near 0"),
            };
        }

        // General sampled check of f(s) <= f'(s)(s - B) above B, plus the
        // non-degeneracy clause: the two sides must not agree identically.
        let lo = (lm.b * (1.0 + 1e-9)).max(grid.floor);
        let points = geometric_grid(lo, grid.s_max, grid.points_per_decade);
        let mut witness = None;
        let mut max_gap_rel = 0.0f64;
        for &s in &points {
            let e = self.eval_unchecked(s);
            let rhs = e.f_prime * (s - lm.b);
            let scale = e.f.abs() + rhs.abs() + 1e-300;
            let deficit = (e.f - rhs) / scale;
            if deficit > CONDITION_SLACK && witness.is_none() {
                witness = Some(s);
            }
            max_gap_rel = max_gap_rel.max(-deficit);
        }
        if let Some(s) = witness {
            return ConditionCheck {
                condition: "f4",
                verdict: Verdict::Fails,
                witness_s: Some(s),
                method: Method::Sampled,
                detail: format!("f(s) > f'(s)(s - B) at s = {s}"),
            };
        }
        if max_gap_rel <= CONDITION_SLACK {
            return ConditionCheck {
                condition: "f4",
                verdict: Verdict::Fails,
                witness_s: None,
                method: Method::Sampled,
                detail: "f(s) = f'(s)(s - B) identically: superlinearity is degenerate".into(),
            };
        }
        ConditionCheck {
            condition: "f4",
            verdict: Verdict::Holds,
            witness_s: None,
            method: Method::Sampled,
            detail: format!("f <= f'(s - B) on the grid (max strict margin {max_gap_rel:.3e})"),
        }
    }
}

/// `(n-2)/(2n)`, the lower bound required of `(F/f)'`.
pub fn subcritical_bound(n: u32) -> f64 {
    (n as f64 - 2.0) / (2.0 * n as f64)
}

fn leq_with_slack(a: f64, b: f64) -> bool {
    a <= b + CONDITION_SLACK * b.abs().max(1.0)
}

fn geq_with_slack(a: f64, b: f64) -> bool {
    a >= b - CONDITION_SLACK * b.abs().max(1.0)
}

pub(crate) fn geometric_grid(lo: f64, hi: f64, points_per_decade: usize) -> Vec<f64> {
    debug_assert!(lo > 0.0 && hi > lo);
    let decades = (hi / lo).log10();
    let count = ((points_per_decade as f64) * decades).ceil().max(2.0) as usize;
    (1..=count).map(|i| lo * (hi / lo).powf(i as f64 / count as f64)).collect()
}

/// Adaptive Simpson quadrature (used only to validate custom antiderivatives).
fn simpson_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, right, 0.5 * tol, depth - 1)
        }
    }
    let whole = simpson(&f, a, b);
    recurse(&f, a, b, whole, tol, 28)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SampleGrid {
        SampleGrid::default()
    }

    #[test]
    fn eval_matches_hand_values() {
        let minus = NonlinearitySpec::power_diff(3.0, 1.0).unwrap();
        let e = minus.eval(1.0).unwrap();
        assert_eq!(e.f, 0.0);
        assert_eq!(e.f_prime, 2.0);
        assert!((e.big_f - (-0.25)).abs() < 1e-15);

        let plus = NonlinearitySpec::power_sum(3.0, 1.0).unwrap();
        let e0 = plus.eval(0.0).unwrap();
        assert_eq!(e0.f, 0.0);
        assert_eq!(e0.f_prime, 1.0);
        assert_eq!(e0.big_f, 0.0);
    }

    #[test]
    fn f_prime_at_zero_flags_infinite_slope() {
        let spec = NonlinearitySpec::power_sum(2.0, 0.5).unwrap();
        let e = spec.eval(0.0).unwrap();
        assert!(e.f_prime.is_infinite() && e.f_prime > 0.0);
        // Not an error: the value is a flag.
        assert_eq!(e.f, 0.0);
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(NonlinearitySpec::power_sum(2.0, 2.0).is_err());
        assert!(NonlinearitySpec::power_diff(1.0, 2.0).is_err());
        assert!(NonlinearitySpec::power_sum(-1.0, 0.5).is_err());
        assert!(NonlinearitySpec::power_diff(2.0, 0.0).is_err());
    }

    #[test]
    fn power_sum_canonicalizes_symmetric_pair() {
        let spec = NonlinearitySpec::power_sum(2.0, 7.0).unwrap();
        assert_eq!(spec.exponents(), Some((7.0, 2.0)));
        assert_eq!(spec.label(), "plus:p=7,q=2");
    }

    #[test]
    fn landmarks_closed_forms() {
        let lm = NonlinearitySpec::power_diff(3.0, 1.0).unwrap().landmarks().unwrap();
        assert_eq!(lm.b, 1.0);
        assert!((lm.beta - std::f64::consts::SQRT_2).abs() < 1e-14);

        let lm2 = NonlinearitySpec::power_diff(2.0, 1.0).unwrap().landmarks().unwrap();
        assert!((lm2.beta - 1.5).abs() < 1e-14);

        let lm3 = NonlinearitySpec::power_sum(3.0, 1.0).unwrap().landmarks().unwrap();
        assert_eq!((lm3.b, lm3.beta), (0.0, 0.0));
        assert!(!lm3.has_negative_part);
    }

    #[test]
    fn beta_straddles_potential_zero() {
        // Independent oracle: F changes sign across the reported beta.
        for (p, q) in [(3.0, 1.0), (2.0, 1.0), (4.0, 2.5), (3.0, 2.0)] {
            let spec = NonlinearitySpec::power_diff(p, q).unwrap();
            let beta = spec.landmarks().unwrap().beta;
            assert!(spec.big_f(beta * (1.0 - 1e-9)) < 0.0);
            assert!(spec.big_f(beta * (1.0 + 1e-9)) > 0.0);
        }
    }

    #[test]
    fn sampled_landmarks_match_closed_form() {
        // Same minus-family nonlinearity supplied as a custom triple: the
        // sampled detector must reproduce the closed-form landmarks.
        let spec = NonlinearitySpec::custom(
            |s| s.powi(3) - s,
            |s| 3.0 * s * s - 1.0,
            |s| 0.25 * s.powi(4) - 0.5 * s * s,
            "cubic-minus-linear",
        )
        .unwrap();
        let lm = spec.landmarks().unwrap();
        assert!((lm.b - 1.0).abs() < 1e-10, "B = {}", lm.b);
        assert!((lm.beta - std::f64::consts::SQRT_2).abs() < 1e-10);
        assert!(lm.has_negative_part);
    }

    #[test]
    fn linear_hook_landmarks_and_degenerate_f4() {
        let spec = NonlinearitySpec::linear(std::f64::consts::PI.powi(2));
        let lm = spec.landmarks().unwrap();
        assert_eq!((lm.b, lm.beta), (0.0, 0.0));
        // f = f'(s-B) identically: the strictness clause of (f4) fails.
        let report = spec.check_conditions(3, &grid()).unwrap();
        assert_eq!(report.check("f4").unwrap().verdict, Verdict::Fails);
        assert_eq!(report.check("f3").unwrap().verdict, Verdict::Holds);
    }

    #[test]
    fn custom_with_wrong_antiderivative_rejected() {
        let err = NonlinearitySpec::custom(
            |s| s * s,
            |s| 2.0 * s,
            |s| s * s, // should be s^3/3
            "broken",
        );
        assert!(matches!(err, Err(Error::Data(_))));
    }

    #[test]
    fn multi_hump_custom_rejected() {
        // f = -s(s-1)(s-2): negative, positive, negative again.
        let err = NonlinearitySpec::custom(
            |s| -s * (s - 1.0) * (s - 2.0),
            |s| -(3.0 * s * s - 6.0 * s + 2.0),
            |s| -(s.powi(4) / 4.0 - s.powi(3) + s * s),
            "two-humps",
        )
        .unwrap()
        .landmarks();
        assert!(matches!(err, Err(Error::Structure(_))), "{err:?}");
    }

    #[test]
    fn coarse_grid_rejected() {
        let spec = NonlinearitySpec::power_sum(3.0, 1.0).unwrap();
        let coarse = SampleGrid { points_per_decade: 4, ..grid() };
        assert!(matches!(spec.check_conditions(3, &coarse), Err(Error::Resolution(_))));
    }

    #[test]
    fn subcritical_sum_holds_supercritical_fails() {
        // p+q+1 below the threshold: holds for n = 3.
        let ok = NonlinearitySpec::power_sum(3.0, 1.0).unwrap();
        let rep = ok.check_conditions(3, &grid()).unwrap();
        assert_eq!(rep.check("f3").unwrap().verdict, Verdict::Holds);

        // s^7 + s^2 in dimension 3: fails with a concrete witness where the
        // sampled ratio confirms the violation.
        let bad = NonlinearitySpec::power_sum(7.0, 2.0).unwrap();
        let rep = bad.check_conditions(3, &grid()).unwrap();
        let c = rep.check("f3").unwrap();
        assert_eq!(c.verdict, Verdict::Fails);
        let s_star = c.witness_s.expect("witness expected");
        assert!(bad.big_f_over_f_prime(s_star) < subcritical_bound(3));
    }

    #[test]
    fn pure_power_boundary_is_exact() {
        // f = s^p as a custom spec: (F/f)' = 1/(p+1) everywhere, so the
        // sampled verdict must flip exactly at p = (n+2)/(n-2).
        let pure = |p: f64| {
            NonlinearitySpec::custom(
                move |s| s.powf(p),
                move |s| p * s.powf(p - 1.0),
                move |s| s.powf(p + 1.0) / (p + 1.0),
                format!("pure:p={p}"),
            )
            .unwrap()
        };
        let at = pure(5.0).check_conditions(3, &grid()).unwrap();
        assert_eq!(at.check("f3").unwrap().verdict, Verdict::Holds);
        let above = pure(5.1).check_conditions(3, &grid()).unwrap();
        assert_eq!(above.check("f3").unwrap().verdict, Verdict::Fails);
        let below = pure(4.9).check_conditions(3, &grid()).unwrap();
        assert_eq!(below.check("f3").unwrap().verdict, Verdict::Holds);
    }

    #[test]
    fn minus_family_f3_closed_forms() {
        // p >= q+1 branch: holds up to the critical exponent.
        let rep = NonlinearitySpec::power_diff(3.0, 1.0)
            .unwrap()
            .check_conditions(3, &grid())
            .unwrap();
        assert_eq!(rep.check("f3").unwrap().verdict, Verdict::Holds);
        let rep = NonlinearitySpec::power_diff(5.5, 1.0)
            .unwrap()
            .check_conditions(3, &grid())
            .unwrap();
        let c = rep.check("f3").unwrap();
        assert_eq!(c.verdict, Verdict::Fails);
        assert!(c.witness_s.is_some());

        // q < p < q+1 branch: minimum value formula, verified against a dense
        // numerical minimum of (F/f)'.
        let spec = NonlinearitySpec::power_diff(4.8, 4.5).unwrap();
        let inf_formula = (1.0 / 5.8) * (1.0 - (0.7f64).powi(2) / (4.0 * 5.5));
        let beta = spec.landmarks().unwrap().beta;
        let mut inf_sampled = f64::INFINITY;
        for &s in &geometric_grid(beta, 1e4, 512) {
            inf_sampled = inf_sampled.min(spec.big_f_over_f_prime(s));
        }
        assert!(
            (inf_formula - inf_sampled).abs() < 1e-6,
            "formula {inf_formula} vs sampled {inf_sampled}"
        );
        let rep = spec.check_conditions(3, &grid()).unwrap();
        assert_eq!(rep.check("f3").unwrap().verdict, Verdict::Holds);
    }

    #[test]
    fn f4_verdicts_across_families() {
        // Plus family with both exponents >= 1: always holds.
        for (p, q) in [(3.0, 1.0), (2.0, 1.0), (7.0, 2.0), (1.5, 1.0)] {
            let rep = NonlinearitySpec::power_sum(p, q)
                .unwrap()
                .check_conditions(3, &grid())
                .unwrap();
            assert_eq!(rep.check("f4").unwrap().verdict, Verdict::Holds, "plus p={p} q={q}");
        }
        // Low exponent below 1: fails, witness actually violates.
        let spec = NonlinearitySpec::power_sum(3.0, 0.5).unwrap();
        let rep = spec.check_conditions(3, &grid()).unwrap();
        let c = rep.check("f4").unwrap();
        assert_eq!(c.verdict, Verdict::Fails);
        let s = c.witness_s.unwrap();
        let e = spec.eval(s).unwrap();
        assert!(e.f > e.f_prime * s);

        // Minus family with p > 1: holds on the sampled grid.
        for (p, q) in [(3.0, 1.0), (3.0, 2.0), (2.0, 0.5), (4.8, 4.5)] {
            let rep = NonlinearitySpec::power_diff(p, q)
                .unwrap()
                .check_conditions(3, &grid())
                .unwrap();
            assert_eq!(rep.check("f4").unwrap().verdict, Verdict::Holds, "minus p={p} q={q}");
        }
        // p <= 1 loses superlinearity at large s.
        let rep = NonlinearitySpec::power_diff(0.9, 0.3)
            .unwrap()
            .check_conditions(3, &grid())
            .unwrap();
        assert_eq!(rep.check("f4").unwrap().verdict, Verdict::Fails);
    }

    #[test]
    fn ratio_guards_origin() {
        let spec = NonlinearitySpec::power_sum(3.0, 1.0).unwrap();
        assert_eq!(spec.big_f_over_f(0.0), 0.0);
        assert_eq!(spec.big_f_over_f(1e-12), 0.0);
        // Just above the floor the ratio is small and positive.
        let r = spec.big_f_over_f(1e-6);
        assert!(r > 0.0 && r < 1e-5);
    }

    #[test]
    fn parse_round_trips() {
        let spec = NonlinearitySpec::parse("minus:p=3,q=1").unwrap();
        assert_eq!(spec.label(), "minus:p=3,q=1");
        let spec = NonlinearitySpec::parse("plus:q=1,p=3").unwrap();
        assert_eq!(spec.label(), "plus:p=3,q=1");
        let spec = NonlinearitySpec::parse("linear:k=2.5").unwrap();
        assert_eq!(spec.f(2.0), 5.0);
        assert!(NonlinearitySpec::parse("times:p=1,q=2").is_err());
        assert!(NonlinearitySpec::parse("plus:p=3").is_err());
    }

    #[test]
    fn odd_extension() {
        let spec = NonlinearitySpec::power_sum(2.0, 1.0).unwrap();
        assert_eq!(spec.f_extended(2.0), 6.0);
        assert_eq!(spec.f_extended(-2.0), -6.0);
    }
}
