//! Closed-form uniqueness regions in the `(q, p)` exponent plane.
//!
//! For the two-power families `s^p + s^q` and `s^p - s^q` (`p > q > 0`) the
//! structural conditions on `f` reduce to explicit inequalities between the
//! exponents and the dimension. Two thresholds organize everything:
//!
//! * the critical exponent `(n+2)/(n-2)` (infinite in dimension 2), and
//! * the parabola-like bound
//!   `P(n, q) = (2(q+1) + sqrt((n+2)(q+1)((n+2) - (n-2)q))) / n`,
//!   the larger root of the quadratic that expresses the worst case of the
//!   subcriticality condition for the difference family (and for the sum
//!   family with a small second exponent).
//!
//! `P(n, .)` rises from `(n+4)/n` at `q = 0+` to the critical exponent at
//! `q = 4/(n-2)`, then falls back to meet the diagonal `p = q` at
//! `q_cap(n) = (4 + sqrt(2n(n+2))) / (2(n-2))`, beyond which the region is
//! empty. `classify_plus` and `classify_minus` fold these thresholds into
//! one verdict per parameter point, labeling which case of the region
//! applies; boundaries are inclusive.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rootfind::golden_min;

fn require_dimension(n: u32) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("dimension n = {n} out of range: need n >= 2")));
    }
    Ok(())
}

/// `(n+2)/(n-2)`, infinite in dimension 2.
pub fn critical_exponent(n: u32) -> Result<f64> {
    require_dimension(n)?;
    Ok(if n == 2 {
        f64::INFINITY
    } else {
        (n as f64 + 2.0) / (n as f64 - 2.0)
    })
}

/// Largest `q` for which `P(n, q) > q`: `(4 + sqrt(2n(n+2))) / (2(n-2))`,
/// infinite in dimension 2.
pub fn q_cap(n: u32) -> Result<f64> {
    require_dimension(n)?;
    let nf = n as f64;
    Ok(if n == 2 {
        f64::INFINITY
    } else {
        (4.0 + (2.0 * nf * (nf + 2.0)).sqrt()) / (2.0 * (nf - 2.0))
    })
}

fn p_bound_radicand(n: u32, q: f64) -> f64 {
    let nf = n as f64;
    (nf + 2.0) * (q + 1.0) * ((nf + 2.0) - (nf - 2.0) * q)
}

/// Upper root `P(n, q)` of the exponent-plane boundary quadratic. Defined
/// for `n > 2` and `q` below the critical exponent (the radicand must be
/// positive); dimension 2 has no such finite boundary.
pub fn p_upper(n: u32, q: f64) -> Result<f64> {
    require_dimension(n)?;
    if n == 2 {
        return Err(Error::Domain("the boundary curve P(n, q) needs n > 2".into()));
    }
    if !(q > 0.0) {
        return Err(Error::Domain(format!("exponent q = {q} out of range: need q > 0")));
    }
    let rad = p_bound_radicand(n, q);
    if rad <= 0.0 {
        return Err(Error::Domain(format!(
            "P({n}, {q}) undefined: q at or beyond the critical exponent"
        )));
    }
    Ok((2.0 * (q + 1.0) + rad.sqrt()) / n as f64)
}

/// Lower root of the same quadratic.
pub fn p_lower(n: u32, q: f64) -> Result<f64> {
    let upper = p_upper(n, q)?; // validates
    let rad = p_bound_radicand(n, q).sqrt();
    Ok(upper - 2.0 * rad / n as f64)
}

/// `P(n, q) -> (n+4)/n` as `q -> 0+`: the small-`q` limit of the boundary.
pub fn p_upper_small_q_limit(n: u32) -> Result<f64> {
    require_dimension(n)?;
    if n == 2 {
        return Err(Error::Domain("the boundary curve P(n, q) needs n > 2".into()));
    }
    Ok((n as f64 + 4.0) / n as f64)
}

/// Location and value of the maximum of `q -> P(n, q)`, by grid argmax plus
/// golden-section refinement. The maximum sits at `q = 4/(n-2)`, where
/// `P` equals the critical exponent.
pub fn p_upper_maximizer(n: u32) -> Result<(f64, f64)> {
    require_dimension(n)?;
    let cap = q_cap(n)?;
    if !cap.is_finite() {
        return Err(Error::Domain("the boundary curve P(n, q) needs n > 2".into()));
    }
    const GRID: usize = 2048;
    let lo = 1e-4;
    let mut best = (lo, f64::NEG_INFINITY);
    for k in 0..=GRID {
        let q = lo + (cap - lo) * k as f64 / GRID as f64;
        if let Ok(p) = p_upper(n, q) {
            if p > best.1 {
                best = (q, p);
            }
        }
    }
    let half = (cap - lo) / GRID as f64;
    let a = (best.0 - half).max(lo);
    let b = (best.0 + half).min(cap);
    let q_star = golden_min(|q| -p_upper(n, q).unwrap_or(f64::NEG_INFINITY), a, b, 1e-12);
    Ok((q_star, p_upper(n, q_star)?))
}

/// The `p`-threshold for the sum family `s^p + s^q` at a given `(n, q)`:
/// critical for large dimension or large `q`, the curve `P(n, q)` for small
/// `q` in dimensions 3..5, and `q + 1 + 2 sqrt(q+1)` in dimension 2.
pub fn plus_bound(n: u32, q: f64) -> Result<f64> {
    require_dimension(n)?;
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::Domain(format!("exponent q = {q} out of range: need q > 0")));
    }
    if n == 2 {
        return Ok(q + 1.0 + 2.0 * (q + 1.0).sqrt());
    }
    let resonant = 4.0 / (n as f64 - 2.0);
    if n >= 6 || q >= resonant {
        critical_exponent(n)
    } else {
        p_upper(n, q)
    }
}

/// The `p`-threshold for the difference family `s^p - s^q`: critical up to
/// `q = 4/(n-2)`, the curve `P(n, q)` up to `q_cap`, then the diagonal
/// (empty region); unbounded in dimension 2.
pub fn minus_bound(n: u32, q: f64) -> Result<f64> {
    require_dimension(n)?;
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::Domain(format!("exponent q = {q} out of range: need q > 0")));
    }
    if n == 2 {
        return Ok(f64::INFINITY);
    }
    let resonant = 4.0 / (n as f64 - 2.0);
    if q <= resonant {
        critical_exponent(n)
    } else if q < q_cap(n)? {
        p_upper(n, q)
    } else {
        // The region is empty: no p > q is admissible.
        Ok(q)
    }
}

/// One point of the exponent plane, classified.
#[derive(Debug, Clone, Serialize)]
pub struct RegionVerdict {
    pub family: &'static str,
    pub n: u32,
    pub p: f64,
    pub q: f64,
    pub inside: bool,
    /// Which case of the region matched, when inside.
    pub case: Option<&'static str>,
    /// For the difference family, whether the finite-boundary (annulus)
    /// version of the statement also applies (`p > 1`). The sum family
    /// carries no such extra requirement.
    pub finite_b_applies: Option<bool>,
    pub detail: String,
}

fn validate_exponents(n: u32, p: f64, q: f64) -> Result<()> {
    require_dimension(n)?;
    if !(q > 0.0 && p > q && p.is_finite() && q.is_finite()) {
        return Err(Error::Domain(format!(
            "exponents (p, q) = ({p}, {q}) out of range: need 0 < q < p"
        )));
    }
    Ok(())
}

/// Classify `(n, p, q)` for the sum family `s^p + s^q`. Cases, first match
/// wins, all boundaries inclusive:
///
/// * (i)   `n >= 6`, `1 <= q < p <= (n+2)/(n-2)`;
/// * (ii)  `2 < n < 6`, `4/(n-2) <= q < p <= (n+2)/(n-2)`;
/// * (iii) `2 < n < 6`, `0 < q < 4/(n-2)`, `q < p <= P(n, q)`;
/// * (iv)  `n = 2`, `0 < q < p <= q + 1 + 2 sqrt(q+1)`.
///
/// The statement needs `p > 1` throughout.
pub fn classify_plus(n: u32, p: f64, q: f64) -> Result<RegionVerdict> {
    validate_exponents(n, p, q)?;
    let mut verdict = RegionVerdict {
        family: "plus",
        n,
        p,
        q,
        inside: false,
        case: None,
        finite_b_applies: None,
        detail: String::new(),
    };
    if p <= 1.0 {
        verdict.detail = format!("outside: the sum family needs p > 1, got p = {p}");
        return Ok(verdict);
    }
    if n == 2 {
        let bound = q + 1.0 + 2.0 * (q + 1.0).sqrt();
        if p <= bound {
            verdict.inside = true;
            verdict.case = Some("iv");
            verdict.detail = format!("n = 2 and p <= q + 1 + 2 sqrt(q+1) = {bound}");
        } else {
            verdict.detail = format!("outside: p > q + 1 + 2 sqrt(q+1) = {bound}");
        }
        return Ok(verdict);
    }
    let crit = critical_exponent(n)?;
    let resonant = 4.0 / (n as f64 - 2.0);
    if n >= 6 && q >= 1.0 && p <= crit {
        verdict.inside = true;
        verdict.case = Some("i");
        verdict.detail = format!("n >= 6, q >= 1, p <= critical = {crit}");
    } else if n < 6 && q >= resonant && p <= crit {
        verdict.inside = true;
        verdict.case = Some("ii");
        verdict.detail = format!("q >= 4/(n-2) = {resonant}, p <= critical = {crit}");
    } else if n < 6 && q < resonant {
        let bound = p_upper(n, q)?;
        if p <= bound {
            verdict.inside = true;
            verdict.case = Some("iii");
            verdict.detail = format!("q < 4/(n-2) = {resonant}, p <= P(n, q) = {bound}");
        } else {
            verdict.detail = format!("outside: p > P(n, q) = {bound}");
        }
    } else if n >= 6 && q < 1.0 {
        verdict.detail = "outside: n >= 6 needs q >= 1".into();
    } else {
        verdict.detail = format!("outside: p > critical = {crit}");
    }
    Ok(verdict)
}

/// Classify `(n, p, q)` for the difference family `s^p - s^q`. Cases, first
/// match wins, all boundaries inclusive:
///
/// * (i)   `n > 2`, `0 < q <= 4/(n-2)`, `q < p <= (n+2)/(n-2)`;
/// * (ii)  `n > 2`, `4/(n-2) < q < q_cap(n)`, `q < p <= P(n, q)`;
/// * (iii) `n = 2`, `0 < q < p` (no upper bound).
///
/// `finite_b_applies` records whether the finite-boundary version of the
/// statement also holds (`p > 1`).
pub fn classify_minus(n: u32, p: f64, q: f64) -> Result<RegionVerdict> {
    validate_exponents(n, p, q)?;
    let mut verdict = RegionVerdict {
        family: "minus",
        n,
        p,
        q,
        inside: false,
        case: None,
        finite_b_applies: Some(p > 1.0),
        detail: String::new(),
    };
    if n == 2 {
        verdict.inside = true;
        verdict.case = Some("iii");
        verdict.detail = "n = 2: every 0 < q < p qualifies".into();
        return Ok(verdict);
    }
    let crit = critical_exponent(n)?;
    let resonant = 4.0 / (n as f64 - 2.0);
    let cap = q_cap(n)?;
    if q <= resonant && p <= crit {
        verdict.inside = true;
        verdict.case = Some("i");
        verdict.detail = format!("q <= 4/(n-2) = {resonant}, p <= critical = {crit}");
    } else if q > resonant && q < cap {
        let bound = p_upper(n, q)?;
        if p <= bound {
            verdict.inside = true;
            verdict.case = Some("ii");
            verdict.detail = format!("4/(n-2) < q < q_cap = {cap}, p <= P(n, q) = {bound}");
        } else {
            verdict.detail = format!("outside: p > P(n, q) = {bound}");
        }
    } else if q >= cap {
        verdict.detail = format!("outside: q >= q_cap = {cap}, the region is empty");
    } else {
        verdict.detail = format!("outside: p > critical = {crit}");
    }
    Ok(verdict)
}

/// Sample the boundary curve `q -> p-threshold` for one family on a `q`
/// interval. Infinite thresholds (dimension 2 difference family) are
/// returned as `f64::INFINITY`.
pub fn region_curve(
    family: &str,
    n: u32,
    q_lo: f64,
    q_hi: f64,
    count: usize,
) -> Result<Vec<(f64, f64)>> {
    require_dimension(n)?;
    if !(q_lo > 0.0 && q_hi > q_lo) {
        return Err(Error::Domain(format!(
            "invalid q interval [{q_lo}, {q_hi}]: need 0 < q_lo < q_hi"
        )));
    }
    if count < 2 {
        return Err(Error::Domain("curve needs at least 2 samples".into()));
    }
    let bound: fn(u32, f64) -> Result<f64> = match family {
        "plus" => plus_bound,
        "minus" => minus_bound,
        other => {
            return Err(Error::Domain(format!(
                "unknown family {other:?}: expected \"plus\" or \"minus\""
            )))
        }
    };
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let q = q_lo + (q_hi - q_lo) * k as f64 / (count - 1) as f64;
        out.push((q, bound(n, q)?));
    }
    Ok(out)
}
