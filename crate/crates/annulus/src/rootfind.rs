//! Bracketed scalar root finding and 1-d minimization.
//!
//! `brent` is the classic inverse-quadratic/secant/bisection hybrid: it keeps
//! a guaranteed bracket at every iteration and falls back to bisection
//! whenever the interpolated step misbehaves, so it converges for any
//! continuous function with a sign change.

use crate::error::{Error, Result};

/// Outcome of a bracketed root search.
#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub f_x: f64,
    pub iterations: usize,
    /// Final bracketing interval (lo, hi) around the root.
    pub bracket: (f64, f64),
}

/// Find a root of `f` in `[a, b]`, where `f(a)` and `f(b)` have opposite
/// signs. Stops when the bracket is narrower than `xtol` (absolute, plus a
/// relative floor at machine precision) or an exact zero is hit.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<Root> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::Domain(format!("invalid interval [{a}, {b}]")));
    }
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(Root { x: a, f_x: 0.0, iterations: 0, bracket: (a, a) });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, f_x: 0.0, iterations: 0, bracket: (b, b) });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket(format!(
            "no sign change on [{a}, {b}]: f({a}) = {fa}, f({b}) = {fb}"
        )));
    }

    let (mut a, mut b) = (a, b);
    // Invariant: fb is the smaller residual, [a or c, b] brackets the root.
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;

    for iter in 1..=200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            let (lo, hi) = if b <= c { (b, c) } else { (c, b) };
            return Ok(Root { x: b, f_x: fb, iterations: iter, bracket: (lo, hi) });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Attempt inverse quadratic interpolation (secant if a == c).
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(Error::Bracket(format!(
        "root refinement did not converge on [{a}, {b}] (residual {fb})"
    )))
}

/// Expand geometrically from `start` until `f` changes sign, then return the
/// bracketing pair. Scans `start * factor^k` for k = 0.. up to `limit`.
pub fn bracket_outward<F: FnMut(f64) -> f64>(
    mut f: F,
    start: f64,
    factor: f64,
    limit: f64,
) -> Result<(f64, f64)> {
    debug_assert!(start > 0.0 && factor > 1.0);
    let mut lo = start;
    let mut flo = f(lo);
    if flo == 0.0 {
        return Ok((lo, lo));
    }
    while lo < limit {
        let hi = (lo * factor).min(limit);
        let fhi = f(hi);
        if fhi == 0.0 || flo.signum() != fhi.signum() {
            return Ok((lo, hi));
        }
        if hi >= limit {
            break;
        }
        lo = hi;
        flo = fhi;
    }
    Err(Error::Bracket(format!(
        "no sign change found expanding from {start} up to {limit}"
    )))
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
/// Returns the abscissa of the minimum to within `xtol`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (a, b);
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r.x - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!(r.bracket.0 <= r.x && r.x <= r.bracket.1);
    }

    #[test]
    fn finds_cos_root() {
        let r = brent(|x| x.cos(), 1.0, 2.0, 1e-14).unwrap();
        assert!((r.x - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn endpoint_root_short_circuits() {
        let r = brent(|x| x - 1.0, 1.0, 2.0, 1e-14).unwrap();
        assert_eq!(r.x, 1.0);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn rejects_unbracketed() {
        assert!(matches!(
            brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(crate::Error::Bracket(_))
        ));
    }

    #[test]
    fn handles_steep_and_flat_mix() {
        // Flat for x < 1, steep after: bisection fallback must engage.
        let r = brent(|x: f64| (x - 1.0).powi(3) * 1e6 - 1e-9, 0.0, 2.0, 1e-13).unwrap();
        let expected = 1.0 + 1e-5;
        assert!((r.x - expected).abs() < 1e-9, "got {}", r.x);
    }

    #[test]
    fn outward_bracket_finds_decade() {
        let (lo, hi) = bracket_outward(|x| x - 37.0, 1.0, 2.0, 1e3).unwrap();
        assert!(lo < 37.0 && 37.0 < hi);
    }

    #[test]
    fn golden_finds_parabola_min() {
        let x = golden_min(|x| (x - 0.7) * (x - 0.7), 0.0, 2.0, 1e-10);
        assert!((x - 0.7).abs() < 1e-8);
    }
}
