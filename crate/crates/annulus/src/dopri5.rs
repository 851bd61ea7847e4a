//! Dormand-Prince 5(4) single-step kernel with dense output.
//!
//! One explicit Runge-Kutta step of order 5 with an embedded order-4 error
//! estimate and the standard quartic interpolant for the accepted interval.
//! The last stage equals the derivative at the step end (FSAL), so the caller
//! threads it into the next step for free. Step-size selection, event
//! handling, and termination policy live with the caller; this module only
//! knows how to take and interpolate a single step of the 2-dimensional
//! system used by the radial solver.

pub(crate) type State = [f64; 2];

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// Fifth-order weights (also row 7 of the tableau: the last stage is FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the order-5 and embedded order-4 weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense-output weights for the fifth interpolation coefficient.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

/// Interpolant for one accepted step `[r0, r0 + h]`; evaluation anywhere in
/// the interval has the same order as the step itself.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DenseSegment {
    pub r0: f64,
    pub h: f64,
    rcont: [State; 5],
}

impl DenseSegment {
    /// Degenerate segment that interpolates linearly between two states, for
    /// analytic seed steps taken outside the Runge-Kutta machinery.
    pub fn linear(r0: f64, h: f64, y0: State, y1: State) -> Self {
        let zero = [0.0, 0.0];
        DenseSegment {
            r0,
            h,
            rcont: [y0, [y1[0] - y0[0], y1[1] - y0[1]], zero, zero, zero],
        }
    }

    pub fn r_end(&self) -> f64 {
        self.r0 + self.h
    }

    pub fn contains(&self, r: f64) -> bool {
        let slack = 1e-12 * (self.r0.abs() + self.h.abs()).max(1.0);
        r >= self.r0 - slack && r <= self.r_end() + slack
    }

    pub fn eval(&self, r: f64) -> State {
        let theta = (r - self.r0) / self.h;
        let theta1 = 1.0 - theta;
        let [c1, c2, c3, c4, c5] = self.rcont;
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = c1[i]
                + theta * (c2[i] + theta1 * (c3[i] + theta * (c4[i] + theta1 * c5[i])));
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Step {
    pub y: State,
    /// Scaled error norm; a value at most 1 means the step meets tolerance.
    pub err_norm: f64,
    /// Derivative at the step end (FSAL): becomes `k1` of the next step.
    pub k_last: State,
    pub dense: DenseSegment,
}

#[inline]
fn axpy(y: State, h: f64, terms: &[(f64, State)]) -> State {
    let mut out = y;
    for &(c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Take one step of size `h` from `(r, y)`. `k1` must be the derivative at
/// `(r, y)` — the previous step's `k_last`, or a fresh evaluation at the
/// start of integration.
pub(crate) fn step<F: Fn(f64, State) -> State>(
    f: &F,
    r: f64,
    y: State,
    k1: State,
    h: f64,
    atol: f64,
    rtol: f64,
) -> Step {
    let k2 = f(r + C2 * h, axpy(y, h, &[(A21, k1)]));
    let k3 = f(r + C3 * h, axpy(y, h, &[(A31, k1), (A32, k2)]));
    let k4 = f(r + C4 * h, axpy(y, h, &[(A41, k1), (A42, k2), (A43, k3)]));
    let k5 = f(
        r + C5 * h,
        axpy(y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]),
    );
    let k6 = f(
        r + h,
        axpy(y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]),
    );
    let y_new = axpy(y, h, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
    let k7 = f(r + h, y_new);

    let err = axpy(
        [0.0, 0.0],
        h,
        &[(E1, k1), (E3, k3), (E4, k4), (E5, k5), (E6, k6), (E7, k7)],
    );
    let mut norm_sq = 0.0;
    for i in 0..2 {
        let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
        let e = err[i] / sc;
        norm_sq += e * e;
    }
    let err_norm = (norm_sq / 2.0).sqrt();

    let ydiff = [y_new[0] - y[0], y_new[1] - y[1]];
    let rcont3 = [h * k1[0] - ydiff[0], h * k1[1] - ydiff[1]];
    let rcont4 = [
        ydiff[0] - h * k7[0] - rcont3[0],
        ydiff[1] - h * k7[1] - rcont3[1],
    ];
    let rcont5 = axpy(
        [0.0, 0.0],
        h,
        &[(D1, k1), (D3, k3), (D4, k4), (D5, k5), (D6, k6), (D7, k7)],
    );

    Step {
        y: y_new,
        err_norm,
        k_last: k7,
        dense: DenseSegment { r0: r, h, rcont: [y, ydiff, rcont3, rcont4, rcont5] },
    }
}

/// Step-size update factor from a scaled error norm, with the usual safety
/// factor and growth/shrink clamps.
pub(crate) fn step_factor(err_norm: f64) -> f64 {
    if err_norm <= 0.0 {
        return 10.0;
    }
    (0.9 * err_norm.powf(-0.2)).clamp(0.2, 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Harmonic oscillator u'' = -u: exact solution (sin r, cos r) from (0, 1).
    fn osc(_r: f64, y: State) -> State {
        [y[1], -y[0]]
    }

    fn integrate_fixed(h: f64, r_end: f64) -> State {
        let mut r = 0.0;
        let mut y = [0.0, 1.0];
        let mut k1 = osc(r, y);
        while r < r_end - 1e-12 {
            let s = step(&osc, r, y, k1, h, 1e-12, 1e-12);
            r += h;
            y = s.y;
            k1 = s.k_last;
        }
        y
    }

    #[test]
    fn fifth_order_convergence() {
        // Halving the step should cut the global error by about 2^5 = 32
        // (global error is one order below the local error).
        let exact = 2.0f64.sin();
        let e1 = (integrate_fixed(0.02, 2.0)[0] - exact).abs();
        let e2 = (integrate_fixed(0.01, 2.0)[0] - exact).abs();
        let ratio = e1 / e2;
        assert!((20.0..48.0).contains(&ratio), "order ratio {ratio} (errors {e1}, {e2})");
    }

    #[test]
    fn dense_output_tracks_exact_solution() {
        let y = [0.0, 1.0];
        let k1 = osc(0.0, y);
        let h = 0.1;
        let s = step(&osc, 0.0, y, k1, h, 1e-12, 1e-12);
        // The interpolant is locally O(h^5); for h = 0.1 that is ~1e-9.
        for i in 0..=20 {
            let r = h * i as f64 / 20.0;
            let interp = s.dense.eval(r);
            assert!(
                (interp[0] - r.sin()).abs() < 5e-9 && (interp[1] - r.cos()).abs() < 5e-9,
                "dense mismatch at r = {r}: {interp:?}"
            );
        }
    }

    #[test]
    fn fsal_stage_is_endpoint_derivative() {
        let y = [0.3, -0.2];
        let k1 = osc(0.0, y);
        let s = step(&osc, 0.0, y, k1, 0.05, 1e-10, 1e-10);
        let fresh = osc(0.05, s.y);
        assert_eq!(s.k_last, fresh);
    }

    #[test]
    fn error_estimate_scales_at_fifth_order() {
        let y = [0.0, 1.0];
        let k1 = osc(0.0, y);
        // Use absolute tolerance 1 so err_norm is the raw truncation error.
        let e_big = step(&osc, 0.0, y, k1, 0.2, 1.0, 0.0).err_norm;
        let e_small = step(&osc, 0.0, y, k1, 0.1, 1.0, 0.0).err_norm;
        let ratio = e_big / e_small;
        assert!((20.0..48.0).contains(&ratio), "local error ratio {ratio}");
    }

    #[test]
    fn linear_segment_interpolates_endpoints() {
        let seg = DenseSegment::linear(1.0, 0.5, [2.0, 3.0], [4.0, -1.0]);
        assert_eq!(seg.eval(1.0), [2.0, 3.0]);
        assert_eq!(seg.eval(1.5), [4.0, -1.0]);
        assert_eq!(seg.eval(1.25), [3.0, 1.0]);
        assert!(seg.contains(1.3) && !seg.contains(1.6));
    }

    #[test]
    fn step_factor_clamps() {
        assert_eq!(step_factor(0.0), 10.0);
        assert!(step_factor(1.0) < 1.0); // safety factor shrinks at tolerance
        assert_eq!(step_factor(1e12), 0.2);
        assert_eq!(step_factor(1e-12), 10.0);
    }
}
