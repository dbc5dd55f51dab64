//! Dormand-Prince 5(4) step with embedded error estimate.
//!
//! The fields here are autonomous and smooth off the switching plane, so a
//! one-step explicit method with standard step-size control is all the
//! machinery needed. Event localization re-runs raw substeps from the last
//! accepted state, which are at least as accurate as the accepted step.

use crate::real::Real;

const STAGES: usize = 7;

// Butcher tableau (Dormand & Prince 1980).
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

const B5: [f64; STAGES] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

const B4: [f64; STAGES] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One raw Dormand-Prince step of size `h`: fifth-order solution plus the
/// embedded error estimate.
pub(crate) fn dp45_step<T: Real, const N: usize, F>(f: &F, y: &[T; N], h: T) -> ([T; N], [T; N])
where
    F: Fn(&[T; N]) -> [T; N],
{
    let mut k = [[T::zero(); N]; STAGES];
    k[0] = f(y);
    for i in 1..STAGES {
        let mut stage = *y;
        for (j, kj) in k.iter().enumerate().take(i) {
            let aij = T::of(if i < STAGES - 1 { A[i - 1][j] } else { B5[j] });
            if aij == T::zero() {
                continue;
            }
            for n in 0..N {
                stage[n] = stage[n] + kj[n] * (aij * h);
            }
        }
        k[i] = f(&stage);
    }
    let mut y5 = *y;
    let mut err = [T::zero(); N];
    for (j, kj) in k.iter().enumerate() {
        let b5 = T::of(B5[j]);
        let db = T::of(B5[j] - B4[j]);
        for n in 0..N {
            y5[n] = y5[n] + kj[n] * (b5 * h);
            err[n] = err[n] + kj[n] * (db * h);
        }
    }
    (y5, err)
}

/// Error-control settings for the free-running integrator.
#[derive(Clone, Copy, Debug)]
pub struct StepControl<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub h_min: T,
    pub h_max: T,
}

pub(crate) enum StepOutcome<T, const N: usize> {
    /// Accepted step: new state, step actually taken, proposal for the next.
    Accepted { y: [T; N], h_used: T, h_next: T },
    /// Error control pushed the step below `h_min`.
    Underflow,
}

/// Takes one error-controlled step, shrinking `h` until the weighted error
/// passes. Non-finite states reject the step like an oversized error.
pub(crate) fn controlled_step<T: Real, const N: usize, F>(
    f: &F,
    y: &[T; N],
    mut h: T,
    ctrl: &StepControl<T>,
) -> StepOutcome<T, N>
where
    F: Fn(&[T; N]) -> [T; N],
{
    h = h.min(ctrl.h_max).max(ctrl.h_min);
    loop {
        let (y_new, err) = dp45_step(f, y, h);
        let mut norm = T::zero();
        let mut finite = true;
        for n in 0..N {
            if !y_new[n].is_finite() {
                finite = false;
                break;
            }
            let scale = ctrl.abs_tol + ctrl.rel_tol * y[n].abs().max(y_new[n].abs());
            norm = norm.max((err[n] / scale).abs());
        }
        if finite && norm <= T::one() {
            let grow = if norm == T::zero() {
                T::of(5.0)
            } else {
                (T::of(0.9) * norm.powf(T::of(-0.2))).min(T::of(5.0)).max(T::of(0.2))
            };
            let h_next = (h * grow).min(ctrl.h_max).max(ctrl.h_min);
            return StepOutcome::Accepted {
                y: y_new,
                h_used: h,
                h_next,
            };
        }
        let shrink = if finite {
            (T::of(0.9) * norm.powf(T::of(-0.2))).max(T::of(0.1))
        } else {
            T::of(0.25)
        };
        h = h * shrink;
        if h < ctrl.h_min {
            return StepOutcome::Underflow;
        }
    }
}

/// Integrates a smooth field for a fixed duration with no event handling.
pub fn integrate_fixed_time<T: Real, const N: usize, F>(
    f: &F,
    y0: [T; N],
    duration: T,
    ctrl: &StepControl<T>,
) -> Option<[T; N]>
where
    F: Fn(&[T; N]) -> [T; N],
{
    let mut y = y0;
    let mut t = T::zero();
    let mut h = (ctrl.h_max / T::of(16.0)).max(ctrl.h_min);
    while t < duration {
        let h_try = h.min(duration - t);
        match controlled_step(f, &y, h_try, ctrl) {
            StepOutcome::Accepted { y: y_new, h_used, h_next } => {
                y = y_new;
                t = t + h_used;
                h = h_next;
            }
            StepOutcome::Underflow => return None,
        }
    }
    Some(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_harmonic_oscillator() {
        let f = |y: &[f64; 2]| [y[1], -y[0]];
        let ctrl = StepControl {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            h_min: 1e-14,
            h_max: 0.1,
        };
        let y = integrate_fixed_time(&f, [1.0, 0.0], std::f64::consts::PI, &ctrl).unwrap();
        assert!((y[0] + 1.0).abs() < 1e-8, "{y:?}");
        assert!(y[1].abs() < 1e-8);
    }

    #[test]
    fn underflow_on_blowup() {
        // y' = y^2 from y=1 blows up at t=1.
        let f = |y: &[f64; 1]| [y[0] * y[0]];
        let ctrl = StepControl {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            h_min: 1e-12,
            h_max: 0.1,
        };
        assert!(integrate_fixed_time(&f, [1.0], 2.0, &ctrl).is_none());
    }
}
