//! Bessel functions of the first kind of orders 0 and 1 for real arguments.
//!
//! Three regimes are used:
//!
//! * `|x| <= 8`: the ascending power series,
//! * `8 < |x| < 25`: Miller's backward recurrence normalised by
//!   `J0 + 2 * sum(J_2k) = 1`,
//! * `|x| >= 25`: Hankel's asymptotic expansion, truncated at the smallest term.
//!
//! Absolute error stays below `1e-12` for `|x| <= 1e4`.

use crate::error::{domain, Result};

/// Smallest positive zero of `J0`.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// A Bessel value together with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub x: f64,
    pub value: f64,
    pub abs_err_est: f64,
}

/// `J0(x)`. Non-finite arguments are rejected.
pub fn bessel_j0(x: f64) -> Result<f64> {
    check(x)?;
    Ok(j0_j1(x).0)
}

/// `J1(x)`. Non-finite arguments are rejected.
pub fn bessel_j1(x: f64) -> Result<f64> {
    check(x)?;
    Ok(j0_j1(x).1)
}

/// `J0(x)` with its error estimate.
pub fn bessel_j0_eval(x: f64) -> Result<BesselEval> {
    check(x)?;
    let (v, _, e) = j0_j1_with_err(x.abs());
    Ok(BesselEval {
        x,
        value: v,
        abs_err_est: e,
    })
}

/// `J1(x)` with its error estimate.
pub fn bessel_j1_eval(x: f64) -> Result<BesselEval> {
    check(x)?;
    let (_, v, e) = j0_j1_with_err(x.abs());
    let v = if x < 0.0 { -v } else { v };
    Ok(BesselEval {
        x,
        value: v,
        abs_err_est: e,
    })
}

/// First positive zero of `J0`.
pub fn j0_first_zero() -> f64 {
    J0_FIRST_ZERO
}

fn check(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("Bessel argument must be finite, got {x}")))
    }
}

/// Unchecked `(J0(x), J1(x))`, used on hot quadrature paths. NaN propagates.
#[inline]
pub fn j0_j1(x: f64) -> (f64, f64) {
    let ax = x.abs();
    let (j0, j1, _) = j0_j1_with_err(ax);
    if x < 0.0 {
        (j0, -j1)
    } else {
        (j0, j1)
    }
}

fn j0_j1_with_err(ax: f64) -> (f64, f64, f64) {
    if ax.is_nan() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    if ax <= SERIES_LIMIT {
        series(ax)
    } else if ax < ASYMPTOTIC_LIMIT {
        miller(ax)
    } else {
        hankel(ax)
    }
}

fn series(x: f64) -> (f64, f64, f64) {
    let q = 0.25 * x * x;
    let mut t0 = 1.0;
    let mut t1 = 0.5 * x;
    let mut s0 = t0;
    let mut s1 = t1;
    let mut max_term: f64 = 1.0;
    let mut k = 1.0;
    loop {
        t0 *= -q / (k * k);
        t1 *= -q / (k * (k + 1.0));
        s0 += t0;
        s1 += t1;
        max_term = max_term.max(t0.abs()).max(t1.abs());
        if t0.abs() < 1e-18 && t1.abs() < 1e-18 {
            break;
        }
        k += 1.0;
    }
    (s0, s1, 4.0 * f64::EPSILON * max_term)
}

fn miller(x: f64) -> (f64, f64, f64) {
    let n_start = 2 * ((x as usize + 16 + (40.0 * x).sqrt() as usize) / 2 + 1);
    let mut j_next = 0.0_f64;
    let mut j_cur = 1.0e-30_f64;
    let mut even_sum = 0.0_f64;
    let mut j1 = 0.0_f64;
    let two_over_x = 2.0 / x;
    for n in (1..=n_start).rev() {
        let j_prev = (n as f64) * two_over_x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        let m = n - 1;
        if j_cur.abs() > 1.0e250 {
            j_cur *= 1.0e-250;
            j_next *= 1.0e-250;
            even_sum *= 1.0e-250;
            j1 *= 1.0e-250;
        }
        if m == 1 {
            j1 = j_cur;
        } else if m >= 2 && m % 2 == 0 {
            even_sum += j_cur;
        }
    }
    let norm = j_cur + 2.0 * even_sum;
    (j_cur / norm, j1 / norm, 8.0 * f64::EPSILON)
}

fn hankel(x: f64) -> (f64, f64, f64) {
    let (p0, q0, e0) = hankel_pq(0.0, x);
    let (p1, q1, e1) = hankel_pq(4.0, x);
    let (s, c) = x.sin_cos();
    let amp = (2.0 / (std::f64::consts::PI * x)).sqrt();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    // x - pi/4 and x - 3pi/4 expanded to avoid rounding in the shifted argument
    let cos0 = r * (c + s);
    let sin0 = r * (s - c);
    let cos1 = r * (s - c);
    let sin1 = -r * (s + c);
    let j0 = amp * (p0 * cos0 - q0 * sin0);
    let j1 = amp * (p1 * cos1 - q1 * sin1);
    (j0, j1, amp * (e0.max(e1) + 4.0 * f64::EPSILON))
}

/// Asymptotic P and Q for order `n` with `mu = 4 n^2`.
fn hankel_pq(mu: f64, x: f64) -> (f64, f64, f64) {
    let mut a = 1.0_f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut last = 1.0_f64;
    let eight_x = 8.0 * x;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = a * (mu - odd * odd) / (k as f64 * eight_x);
        if next.abs() > last.abs() {
            break;
        }
        a = next;
        last = a;
        // k odd feeds Q, k even feeds P, with alternating signs
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    (p, q, last.abs())
}
