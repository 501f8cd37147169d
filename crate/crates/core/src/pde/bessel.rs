//! Bessel functions of the first kind, orders 0 and 1, and the zeros of J0.

use crate::error::{Error, Result};
use std::f64::consts::PI;

fn series(order: u32, x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = if order == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    for k in 1..200u32 {
        term *= q / (k as f64 * (k + order) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

// Miller's backward recurrence, normalized with J0 + 2 (J2 + J4 + ...) = 1.
fn miller(x: f64) -> (f64, f64) {
    let start = 2 * ((x as usize + 40 + (10.0 * x.sqrt()) as usize) / 2);
    let mut next = 0.0;
    let mut cur = 1e-30;
    let mut norm = 0.0;
    let (mut j0, mut j1) = (0.0, 0.0);
    for n in (1..=start).rev() {
        let prev = 2.0 * n as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e200 {
            next *= 1e-200;
            cur *= 1e-200;
            norm *= 1e-200;
            j1 *= 1e-200;
        }
        // cur now holds J_{n-1}
        let m = n - 1;
        if m == 1 {
            j1 = cur;
        }
        if m == 0 {
            j0 = cur;
        } else if m % 2 == 0 {
            norm += 2.0 * cur;
        }
    }
    norm += j0;
    (j0 / norm, j1 / norm)
}

// Hankel expansion; the terms keep shrinking well past 1e-17 for x >= 25.
fn asymptotic(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term: f64 = 1.0;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) / (8.0 * k as f64 * x);
        if next.abs() > term.abs() || next == 0.0 {
            break;
        }
        term = next;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * order as f64 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// `J_order(x)` for `order` 0 or 1 and `x >= 0`.
pub fn bessel_j(order: u32, x: f64) -> Result<f64> {
    if order > 1 {
        return Err(Error::InvalidArgument(format!(
            "bessel order {order} not supported"
        )));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidArgument(format!("bessel argument {x}")));
    }
    Ok(if x < 8.0 {
        series(order, x)
    } else if x >= 25.0 {
        asymptotic(order, x)
    } else {
        let (j0, j1) = miller(x);
        if order == 0 {
            j0
        } else {
            j1
        }
    })
}

pub(crate) fn j0(x: f64) -> f64 {
    bessel_j(0, x.abs()).expect("finite argument")
}

pub(crate) fn j1(x: f64) -> f64 {
    let v = bessel_j(1, x.abs()).expect("finite argument");
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// The first `k_max` positive zeros of `J0`, ascending.
///
/// Each zero is bracketed in `((k - 1/2) pi, k pi)` and refined by Newton
/// steps from `(k - 1/4) pi`, falling back to bisection when a step leaves the
/// bracket.
pub fn bessel_j0_zeros(k_max: usize) -> Result<Vec<f64>> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let mut zeros = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut lo = (k as f64 - 0.5) * PI;
        let mut hi = k as f64 * PI;
        let f_lo = j0(lo);
        let mut z = (k as f64 - 0.25) * PI;
        for _ in 0..100 {
            let fz = j0(z);
            if fz == 0.0 {
                break;
            }
            if (fz > 0.0) == (f_lo > 0.0) {
                lo = z;
            } else {
                hi = z;
            }
            let mut step = z + fz / j1(z);
            if !(step > lo && step < hi) {
                step = 0.5 * (lo + hi);
            }
            if (step - z).abs() < 1e-15 * z {
                z = step;
                break;
            }
            z = step;
        }
        zeros.push(z);
    }
    Ok(zeros)
}
