//! Closed-form match counts, average ranks and rank bounds for symmetric
//! markets. These are independent of the fixed-point engine.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::bisect_increasing;
use crate::vacancy::{Capacity, VacancyKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketRatios {
    /// Student mass per school.
    pub rho: f64,
    pub capacity: Capacity,
    pub ell: usize,
}

impl MarketRatios {
    pub fn new(rho: f64, capacity: u32, ell: usize) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(invalid(format!("rho must be positive, got {rho}")));
        }
        if ell == 0 {
            return Err(invalid("list length must be at least 1"));
        }
        Ok(MarketRatios { rho, capacity: Capacity::new(capacity)?, ell })
    }

    pub fn bound_more_seats(&self) -> Result<f64> {
        bound_more_seats(self.rho, self.capacity.get())
    }

    pub fn bound_more_students_iid(&self) -> Result<f64> {
        bound_more_students_iid(self.rho, self.capacity.get(), self.ell)
    }

    pub fn bound_rsd(&self) -> Result<f64> {
        bound_rsd(self.ell)
    }
}

/// Mean rank of the first success among `ell` independent trials with
/// success probability `q`, given at least one success.
pub fn ar(q: f64, ell: usize) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(invalid(format!("acceptance probability must lie in (0,1], got {q}")));
    }
    ar_or_limit(q, ell)
}

/// As [`ar`], but `q = 0` returns the limit `(ell + 1) / 2`.
pub fn ar_or_limit(q: f64, ell: usize) -> Result<f64> {
    if ell == 0 {
        return Err(invalid("list length must be at least 1"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(invalid(format!("acceptance probability must lie in [0,1], got {q}")));
    }
    // weighted mean of k under weights (1-q)^(k-1); equals
    // 1/q - ell (1-q)^ell / (1 - (1-q)^ell) without the cancellation near 0
    let r = 1.0 - q;
    let (mut num, mut den, mut pow) = (0.0, 0.0, 1.0);
    for k in 1..=ell {
        num += k as f64 * pow;
        den += pow;
        pow *= r;
        if pow == 0.0 {
            break;
        }
    }
    Ok(num / den)
}

/// `Λ(ρ, C) / ρ`: upper bound on average rank when seats outnumber students.
pub fn bound_more_seats(rho: f64, c: u32) -> Result<f64> {
    let cap = Capacity::new(c)?;
    if !(rho > 0.0) || rho >= cap.as_f64() {
        return Err(invalid(format!("bound needs 0 < rho < C, got rho = {rho}, C = {c}")));
    }
    Ok(VacancyKind::Poisson.lambda_for_enrollment(rho, cap)? / rho)
}

/// `ℓ (1 - ρ/C - 1/ln(1 - C/ρ))`: lower bound on average rank under
/// independent priorities when students outnumber seats.
pub fn bound_more_students_iid(rho: f64, c: u32, ell: usize) -> Result<f64> {
    let cap = Capacity::new(c)?.as_f64();
    if !(rho > cap) || !rho.is_finite() {
        return Err(invalid(format!("bound needs rho > C, got rho = {rho}, C = {c}")));
    }
    if ell == 0 {
        return Err(invalid("list length must be at least 1"));
    }
    let ratio = cap / rho;
    Ok(ell as f64 * (1.0 - 1.0 / ratio - 1.0 / (-ratio).ln_1p()))
}

/// `1 + ln ℓ`: upper bound on average rank under a single lottery.
pub fn bound_rsd(ell: usize) -> Result<f64> {
    bound_rsd_real(ell as f64)
}

pub fn bound_rsd_real(ell: f64) -> Result<f64> {
    if !(ell >= 1.0) || !ell.is_finite() {
        return Err(invalid(format!("list length must be at least 1, got {ell}")));
    }
    Ok(1.0 + ell.ln())
}

fn check_q(q: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(invalid(format!("q must lie in [0,1], got {q}")));
    }
    Ok(())
}

/// `1 - q^k` without cancellation for `q` near 1.
fn one_minus_pow(q: f64, k: usize) -> f64 {
    if q == 0.0 {
        return 1.0;
    }
    -(k as f64 * q.ln()).exp_m1()
}

/// Expected matches when `W` workers each find each of `M` firms acceptable
/// independently with probability `1 - q`, and are matched by serial
/// dictatorship.
pub fn v_rsd_exact(w: usize, m: usize, q: f64) -> Result<f64> {
    check_q(q)?;
    if q == 1.0 {
        return Ok(0.0);
    }
    let mut prod = 1.0;
    let mut total = 0.0;
    for j in 1..=w.min(m) {
        let i = j - 1;
        prod *= one_minus_pow(q, m - i) * one_minus_pow(q, w - i);
        total += prod / one_minus_pow(q, j);
    }
    Ok(total)
}

/// Continuum prediction of serial-dictatorship matches; symmetric in `(W, M)`.
pub fn v_rsd_hat(w: f64, m: f64, q: f64) -> Result<f64> {
    check_sizes(w, m)?;
    if !(0.0..1.0).contains(&q) {
        return Err(invalid(format!("q must lie in [0,1), got {q}")));
    }
    let (w, m) = if w <= m { (w, m) } else { (m, w) };
    let t = 1.0 - q;
    Ok(w - ((-(m - w) * t).exp() - (-m * t).exp()).ln_1p() / t)
}

/// Continuum prediction of matches under independent priorities: the root
/// of `(1-q) V = ln(1 - V/W) ln(1 - V/M)` on `(0, min(W, M))`.
pub fn v_iid_hat(w: f64, m: f64, q: f64) -> Result<f64> {
    check_sizes(w, m)?;
    if !(0.0..1.0).contains(&q) {
        return Err(invalid(format!("q must lie in [0,1), got {q}")));
    }
    let t = 1.0 - q;
    let (w, m) = if w <= m { (w, m) } else { (m, w) };
    // in s = -ln(1 - V/W) the root stays resolved even when V is within
    // rounding of W; h is negative near 0 and grows without bound
    let h = |s: f64| {
        let filled = -(-s).exp_m1();
        s * -(-(w / m) * filled).ln_1p() - t * w * filled
    };
    let mut hi = 1.0;
    while h(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NoRoot(format!("v_iid_hat({w}, {m}, {q})")));
        }
    }
    let s = bisect_increasing(h, 0.0, hi, 0.0, 200);
    Ok(w * -(-s).exp_m1())
}

/// Residual of the defining equation of [`v_iid_hat`].
pub fn v_iid_residual(w: f64, m: f64, q: f64, v: f64) -> f64 {
    (1.0 - q) * v - (-v / w).ln_1p() * (-v / m).ln_1p()
}

fn check_sizes(w: f64, m: f64) -> Result<()> {
    if !(w > 0.0 && m > 0.0) || !w.is_finite() || !m.is_finite() {
        return Err(invalid(format!("market sizes must be positive, got W = {w}, M = {m}")));
    }
    Ok(())
}
