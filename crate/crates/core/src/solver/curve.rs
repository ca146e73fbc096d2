//! Interest and admission curves on the priority axis.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numeric::gauss6;
use crate::vacancy::{Capacity, VacancyKind};

fn segment(knots: &[f64], x: f64) -> usize {
    let i = knots.partition_point(|&k| k <= x);
    i.saturating_sub(1).min(knots.len() - 2)
}

fn hermite(y0: f64, y1: f64, m0: f64, m1: f64, h: f64, t: f64) -> f64 {
    let s = 1.0 - t;
    (1.0 + 2.0 * t) * s * s * y0 + t * s * s * h * m0 + t * t * (3.0 - 2.0 * t) * y1 - t * t * s * h * m1
}

fn hermite_slope(y0: f64, y1: f64, m0: f64, m1: f64, h: f64, t: f64) -> f64 {
    let s = 1.0 - t;
    6.0 * t * s * (y1 - y0) / h + s * (1.0 - 3.0 * t) * m0 + t * (3.0 * t - 2.0) * m1
}

fn check_knots(knots: &[f64]) -> Result<()> {
    if knots.len() < 2 || knots[0] != 0.0 || knots[knots.len() - 1] != 1.0 {
        return Err(invalid("knots must run from 0 to 1 with at least two points"));
    }
    if knots.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("knots must be strictly increasing"));
    }
    Ok(())
}

/// Piecewise cubic Hermite interpolant of an interest function `I`, with
/// one-sided derivatives at knots where the interest density jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterestCurve {
    knots: Vec<f64>,
    values: Vec<f64>,
    slope_left: Vec<f64>,
    slope_right: Vec<f64>,
}

impl InterestCurve {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, slope_left: Vec<f64>, slope_right: Vec<f64>) -> Result<Self> {
        check_knots(&knots)?;
        let n = knots.len();
        if values.len() != n || slope_left.len() != n || slope_right.len() != n {
            return Err(invalid("interest curve arrays must match the knot count"));
        }
        if values.iter().chain(&slope_left).chain(&slope_right).any(|v| !v.is_finite()) {
            return Err(invalid("interest curve values must be finite"));
        }
        Ok(InterestCurve { knots, values, slope_left, slope_right })
    }

    /// Tabulates `f` with derivative `df` on `knots`.
    pub fn from_fn(knots: Vec<f64>, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Result<Self> {
        let values = knots.iter().map(|&x| f(x)).collect();
        let slopes: Vec<f64> = knots.iter().map(|&x| df(x)).collect();
        InterestCurve::new(knots, values, slopes.clone(), slopes)
    }

    /// `I(p) = mass * (1 - p)`.
    pub fn linear(mass: f64) -> Self {
        InterestCurve {
            knots: vec![0.0, 1.0],
            values: vec![mass, 0.0],
            slope_left: vec![-mass; 2],
            slope_right: vec![-mass; 2],
        }
    }

    pub(crate) fn from_parts(knots: Vec<f64>, values: Vec<f64>, slope_left: Vec<f64>, slope_right: Vec<f64>) -> Self {
        InterestCurve { knots, values, slope_left, slope_right }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let i = segment(&self.knots, x);
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        let h = b - a;
        hermite(self.values[i], self.values[i + 1], self.slope_right[i], self.slope_left[i + 1], h, (x - a) / h)
    }

    /// Derivative of the interpolant from the right of `x`.
    pub fn slope(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let i = segment(&self.knots, x);
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        let h = b - a;
        hermite_slope(self.values[i], self.values[i + 1], self.slope_right[i], self.slope_left[i + 1], h, (x - a) / h)
    }

    pub fn at_zero(&self) -> f64 {
        self.values[0]
    }

    /// `inf { p >= 0 : I(p) < level }`, or 1 if interest never drops below.
    pub fn crossing(&self, level: f64) -> f64 {
        let Some(j) = self.values.iter().position(|&v| v < level) else {
            return 1.0;
        };
        if j == 0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (self.knots[j - 1], self.knots[j]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.value(mid) < level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Poisson vacancy applied to an interest curve, with the running integral
/// cached at the interest knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonAdmission {
    interest: InterestCurve,
    capacity: Capacity,
    cumulative: Vec<f64>,
}

impl PoissonAdmission {
    fn new(interest: InterestCurve, capacity: Capacity) -> Self {
        let mut cumulative = Vec::with_capacity(interest.knots.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        let rule = gauss6();
        for w in interest.knots.windows(2) {
            acc += rule.integrate(w[0], w[1], |x| VacancyKind::Poisson.value(interest.value(x), capacity));
            cumulative.push(acc);
        }
        PoissonAdmission { interest, capacity, cumulative }
    }

    fn value(&self, x: f64) -> f64 {
        VacancyKind::Poisson.value(self.interest.value(x), self.capacity)
    }

    fn cumulative(&self, x: f64) -> f64 {
        let i = segment(&self.interest.knots, x);
        self.cumulative[i] + gauss6().integrate(self.interest.knots[i], x, |t| self.value(t))
    }

    pub fn interest(&self) -> &InterestCurve {
        &self.interest
    }

    pub fn capacity(&self) -> Capacity {
        self.capacity
    }
}

/// Piecewise linear admission function through tabulated points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedAdmission {
    knots: Vec<f64>,
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl TabulatedAdmission {
    fn value(&self, x: f64) -> f64 {
        let i = segment(&self.knots, x);
        let t = (x - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    fn cumulative(&self, x: f64) -> f64 {
        let i = segment(&self.knots, x);
        self.cumulative[i] + 0.5 * (x - self.knots[i]) * (self.values[i] + self.value(x))
    }
}

/// An admissions function `A_h` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissionCurve {
    Constant(f64),
    /// `A(p) = 1(p > cutoff)`.
    Step { cutoff: f64 },
    Poisson(PoissonAdmission),
    Tabulated(TabulatedAdmission),
}

impl AdmissionCurve {
    pub fn constant(a: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(invalid(format!("admission probability {a} outside [0,1]")));
        }
        Ok(AdmissionCurve::Constant(a))
    }

    pub fn step(cutoff: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&cutoff) {
            return Err(invalid(format!("cutoff {cutoff} outside [0,1]")));
        }
        Ok(AdmissionCurve::Step { cutoff })
    }

    pub fn poisson(interest: InterestCurve, capacity: Capacity) -> Self {
        AdmissionCurve::Poisson(PoissonAdmission::new(interest, capacity))
    }

    /// Linear interpolation of weakly increasing values in `[0, 1]`.
    pub fn tabulated(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_knots(&knots)?;
        if values.len() != knots.len() {
            return Err(invalid("tabulated admission needs one value per knot"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) || values.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("tabulated admission values must be weakly increasing in [0,1]"));
        }
        let mut cumulative = vec![0.0];
        for i in 1..knots.len() {
            let prev = cumulative[i - 1];
            cumulative.push(prev + 0.5 * (knots[i] - knots[i - 1]) * (values[i] + values[i - 1]));
        }
        Ok(AdmissionCurve::Tabulated(TabulatedAdmission { knots, values, cumulative }))
    }

    pub fn value(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            AdmissionCurve::Constant(a) => *a,
            AdmissionCurve::Step { cutoff } => f64::from(u8::from(x > *cutoff)),
            AdmissionCurve::Poisson(p) => p.value(x),
            AdmissionCurve::Tabulated(t) => t.value(x),
        }
    }

    /// Limit from the left; differs from `value` only at a step.
    pub fn value_left(&self, x: f64) -> f64 {
        match self {
            AdmissionCurve::Step { cutoff } => f64::from(u8::from(x > *cutoff)),
            _ => self.value(x),
        }
    }

    /// Limit from the right.
    pub fn value_right(&self, x: f64) -> f64 {
        match self {
            AdmissionCurve::Step { cutoff } if x == *cutoff && x < 1.0 => 1.0,
            _ => self.value(x),
        }
    }

    /// `∫_0^x A(p) dp`.
    pub fn cumulative(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            AdmissionCurve::Constant(a) => a * x,
            AdmissionCurve::Step { cutoff } => (x - cutoff).max(0.0),
            AdmissionCurve::Poisson(p) => p.cumulative(x),
            AdmissionCurve::Tabulated(t) => t.cumulative(x),
        }
    }

    /// Admission probability given common factor `u` when the priority is
    /// `w*u + (1-w)*z` with `z` uniform.
    pub fn given_common_factor(&self, w: f64, u: f64) -> f64 {
        let v = 1.0 - w;
        if v <= 0.0 {
            return self.value(u);
        }
        ((self.cumulative(w * u + v) - self.cumulative(w * u)) / v).clamp(0.0, 1.0)
    }

    /// Interior points where the curve's smoothness may break.
    pub(crate) fn breakpoints(&self) -> &[f64] {
        match self {
            AdmissionCurve::Poisson(p) => &p.interest.knots,
            AdmissionCurve::Tabulated(t) => &t.knots,
            AdmissionCurve::Constant(_) | AdmissionCurve::Step { .. } => &[],
        }
    }

    /// Probability of admission for a uniform priority.
    pub fn mean(&self) -> f64 {
        self.cumulative(1.0)
    }

    /// Location of a jump discontinuity, if any.
    pub fn jump(&self) -> Option<f64> {
        match self {
            AdmissionCurve::Step { cutoff } if *cutoff > 0.0 && *cutoff < 1.0 => Some(*cutoff),
            _ => None,
        }
    }

    /// The equivalent cutoff when the curve is an indicator: 0 admits
    /// everyone, 1 admits no one.
    pub fn as_cutoff(&self) -> Option<f64> {
        match self {
            AdmissionCurve::Step { cutoff } => Some(*cutoff),
            AdmissionCurve::Constant(a) if *a == 1.0 => Some(0.0),
            AdmissionCurve::Constant(a) if *a == 0.0 => Some(1.0),
            _ => None,
        }
    }

    /// Generalized inverse of `A` viewed as a cutoff CDF:
    /// `inf { p : A(p) >= prob }`, with `prob = 0` mapped to the bottom of
    /// the support.
    pub fn quantile(&self, prob: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&prob) {
            return Err(invalid(format!("quantile probability {prob} outside [0,1]")));
        }
        if let Some(c) = self.as_cutoff() {
            return Ok(c);
        }
        let hit = |p: f64| if prob == 0.0 { self.value(p) > 0.0 } else { self.value(p) >= prob };
        if hit(0.0) {
            return Ok(0.0);
        }
        if !hit(1.0) {
            return Ok(1.0);
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if hit(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Mean of the cutoff distribution whose CDF is `A`.
    pub fn mean_cutoff(&self) -> f64 {
        1.0 - self.mean()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |x: f64| 2.0 - x + 0.5 * x * x - 0.25 * x * x * x;
        let df = |x: f64| -1.0 + x - 0.75 * x * x;
        let c = InterestCurve::from_fn(vec![0.0, 0.3, 1.0], f, df).unwrap();
        for x in [0.0, 0.1, 0.3, 0.55, 0.99, 1.0] {
            assert!((c.value(x) - f(x)).abs() < 1e-14);
            assert!((c.slope(x) - df(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn crossing_of_linear_interest() {
        let c = InterestCurve::linear(2.0);
        assert!((c.crossing(1.0) - 0.5).abs() < 1e-15);
        assert_eq!(InterestCurve::linear(0.5).crossing(1.0), 0.0);
        let flat = InterestCurve::from_fn(vec![0.0, 1.0], |_| 3.0, |_| 0.0).unwrap();
        assert_eq!(flat.crossing(1.0), 1.0);
    }

    #[test]
    fn step_limits_and_integral() {
        let s = AdmissionCurve::step(0.5).unwrap();
        assert_eq!(s.value(0.5), 0.0);
        assert_eq!(s.value_left(0.5), 0.0);
        assert_eq!(s.value_right(0.5), 1.0);
        assert_eq!(s.value(0.7), 1.0);
        assert_eq!(s.cumulative(1.0), 0.5);
        assert_eq!(s.quantile(0.05).unwrap(), 0.5);
        assert_eq!(s.quantile(0.0).unwrap(), 0.5);
        assert_eq!(s.quantile(1.0).unwrap(), 0.5);
    }

    #[test]
    fn uniform_cutoff_quantiles() {
        let a = AdmissionCurve::tabulated(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!((a.quantile(0.05).unwrap() - 0.05).abs() < 1e-12);
        assert!((a.mean_cutoff() - 0.5).abs() < 1e-15);
        assert!((a.cumulative(0.5) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn poisson_curve_integral() {
        // A(p) = exp(-(1 - p)) for C = 1 and I(p) = 1 - p
        let a = AdmissionCurve::poisson(InterestCurve::linear(1.0), Capacity::new(1).unwrap());
        let exact = 1.0 - (-1.0f64).exp();
        assert!((a.mean() - exact).abs() < 1e-14);
        assert!((a.value(0.3) - (-0.7f64).exp()).abs() < 1e-15);
        let half = 1.0f64.exp().recip() * (0.5f64.exp() - 1.0);
        assert!((a.cumulative(0.5) - half).abs() < 1e-14);
        let on_grid = AdmissionCurve::poisson(
            InterestCurve::from_fn(grid(11), |x| 1.0 - x, |_| -1.0).unwrap(),
            Capacity::new(1).unwrap(),
        );
        assert!((on_grid.mean() - exact).abs() < 1e-15);
    }

    #[test]
    fn invalid_tables_rejected() {
        assert!(AdmissionCurve::tabulated(vec![0.0, 1.0], vec![0.5, 0.2]).is_err());
        assert!(AdmissionCurve::tabulated(vec![0.0, 0.9], vec![0.0, 1.0]).is_err());
        assert!(AdmissionCurve::constant(1.5).is_err());
        assert!(AdmissionCurve::step(-0.1).is_err());
    }
}
