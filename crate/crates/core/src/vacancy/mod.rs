//! Vacancy functions and the enrollment calculus built on them.

mod gamma;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// School capacity; always at least one seat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Capacity(u32);

impl Capacity {
    pub fn new(seats: u32) -> Result<Self> {
        if seats == 0 {
            return Err(invalid("capacity must be at least 1"));
        }
        Ok(Capacity(seats))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl TryFrom<u32> for Capacity {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        Capacity::new(v)
    }
}

impl From<Capacity> for u32 {
    fn from(c: Capacity) -> u32 {
        c.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VacancyKind {
    Deterministic,
    Poisson,
}

impl VacancyKind {
    /// Vacancy probability at expected interest `lambda`. Negative inputs
    /// (rounding residue from quadrature) are treated as zero.
    pub fn value(self, lambda: f64, c: Capacity) -> f64 {
        let lambda = lambda.max(0.0);
        match self {
            VacancyKind::Deterministic => det(lambda, c.0),
            VacancyKind::Poisson => gamma::regularized_pair(c.0, lambda).1,
        }
    }

    pub fn enrollment(self, lambda: f64, c: Capacity) -> f64 {
        let lambda = lambda.max(0.0);
        match self {
            VacancyKind::Deterministic => lambda.min(c.as_f64()),
            VacancyKind::Poisson => poisson_enrollment(lambda, c.0),
        }
    }

    pub fn acceptance_rate(self, lambda: f64, c: Capacity) -> f64 {
        if lambda <= 0.0 {
            return 1.0;
        }
        self.enrollment(lambda, c) / lambda
    }

    /// Smallest `lambda` with `enrollment(lambda, c) == rho`.
    pub fn lambda_for_enrollment(self, rho: f64, c: Capacity) -> Result<f64> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(invalid(format!("target enrollment must be positive, got {rho}")));
        }
        let cap = c.as_f64();
        match self {
            VacancyKind::Deterministic => {
                if rho > cap {
                    return Err(Error::InfeasibleTarget { rho, capacity: c.0 });
                }
                Ok(rho)
            }
            VacancyKind::Poisson => {
                if rho >= cap {
                    return Err(Error::InfeasibleTarget { rho, capacity: c.0 });
                }
                let f = |l: f64| poisson_enrollment(l, c.0) - rho;
                let lo = rho;
                let mut hi = 2.0 * rho.max(1.0);
                while f(hi) < 0.0 {
                    hi *= 2.0;
                    if !hi.is_finite() {
                        return Err(Error::NoRoot(format!("enrollment {rho} at capacity {}", c.0)));
                    }
                }
                Ok(crate::numeric::bisect_increasing(f, lo, hi, 1e-14 * rho, 200))
            }
        }
    }
}

fn det(lambda: f64, c: u32) -> f64 {
    if lambda < c as f64 {
        1.0
    } else {
        0.0
    }
}

// E[min(N, C)] = lambda * P(N <= C - 2) + C * P(N >= C) for N ~ Poisson(lambda).
fn poisson_enrollment(lambda: f64, c: u32) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    let below = if c >= 2 { gamma::regularized_pair(c - 1, lambda).1 } else { 0.0 };
    let upper = gamma::regularized_pair(c, lambda).0;
    lambda * below + c as f64 * upper
}

/// `P(Poisson(lambda) >= C)`, computed directly rather than as a complement.
pub(crate) fn poisson_upper_tail(lambda: f64, c: u32) -> f64 {
    gamma::regularized_pair(c, lambda.max(0.0)).0
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda < 0.0 || lambda.is_nan() {
        return Err(invalid(format!("expected interest must be nonnegative, got {lambda}")));
    }
    Ok(())
}

pub fn vacancy_det(lambda: f64, c: u32) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(VacancyKind::Deterministic.value(lambda, Capacity::new(c)?))
}

/// `P(Poisson(lambda) < C)`.
pub fn vacancy_pois(lambda: f64, c: u32) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(VacancyKind::Poisson.value(lambda, Capacity::new(c)?))
}

/// `\int_0^lambda V(x, C) dx`, in closed form for both kinds.
pub fn enrollment(lambda: f64, c: u32, kind: VacancyKind) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(kind.enrollment(lambda, Capacity::new(c)?))
}

pub fn acceptance_rate(lambda: f64, c: u32, kind: VacancyKind) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(kind.acceptance_rate(lambda, Capacity::new(c)?))
}

pub fn lambda_for_enrollment(rho: f64, c: u32, kind: VacancyKind) -> Result<f64> {
    kind.lambda_for_enrollment(rho, Capacity::new(c)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn det_examples() {
        assert_eq!(vacancy_det(0.5, 1).unwrap(), 1.0);
        assert_eq!(vacancy_det(1.0, 1).unwrap(), 0.0);
        assert_eq!(vacancy_det(2.999, 3).unwrap(), 1.0);
        assert!(vacancy_det(-0.1, 1).is_err());
        assert!(vacancy_det(0.1, 0).is_err());
    }

    #[test]
    fn poisson_small_examples() {
        assert_eq!(vacancy_pois(0.0, 7).unwrap(), 1.0);
        assert!(rel(vacancy_pois(1.0, 1).unwrap(), (-1.0f64).exp()) < 1e-15);
        assert!(vacancy_pois(-1.0, 2).is_err());
    }

    // Reference values from 50-digit direct summation of the Poisson terms.
    #[test]
    fn poisson_reference_values() {
        let cases: [(f64, u32, f64); 14] = [
            (200.0, 100, 1.843_893_649_711_574_151_361_861e-15),
            (0.5, 3, 0.985_612_322_033_029_313_356_174_2),
            (50.0, 40, 0.064_570_368_921_132_975_761_690_56),
            (1000.0, 900, 6.225_977_842_750_472_598_386_148e-4),
            (700.5, 650, 0.025_907_085_219_067_489_307_764_29),
            (2000.0, 1000, 6.847_349_459_614_753_179_978_721e-136),
            (1e4, 10_000, 0.498_670_191_660_044_799_617_257_7),
            (1e5, 99_000, 7.657_995_575_108_020_462_670_041e-4),
            (1e5, 100_000, 0.499_579_477_889_634_823_306_687_4),
            (1e6, 99_999, 0.0),
            (1e6, 999_000, 0.158_534_248_396_674_963_269_866_7),
            (3.7, 12, 0.999_529_798_875_125_565_459_491_7),
            (25.0, 1, 1.388_794_386_496_402_059_466_176e-11),
            (800.0, 1, 0.0),
        ];
        for (lam, c, expect) in cases {
            let got = vacancy_pois(lam, c).unwrap();
            if expect == 0.0 {
                assert_eq!(got, 0.0, "({lam},{c}) underflows");
            } else {
                assert!(rel(got, expect) < 1e-12, "({lam},{c}) got {got:e} expect {expect:e} rel {:e}", rel(got, expect));
            }
        }
    }

    #[test]
    fn enrollment_examples() {
        for lam in [0.01, 0.5, 3.0, 30.0] {
            let e = enrollment(lam, 1, VacancyKind::Poisson).unwrap();
            assert!(rel(e, -(-lam as f64).exp_m1()) < 1e-14);
        }
        assert_eq!(enrollment(5.0, 3, VacancyKind::Deterministic).unwrap(), 3.0);
        assert!((enrollment(1e4, 5, VacancyKind::Poisson).unwrap() - 5.0).abs() < 1e-12);
        assert!(rel(enrollment(7.5, 5, VacancyKind::Poisson).unwrap(), 4.783_281_667_306_526_614) < 1e-13);
        assert!(rel(enrollment(0.3, 4, VacancyKind::Poisson).unwrap(), 0.299_983_396_805_160_106_8) < 1e-13);
    }

    #[test]
    fn acceptance_rate_examples() {
        let a = acceptance_rate(1.0, 1, VacancyKind::Poisson).unwrap();
        assert!(rel(a, 1.0 - (-1.0f64).exp()) < 1e-15);
        assert_eq!(acceptance_rate(0.0, 4, VacancyKind::Poisson).unwrap(), 1.0);
        assert_eq!(acceptance_rate(2.0, 3, VacancyKind::Deterministic).unwrap(), 1.0);
        let rates: Vec<f64> = (1..=100)
            .map(|k| acceptance_rate(0.1 * k as f64, 3, VacancyKind::Poisson).unwrap())
            .collect();
        assert!(rates.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn lambda_examples() {
        for rho in [0.1, 0.5, 0.9, 0.99] {
            let l = lambda_for_enrollment(rho, 1, VacancyKind::Poisson).unwrap();
            assert!((l + (1.0f64 - rho).ln()).abs() < 1e-10);
        }
        let l = lambda_for_enrollment(2.5, 5, VacancyKind::Poisson).unwrap();
        assert!((l - 2.569_885_632_835_768_777_5).abs() < 1e-10);
        let expect = [(1, 3.615_008_141_566_991_419), (3, 2.018_410_650_431_646_477), (10, 1.381_451_869_139_455_748)];
        for (c, b) in expect {
            let rho = 0.97 * c as f64;
            let l = lambda_for_enrollment(rho, c, VacancyKind::Poisson).unwrap();
            assert!((l / rho - b).abs() < 1e-9);
        }
        assert!(matches!(
            lambda_for_enrollment(1.0, 1, VacancyKind::Poisson),
            Err(Error::InfeasibleTarget { .. })
        ));
        assert_eq!(lambda_for_enrollment(1.0, 1, VacancyKind::Deterministic).unwrap(), 1.0);
        assert!(lambda_for_enrollment(0.0, 1, VacancyKind::Poisson).is_err());
    }

    #[test]
    fn scaling_limit_approaches_indicator() {
        for ratio in [0.8, 1.25] {
            let mut prev = f64::INFINITY;
            for m in [1u32, 10, 100, 1000] {
                let c = m;
                let lam = ratio * c as f64;
                let d = (vacancy_pois(lam, c).unwrap() - vacancy_det(lam, c).unwrap()).abs();
                assert!(d < prev);
                prev = d;
            }
            assert!(prev < 0.05);
        }
    }
}
