//! Learning-rate schedules and the smoothing-radius cap.
//!
//! Every schedule evaluates its admissible upper bound with equality. `k = None`
//! stands for infinitely many query directions, where `Γ = 1` exactly; this is
//! how SGD and GD runs are described.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `√((3d − 1)/K)`, or `0` when `k` is `None`.
pub fn query_ratio(d: usize, k: Option<usize>) -> f64 {
    match k {
        Some(k) => ((3 * d - 1) as f64 / k as f64).sqrt(),
        None => 0.0,
    }
}

/// `Γ = √((3d − 1)/K) + 1`.
pub fn gamma(d: usize, k: usize) -> Result<f64> {
    if d < 1 || k < 1 {
        return Err(invalid("gamma needs d >= 1 and K >= 1"));
    }
    Ok(query_ratio(d, Some(k)) + 1.0)
}

/// As [`gamma`], with `None` meaning `K = ∞`.
pub fn gamma_opt(d: usize, k: Option<usize>) -> Result<f64> {
    match k {
        Some(k) => gamma(d, k),
        None if d >= 1 => Ok(1.0),
        None => Err(invalid("gamma needs d >= 1")),
    }
}

/// Largest admissible smoothing radius `cLΓ / (nβ(3 + d)^{3/2})`.
pub fn mu_cap(c: f64, l: f64, gamma: f64, n: usize, beta: f64, d: usize) -> Result<f64> {
    for (name, v) in [("c", c), ("L", l), ("gamma", gamma), ("beta", beta)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("mu_cap: {name} must be positive, got {v}")));
        }
    }
    if n < 1 || d < 1 {
        return Err(invalid("mu_cap: n and d must be positive"));
    }
    Ok(c * l * gamma / (n as f64 * beta * (3.0 + d as f64).powf(1.5)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScheduleKind {
    /// `C / (tΓ)`
    DecreasingOverGamma,
    /// `C / t`
    DecreasingPlain,
    /// `C / (TΓ)`
    ConstantOverTGamma,
    /// `log(1 + Cβ) / (TβΓ)`
    LogConstantNonconvex,
    /// `min{log(1 + (Cβ/Γ)s) / (Tβs), 2/β}` with `s = √((3d − 1)/K)`
    LogConstantConvex,
    /// `C / T`
    ConstantPlain,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 6] = [
        ScheduleKind::DecreasingOverGamma,
        ScheduleKind::DecreasingPlain,
        ScheduleKind::ConstantOverTGamma,
        ScheduleKind::LogConstantNonconvex,
        ScheduleKind::LogConstantConvex,
        ScheduleKind::ConstantPlain,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScheduleKind::DecreasingOverGamma => "decreasing-over-gamma",
            ScheduleKind::DecreasingPlain => "decreasing-plain",
            ScheduleKind::ConstantOverTGamma => "constant-over-t-gamma",
            ScheduleKind::LogConstantNonconvex => "log-constant-nonconvex",
            ScheduleKind::LogConstantConvex => "log-constant-convex",
            ScheduleKind::ConstantPlain => "constant-plain",
        }
    }

    pub fn needs_beta(&self) -> bool {
        matches!(
            self,
            ScheduleKind::LogConstantNonconvex | ScheduleKind::LogConstantConvex
        )
    }
}

impl std::str::FromStr for ScheduleKind {
    type Err = crate::ZossError;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        ScheduleKind::ALL
            .into_iter()
            .find(|k| {
                let n: String = k.name().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
                n == key || format!("{k:?}").to_ascii_lowercase() == key
            })
            .ok_or_else(|| invalid(format!("unknown schedule {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    /// Step-size constant `C`.
    pub c: f64,
    pub t_total: usize,
    pub beta: f64,
    pub d: usize,
    /// Query directions; `None` is the `K → ∞` limit.
    pub k: Option<usize>,
}

impl Schedule {
    pub fn new(kind: ScheduleKind, c: f64, t_total: usize, beta: f64, d: usize, k: Option<usize>) -> Result<Self> {
        let s = Self {
            kind,
            c,
            t_total,
            beta,
            d,
            k,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid("schedule constant C must be positive"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(invalid("schedule beta must be non-negative"));
        }
        if self.kind.needs_beta() && self.beta == 0.0 {
            return Err(invalid(format!("{} needs beta > 0", self.kind.name())));
        }
        if self.k == Some(0) {
            return Err(invalid("K must be >= 1"));
        }
        gamma_opt(self.d, self.k)?;
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        query_ratio(self.d, self.k) + 1.0
    }

    /// `α_t` for `1 ≤ t ≤ T`.
    pub fn alpha(&self, t: usize) -> f64 {
        debug_assert!(t >= 1);
        let (c, t_f, big_t, beta, g) = (self.c, t as f64, self.t_total as f64, self.beta, self.gamma());
        match self.kind {
            ScheduleKind::DecreasingOverGamma => c / (t_f * g),
            ScheduleKind::DecreasingPlain => c / t_f,
            ScheduleKind::ConstantOverTGamma => c / (big_t * g),
            ScheduleKind::LogConstantNonconvex => (c * beta).ln_1p() / (big_t * beta * g),
            ScheduleKind::LogConstantConvex => {
                let s = query_ratio(self.d, self.k);
                let a = if s > 0.0 {
                    (c * beta / g * s).ln_1p() / (big_t * beta * s)
                } else {
                    c / (big_t * g)
                };
                a.min(2.0 / beta)
            }
            ScheduleKind::ConstantPlain => c / big_t,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (1..=self.t_total).map(|t| self.alpha(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert_eq!(gamma(1, 2).unwrap(), 2.0);
        assert_eq!(gamma(3, 8).unwrap(), 2.0);
        for d in 1..=100 {
            assert!(gamma(d, 1_000_000_000).unwrap() < 1.001);
        }
        assert!(gamma(0, 1).is_err());
        assert!(gamma(1, 0).is_err());
        assert_eq!(gamma_opt(7, None).unwrap(), 1.0);
    }

    #[test]
    fn mu_cap_values() {
        assert!((mu_cap(1.0, 1.0, 2.0, 10, 1.0, 1).unwrap() - 0.025).abs() < 1e-15);
        let a = mu_cap(0.3, 2.0, 1.5, 10, 0.7, 4).unwrap();
        let b = mu_cap(0.3, 2.0, 1.5, 20, 0.7, 4).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
        assert!(mu_cap(1e-12, 1.0, 2.0, 10, 1.0, 1).unwrap() < 1e-13);
        assert!(mu_cap(0.0, 1.0, 2.0, 10, 1.0, 1).is_err());
        assert!(mu_cap(1.0, 1.0, 2.0, 0, 1.0, 1).is_err());
        assert!(mu_cap(1.0, -1.0, 2.0, 10, 1.0, 1).is_err());
    }

    #[test]
    fn schedule_formulas_at_probe_points() {
        let (c, t_total, beta, d, k) = (0.7, 40usize, 0.5, 5usize, 4usize);
        let g = ((3 * d - 1) as f64 / k as f64).sqrt() + 1.0;
        let s = g - 1.0;
        for kind in ScheduleKind::ALL {
            let sch = Schedule::new(kind, c, t_total, beta, d, Some(k)).unwrap();
            for t in [1, t_total / 2, t_total] {
                let tf = t as f64;
                let tt = t_total as f64;
                let expect = match kind {
                    ScheduleKind::DecreasingOverGamma => c / (tf * g),
                    ScheduleKind::DecreasingPlain => c / tf,
                    ScheduleKind::ConstantOverTGamma => c / (tt * g),
                    ScheduleKind::LogConstantNonconvex => (1.0 + c * beta).ln() / (tt * beta * g),
                    ScheduleKind::LogConstantConvex => {
                        ((1.0 + c * beta / g * s).ln() / (tt * beta * s)).min(2.0 / beta)
                    }
                    ScheduleKind::ConstantPlain => c / tt,
                };
                let a = sch.alpha(t);
                assert!(a > 0.0);
                assert!((a - expect).abs() <= 4.0 * f64::EPSILON * expect, "{kind:?} t={t}");
            }
        }
    }

    #[test]
    fn log_convex_capped_and_limit() {
        let sch = Schedule::new(ScheduleKind::LogConstantConvex, 1e6, 1, 10.0, 3, Some(1)).unwrap();
        assert!(sch.alpha(1) <= 2.0 / 10.0);
        let sch = Schedule::new(ScheduleKind::LogConstantConvex, 0.5, 10, 1.0, 3, None).unwrap();
        assert!((sch.alpha(3) - 0.05).abs() < 1e-15);
        let near = Schedule::new(ScheduleKind::LogConstantConvex, 0.5, 10, 1.0, 3, Some(1 << 40)).unwrap();
        assert!((near.alpha(3) - 0.05).abs() < 1e-6);
    }

    #[test]
    fn validation() {
        assert!(Schedule::new(ScheduleKind::DecreasingPlain, 0.0, 5, 1.0, 2, Some(1)).is_err());
        assert!(Schedule::new(ScheduleKind::LogConstantNonconvex, 1.0, 5, 0.0, 2, Some(1)).is_err());
        assert!(Schedule::new(ScheduleKind::DecreasingPlain, 1.0, 5, 0.0, 2, Some(1)).is_ok());
        assert!(Schedule::new(ScheduleKind::DecreasingPlain, 1.0, 5, 1.0, 2, Some(0)).is_err());
        assert_eq!(
            Schedule::new(ScheduleKind::ConstantPlain, 1.0, 0, 1.0, 2, None)
                .unwrap()
                .values(),
            Vec::<f64>::new()
        );
    }

    #[test]
    fn parse_kind_names() {
        for k in ScheduleKind::ALL {
            assert_eq!(k.name().parse::<ScheduleKind>().unwrap(), k);
            assert_eq!(format!("{k:?}").parse::<ScheduleKind>().unwrap(), k);
        }
        assert!("sometimes".parse::<ScheduleKind>().is_err());
    }
}
