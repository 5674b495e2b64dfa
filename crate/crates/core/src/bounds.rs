//! Closed-form stability and generalization bounds for ZoSS, its mini-batch
//! variant, SGD and full-batch GD.
//!
//! Symbols: `L` Lipschitz constant, `β` smoothness, `n` sample size, `T`
//! horizon, `C` step-size constant, `c` smoothing-cap constant, `μ` smoothing
//! radius, `Γ = √((3d−1)/K) + 1`, `M = (3 + d)^{3/2}`. `K = None` is the
//! infinite-query limit where `Γ = 1`; with `c = μ = 0` as well every ZoSS bound
//! reduces to its SGD counterpart.
//!
//! Products of expansion factors are accumulated in log space; a bound whose
//! logarithm exceeds [`LOG_SATURATION`] is reported as `+∞`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, ZossError};
use crate::report::{float, float_map};
use crate::schedule::{query_ratio, Schedule, ScheduleKind};

pub const LOG_SATURATION: f64 = 709.0;

fn saturating_exp(log_v: f64) -> f64 {
    if log_v > LOG_SATURATION {
        f64::INFINITY
    } else {
        log_v.exp()
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    #[serde(rename = "L")]
    pub l: f64,
    pub beta: f64,
    pub n: usize,
    #[serde(rename = "T")]
    pub t_total: usize,
    pub d: usize,
    /// Query directions; `None` is `K = ∞`.
    #[serde(rename = "K")]
    pub k: Option<usize>,
    /// Step-size constant `C`.
    #[serde(rename = "C")]
    pub c_step: f64,
    /// Smoothing-cap constant `c`.
    #[serde(rename = "c")]
    pub c_cap: f64,
    pub mu: f64,
    /// Batch size; recorded only, none of the bounds depend on it.
    pub m: usize,
    pub t0: usize,
}

impl BoundInputs {
    /// Inputs with `c = μ = 0`, `m = 1`, `t0 = 0`.
    pub fn new(l: f64, beta: f64, n: usize, t_total: usize, d: usize, k: Option<usize>, c_step: f64) -> Self {
        Self {
            l,
            beta,
            n,
            t_total,
            d,
            k,
            c_step,
            c_cap: 0.0,
            mu: 0.0,
            m: 1,
            t0: 0,
        }
    }

    pub fn with_cap(mut self, c: f64) -> Self {
        self.c_cap = c;
        self
    }
    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }
    /// Sets `μ` to the cap `cLΓ/(nβM)`.
    pub fn with_mu_at_cap(mut self) -> Self {
        self.mu = self.c_cap * self.l * self.gamma() / (self.n as f64 * self.beta * self.moment3());
        self
    }
    pub fn with_batch(mut self, m: usize) -> Self {
        self.m = m;
        self
    }
    pub fn with_t0(mut self, t0: usize) -> Self {
        self.t0 = t0;
        self
    }

    /// Same inputs at `K = ∞`, `c = 0`, `μ = 0`.
    pub fn sgd_limit(&self) -> Self {
        Self {
            k: None,
            c_cap: 0.0,
            mu: 0.0,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive, got {v}")))
            }
        };
        pos("L", self.l)?;
        pos("beta", self.beta)?;
        pos("C", self.c_step)?;
        if !(self.c_cap >= 0.0 && self.c_cap.is_finite()) {
            return Err(invalid("c must be >= 0"));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(invalid("mu must be >= 0"));
        }
        if self.n < 1 || self.d < 1 || self.k == Some(0) {
            return Err(invalid("n, d and K must be positive"));
        }
        if self.t0 > self.t_total {
            return Err(invalid("t0 must be <= T"));
        }
        if self.m < 1 || self.m > self.n {
            return Err(invalid("batch size must be in 1..=n"));
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        query_ratio(self.d, self.k) + 1.0
    }

    /// `√((3d − 1)/K)`.
    pub fn ratio(&self) -> f64 {
        query_ratio(self.d, self.k)
    }

    /// `(3 + d)^{3/2}`.
    pub fn moment3(&self) -> f64 {
        (3.0 + self.d as f64).powf(1.5)
    }

    /// `2LΓ/n + μβM`.
    pub fn stability_prefactor(&self) -> f64 {
        2.0 * self.l * self.gamma() / self.n as f64 + self.mu * self.beta * self.moment3()
    }

    pub fn schedule(&self, kind: ScheduleKind) -> Result<Schedule> {
        Schedule::new(kind, self.c_step, self.t_total, self.beta, self.d, self.k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    #[serde(with = "float")]
    pub value: f64,
    #[serde(with = "float_map")]
    pub formula_terms: BTreeMap<String, f64>,
    pub inputs: BoundInputs,
}

impl BoundReport {
    fn new(name: &str, value: f64, inputs: &BoundInputs) -> Self {
        Self {
            name: name.to_string(),
            value,
            formula_terms: BTreeMap::new(),
            inputs: *inputs,
        }
    }

    fn term(mut self, key: &str, v: f64) -> Self {
        self.formula_terms.insert(key.to_string(), v);
        self
    }
}

fn check_schedule(inputs: &BoundInputs, schedule: &Schedule) -> Result<()> {
    if schedule.t_total != inputs.t_total || schedule.d != inputs.d || schedule.k != inputs.k {
        return Err(ZossError::Precondition(format!(
            "schedule (T={}, d={}, K={:?}) does not match bound inputs (T={}, d={}, K={:?})",
            schedule.t_total, schedule.d, schedule.k, inputs.t_total, inputs.d, inputs.k
        )));
    }
    Ok(())
}

/// `ln Σ_{t=t0+1}^{T} α_t Π_{j=t+1}^{T} (1 + rate·α_j)`, via the forward
/// recursion `S_t = (1 + rate·α_t)·S_{t−1} + α_t`.
fn log_discounted_sum(alphas: &[f64], t0: usize, rate: f64) -> f64 {
    let mut log_s = f64::NEG_INFINITY;
    for &a in &alphas[t0.min(alphas.len())..] {
        log_s = log_add_exp((rate * a).ln_1p() + log_s, a.ln());
    }
    log_s
}

fn check_alphas(inputs: &BoundInputs, alphas: &[f64]) -> Result<()> {
    inputs.validate()?;
    if alphas.len() != inputs.t_total {
        return Err(invalid(format!(
            "expected {} step sizes, got {}",
            inputs.t_total,
            alphas.len()
        )));
    }
    if alphas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
        return Err(invalid("step sizes must be finite and >= 0"));
    }
    Ok(())
}

fn stability_with_rate(name: &str, inputs: &BoundInputs, alphas: &[f64], rate: f64) -> Result<BoundReport> {
    check_alphas(inputs, alphas)?;
    let pre = inputs.stability_prefactor();
    let log_sum = log_discounted_sum(alphas, inputs.t0, rate);
    let value = if log_sum == f64::NEG_INFINITY {
        0.0
    } else {
        saturating_exp(pre.ln() + log_sum)
    };
    Ok(BoundReport::new(name, value, inputs)
        .term("gamma", inputs.gamma())
        .term("prefactor", pre)
        .term("expansion_rate", rate)
        .term("log_sum", log_sum))
}

/// `(2LΓ/n + μβM) Σ_{t=t0+1}^{T} α_t Π_{j>t} (1 + βα_jΓ(1 − 1/n))` for explicit step sizes.
pub fn stability_bound_nonconvex_alphas(inputs: &BoundInputs, alphas: &[f64]) -> Result<BoundReport> {
    let rate = inputs.beta * inputs.gamma() * (1.0 - 1.0 / inputs.n as f64);
    stability_with_rate("stability_nonconvex", inputs, alphas, rate)
}

pub fn stability_bound_nonconvex(inputs: &BoundInputs, schedule: &Schedule) -> Result<BoundReport> {
    check_schedule(inputs, schedule)?;
    stability_bound_nonconvex_alphas(inputs, &schedule.values())
}

/// Convex losses with `α_t ≤ 2/β`: expansion factor `1 + βα_j√((3d−1)/K)`.
pub fn stability_bound_convex_alphas(inputs: &BoundInputs, alphas: &[f64]) -> Result<BoundReport> {
    stability_with_rate("stability_convex", inputs, alphas, inputs.beta * inputs.ratio())
}

pub fn stability_bound_convex(inputs: &BoundInputs, schedule: &Schedule) -> Result<BoundReport> {
    check_schedule(inputs, schedule)?;
    stability_bound_convex_alphas(inputs, &schedule.values())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedDecreasingBound {
    #[serde(with = "float")]
    pub tight: f64,
    #[serde(with = "float")]
    pub short: f64,
    /// True when the constant branch `1` attains the max in the tight form.
    pub branch1_active: bool,
    pub t0_star: f64,
}

/// Bounded loss in `[0, 1]`, `α_t = C/(tΓ)`.
///
/// short: `(1 + 1/q)·((2+c)CL²)^{1/(q+1)}·(eT)^{q/(q+1)} / n` with `q = Cβ`.
/// tight: `((2+c)CL²)^{1/(q+1)}(eT)^{q/(q+1)}/n · max{1, 1 + 1/q − e^q/(βC^{1/(q+1)})·((2+c)L²/(eT))^{q/(q+1)}}`.
pub fn gen_bound_bounded_decreasing(inputs: &BoundInputs) -> Result<BoundedDecreasingBound> {
    inputs.validate()?;
    if inputs.t_total < 1 {
        return Err(invalid("T must be >= 1"));
    }
    let q = inputs.c_step * inputs.beta;
    let big_d = (2.0 + inputs.c_cap) * inputs.c_step * inputs.l * inputs.l;
    let log_et = 1.0 + (inputs.t_total as f64).ln();
    let log_a = big_d.ln() / (q + 1.0) + q / (q + 1.0) * log_et - (inputs.n as f64).ln();
    let short = saturating_exp(log_a + (1.0 / q).ln_1p());
    // second branch divided by the common factor; algebraically
    // 1 + 1/q − e^Y/q = 1 − expm1(Y)/q with Y = q + (q/(q+1))·ln(D/(eT))
    let y = q + q / (q + 1.0) * (big_d.ln() - log_et);
    let branch2 = if y > LOG_SATURATION {
        f64::NEG_INFINITY
    } else {
        1.0 - y.exp_m1() / q
    };
    let branch1_active = branch2 <= 1.0;
    let factor = branch2.max(1.0);
    let tight = saturating_exp(log_a + factor.ln());
    Ok(BoundedDecreasingBound {
        tight,
        short,
        branch1_active,
        t0_star: optimal_t0(inputs)?,
    })
}

impl BoundedDecreasingBound {
    pub fn reports(&self, inputs: &BoundInputs) -> [BoundReport; 2] {
        [
            BoundReport::new("gen_bounded_decreasing_short", self.short, inputs),
            BoundReport::new("gen_bounded_decreasing_tight", self.tight, inputs)
                .term("branch1_active", if self.branch1_active { 1.0 } else { 0.0 })
                .term("t0_star", self.t0_star),
        ]
    }
}

/// `min{(qnLD)^{1/(q+1)}(eT)^{q/(q+1)}, T}` where `qnLD = (2+c)CL²` at the cap.
pub fn optimal_t0(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let q = inputs.c_step * inputs.beta;
    let big_d = (2.0 + inputs.c_cap) * inputs.c_step * inputs.l * inputs.l;
    let log_et = 1.0 + (inputs.t_total as f64).ln();
    let v = saturating_exp(big_d.ln() / (q + 1.0) + q / (q + 1.0) * log_et);
    Ok(v.min(inputs.t_total as f64))
}

/// Bounded loss with `α_t = C/t`: `(1 + 1/(βC))²·(1 + (2+c)CL²)·3Te/(2n)`, free of `d` and `K`.
pub fn gen_bound_dimension_free(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    let (c, b, l) = (inputs.c_step, inputs.beta, inputs.l);
    let lead = (1.0 + 1.0 / (b * c)).powi(2);
    let mid = 1.0 + (2.0 + inputs.c_cap) * c * l * l;
    let tail = 3.0 * inputs.t_total as f64 * std::f64::consts::E / (2.0 * inputs.n as f64);
    Ok(BoundReport::new("gen_dimension_free", lead * mid * tail, inputs)
        .term("lead", lead)
        .term("mid", mid))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstantCase {
    /// `α_t = log(1 + Cβ)/(TβΓ)`, or its convex counterpart.
    LogSchedule,
    /// `α_t = C/(TΓ)`.
    PlainConstant,
}

/// Unbounded loss, constant steps. `LogSchedule`: `(2+c)CL²/n`;
/// `PlainConstant`: `L²(2+c)(e^{Cβ} − 1)/(nβ)`.
pub fn gen_bound_unbounded_constant(inputs: &BoundInputs, case: ConstantCase) -> Result<BoundReport> {
    inputs.validate()?;
    let (c, b, l, n) = (inputs.c_step, inputs.beta, inputs.l, inputs.n as f64);
    let k2 = (2.0 + inputs.c_cap) * l * l;
    Ok(match case {
        ConstantCase::LogSchedule => BoundReport::new("gen_unbounded_constant_log", k2 * c / n, inputs),
        ConstantCase::PlainConstant => {
            let q = c * b;
            let value = if q > LOG_SATURATION {
                saturating_exp((k2 / (n * b)).ln() + q)
            } else {
                k2 * q.exp_m1() / (n * b)
            };
            BoundReport::new("gen_unbounded_constant_plain", value, inputs).term("exponent", q)
        }
    })
}

fn unbounded_decreasing_value(k2: f64, inputs: &BoundInputs) -> (f64, f64, f64) {
    let (c, b) = (inputs.c_step, inputs.beta);
    let log_et = 1.0 + (inputs.t_total.max(1) as f64).ln();
    let first = c + 1.0 / b;
    let second = c * log_et;
    let m = first.min(second);
    let value = saturating_exp((k2 / inputs.n as f64).ln() + c * b * log_et + m.ln());
    (value, first, second)
}

/// Unbounded loss, `α_t = C/(tΓ)`: `(2+c)L²(eT)^{Cβ}·min{C + 1/β, C·log(eT)}/n`.
pub fn gen_bound_unbounded_decreasing(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    let k2 = (2.0 + inputs.c_cap) * inputs.l * inputs.l;
    let (value, first, second) = unbounded_decreasing_value(k2, inputs);
    Ok(BoundReport::new("gen_unbounded_decreasing", value, inputs)
        .term(
            "exponent",
            inputs.c_step * inputs.beta * (1.0 + (inputs.t_total.max(1) as f64).ln()),
        )
        .term("min_first", first)
        .term("min_second", second))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdBounds {
    #[serde(with = "float")]
    pub delta_bound: f64,
    /// Only defined for `α_t = C/t`.
    #[serde(with = "crate::report::float_opt")]
    pub gen_bound: Option<f64>,
}

/// Full-batch GD: `δ_T ≤ (2L/n) Σ_t α_t Π_{j>t} (1 + ((n−1)/n)α_jβ)`, and for
/// `α_t = C/t`, `gen ≤ 2L²(eT)^{Cβ}·min{C + 1/β, C·log(eT)}/n`.
pub fn gd_stability_and_gen_bound(inputs: &BoundInputs, schedule: &Schedule) -> Result<GdBounds> {
    if schedule.gamma() != 1.0 {
        return Err(ZossError::Precondition("GD schedules use K = infinity".into()));
    }
    check_alphas(inputs, &schedule.values())?;
    gd_bounds_alphas(inputs, &schedule.values(), schedule.kind)
}

pub fn gd_bounds_alphas(inputs: &BoundInputs, alphas: &[f64], kind: ScheduleKind) -> Result<GdBounds> {
    check_alphas(inputs, alphas)?;
    let n = inputs.n as f64;
    let rate = (n - 1.0) / n * inputs.beta;
    let log_sum = log_discounted_sum(alphas, inputs.t0, rate);
    let delta_bound = if log_sum == f64::NEG_INFINITY {
        0.0
    } else {
        saturating_exp((2.0 * inputs.l / n).ln() + log_sum)
    };
    let gen_bound = matches!(kind, ScheduleKind::DecreasingPlain | ScheduleKind::DecreasingOverGamma)
        .then(|| unbounded_decreasing_value(2.0 * inputs.l * inputs.l, inputs).0);
    Ok(GdBounds { delta_bound, gen_bound })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthCase {
    /// Both runs used the same example(s) at this step.
    SameRule,
    /// The swapped example was used.
    DifferRule,
}

/// One step of the single-query growth recursion:
/// same `(η + αβ√((3d−1)/K))δ + μβαM`, differ `δ + 2αLΓ + μβαM`.
pub fn growth_recursion_step(case: GrowthCase, delta: f64, alpha: f64, eta: f64, inputs: &BoundInputs) -> f64 {
    let bias = inputs.mu * inputs.beta * alpha * inputs.moment3();
    match case {
        GrowthCase::SameRule => (eta + alpha * inputs.beta * inputs.ratio()) * delta + bias,
        GrowthCase::DifferRule => delta + 2.0 * alpha * inputs.l * inputs.gamma() + bias,
    }
}

/// Mini-batch growth recursion with `μ` at the cap:
/// same `(1 + βαΓ)δ + cLαΓ/n`, differ `(1 + ((m−1)/m)βαΓ)δ + 2LαΓ/m + cLαΓ/n`.
pub fn minibatch_growth_step(case: GrowthCase, delta: f64, alpha: f64, inputs: &BoundInputs) -> f64 {
    let g = inputs.gamma();
    let m = inputs.m as f64;
    let cap = inputs.c_cap * inputs.l * alpha * g / inputs.n as f64;
    match case {
        GrowthCase::SameRule => (1.0 + inputs.beta * alpha * g) * delta + cap,
        GrowthCase::DifferRule => {
            (1.0 + (m - 1.0) / m * inputs.beta * alpha * g) * delta + 2.0 * inputs.l * alpha * g / m + cap
        }
    }
}

/// Picks the generalization bound that matches the schedule and loss class.
pub fn generalization_bound(
    inputs: &BoundInputs,
    kind: ScheduleKind,
    bounded01: bool,
    convex: bool,
) -> Result<BoundReport> {
    use ScheduleKind::*;
    match kind {
        DecreasingOverGamma if bounded01 => {
            let b = gen_bound_bounded_decreasing(inputs)?;
            let [short, tight] = b.reports(inputs);
            Ok(short.term("tight", tight.value))
        }
        DecreasingOverGamma => gen_bound_unbounded_decreasing(inputs),
        DecreasingPlain if bounded01 => gen_bound_dimension_free(inputs),
        LogConstantNonconvex => gen_bound_unbounded_constant(inputs, ConstantCase::LogSchedule),
        LogConstantConvex if convex => gen_bound_unbounded_constant(inputs, ConstantCase::LogSchedule),
        ConstantOverTGamma => gen_bound_unbounded_constant(inputs, ConstantCase::PlainConstant),
        ConstantPlain if inputs.gamma() == 1.0 => gen_bound_unbounded_constant(inputs, ConstantCase::PlainConstant),
        _ => Err(ZossError::Precondition(format!(
            "no generalization bound for schedule {} with bounded01={bounded01}, convex={convex}",
            kind.name()
        ))),
    }
}

/// Textbook SGD formulas, kept separate from the ZoSS evaluators so the
/// infinite-query limits can be compared against them.
pub mod sgd {
    /// Bounded loss, `α_t ≤ C/t`: `(1 + 1/(Cβ))(2CL²)^{1/(Cβ+1)}(eT)^{Cβ/(Cβ+1)}/n`.
    pub fn bounded_decreasing(c: f64, beta: f64, l: f64, t: usize, n: usize) -> f64 {
        let q = c * beta;
        (1.0 + 1.0 / q) * (2.0 * c * l * l).powf(1.0 / (q + 1.0)) * (std::f64::consts::E * t as f64).powf(q / (q + 1.0))
            / n as f64
    }

    /// Unbounded loss, `α_t ≤ C/T`: `2CL²/n`.
    pub fn constant(c: f64, l: f64, n: usize) -> f64 {
        2.0 * c * l * l / n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub row: usize,
    pub algorithm: String,
    pub step_rule: String,
    pub bound: String,
    #[serde(with = "float")]
    pub value: f64,
    /// The same formula at `K = ∞`, `c = 0`, `μ = 0`.
    #[serde(with = "float")]
    pub sgd_limit: f64,
    pub nonconvex: bool,
    pub unbounded: bool,
    pub minibatch: bool,
}

/// The tabulated generalization bounds, ZoSS rows next to their SGD rows.
pub fn table1(inputs: &BoundInputs) -> Result<Vec<Table1Row>> {
    inputs.validate()?;
    let lim = inputs.sgd_limit();
    let sgd_bd = sgd::bounded_decreasing(inputs.c_step, inputs.beta, inputs.l, inputs.t_total, inputs.n);
    let sgd_c = sgd::constant(inputs.c_step, inputs.l, inputs.n);
    let log_c = |i: &BoundInputs| gen_bound_unbounded_constant(i, ConstantCase::LogSchedule).map(|r| r.value);
    let plain = |i: &BoundInputs| gen_bound_unbounded_constant(i, ConstantCase::PlainConstant).map(|r| r.value);
    let mk = |row, alg: &str, step: &str, bound: &str, value, sgd_limit, flags: (bool, bool, bool)| Table1Row {
        row,
        algorithm: alg.into(),
        step_rule: step.into(),
        bound: bound.into(),
        value,
        sgd_limit,
        nonconvex: flags.0,
        unbounded: flags.1,
        minibatch: flags.2,
    };
    Ok(vec![
        mk(
            1,
            "zoss",
            "C/(t*Gamma)",
            "gen_bounded_decreasing_short",
            gen_bound_bounded_decreasing(inputs)?.short,
            gen_bound_bounded_decreasing(&lim)?.short,
            (true, false, false),
        ),
        mk(
            2,
            "sgd",
            "C/t",
            "sgd_bounded_decreasing",
            sgd_bd,
            sgd_bd,
            (true, false, false),
        ),
        mk(
            3,
            "zoss",
            "C/t",
            "gen_dimension_free",
            gen_bound_dimension_free(inputs)?.value,
            gen_bound_dimension_free(&lim)?.value,
            (true, false, false),
        ),
        mk(
            4,
            "zoss",
            "log(1+(C*beta/Gamma)*s)/(T*beta*s)",
            "gen_unbounded_constant_log",
            log_c(inputs)?,
            log_c(&lim)?,
            (false, true, true),
        ),
        mk(5, "sgd", "C/T", "sgd_constant", sgd_c, sgd_c, (false, true, true)),
        mk(
            6,
            "zoss",
            "C/(T*Gamma)",
            "gen_unbounded_constant_plain",
            plain(inputs)?,
            plain(&lim)?,
            (true, true, true),
        ),
        mk(
            7,
            "zoss",
            "log(1+C*beta)/(T*beta*Gamma)",
            "gen_unbounded_constant_log",
            log_c(inputs)?,
            log_c(&lim)?,
            (true, true, true),
        ),
        mk(
            8,
            "zoss",
            "C/(t*Gamma)",
            "gen_unbounded_decreasing",
            gen_bound_unbounded_decreasing(inputs)?.value,
            gen_bound_unbounded_decreasing(&lim)?.value,
            (true, true, true),
        ),
    ])
}
