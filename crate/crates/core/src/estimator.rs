//! Gaussian-smoothed zeroth-order gradient estimates and Monte Carlo checks of
//! the moment identities they rely on.
//!
//! The estimate for a single example is
//!
//! ```text
//! Δf(w, z) = (1/K) Σ_k [f(w + μU_k, z) − f(w, z)] / μ · U_k,   U_k ~ N(0, I_d)
//! ```
//!
//! using exactly `K + 1` loss evaluations. Each `U_k` comes from its own
//! counter-keyed stream `(seed, replica, t, slot, k)`, so two coupled runs that
//! share a replica id see identical perturbations.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, ZossError};
use crate::losses::{Example, LossModel};
use crate::report::VerifierRecord;
use crate::rng::{Domain, StreamKey};
use crate::stats::{dot, mean_stderr, norm};

/// Coordinates of one perturbation direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PerturbationStream {
    pub master_seed: u64,
    pub replica: u64,
    pub t: u64,
    pub slot: u32,
    pub direction: u64,
}

impl PerturbationStream {
    pub fn new(master_seed: u64, replica: u64, t: u64) -> Self {
        Self {
            master_seed,
            replica,
            t,
            slot: 0,
            direction: 0,
        }
    }

    pub fn at(self, slot: u32, direction: u64) -> Self {
        Self {
            slot,
            direction,
            ..self
        }
    }

    pub fn key(&self) -> StreamKey {
        StreamKey::new(self.master_seed, Domain::Perturb)
            .replica(self.replica)
            .step(self.t)
            .slot(self.slot)
            .direction(self.direction)
    }
}

pub(crate) fn fill_gaussian(key: StreamKey, out: &mut [f64]) {
    let mut rng = key.rng();
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

pub fn sample_gaussian(stream: &PerturbationStream, d: usize) -> Result<Vec<f64>> {
    if d < 1 {
        return Err(invalid("dimension must be >= 1"));
    }
    let mut u = vec![0.0; d];
    fill_gaussian(stream.key(), &mut u);
    Ok(u)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothedGradientParams {
    pub k: usize,
    pub mu: f64,
}

impl SmoothedGradientParams {
    pub fn new(k: usize, mu: f64) -> Result<Self> {
        let p = Self { k, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(invalid("K must be >= 1"));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(invalid("mu must be positive and finite"));
        }
        Ok(())
    }
}

/// Work buffers reused across steps.
#[derive(Debug, Default, Clone)]
pub(crate) struct Scratch {
    u: Vec<f64>,
    wp: Vec<f64>,
}

/// Accumulates the mini-batch estimate into `out` and returns the number of
/// loss evaluations performed. Slot `i` uses stream slot `stream.slot + i`.
pub(crate) fn smoothed_gradient_into(
    model: &LossModel,
    w: &[f64],
    batch: &[&Example],
    params: &SmoothedGradientParams,
    stream: &PerturbationStream,
    out: &mut [f64],
    scratch: &mut Scratch,
) -> Result<usize> {
    params.validate()?;
    if batch.is_empty() {
        return Err(invalid("batch must be non-empty"));
    }
    let d = w.len();
    if d != model.dim() || out.len() != d {
        return Err(invalid(format!("dimension mismatch: model {} vs w {}", model.dim(), d)));
    }
    scratch.u.resize(d, 0.0);
    scratch.wp.resize(d, 0.0);
    out.iter_mut().for_each(|o| *o = 0.0);
    let mu = params.mu;
    let mut evals = 0usize;
    for (i, z) in batch.iter().enumerate() {
        let slot = stream.slot + i as u32;
        let f0 = model.evaluate(w, z);
        evals += 1;
        if !f0.is_finite() {
            return Err(ZossError::Numeric { slot: i, direction: 0 });
        }
        for k in 0..params.k {
            fill_gaussian(stream.at(slot, k as u64).key(), &mut scratch.u);
            for ((p, wi), ui) in scratch.wp.iter_mut().zip(w).zip(&scratch.u) {
                *p = wi + mu * ui;
            }
            let fk = model.evaluate(&scratch.wp, z);
            evals += 1;
            if !fk.is_finite() {
                return Err(ZossError::Numeric {
                    slot: i,
                    direction: k + 1,
                });
            }
            let coef = (fk - f0) / mu;
            for (o, ui) in out.iter_mut().zip(&scratch.u) {
                *o += coef * ui;
            }
        }
    }
    let scale = 1.0 / (batch.len() * params.k) as f64;
    out.iter_mut().for_each(|o| *o *= scale);
    Ok(evals)
}

/// Single-example smoothed gradient; never calls `model.gradient`.
pub fn smoothed_gradient(
    model: &LossModel,
    w: &[f64],
    z: &Example,
    params: &SmoothedGradientParams,
    stream: &PerturbationStream,
) -> Result<Vec<f64>> {
    smoothed_gradient_batch(model, w, &[z], params, stream)
}

/// Mini-batch smoothed gradient: `1/(mK) Σ_i Σ_k [f(w + μU_{k,i}, z_i) − f(w, z_i)]/μ · U_{k,i}`,
/// with `m(K + 1)` evaluations.
pub fn smoothed_gradient_batch(
    model: &LossModel,
    w: &[f64],
    batch: &[&Example],
    params: &SmoothedGradientParams,
    stream: &PerturbationStream,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; w.len()];
    smoothed_gradient_into(model, w, batch, params, stream, &mut out, &mut Scratch::default())?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReductionReport {
    pub d: usize,
    pub k: usize,
    pub v_norm: f64,
    pub n_mc: usize,
    /// MC estimate of `E‖(1/K)Σ⟨V,U_k⟩U_k − V‖`.
    pub lhs_mean: f64,
    pub lhs_mean_stderr: f64,
    /// MC estimate of the squared norm's expectation.
    pub lhs_second_moment: f64,
    pub lhs_second_moment_stderr: f64,
    /// `√((3d−1)/K)·‖V‖`.
    pub bound_first: f64,
    /// `(d+1)‖V‖²/K`.
    pub exact_second: f64,
    pub pass: bool,
}

impl VarianceReductionReport {
    pub fn record(&self) -> VerifierRecord {
        VerifierRecord::new("variance_reduction", self.pass)
            .param("d", self.d as f64)
            .param("K", self.k as f64)
            .param("v_norm", self.v_norm)
            .param("n_mc", self.n_mc as f64)
            .param("second_moment_estimate", self.lhs_second_moment)
            .param("second_moment_stderr", self.lhs_second_moment_stderr)
            .param("second_moment_exact", self.exact_second)
            .values(self.lhs_mean, self.lhs_mean_stderr, self.bound_first)
    }
}

/// Monte Carlo check of the variance-reduction inequality and the exact
/// second-moment identity. Sample `s` uses stream `(seed, MonteCarlo, s, k)`.
pub fn verify_variance_reduction(
    d: usize,
    k: usize,
    v: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<VarianceReductionReport> {
    if d < 1 || k < 1 {
        return Err(invalid("d and K must be >= 1"));
    }
    if v.len() != d {
        return Err(invalid("V must have length d"));
    }
    if n_mc < 1000 {
        return Err(invalid("n_mc must be >= 1000"));
    }
    let samples: Vec<(f64, f64)> = (0..n_mc)
        .into_par_iter()
        .map(|s| {
            let mut u = vec![0.0; d];
            let mut acc = vec![0.0; d];
            for j in 0..k {
                let key = StreamKey::new(seed, Domain::MonteCarlo)
                    .replica(s as u64)
                    .direction(j as u64);
                fill_gaussian(key, &mut u);
                let c = dot(v, &u);
                for (a, ui) in acc.iter_mut().zip(&u) {
                    *a += c * ui;
                }
            }
            let inv = 1.0 / k as f64;
            let sq: f64 = acc.iter().zip(v).map(|(a, vi)| (a * inv - vi).powi(2)).sum();
            (sq.sqrt(), sq)
        })
        .collect();
    let first: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let second: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let m1 = mean_stderr(&first);
    let m2 = mean_stderr(&second);
    let vn = norm(v);
    let bound_first = ((3 * d - 1) as f64 / k as f64).sqrt() * vn;
    let exact_second = (d + 1) as f64 * vn * vn / k as f64;
    let pass = m1.mean <= bound_first + 3.0 * m1.stderr && (m2.mean - exact_second).abs() <= 5.0 * m2.stderr;
    Ok(VarianceReductionReport {
        d,
        k,
        v_norm: vn,
        n_mc,
        lhs_mean: m1.mean,
        lhs_mean_stderr: m1.stderr,
        lhs_second_moment: m2.mean,
        lhs_second_moment_stderr: m2.stderr,
        bound_first,
        exact_second,
        pass,
    })
}

/// `E‖U‖³ = 2^{3/2} Γ((d+3)/2) / Γ(d/2)` for `U ~ N(0, I_d)`.
pub fn third_moment_exact(d: usize) -> f64 {
    let a = 0.5 * (d as f64 + 3.0);
    let b = 0.5 * d as f64;
    2f64.powf(1.5) * (libm::lgamma(a) - libm::lgamma(b)).exp()
}

/// The cubic-moment bound `(3 + d)^{3/2}` used by the growth recursion.
pub fn third_moment_bound(d: usize) -> f64 {
    (3.0 + d as f64).powf(1.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThirdMomentReport {
    pub d: usize,
    pub n_mc: usize,
    pub mc_estimate: f64,
    pub stderr: f64,
    pub exact: f64,
    pub bound: f64,
    pub pass: bool,
}

impl ThirdMomentReport {
    pub fn record(&self) -> VerifierRecord {
        VerifierRecord::new("third_moment", self.pass)
            .param("d", self.d as f64)
            .param("n_mc", self.n_mc as f64)
            .param("exact", self.exact)
            .values(self.mc_estimate, self.stderr, self.bound)
    }
}

pub fn verify_third_moment(d: usize, n_mc: usize, seed: u64) -> Result<ThirdMomentReport> {
    if d < 1 {
        return Err(invalid("d must be >= 1"));
    }
    if n_mc < 2 {
        return Err(invalid("n_mc must be >= 2"));
    }
    let cubes: Vec<f64> = (0..n_mc)
        .into_par_iter()
        .map(|s| {
            let mut u = vec![0.0; d];
            fill_gaussian(
                StreamKey::new(seed, Domain::MonteCarlo).replica(s as u64).slot(1),
                &mut u,
            );
            norm(&u).powi(3)
        })
        .collect();
    let m = mean_stderr(&cubes);
    let exact = third_moment_exact(d);
    let bound = third_moment_bound(d);
    let pass = (m.mean - exact).abs() <= 5.0 * m.stderr && exact <= bound;
    Ok(ThirdMomentReport {
        d,
        n_mc,
        mc_estimate: m.mean,
        stderr: m.stderr,
        exact,
        bound,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{make_linear_loss, make_quadratic_loss, Objective};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[derive(Debug, Default)]
    struct Counting {
        calls: AtomicUsize,
        grads: AtomicUsize,
    }

    impl Objective for Counting {
        fn evaluate(&self, w: &[f64], _z: &Example) -> f64 {
            self.calls.fetch_add(1, Ordering::Relaxed);
            w.iter().map(|x| x * x).sum()
        }
        fn gradient(&self, w: &[f64], _z: &Example, out: &mut [f64]) {
            self.grads.fetch_add(1, Ordering::Relaxed);
            for (o, x) in out.iter_mut().zip(w) {
                *o = 2.0 * x;
            }
        }
    }

    #[derive(Debug)]
    struct Exploding;
    impl Objective for Exploding {
        fn evaluate(&self, w: &[f64], _z: &Example) -> f64 {
            if w[0] == 0.0 {
                0.0
            } else {
                f64::NAN
            }
        }
        fn gradient(&self, _w: &[f64], _z: &Example, out: &mut [f64]) {
            out.fill(0.0);
        }
    }

    fn z0(d: usize) -> Example {
        Example::new(vec![0.0; d], 1.0)
    }

    #[test]
    fn gaussian_is_deterministic_per_coordinates() {
        let s = PerturbationStream::new(1, 2, 3).at(4, 5);
        assert_eq!(sample_gaussian(&s, 6).unwrap(), sample_gaussian(&s, 6).unwrap());
        assert_ne!(
            sample_gaussian(&s, 6).unwrap(),
            sample_gaussian(&s.at(4, 6), 6).unwrap()
        );
        assert!(sample_gaussian(&s, 0).is_err());
    }

    #[test]
    fn gaussian_mean_and_variance() {
        let n = 100_000u64;
        let d = 3;
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        for r in 0..n {
            let u = sample_gaussian(&PerturbationStream::new(11, r, 0), d).unwrap();
            for c in 0..d {
                sum[c] += u[c];
                sq[c] += u[c] * u[c];
            }
        }
        for c in 0..d {
            let m = sum[c] / n as f64;
            let v = sq[c] / n as f64 - m * m;
            assert!(m.abs() <= 4.0 / (n as f64).sqrt(), "mean {m}");
            assert!((0.97..=1.03).contains(&v), "variance {v}");
        }
    }

    #[test]
    fn distinct_coordinates_are_uncorrelated() {
        let n = 100_000u64;
        let pairs = [
            (
                PerturbationStream::new(5, 0, 0).at(0, 0),
                PerturbationStream::new(5, 0, 0).at(0, 1),
            ),
            (PerturbationStream::new(5, 0, 0), PerturbationStream::new(5, 0, 1)),
            (
                PerturbationStream::new(5, 0, 0),
                PerturbationStream::new(5, 0, 0).at(1, 0),
            ),
        ];
        for (a, b) in pairs {
            let mut sxy = 0.0;
            let mut sxx = 0.0;
            let mut syy = 0.0;
            for r in 0..n {
                let x = sample_gaussian(&PerturbationStream { replica: r, ..a }, 1).unwrap()[0];
                let y = sample_gaussian(&PerturbationStream { replica: r, ..b }, 1).unwrap()[0];
                sxy += x * y;
                sxx += x * x;
                syy += y * y;
            }
            let rho = sxy / (sxx * syy).sqrt();
            assert!(rho.abs() < 0.02, "rho = {rho}");
        }
    }

    #[test]
    fn params_validation() {
        assert!(SmoothedGradientParams::new(0, 0.1).is_err());
        assert!(SmoothedGradientParams::new(1, 0.0).is_err());
        assert!(SmoothedGradientParams::new(1, -1.0).is_err());
        assert!(SmoothedGradientParams::new(1, f64::INFINITY).is_err());
        assert!(SmoothedGradientParams::new(3, 1e-3).is_ok());
    }

    #[test]
    fn exactly_k_plus_one_evaluations_and_no_gradient_calls() {
        let obj = Arc::new(Counting::default());
        let model = LossModel::new("count", 4, 1.0, 2.0, true, false, 1.0, obj.clone()).unwrap();
        let p = SmoothedGradientParams::new(7, 1e-3).unwrap();
        smoothed_gradient(
            &model,
            &[0.1, 0.2, 0.3, 0.4],
            &z0(4),
            &p,
            &PerturbationStream::new(0, 0, 0),
        )
        .unwrap();
        assert_eq!(obj.calls.load(Ordering::Relaxed), 8);
        assert_eq!(obj.grads.load(Ordering::Relaxed), 0);

        let z = z0(4);
        let batch = [&z, &z, &z];
        smoothed_gradient_batch(&model, &[0.0; 4], &batch, &p, &PerturbationStream::new(0, 0, 0)).unwrap();
        assert_eq!(obj.calls.load(Ordering::Relaxed), 8 + 3 * 8);
    }

    #[test]
    fn linear_loss_reduces_to_projection_average() {
        let a = vec![0.5, -1.5, 2.0];
        let model = make_linear_loss(a.clone()).unwrap();
        let w = [0.3, 0.1, -0.7];
        let stream = PerturbationStream::new(9, 1, 4);
        for (k, mu) in [(1usize, 1e-3), (5, 0.5), (20, 3.0)] {
            let p = SmoothedGradientParams::new(k, mu).unwrap();
            let g = smoothed_gradient(&model, &w, &z0(3), &p, &stream).unwrap();
            let mut expect = vec![0.0; 3];
            for j in 0..k {
                let u = sample_gaussian(&stream.at(0, j as u64), 3).unwrap();
                let c = dot(&a, &u);
                for i in 0..3 {
                    expect[i] += c * u[i] / k as f64;
                }
            }
            for i in 0..3 {
                assert!(
                    (g[i] - expect[i]).abs() <= 1e-9 * (1.0 + expect[i].abs()),
                    "{g:?} vs {expect:?}"
                );
            }
        }
    }

    #[test]
    fn linear_loss_scale_equivariance() {
        let w = [0.3, 0.1];
        let stream = PerturbationStream::new(2, 0, 0);
        let p = SmoothedGradientParams::new(9, 0.25).unwrap();
        let g1 = smoothed_gradient(&make_linear_loss(vec![1.0, -2.0]).unwrap(), &w, &z0(2), &p, &stream).unwrap();
        let g2 = smoothed_gradient(&make_linear_loss(vec![2.0, -4.0]).unwrap(), &w, &z0(2), &p, &stream).unwrap();
        for i in 0..2 {
            assert!((g2[i] - 2.0 * g1[i]).abs() <= 1e-12 * (1.0 + g1[i].abs()));
        }
    }

    #[test]
    fn single_slot_batch_matches_single_example() {
        let model = make_quadratic_loss(3, 1.0).unwrap();
        let z = Example::new(vec![0.2, 0.1, -0.4], 1.0);
        let p = SmoothedGradientParams::new(6, 1e-2).unwrap();
        let s = PerturbationStream::new(3, 7, 2);
        let a = smoothed_gradient(&model, &[0.5, 0.5, 0.5], &z, &p, &s).unwrap();
        let b = smoothed_gradient_batch(&model, &[0.5, 0.5, 0.5], &[&z], &p, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn batch_is_average_of_per_slot_estimates() {
        let model = make_quadratic_loss(2, 1.0).unwrap();
        let z = Example::new(vec![0.2, -0.3], 1.0);
        let p = SmoothedGradientParams::new(4, 1e-2).unwrap();
        let s = PerturbationStream::new(3, 1, 1);
        let w = [0.4, 0.9];
        let b = smoothed_gradient_batch(&model, &w, &[&z, &z, &z], &p, &s).unwrap();
        let mut avg = [0.0; 2];
        for i in 0..3u32 {
            let g = smoothed_gradient(&model, &w, &z, &p, &PerturbationStream { slot: i, ..s }).unwrap();
            avg[0] += g[0] / 3.0;
            avg[1] += g[1] / 3.0;
        }
        for c in 0..2 {
            assert!((b[c] - avg[c]).abs() < 1e-12);
        }
        // independent per-slot streams: not the single-example estimate
        let single = smoothed_gradient(&model, &w, &z, &p, &s).unwrap();
        assert_ne!(b, single);
        assert!(smoothed_gradient_batch(&model, &w, &[], &p, &s).is_err());
    }

    #[test]
    fn non_finite_evaluation_is_reported() {
        let model = LossModel::new("boom", 2, 1.0, 1.0, true, false, 1.0, Arc::new(Exploding)).unwrap();
        let p = SmoothedGradientParams::new(3, 0.1).unwrap();
        let err = smoothed_gradient(&model, &[0.0, 0.0], &z0(2), &p, &PerturbationStream::new(0, 0, 0));
        assert!(matches!(err, Err(ZossError::Numeric { slot: 0, direction: 1 })));
    }

    #[test]
    fn converges_to_gradient_for_large_k_small_mu() {
        let model = make_quadratic_loss(5, 10.0).unwrap();
        let z = Example::new(vec![0.1, -0.2, 0.3, 0.0, 0.5], 1.0);
        let w = [1.0, 0.5, -0.5, 2.0, -1.0];
        let p = SmoothedGradientParams::new(10_000, 1e-6).unwrap();
        let g = smoothed_gradient(&model, &w, &z, &p, &PerturbationStream::new(1, 0, 0)).unwrap();
        let truth = model.gradient(&w, &z);
        let err = crate::stats::dist(&g, &truth) / norm(&truth);
        assert!(err <= 0.05, "relative error {err}");
    }

    #[test]
    fn bias_at_minimum_is_order_mu() {
        let d = 4;
        let model = make_quadratic_loss(d, 1.0).unwrap();
        let z = Example::new(vec![0.3; d], 1.0);
        let w = vec![0.3; d];
        let (k, mu) = (16usize, 1e-4);
        let p = SmoothedGradientParams::new(k, mu).unwrap();
        let g = smoothed_gradient(&model, &w, &z, &p, &PerturbationStream::new(4, 0, 0)).unwrap();
        let envelope = mu * model.smoothness() * third_moment_bound(d) * (1.0 + 4.0 / (k as f64).sqrt());
        assert!(norm(&g) <= envelope, "{} > {envelope}", norm(&g));
    }

    #[test]
    fn zero_vector_verifier_is_exact() {
        let r = verify_variance_reduction(3, 2, &[0.0; 3], 1000, 0).unwrap();
        assert_eq!(r.lhs_mean, 0.0);
        assert_eq!(r.bound_first, 0.0);
        assert_eq!(r.exact_second, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn variance_reduction_small_cases() {
        let r = verify_variance_reduction(1, 1, &[1.0], 100_000, 5).unwrap();
        assert_eq!(r.exact_second, 2.0);
        assert!(r.pass, "{r:?}");
        let mut v = vec![0.0; 10];
        v[3] = 1.0;
        let r = verify_variance_reduction(10, 4, &v, 20_000, 6).unwrap();
        assert!((r.bound_first - (29.0f64 / 4.0).sqrt()).abs() < 1e-12);
        assert!(r.lhs_mean <= r.bound_first);
        assert!(r.pass, "{r:?}");
        assert!(verify_variance_reduction(2, 1, &[1.0, 0.0], 999, 0).is_err());
        assert!(verify_variance_reduction(2, 1, &[1.0], 1000, 0).is_err());
    }

    #[test]
    fn third_moment_closed_forms() {
        let pi = std::f64::consts::PI;
        assert!((third_moment_exact(1) - 2.0 * (2.0 / pi).sqrt()).abs() < 1e-12);
        assert!((third_moment_exact(3) - 2f64.powf(1.5) * 2.0 / (pi.sqrt() / 2.0)).abs() < 1e-12);
        assert!((third_moment_exact(3) - 6.383).abs() < 1e-3);
        for d in 1..=200 {
            assert!(third_moment_exact(d) <= third_moment_bound(d));
        }
        let r = verify_third_moment(3, 50_000, 1).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
