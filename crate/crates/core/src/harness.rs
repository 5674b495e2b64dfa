//! Coupled-trajectory stability experiments and generalization-gap experiments.
//!
//! A coupled pair runs the same configuration and replica id on neighboring
//! datasets `S`, `S'`. Index draws and perturbations are keyed by the replica id
//! only, so both runs consume identical randomness and differ only through the
//! swapped example. Replicas run in parallel and are aggregated in replica
//! order, which keeps reports independent of the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundInputs, BoundReport};
pub use crate::data::{generate_dataset, make_neighbor, Dataset, DatasetSpec, NeighborPair};
use crate::error::{invalid, Result, ZossError};
use crate::estimator::{smoothed_gradient, PerturbationStream, SmoothedGradientParams};
use crate::losses::LossModel;
use crate::optimizers::{run_trajectory_with, Algorithm, RunConfig, Trajectory};
use crate::report::{self, float};
use crate::rng::{derive_seed, Domain, StreamKey};
use crate::stats::{dist, mean_stderr, norm};

/// Share of failed (diverged) replicas above which a report fails.
pub const MAX_FAILED_FRACTION: f64 = 0.01;

/// Swap positions `{1, n/2, n}`.
pub fn default_swap_indices(n: usize) -> Vec<usize> {
    let mut v = vec![1, (n / 2).max(1), n];
    v.dedup();
    v
}

/// Bound inputs describing `config` on a sample of size `n`.
pub fn bound_inputs(model: &LossModel, config: &RunConfig, n: usize) -> BoundInputs {
    let zoss = config.algorithm == Algorithm::Zoss;
    BoundInputs {
        l: model.lipschitz(),
        beta: model.smoothness(),
        n,
        t_total: config.t_total,
        d: model.dim(),
        k: config.schedule.k,
        c_step: config.schedule.c,
        c_cap: if zoss { config.cap_c } else { 0.0 },
        mu: if zoss { config.mu } else { 0.0 },
        m: config.m,
        t0: config.t0,
    }
}

/// The bound on `E[δ_T]` matching the algorithm and loss class: the full-batch
/// bound for GD, the convex bound when the loss is convex and every step is at
/// most `2/β`, and the nonconvex bound otherwise.
pub fn stability_bound_for(model: &LossModel, config: &RunConfig, n: usize) -> Result<BoundReport> {
    let inputs = bound_inputs(model, config, n);
    let alphas = config.schedule.values();
    if config.algorithm == Algorithm::Gd {
        let g = bounds::gd_bounds_alphas(&inputs, &alphas, config.schedule.kind)?;
        return Ok(BoundReport {
            name: "stability_gd".into(),
            value: g.delta_bound,
            formula_terms: Default::default(),
            inputs,
        });
    }
    let beta = model.smoothness();
    if model.convex() && alphas.iter().all(|a| a * beta <= 2.0) {
        bounds::stability_bound_convex_alphas(&inputs, &alphas)
    } else {
        bounds::stability_bound_nonconvex_alphas(&inputs, &alphas)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub config: RunConfig,
    pub n: usize,
    pub swap_index: usize,
    pub replicas: usize,
    pub failed_replicas: usize,
    /// Replicas discarded because the swapped index was used at a step `≤ t0`.
    pub rejected_replicas: usize,
    #[serde(with = "float")]
    pub mean_delta_t: f64,
    #[serde(with = "float")]
    pub stderr: f64,
    pub bound_name: String,
    #[serde(with = "float")]
    pub theoretical_bound: f64,
    pub pass: bool,
    /// `δ_T` per replica; `null` for failed or rejected replicas.
    pub deltas: Vec<Option<f64>>,
}

impl StabilityReport {
    pub const CSV_HEADER: [&'static str; 12] = [
        "algorithm",
        "loss",
        "n",
        "m",
        "K",
        "T",
        "swap_index",
        "replicas",
        "mean_delta_t",
        "stderr",
        "theoretical_bound",
        "pass",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            format!("{:?}", self.config.algorithm).to_lowercase(),
            self.config.loss.clone(),
            self.n.to_string(),
            self.config.m.to_string(),
            self.config.k.to_string(),
            self.config.t_total.to_string(),
            self.swap_index.to_string(),
            self.replicas.to_string(),
            report::fmt_float(self.mean_delta_t),
            report::fmt_float(self.stderr),
            report::fmt_float(self.theoretical_bound),
            self.pass.to_string(),
        ]
    }
}

/// Runs replica `replica` on `S` and on `S'` with identical stream coordinates.
pub fn run_coupled_pair(
    model: &LossModel,
    pair: &NeighborPair,
    config: &RunConfig,
    replica: u64,
) -> Result<(Trajectory, Trajectory)> {
    let a = run_trajectory_with(model, config, &pair.base, replica)?;
    let b = run_trajectory_with(model, config, &pair.variant, replica)?;
    Ok((a, b))
}

enum Outcome {
    Delta(f64),
    Failed,
    Rejected,
}

pub fn run_coupled_stability(
    model: &LossModel,
    pair: &NeighborPair,
    config: &RunConfig,
    replicas: usize,
) -> Result<StabilityReport> {
    if replicas < 1 {
        return Err(invalid("replicas must be >= 1"));
    }
    let n = pair.base.len();
    config.validate(n)?;
    let bound = stability_bound_for(model, config, n)?;
    let outcomes: Vec<Outcome> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| match run_coupled_pair(model, pair, config, r) {
            Ok((a, b)) => {
                let early = a.batches[..config.t0].iter().any(|bt| bt.contains(&pair.swap_index));
                if early {
                    Ok(Outcome::Rejected)
                } else {
                    Ok(Outcome::Delta(dist(a.final_iterate(), b.final_iterate())))
                }
            }
            Err(ZossError::Diverged { .. }) => Ok(Outcome::Failed),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let deltas: Vec<Option<f64>> = outcomes
        .iter()
        .map(|o| match o {
            Outcome::Delta(d) => Some(*d),
            _ => None,
        })
        .collect();
    let failed = outcomes.iter().filter(|o| matches!(o, Outcome::Failed)).count();
    let rejected = outcomes.iter().filter(|o| matches!(o, Outcome::Rejected)).count();
    let kept: Vec<f64> = deltas.iter().flatten().copied().collect();
    let ms = mean_stderr(&kept);
    let pass = !kept.is_empty()
        && (failed as f64) <= MAX_FAILED_FRACTION * replicas as f64
        && ms.mean - 3.0 * ms.stderr <= bound.value;
    Ok(StabilityReport {
        config: config.clone(),
        n,
        swap_index: pair.swap_index,
        replicas,
        failed_replicas: failed,
        rejected_replicas: rejected,
        mean_delta_t: ms.mean,
        stderr: ms.stderr,
        bound_name: bound.name,
        theoretical_bound: bound.value,
        pass,
        deltas,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwapSweepReport {
    pub reports: Vec<StabilityReport>,
    /// Swap position with the largest mean `δ_T`.
    pub worst_swap_index: usize,
    pub pass: bool,
}

/// Coupled stability at each swap position of `base`; the replacement example
/// for position `i` comes from `make_neighbor(base, i, neighbor_seed)`.
pub fn run_stability_over_swaps(
    model: &LossModel,
    base: &Dataset,
    config: &RunConfig,
    swap_indices: &[usize],
    replicas: usize,
    neighbor_seed: u64,
) -> Result<SwapSweepReport> {
    if swap_indices.is_empty() {
        return Err(invalid("need at least one swap index"));
    }
    let mut reports = Vec::with_capacity(swap_indices.len());
    for &i in swap_indices {
        let pair = make_neighbor(base, i, neighbor_seed)?;
        reports.push(run_coupled_stability(model, &pair, config, replicas)?);
    }
    let worst = reports
        .iter()
        .fold(&reports[0], |w, r| if r.mean_delta_t > w.mean_delta_t { r } else { w })
        .swap_index;
    let pass = reports.iter().all(|r| r.pass);
    Ok(SwapSweepReport {
        reports,
        worst_swap_index: worst,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSweepReport {
    pub m_values: Vec<usize>,
    pub bound_name: String,
    #[serde(with = "float")]
    pub common_bound: f64,
    pub reports: Vec<StabilityReport>,
    pub pass: bool,
}

/// Coupled stability for each batch size; every run is held to one bound.
pub fn run_batch_size_sweep(
    model: &LossModel,
    pair: &NeighborPair,
    base_config: &RunConfig,
    m_values: &[usize],
    replicas: usize,
) -> Result<BatchSweepReport> {
    let n = pair.base.len();
    if m_values.is_empty() || m_values.iter().any(|&m| m < 1 || m > n) {
        return Err(invalid(format!("batch sizes must lie in 1..={n}")));
    }
    let bound = stability_bound_for(model, base_config, n)?;
    let mut reports = Vec::with_capacity(m_values.len());
    for &m in m_values {
        let cfg = RunConfig {
            m,
            ..base_config.clone()
        };
        let r = run_coupled_stability(model, pair, &cfg, replicas)?;
        if r.theoretical_bound != bound.value {
            return Err(ZossError::Precondition(format!(
                "bound at m = {m} differs from the common bound: {} vs {}",
                r.theoretical_bound, bound.value
            )));
        }
        reports.push(r);
    }
    let pass = reports.iter().all(|r| r.pass);
    Ok(BatchSweepReport {
        m_values: m_values.to_vec(),
        bound_name: bound.name,
        common_bound: bound.value,
        reports,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenReport {
    pub config: RunConfig,
    pub dataset: DatasetSpec,
    pub n: usize,
    pub replicas: usize,
    pub test_size: usize,
    pub failed_replicas: usize,
    #[serde(with = "float")]
    pub mean_gap: f64,
    #[serde(with = "float")]
    pub stderr: f64,
    #[serde(with = "float")]
    pub mean_train_risk: f64,
    #[serde(with = "float")]
    pub mean_test_risk: f64,
    pub bound_name: String,
    #[serde(with = "float")]
    pub theoretical_bound: f64,
    pub pass: bool,
    /// Test minus train risk per replica; `null` for failed replicas.
    pub gaps: Vec<Option<f64>>,
}

impl GenReport {
    pub const CSV_HEADER: [&'static str; 11] = [
        "algorithm",
        "loss",
        "schedule",
        "n",
        "T",
        "replicas",
        "test_size",
        "mean_gap",
        "stderr",
        "theoretical_bound",
        "pass",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            format!("{:?}", self.config.algorithm).to_lowercase(),
            self.config.loss.clone(),
            self.config.schedule.kind.name().into(),
            self.n.to_string(),
            self.config.t_total.to_string(),
            self.replicas.to_string(),
            self.test_size.to_string(),
            report::fmt_float(self.mean_gap),
            report::fmt_float(self.stderr),
            report::fmt_float(self.theoretical_bound),
            self.pass.to_string(),
        ]
    }
}

/// The generalization bound matching `config` and the loss class.
pub fn generalization_bound_for(model: &LossModel, config: &RunConfig, n: usize) -> Result<BoundReport> {
    let inputs = bound_inputs(model, config, n);
    if config.algorithm == Algorithm::Gd {
        let g = bounds::gd_bounds_alphas(&inputs, &config.schedule.values(), config.schedule.kind)?;
        let v = g
            .gen_bound
            .ok_or_else(|| ZossError::Precondition("GD generalization bound needs alpha_t = C/t".into()))?;
        return Ok(BoundReport {
            name: "gen_gd".into(),
            value: v,
            formula_terms: Default::default(),
            inputs,
        });
    }
    bounds::generalization_bound(&inputs, config.schedule.kind, model.bounded01(), model.convex())
}

/// Replica `r` trains on a fresh sample drawn with seed `derive_seed(master_seed, r)`
/// and is scored on `test_size` fresh examples from the `TestSet` stream.
pub fn run_generalization(
    model: &LossModel,
    config: &RunConfig,
    spec: &DatasetSpec,
    n: usize,
    replicas: usize,
    test_size: usize,
) -> Result<GenReport> {
    if test_size < 1000 {
        return Err(invalid("test_size must be >= 1000"));
    }
    if replicas < 2 {
        return Err(invalid("replicas must be >= 2"));
    }
    config.validate(n)?;
    let bound = generalization_bound_for(model, config, n)?;
    let seed = config.master_seed;
    let rows: Vec<Option<(f64, f64)>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<Option<(f64, f64)>> {
            let ds = generate_dataset(spec, n, derive_seed(seed, r))?;
            let traj = match run_trajectory_with(model, config, &ds, r) {
                Ok(t) => t,
                Err(ZossError::Diverged { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let w = traj.final_iterate();
            let train = ds.examples.iter().map(|z| model.evaluate(w, z)).sum::<f64>() / n as f64;
            let test = (0..test_size as u64)
                .map(|j| model.evaluate(w, &spec.draw(StreamKey::new(seed, Domain::TestSet).replica(r).step(j))))
                .sum::<f64>()
                / test_size as f64;
            Ok(Some((train, test)))
        })
        .collect::<Result<_>>()?;
    let kept: Vec<(f64, f64)> = rows.iter().flatten().copied().collect();
    let failed = replicas - kept.len();
    let gaps: Vec<f64> = kept.iter().map(|(tr, te)| te - tr).collect();
    let ms = mean_stderr(&gaps);
    let mean_train = kept.iter().map(|p| p.0).sum::<f64>() / kept.len().max(1) as f64;
    let mean_test = kept.iter().map(|p| p.1).sum::<f64>() / kept.len().max(1) as f64;
    let pass = kept.len() >= 2
        && (failed as f64) <= MAX_FAILED_FRACTION * replicas as f64
        && ms.mean.abs() - 3.0 * ms.stderr <= bound.value;
    Ok(GenReport {
        config: config.clone(),
        dataset: spec.clone(),
        n,
        replicas,
        test_size,
        failed_replicas: failed,
        mean_gap: ms.mean,
        stderr: ms.stderr,
        mean_train_risk: mean_train,
        mean_test_risk: mean_test,
        bound_name: bound.name,
        theoretical_bound: bound.value,
        pass,
        gaps: rows.iter().map(|r| r.map(|(tr, te)| te - tr)).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdLimitRow {
    pub k: usize,
    pub mu: f64,
    /// Mean over replicas and probe points of `‖Δf − ∇f‖`.
    pub mean_error: f64,
    pub stderr: f64,
    pub mean_grad_norm: f64,
    /// `1.2·(√((3d−1)/K)·‖∇f‖ + μβ(3+d)^{3/2})`.
    pub envelope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdLimitReport {
    pub model: String,
    pub replicas: usize,
    pub n_points: usize,
    pub rows: Vec<SgdLimitRow>,
    /// Errors do not increase along the sequence (3-sigma slack).
    pub decreasing: bool,
    pub final_within_envelope: bool,
    pub pass: bool,
}

/// Error of the smoothed gradient against the analytic gradient along a
/// sequence of `(K, μ)` pairs, at `n_points` random `(w, z)`.
pub fn run_sgd_limit_check(
    model: &LossModel,
    k_values: &[usize],
    mu_values: &[f64],
    replicas: usize,
    n_points: usize,
    seed: u64,
) -> Result<SgdLimitReport> {
    if k_values.is_empty() || k_values.len() != mu_values.len() {
        return Err(invalid("K and mu sequences must be non-empty and of equal length"));
    }
    if k_values.windows(2).any(|w| w[1] < w[0]) || mu_values.windows(2).any(|w| w[1] > w[0]) {
        return Err(invalid("K must be non-decreasing and mu non-increasing"));
    }
    if replicas < 2 || n_points < 1 {
        return Err(invalid("need replicas >= 2 and n_points >= 1"));
    }
    let d = model.dim();
    let spec = DatasetSpec::ball(d, model.feature_radius());
    let points: Vec<(Vec<f64>, crate::Example, Vec<f64>)> = (0..n_points as u64)
        .map(|p| {
            let mut w = vec![0.0; d];
            crate::estimator::fill_gaussian(StreamKey::new(seed, Domain::Probe).replica(p).slot(2), &mut w);
            let z = spec.draw(StreamKey::new(seed, Domain::Probe).replica(p).slot(3));
            let g = model.gradient(&w, &z);
            (w, z, g)
        })
        .collect();
    let mean_grad = points.iter().map(|p| norm(&p.2)).sum::<f64>() / n_points as f64;
    let mut rows = Vec::with_capacity(k_values.len());
    for (&k, &mu) in k_values.iter().zip(mu_values) {
        let params = SmoothedGradientParams::new(k, mu)?;
        let per_rep: Vec<f64> = (0..replicas as u64)
            .into_par_iter()
            .map(|r| -> Result<f64> {
                let mut s = 0.0;
                for (p, (w, z, g)) in points.iter().enumerate() {
                    let est = smoothed_gradient(model, w, z, &params, &PerturbationStream::new(seed, r, p as u64))?;
                    s += dist(&est, g);
                }
                Ok(s / n_points as f64)
            })
            .collect::<Result<_>>()?;
        let ms = mean_stderr(&per_rep);
        let ratio = ((3 * d - 1) as f64 / k as f64).sqrt();
        rows.push(SgdLimitRow {
            k,
            mu,
            mean_error: ms.mean,
            stderr: ms.stderr,
            mean_grad_norm: mean_grad,
            envelope: 1.2 * (ratio * mean_grad + mu * model.smoothness() * (3.0 + d as f64).powf(1.5)),
        });
    }
    let decreasing = rows
        .windows(2)
        .all(|w| w[1].mean_error <= w[0].mean_error + 3.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt());
    let last = rows.last().expect("non-empty");
    let final_within_envelope = last.mean_error <= last.envelope;
    Ok(SgdLimitReport {
        model: model.name().to_string(),
        replicas,
        n_points,
        pass: decreasing && final_within_envelope,
        rows,
        decreasing,
        final_within_envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{make_linear_loss, make_quadratic_loss, make_sigmoid_nonconvex_loss};
    use crate::schedule::{Schedule, ScheduleKind};

    fn zoss_config(t: usize, k: usize) -> RunConfig {
        RunConfig {
            loss: "sigmoid01".into(),
            dataset_id: "unit".into(),
            k,
            mu: 1e-3,
            m: 1,
            t_total: t,
            schedule: Schedule::new(ScheduleKind::DecreasingOverGamma, 0.5, t, 1.0, 3, Some(k)).unwrap(),
            master_seed: 1,
            algorithm: Algorithm::Zoss,
            cap_c: 0.5,
            mu_cap: None,
            t0: 0,
        }
    }

    #[test]
    fn identical_pair_gives_zero_everywhere() {
        let model = make_sigmoid_nonconvex_loss(3, 1.0).unwrap();
        let ds = generate_dataset(&DatasetSpec::ball(3, 1.0), 8, 2).unwrap();
        let pair = NeighborPair::identical(&ds, 3).unwrap();
        let cfg = zoss_config(20, 2);
        let (a, b) = run_coupled_pair(&model, &pair, &cfg, 4).unwrap();
        assert_eq!(a.iterates, b.iterates);
        let r = run_coupled_stability(&model, &pair, &cfg, 16).unwrap();
        assert!(r.deltas.iter().all(|d| *d == Some(0.0)));
        assert!(r.pass);
    }

    #[test]
    fn coupled_runs_share_randomness() {
        let model = make_sigmoid_nonconvex_loss(3, 1.0).unwrap();
        let ds = generate_dataset(&DatasetSpec::ball(3, 1.0), 8, 2).unwrap();
        let pair = make_neighbor(&ds, 5, 3).unwrap();
        let (a, b) = run_coupled_pair(&model, &pair, &zoss_config(20, 2), 0).unwrap();
        assert_eq!(a.batches, b.batches);
        // identical until the swapped index is first drawn
        let first = a.batches.iter().position(|bt| bt.contains(&5)).unwrap_or(20);
        for t in 0..=first {
            assert_eq!(a.iterates[t], b.iterates[t]);
        }
    }

    #[test]
    fn t0_rejection_counts() {
        let model = make_sigmoid_nonconvex_loss(3, 1.0).unwrap();
        let ds = generate_dataset(&DatasetSpec::ball(3, 1.0), 4, 2).unwrap();
        let pair = make_neighbor(&ds, 2, 3).unwrap();
        let mut cfg = zoss_config(10, 2);
        cfg.t0 = 10;
        let r = run_coupled_stability(&model, &pair, &cfg, 50).unwrap();
        // P(index 2 never drawn in 10 steps) = 0.75^10
        assert!(r.rejected_replicas > 40);
        assert!(r.deltas.iter().flatten().all(|d| *d == 0.0));
    }

    #[test]
    fn swap_defaults() {
        assert_eq!(default_swap_indices(20), vec![1, 10, 20]);
        assert_eq!(default_swap_indices(2), vec![1, 2]);
    }

    #[test]
    fn generalization_at_t0_is_centered() {
        let model = make_sigmoid_nonconvex_loss(3, 1.0).unwrap();
        let mut cfg = zoss_config(0, 2);
        cfg.schedule = Schedule::new(ScheduleKind::LogConstantNonconvex, 1.0, 0, 1.0, 3, Some(2)).unwrap();
        let r = run_generalization(&model, &cfg, &DatasetSpec::ball(3, 1.0), 20, 200, 1000).unwrap();
        assert!(r.mean_gap.abs() <= 4.0 * r.stderr, "{} vs {}", r.mean_gap, r.stderr);
        assert!(r.pass);
    }

    #[test]
    fn sgd_limit_linear_is_mu_free() {
        let model = make_linear_loss(vec![1.0, -2.0, 0.5]).unwrap();
        let a = run_sgd_limit_check(&model, &[4], &[1.0], 50, 5, 7).unwrap();
        let b = run_sgd_limit_check(&model, &[4], &[1e-4], 50, 5, 7).unwrap();
        let rel = (a.rows[0].mean_error - b.rows[0].mean_error).abs() / a.rows[0].mean_error;
        assert!(rel < 1e-9, "{rel}");
    }

    #[test]
    fn sgd_limit_rate_in_k() {
        let model = make_quadratic_loss(5, 10.0).unwrap();
        let r = run_sgd_limit_check(&model, &[16, 32], &[1e-6, 1e-6], 1000, 20, 11).unwrap();
        let ratio = r.rows[1].mean_error / r.rows[0].mean_error;
        assert!((0.6..=0.85).contains(&ratio), "{ratio}");
        assert!(r.pass, "{r:?}");
        assert!(run_sgd_limit_check(&model, &[32, 16], &[1e-6, 1e-6], 10, 2, 0).is_err());
    }

    #[test]
    fn batch_sweep_shares_bound() {
        let model = make_sigmoid_nonconvex_loss(3, 1.0).unwrap();
        let ds = generate_dataset(&DatasetSpec::ball(3, 1.0), 6, 2).unwrap();
        let pair = make_neighbor(&ds, 6, 3).unwrap();
        let cfg = zoss_config(10, 2);
        let s = run_batch_size_sweep(&model, &pair, &cfg, &[1, 3, 6], 40).unwrap();
        assert!(s.reports.iter().all(|r| r.theoretical_bound == s.common_bound));
        let single = run_coupled_stability(&model, &pair, &cfg, 40).unwrap();
        assert_eq!(s.reports[0], single);
        assert!(run_batch_size_sweep(&model, &pair, &cfg, &[7], 4).is_err());
    }
}
