//! ZoSS, SGD and full-batch GD trajectory engines.
//!
//! All runs start at `w_0 = 0`. Step `t` draws its example indices from the
//! stream `(seed, Select, replica, t)` and, for ZoSS, its perturbations from
//! `(seed, Perturb, replica, t, slot, k)`. Two runs with the same seed and replica
//! id therefore see identical randomness whatever data they are given.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Result, ZossError};
use crate::estimator::{smoothed_gradient_into, PerturbationStream, Scratch, SmoothedGradientParams};
use crate::losses::{Example, LossModel};
use crate::report::{self, float};
use crate::rng::{Domain, StreamKey};
use crate::schedule::Schedule;
use crate::stats::{dist, norm};

/// Iterates above this norm abort the run.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Zoss,
    Sgd,
    Gd,
}

impl std::str::FromStr for Algorithm {
    type Err = ZossError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zoss" => Ok(Algorithm::Zoss),
            "sgd" => Ok(Algorithm::Sgd),
            "gd" => Ok(Algorithm::Gd),
            _ => Err(invalid(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// Everything needed to reproduce one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub loss: String,
    pub dataset_id: String,
    /// Query directions per example (ignored by SGD/GD).
    pub k: usize,
    /// Smoothing radius (ignored by SGD/GD).
    #[serde(with = "float")]
    pub mu: f64,
    /// Batch size; GD always uses all `n` examples.
    pub m: usize,
    pub t_total: usize,
    pub schedule: Schedule,
    pub master_seed: u64,
    pub algorithm: Algorithm,
    /// Cap constant `c` the run was sized with; `mu_cap` records the resulting cap.
    pub cap_c: f64,
    #[serde(with = "report::float_opt")]
    pub mu_cap: Option<f64>,
    /// Replicas that select the swapped index at a step `≤ t0` are discarded by the harness.
    pub t0: usize,
}

impl RunConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        self.schedule.validate()?;
        if self.schedule.t_total != self.t_total {
            return Err(invalid(format!(
                "schedule horizon {} differs from T = {}",
                self.schedule.t_total, self.t_total
            )));
        }
        if self.t0 > self.t_total {
            return Err(invalid("t0 must be <= T"));
        }
        match self.algorithm {
            Algorithm::Zoss => {
                SmoothedGradientParams::new(self.k, self.mu)?;
                if self.schedule.k != Some(self.k) {
                    return Err(invalid("ZoSS schedule must be built with the run's K"));
                }
            }
            Algorithm::Sgd | Algorithm::Gd => {
                if self.schedule.k.is_some() {
                    return Err(invalid("gradient baselines use the K = infinity schedule (k = None)"));
                }
            }
        }
        if self.algorithm == Algorithm::Gd {
            if self.m != n {
                return Err(invalid(format!("GD needs m = n = {n}, got m = {}", self.m)));
            }
        } else if self.m < 1 || self.m > n {
            return Err(invalid(format!("batch size m = {} outside 1..={n}", self.m)));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<SmoothedGradientParams> {
        SmoothedGradientParams::new(self.k, self.mu)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub algorithm: Algorithm,
    /// `w_0 … w_T`.
    pub iterates: Vec<Vec<f64>>,
    /// 1-based example indices used at steps `1 … T`.
    pub batches: Vec<Vec<usize>>,
    pub alphas: Vec<f64>,
    /// Calls to `evaluate` (ZoSS).
    pub evaluations: usize,
    /// Per-example gradient calls (SGD/GD).
    pub gradient_calls: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub algorithm: Algorithm,
    pub t_total: usize,
    pub dim: usize,
    pub evaluations: usize,
    pub gradient_calls: usize,
    pub final_w: Vec<f64>,
    pub final_norm: f64,
    pub path_length: f64,
}

impl Trajectory {
    pub fn final_iterate(&self) -> &[f64] {
        self.iterates.last().expect("trajectory holds w_0")
    }

    pub fn summary(&self) -> TrajectorySummary {
        let w = self.final_iterate();
        TrajectorySummary {
            algorithm: self.algorithm,
            t_total: self.alphas.len(),
            dim: w.len(),
            evaluations: self.evaluations,
            gradient_calls: self.gradient_calls,
            final_w: w.to_vec(),
            final_norm: norm(w),
            path_length: self.iterates.windows(2).map(|p| dist(&p[0], &p[1])).sum(),
        }
    }

    /// CSV with columns `t, alpha_t, index_or_batch` and optionally `w_0 … w_{d-1}`.
    /// Batches are `;`-separated; the `t = 0` row has empty step fields.
    pub fn to_csv(&self, with_weights: bool) -> Result<String> {
        let d = self.iterates[0].len();
        let mut header: Vec<String> = vec!["t".into(), "alpha_t".into(), "index_or_batch".into()];
        if with_weights {
            header.extend((0..d).map(|i| format!("w_{i}")));
        }
        let header_ref: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let rows: Vec<Vec<String>> = self
            .iterates
            .iter()
            .enumerate()
            .map(|(t, w)| {
                let mut row = vec![t.to_string()];
                if t == 0 {
                    row.extend([String::new(), String::new()]);
                } else {
                    row.push(report::fmt_float(self.alphas[t - 1]));
                    let b: Vec<String> = self.batches[t - 1].iter().map(|i| i.to_string()).collect();
                    row.push(b.join(";"));
                }
                if with_weights {
                    row.extend(w.iter().map(|x| report::fmt_float(*x)));
                }
                row
            })
            .collect();
        report::csv_string(&header_ref, &rows)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("step size must be finite and >= 0, got {alpha}")));
    }
    Ok(())
}

/// `w − α·Δf` with the smoothed gradient over `batch`.
pub fn zoss_step(
    model: &LossModel,
    w: &[f64],
    batch: &[&Example],
    alpha: f64,
    params: &SmoothedGradientParams,
    stream: &PerturbationStream,
) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let mut g = vec![0.0; w.len()];
    smoothed_gradient_into(model, w, batch, params, stream, &mut g, &mut Scratch::default())?;
    Ok(w.iter().zip(&g).map(|(wi, gi)| wi - alpha * gi).collect())
}

/// `w − α·(mean analytic gradient over batch)`.
pub fn sgd_step(model: &LossModel, w: &[f64], batch: &[&Example], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if batch.is_empty() {
        return Err(invalid("batch must be non-empty"));
    }
    let mut g = vec![0.0; w.len()];
    mean_gradient(model, w, batch, &mut g, &mut vec![0.0; w.len()]);
    Ok(w.iter().zip(&g).map(|(wi, gi)| wi - alpha * gi).collect())
}

fn mean_gradient(model: &LossModel, w: &[f64], batch: &[&Example], out: &mut [f64], tmp: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for z in batch {
        model.gradient_into(w, z, tmp);
        for (o, g) in out.iter_mut().zip(tmp.iter()) {
            *o += g;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    out.iter_mut().for_each(|o| *o *= inv);
}

/// Zero-based indices selected at step `t` (one draw, or `m` distinct draws).
pub fn select_indices(seed: u64, replica: u64, t: usize, n: usize, m: usize) -> Vec<usize> {
    let mut rng = StreamKey::new(seed, Domain::Select)
        .replica(replica)
        .step(t as u64)
        .rng();
    if m == 1 {
        vec![rng.random_range(0..n)]
    } else {
        rand::seq::index::sample(&mut rng, n, m).into_vec()
    }
}

/// Runs replica 0 of `config` on `dataset`, building the model from the registry.
pub fn run_trajectory(config: &RunConfig, dataset: &Dataset) -> Result<Trajectory> {
    let model = LossModel::from_name(&config.loss, dataset.spec.dim, dataset.spec.radius)?;
    run_trajectory_with(&model, config, dataset, 0)
}

pub fn run_trajectory_with(
    model: &LossModel,
    config: &RunConfig,
    dataset: &Dataset,
    replica: u64,
) -> Result<Trajectory> {
    let n = dataset.len();
    config.validate(n)?;
    let d = model.dim();
    if dataset.spec.dim != d {
        return Err(invalid(format!(
            "dataset dim {} differs from model dim {d}",
            dataset.spec.dim
        )));
    }
    let t_total = config.t_total;
    let alphas = config.schedule.values();
    let mut iterates = Vec::with_capacity(t_total + 1);
    let mut batches = Vec::with_capacity(t_total);
    let mut w = vec![0.0; d];
    iterates.push(w.clone());
    let mut g = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    let mut scratch = Scratch::default();
    let mut evaluations = 0;
    let mut gradient_calls = 0;
    let params = match config.algorithm {
        Algorithm::Zoss => Some(config.params()?),
        _ => None,
    };
    let all: Vec<usize> = (0..n).collect();
    for t in 1..=t_total {
        let idx = match config.algorithm {
            Algorithm::Gd => all.clone(),
            _ => select_indices(config.master_seed, replica, t, n, config.m),
        };
        let batch: Vec<&Example> = idx.iter().map(|&i| &dataset.examples[i]).collect();
        match &params {
            Some(p) => {
                let stream = PerturbationStream::new(config.master_seed, replica, t as u64);
                evaluations += smoothed_gradient_into(model, &w, &batch, p, &stream, &mut g, &mut scratch)?;
            }
            None => {
                mean_gradient(model, &w, &batch, &mut g, &mut tmp);
                gradient_calls += batch.len();
            }
        }
        let a = alphas[t - 1];
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= a * gi;
        }
        let nw = norm(&w);
        if nw.is_nan() || nw > DIVERGENCE_NORM {
            return Err(ZossError::Diverged { t, norm: nw });
        }
        iterates.push(w.clone());
        batches.push(idx.into_iter().map(|i| i + 1).collect());
    }
    Ok(Trajectory {
        algorithm: config.algorithm,
        iterates,
        batches,
        alphas,
        evaluations,
        gradient_calls,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansivityReport {
    pub model: String,
    pub alpha: f64,
    pub n_probes: usize,
    /// `max ‖G(w) − G(w')‖ / ‖w − w'‖` over the probes.
    pub max_ratio: f64,
    /// `1 + βα`, or `1` for a convex model with `α ≤ 2/β`.
    pub eta_bound: f64,
    /// `max ‖w − G(w)‖ / (Lα)`; at most 1 for a bounded step.
    pub max_step_over_l_alpha: f64,
    pub pass: bool,
}

/// Probes the expansivity and step boundedness of the SGD map
/// `G(w) = w − α∇f(w, z)` at random points, each with its own example `z`.
pub fn expansivity_probe(model: &LossModel, alpha: f64, n_probes: usize, seed: u64) -> Result<ExpansivityReport> {
    check_alpha(alpha)?;
    if n_probes < 1 {
        return Err(invalid("n_probes must be >= 1"));
    }
    let d = model.dim();
    let spec = crate::data::DatasetSpec::ball(d, model.feature_radius());
    let scale = 2.0 * model.feature_radius().max(1.0 / model.feature_radius());
    let mut max_ratio: f64 = 0.0;
    let mut max_step: f64 = 0.0;
    for p in 0..n_probes as u64 {
        let z = spec.draw(StreamKey::new(seed, Domain::Probe).replica(p).slot(1));
        let mut rng = StreamKey::new(seed, Domain::Probe).replica(p).rng();
        let w: Vec<f64> = (0..d)
            .map(|_| scale * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let eps = 10f64.powf(rng.random_range(-3.0..0.5));
        let u: Vec<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let un = norm(&u);
        let w2: Vec<f64> = w.iter().zip(&u).map(|(a, b)| a + eps * b / un).collect();
        let g1 = sgd_step(model, &w, &[&z], alpha)?;
        let g2 = sgd_step(model, &w2, &[&z], alpha)?;
        let gap = dist(&w, &w2);
        if gap > 0.0 {
            max_ratio = max_ratio.max(dist(&g1, &g2) / gap);
        }
        if alpha > 0.0 {
            max_step = max_step.max(dist(&w, &g1) / (model.lipschitz() * alpha));
        }
    }
    let beta = model.smoothness();
    let eta_bound = if model.convex() && alpha * beta <= 2.0 {
        1.0
    } else {
        1.0 + beta * alpha
    };
    let pass = max_ratio <= eta_bound + 1e-9 && max_step <= 1.0 + 1e-12;
    Ok(ExpansivityReport {
        model: model.name().to_string(),
        alpha,
        n_probes,
        max_ratio,
        eta_bound,
        max_step_over_l_alpha: max_step,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_dataset, DatasetSpec};
    use crate::estimator::sample_gaussian;
    use crate::losses::{make_linear_loss, make_logistic_loss, make_quadratic_loss, make_sigmoid_nonconvex_loss};
    use crate::schedule::ScheduleKind;

    fn config(alg: Algorithm, m: usize, t_total: usize, k: Option<usize>) -> RunConfig {
        RunConfig {
            loss: "quadratic".into(),
            dataset_id: "test".into(),
            k: k.unwrap_or(1),
            mu: 1e-3,
            m,
            t_total,
            schedule: Schedule::new(ScheduleKind::DecreasingOverGamma, 0.5, t_total, 1.0, 3, k).unwrap(),
            master_seed: 42,
            algorithm: alg,
            cap_c: 0.5,
            mu_cap: None,
            t0: 0,
        }
    }

    fn data(n: usize) -> Dataset {
        generate_dataset(&DatasetSpec::ball(3, 1.0), n, 9).unwrap()
    }

    #[test]
    fn zero_step_is_identity() {
        let model = make_quadratic_loss(3, 1.0).unwrap();
        let z = Example::new(vec![0.1, 0.2, 0.3], 1.0);
        let w = vec![0.5, -0.5, 1.0];
        let p = SmoothedGradientParams::new(3, 0.1).unwrap();
        assert_eq!(
            zoss_step(&model, &w, &[&z], 0.0, &p, &PerturbationStream::new(1, 0, 1)).unwrap(),
            w
        );
        assert_eq!(sgd_step(&model, &w, &[&z], 0.0).unwrap(), w);
        assert!(sgd_step(&model, &w, &[&z], -1.0).is_err());
        assert_eq!(sgd_step(&model, &z.features, &[&z], 0.3).unwrap(), z.features);
    }

    #[test]
    fn linear_zoss_step_by_hand() {
        let model = make_linear_loss(vec![1.0]).unwrap();
        let z = Example::new(vec![0.0], 1.0);
        let stream = PerturbationStream::new(3, 2, 1);
        let p = SmoothedGradientParams::new(1, 0.25).unwrap();
        let u = sample_gaussian(&stream, 1).unwrap()[0];
        let next = zoss_step(&model, &[2.0], &[&z], 0.1, &p, &stream).unwrap();
        assert!((next[0] - (2.0 - 0.1 * u * u)).abs() < 1e-12);
    }

    #[test]
    fn trajectory_counts_and_determinism() {
        let ds = data(10);
        let model = make_quadratic_loss(3, 1.0).unwrap();
        for (alg, m, k) in [
            (Algorithm::Zoss, 1, Some(4)),
            (Algorithm::Zoss, 3, Some(4)),
            (Algorithm::Sgd, 2, None),
            (Algorithm::Gd, 10, None),
        ] {
            let cfg = config(alg, m, 7, k);
            let a = run_trajectory_with(&model, &cfg, &ds, 5).unwrap();
            let b = run_trajectory_with(&model, &cfg, &ds, 5).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.iterates.len(), 8);
            match alg {
                Algorithm::Zoss => assert_eq!(a.evaluations, 7 * m * 5),
                _ => assert_eq!(a.gradient_calls, 7 * m),
            }
            for batch in &a.batches {
                let mut s = batch.clone();
                s.sort();
                s.dedup();
                assert_eq!(s.len(), m);
                assert!(s.iter().all(|&i| (1..=10).contains(&i)));
            }
        }
    }

    #[test]
    fn empty_horizon_and_validation() {
        let ds = data(5);
        let t = run_trajectory(&config(Algorithm::Zoss, 1, 0, Some(2)), &ds).unwrap();
        assert_eq!(t.iterates, vec![vec![0.0; 3]]);
        assert!(run_trajectory(&config(Algorithm::Zoss, 6, 3, Some(2)), &ds).is_err());
        assert!(run_trajectory(&config(Algorithm::Gd, 4, 3, None), &ds).is_err());
        assert!(run_trajectory(&config(Algorithm::Sgd, 1, 3, Some(2)), &ds).is_err());
        let mut c = config(Algorithm::Zoss, 1, 3, Some(2));
        c.mu = 0.0;
        assert!(run_trajectory(&c, &ds).is_err());
    }

    #[test]
    fn gd_ignores_seed() {
        let ds = data(6);
        let mut c = config(Algorithm::Gd, 6, 5, None);
        let a = run_trajectory(&c, &ds).unwrap();
        c.master_seed = 1234;
        assert_eq!(a, run_trajectory(&c, &ds).unwrap());
    }

    #[test]
    fn divergence_is_typed() {
        let ds = data(4);
        let model = make_linear_loss(vec![1e11, 0.0, 0.0]).unwrap();
        let mut c = config(Algorithm::Sgd, 1, 5, None);
        c.schedule = Schedule::new(ScheduleKind::ConstantPlain, 100.0, 5, 0.0, 3, None).unwrap();
        let err = run_trajectory_with(&model, &c, &ds, 0).unwrap_err();
        assert!(matches!(err, ZossError::Diverged { t: 1, .. }), "{err:?}");
    }

    #[test]
    fn csv_shape() {
        let ds = data(5);
        let t = run_trajectory(&config(Algorithm::Zoss, 2, 2, Some(2)), &ds).unwrap();
        let csv = t.to_csv(true).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,alpha_t,index_or_batch,w_0,w_1,w_2");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,,,"));
        assert!(lines[2].split(',').nth(2).unwrap().contains(';'));
        assert_eq!(
            t.to_csv(false).unwrap().lines().next().unwrap(),
            "t,alpha_t,index_or_batch"
        );
    }

    #[test]
    fn expansivity_on_registered_models() {
        let models = [
            make_quadratic_loss(4, 1.0).unwrap(),
            make_logistic_loss(4, 2.0).unwrap(),
            make_sigmoid_nonconvex_loss(4, 2.0).unwrap(),
        ];
        for m in &models {
            for a in [0.0, 0.5 / m.smoothness(), 2.0 / m.smoothness(), 5.0 / m.smoothness()] {
                let r = expansivity_probe(m, a, 2000, 3).unwrap();
                assert!(r.pass, "{r:?}");
                if a == 0.0 {
                    assert_eq!(r.max_ratio, 1.0);
                }
            }
        }
    }
}
