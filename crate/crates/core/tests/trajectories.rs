use zoss_core::estimator::{PerturbationStream, SmoothedGradientParams};
use zoss_core::harness::*;
use zoss_core::losses::{make_quadratic_loss, make_sigmoid_nonconvex_loss};
use zoss_core::optimizers::*;
use zoss_core::stats::{dist, norm};
use zoss_core::{Example, Schedule, ScheduleKind};

fn cfg(alg: Algorithm, k: Option<usize>, m: usize, t: usize, kind: ScheduleKind) -> RunConfig {
    RunConfig {
        loss: "quadratic".into(),
        dataset_id: String::new(),
        k: k.unwrap_or(1),
        mu: 1e-8,
        m,
        t_total: t,
        schedule: Schedule::new(kind, 0.5, t, 1.0, 5, k).unwrap(),
        master_seed: 17,
        algorithm: alg,
        cap_c: 0.0,
        mu_cap: None,
        t0: 0,
    }
}

#[test]
fn zoss_step_tracks_sgd_step() {
    let d = 5;
    let model = make_quadratic_loss(d, 1.0).unwrap();
    let z = Example::new(vec![0.2, -0.1, 0.3, 0.0, 0.1], 1.0);
    let w = vec![0.6, 0.1, -0.2, 0.3, 0.0];
    let alpha = 0.3;
    let (k, mu) = (10_000, 1e-8);
    let p = SmoothedGradientParams::new(k, mu).unwrap();
    for t in 0..5 {
        let a = zoss_step(&model, &w, &[&z], alpha, &p, &PerturbationStream::new(1, 0, t)).unwrap();
        let b = sgd_step(&model, &w, &[&z], alpha).unwrap();
        let g = norm(&model.gradient(&w, &z));
        let tol = alpha * (((3 * d - 1) as f64 / k as f64).sqrt() * g * 1.2 + 2.0 * mu * 8f64.powf(1.5));
        assert!(dist(&a, &b) <= tol, "{} > {tol}", dist(&a, &b));
    }
}

#[test]
fn full_batch_zoss_with_many_queries_tracks_gd() {
    let n = 10;
    let ds = generate_dataset(&DatasetSpec::ball(5, 1.0), n, 3).unwrap();
    let model = make_quadratic_loss(5, 1.0).unwrap();
    let z = run_trajectory_with(
        &model,
        &cfg(Algorithm::Zoss, Some(2000), n, 20, ScheduleKind::DecreasingPlain),
        &ds,
        0,
    )
    .unwrap();
    let g = run_trajectory_with(
        &model,
        &cfg(Algorithm::Gd, None, n, 20, ScheduleKind::DecreasingPlain),
        &ds,
        0,
    )
    .unwrap();
    let rel = dist(z.final_iterate(), g.final_iterate()) / norm(g.final_iterate());
    assert!(rel <= 0.05, "{rel}");
    assert_eq!(z.evaluations, 20 * n * 2001);
    assert_eq!(g.gradient_calls, 20 * n);
}

#[test]
fn gd_discrepancy_respects_deterministic_bound() {
    let n = 10;
    let model = make_quadratic_loss(5, 1.0).unwrap();
    let ds = generate_dataset(&DatasetSpec::ball(5, 1.0), n, 3).unwrap();
    let pair = make_neighbor(&ds, 4, 9).unwrap();
    let r = run_coupled_stability(
        &model,
        &pair,
        &cfg(Algorithm::Gd, None, n, 5, ScheduleKind::DecreasingPlain),
        3,
    )
    .unwrap();
    assert_eq!(r.bound_name, "stability_gd");
    assert!(r.stderr < 1e-12);
    assert!(r.mean_delta_t <= r.theoretical_bound);
    assert!(r.pass);
}

#[test]
fn sgd_stability_uses_infinite_query_bound() {
    let n = 20;
    let model = make_sigmoid_nonconvex_loss(5, 1.0).unwrap();
    let ds = generate_dataset(&DatasetSpec::ball(5, 1.0), n, 3).unwrap();
    let pair = make_neighbor(&ds, 1, 9).unwrap();
    let mut c = cfg(Algorithm::Sgd, None, 1, 50, ScheduleKind::DecreasingPlain);
    c.schedule.beta = model.smoothness();
    let r = run_coupled_stability(&model, &pair, &c, 300).unwrap();
    assert_eq!(r.bound_name, "stability_nonconvex");
    assert!(r.pass, "{} {} {}", r.mean_delta_t, r.stderr, r.theoretical_bound);
}

#[test]
fn stability_reports_round_trip_through_json() {
    let n = 8;
    let model = make_sigmoid_nonconvex_loss(5, 1.0).unwrap();
    let ds = generate_dataset(&DatasetSpec::ball(5, 1.0), n, 3).unwrap();
    let pair = make_neighbor(&ds, 2, 9).unwrap();
    let mut c = cfg(Algorithm::Zoss, Some(3), 1, 10, ScheduleKind::DecreasingOverGamma);
    c.mu = 1e-3;
    let r = run_coupled_stability(&model, &pair, &c, 20).unwrap();
    let text = zoss_core::report::to_json(&r).unwrap();
    let back: StabilityReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
}
