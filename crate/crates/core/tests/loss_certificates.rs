//! Sampling checks of the analytic constants of every registered loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use zoss_core::data::DatasetSpec;
use zoss_core::rng::{Domain, StreamKey};
use zoss_core::stats::{dist, norm};
use zoss_core::{Example, LossModel};

const PROBES: usize = 10_000;

fn gaussian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn probe_pairs(model: &LossModel, seed: u64) -> Vec<(Vec<f64>, Vec<f64>, Example)> {
    let d = model.dim();
    let spec = DatasetSpec::ball(d, model.feature_radius());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..PROBES)
        .map(|p| {
            let scale = [0.1, 1.0, 4.0][p % 3];
            let w = gaussian(&mut rng, d, scale);
            let step = 10f64.powf(rng.random_range(-4.0..0.5));
            let u = gaussian(&mut rng, d, 1.0);
            let nu = norm(&u);
            let w2: Vec<f64> = w.iter().zip(&u).map(|(a, b)| a + step * b / nu).collect();
            let z = spec.draw(StreamKey::new(seed, Domain::Probe).replica(p as u64));
            (w, w2, z)
        })
        .collect()
}

fn registered(d: usize, radius: f64) -> Vec<LossModel> {
    LossModel::REGISTERED
        .iter()
        .map(|n| LossModel::from_name(n, d, radius).unwrap())
        .collect()
}

#[test]
fn lipschitz_certificates_hold_and_are_not_vacuous() {
    for (d, radius) in [(1, 1.0), (5, 1.0), (3, 2.5)] {
        for m in registered(d, radius) {
            let mut worst: f64 = 0.0;
            for (w, w2, z) in probe_pairs(&m, 1) {
                worst = worst.max((m.evaluate(&w, &z) - m.evaluate(&w2, &z)).abs() / dist(&w, &w2));
            }
            assert!(
                worst <= m.lipschitz() * (1.0 + 1e-9),
                "{} d={d}: {worst} > {}",
                m.name(),
                m.lipschitz()
            );
            assert!(
                worst >= 0.1 * m.lipschitz(),
                "{} d={d}: certificate looks vacuous ({worst})",
                m.name()
            );
        }
    }
}

#[test]
fn smoothness_certificates_hold() {
    for (d, radius) in [(1, 1.0), (5, 1.0), (3, 2.5)] {
        for m in registered(d, radius) {
            let mut worst: f64 = 0.0;
            for (w, w2, z) in probe_pairs(&m, 2) {
                worst = worst.max(dist(&m.gradient(&w, &z), &m.gradient(&w2, &z)) / dist(&w, &w2));
            }
            assert!(
                worst <= m.smoothness() * (1.0 + 1e-6),
                "{} d={d}: {worst} > {}",
                m.name(),
                m.smoothness()
            );
        }
    }
}

#[test]
fn bounded_losses_stay_in_unit_interval() {
    for m in registered(4, 1.5).into_iter().filter(|m| m.bounded01()) {
        for (w, _, z) in probe_pairs(&m, 3) {
            let v = m.evaluate(&w, &z);
            assert!((0.0..=1.0).contains(&v), "{v}");
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    let h = 1e-5;
    for m in registered(5, 1.0) {
        let d = m.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = DatasetSpec::ball(d, m.feature_radius());
        for p in 0..100u64 {
            let w = gaussian(&mut rng, d, 1.0);
            let z = spec.draw(StreamKey::new(4, Domain::Probe).replica(p));
            let g = m.gradient(&w, &z);
            let fd: Vec<f64> = (0..d)
                .map(|i| {
                    let mut a = w.clone();
                    let mut b = w.clone();
                    a[i] += h;
                    b[i] -= h;
                    (m.evaluate(&a, &z) - m.evaluate(&b, &z)) / (2.0 * h)
                })
                .collect();
            let err = dist(&fd, &g) / norm(&g).max(1e-3);
            assert!(err <= 1e-5, "{} probe {p}: {err}", m.name());
        }
    }
}

#[test]
fn convexity_flags_are_consistent_with_midpoints() {
    for m in registered(3, 1.0) {
        let mut violated = false;
        for (w, w2, z) in probe_pairs(&m, 5).into_iter().take(2000) {
            let mid: Vec<f64> = w.iter().zip(&w2).map(|(a, b)| 0.5 * (a + b)).collect();
            let lhs = m.evaluate(&mid, &z);
            let rhs = 0.5 * (m.evaluate(&w, &z) + m.evaluate(&w2, &z));
            if lhs > rhs + 1e-12 {
                violated = true;
            }
        }
        if m.convex() {
            assert!(!violated, "{} flagged convex", m.name());
        } else {
            assert!(
                violated,
                "{} flagged nonconvex but no midpoint violation found",
                m.name()
            );
        }
    }
}
