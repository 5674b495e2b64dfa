use std::collections::BTreeSet;

use anyhow::{bail, Result};
use serde::Serialize;
use zoss_core::bounds::{self, BoundInputs, BoundReport, ConstantCase, Table1Row};
use zoss_core::estimator::{verify_third_moment, verify_variance_reduction};
use zoss_core::harness::*;
use zoss_core::optimizers::{Algorithm, RunConfig};
use zoss_core::report::{csv_string, fmt_float, to_json, VerifierRecord};
use zoss_core::{gamma, mu_cap, LossModel, Schedule, ScheduleKind, ZossError};

use crate::args::*;
use crate::resolve::Resolver;

pub struct Check {
    pub label: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Default)]
pub struct Output {
    /// (file name, contents), written under `--out`.
    pub files: Vec<(String, String)>,
    pub stdout: String,
    pub checks: Vec<Check>,
}

impl Output {
    fn check(&mut self, label: String, pass: bool, detail: String) {
        self.stdout
            .push_str(&format!("{} {label}: {detail}\n", if pass { "PASS" } else { "FAIL" }));
        self.checks.push(Check { label, pass, detail });
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        self.files.push((name.into(), to_json(v)?));
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        self.files.push((name.into(), csv_string(header, rows)?));
        Ok(())
    }
}

pub fn dispatch(cmd: &Command, r: &mut Resolver, seed: u64) -> Result<Output> {
    match cmd {
        Command::Stability(a) => stability(a, r, seed),
        Command::Generalize(a) => generalize(a, r, seed),
        Command::SweepBatch(a) => sweep_batch(a, r, seed),
        Command::SgdLimit(a) => sgd_limit(a, r, seed),
        Command::VerifyLemma1(a) => verify_lemma1(a, r, seed),
        Command::VerifyMoments(a) => verify_moments(a, r, seed),
        Command::Bounds(a) => bounds_table(a, r),
    }
}

struct Setup {
    model: LossModel,
    spec: DatasetSpec,
    n: usize,
    config: RunConfig,
    replicas: usize,
}

fn setup(a: &ExperimentArgs, r: &mut Resolver, seed: u64, default_replicas: usize) -> Result<Setup> {
    let loss = r.value("loss", a.loss.clone(), "sigmoid01".to_string())?;
    let d = r.value("d", a.d, 5)?;
    let radius = r.value("radius", a.radius, 1.0)?;
    let n = r.value("n", a.n, 20)?;
    let t_total = r.value("T", a.t, 50)?;
    let algorithm: Algorithm = r.value("algorithm", a.algorithm.clone(), "zoss".to_string())?.parse()?;
    let k = r.value("K", a.k, 4)?;
    let m = r
        .optional("m", a.m)?
        .unwrap_or(if algorithm == Algorithm::Gd { n } else { 1 });
    r.record("m", &m);
    let kind: ScheduleKind = r
        .value(
            "schedule",
            a.schedule.clone(),
            ScheduleKind::DecreasingOverGamma.name().to_string(),
        )?
        .parse()?;
    let c_step = r.value("C", a.c_step, 0.5)?;
    let c_cap = r.value("c", a.c_cap, 0.5)?;
    let t0 = r.value("t0", a.t0, 0)?;
    let replicas = r.value("replicas", a.replicas, default_replicas)?;
    let mu = r.optional("mu", a.mu)?;

    let model = LossModel::from_name(&loss, d, radius)?;
    let zoss = algorithm == Algorithm::Zoss;
    let schedule = Schedule::new(kind, c_step, t_total, model.smoothness(), d, zoss.then_some(k))?;
    let (mu, cap) = if zoss {
        let cap = mu_cap(c_cap, model.lipschitz(), gamma(d, k)?, n, model.smoothness(), d)?;
        (mu.unwrap_or(cap / 2.0), Some(cap))
    } else {
        (mu.unwrap_or(0.0), None)
    };
    r.record("mu", &mu);
    let spec = DatasetSpec::ball(d, radius);
    spec.validate()?;
    let config = RunConfig {
        loss,
        dataset_id: format!("{}-d{d}-r{radius}-n{n}-s{seed}", spec.distribution),
        k,
        mu,
        m,
        t_total,
        schedule,
        master_seed: seed,
        algorithm,
        cap_c: c_cap,
        mu_cap: cap,
        t0,
    };
    config.validate(n)?;
    Ok(Setup {
        model,
        spec,
        n,
        config,
        replicas,
    })
}

/// Compact number for console lines; reports keep full precision.
fn short(v: f64) -> String {
    if v == 0.0 || !v.is_finite() || (1e-3..1e6).contains(&v.abs()) {
        format!("{}", (v * 1e6).round() / 1e6)
    } else {
        format!("{v:.4e}")
    }
}

fn stability_detail(s: &StabilityReport) -> String {
    let mut d = format!(
        "mean delta_T {} +/- {} vs {} {}",
        short(s.mean_delta_t),
        short(s.stderr),
        s.bound_name,
        short(s.theoretical_bound)
    );
    if s.failed_replicas > 0 {
        d.push_str(&format!(", {} diverged", s.failed_replicas));
    }
    if s.rejected_replicas > 0 {
        d.push_str(&format!(", {} rejected", s.rejected_replicas));
    }
    d
}

fn stability_rows(reports: &[StabilityReport]) -> Vec<Vec<String>> {
    reports.iter().map(|s| s.csv_row()).collect()
}

fn stability(a: &StabilityArgs, r: &mut Resolver, seed: u64) -> Result<Output> {
    let s = setup(&a.exp, r, seed, 200)?;
    let swaps = r.list("swap", a.swap.clone(), default_swap_indices(s.n))?;
    let base = generate_dataset(&s.spec, s.n, seed)?;
    let sweep = run_stability_over_swaps(&s.model, &base, &s.config, &swaps, s.replicas, seed)?;
    let mut out = Output::default();
    for rep in &sweep.reports {
        out.check(
            format!("stability swap {}", rep.swap_index),
            rep.pass,
            stability_detail(rep),
        );
    }
    out.json("stability.json", &sweep)?;
    out.csv(
        "stability.csv",
        &StabilityReport::CSV_HEADER,
        &stability_rows(&sweep.reports),
    )?;
    Ok(out)
}

fn generalize(a: &GeneralizeArgs, r: &mut Resolver, seed: u64) -> Result<Output> {
    let s = setup(&a.exp, r, seed, 100)?;
    let test_size = r.value("test_size", a.test_size, 1000)?;
    let g = run_generalization(&s.model, &s.config, &s.spec, s.n, s.replicas, test_size)?;
    let mut out = Output::default();
    let mut detail = format!(
        "mean gap {} +/- {} vs {} {}",
        short(g.mean_gap),
        short(g.stderr),
        g.bound_name,
        short(g.theoretical_bound)
    );
    if g.failed_replicas > 0 {
        detail.push_str(&format!(", {} diverged", g.failed_replicas));
    }
    out.check("generalization".into(), g.pass, detail);
    out.json("generalize.json", &g)?;
    out.csv("generalize.csv", &GenReport::CSV_HEADER, &[g.csv_row()])?;
    Ok(out)
}

fn sweep_batch(a: &SweepBatchArgs, r: &mut Resolver, seed: u64) -> Result<Output> {
    let s = setup(&a.exp, r, seed, 200)?;
    let m_values = r.list("m_values", a.m_values.clone(), default_swap_indices(s.n))?;
    let swaps = r.list("swap", a.swap.clone(), default_swap_indices(s.n))?;
    let base = generate_dataset(&s.spec, s.n, seed)?;
    let mut out = Output::default();
    let mut sweeps = Vec::with_capacity(swaps.len());
    for &i in &swaps {
        let pair = make_neighbor(&base, i, seed)?;
        let sweep = run_batch_size_sweep(&s.model, &pair, &s.config, &m_values, s.replicas)?;
        for rep in &sweep.reports {
            out.check(
                format!("sweep-batch swap {i} m {}", rep.config.m),
                rep.pass,
                stability_detail(rep),
            );
        }
        sweeps.push(sweep);
    }
    let rows: Vec<Vec<String>> = sweeps.iter().flat_map(|w| stability_rows(&w.reports)).collect();
    out.json("sweep_batch.json", &sweeps)?;
    out.csv("sweep_batch.csv", &StabilityReport::CSV_HEADER, &rows)?;
    Ok(out)
}

fn sgd_limit(a: &SgdLimitArgs, r: &mut Resolver, seed: u64) -> Result<Output> {
    let loss = r.value("loss", a.loss.clone(), "quadratic".to_string())?;
    let d = r.value("d", a.d, 5)?;
    let radius = r.value("radius", a.radius, 1.0)?;
    let ks = r.list("K_values", a.k_values.clone(), vec![1, 4, 16, 64, 256, 1024])?;
    let mus = r.list(
        "mu_values",
        a.mu_values.clone(),
        vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7],
    )?;
    let replicas = r.value("replicas", a.replicas, 50)?;
    let points = r.value("points", a.points, 10)?;
    let model = LossModel::from_name(&loss, d, radius)?;
    let rep = run_sgd_limit_check(&model, &ks, &mus, replicas, points, seed)?;
    let mut out = Output::default();
    let last = rep.rows.last().expect("non-empty sequence");
    out.check(
        "sgd-limit".into(),
        rep.pass,
        format!(
            "errors decreasing: {}, final error {} vs envelope {}",
            rep.decreasing,
            short(last.mean_error),
            short(last.envelope)
        ),
    );
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|x| {
            vec![
                x.k.to_string(),
                fmt_float(x.mu),
                fmt_float(x.mean_error),
                fmt_float(x.stderr),
                fmt_float(x.mean_grad_norm),
                fmt_float(x.envelope),
            ]
        })
        .collect();
    out.json("sgd_limit.json", &rep)?;
    out.csv(
        "sgd_limit.csv",
        &["K", "mu", "mean_error", "stderr", "mean_grad_norm", "envelope"],
        &rows,
    )?;
    Ok(out)
}

/// One row per record: `lemma`, the union of parameter names, then the verdict.
fn records_csv(records: &[VerifierRecord]) -> Result<String> {
    let keys: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.params.keys().map(String::as_str))
        .collect();
    let mut header = vec!["lemma"];
    header.extend(keys.iter().copied());
    header.extend(["estimate", "stderr", "bound", "pass"]);
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let mut row = vec![r.lemma.clone()];
            row.extend(
                keys.iter()
                    .map(|k| r.params.get(*k).map(|v| fmt_float(*v)).unwrap_or_default()),
            );
            row.extend([
                fmt_float(r.estimate),
                fmt_float(r.stderr),
                fmt_float(r.bound),
                r.pass.to_string(),
            ]);
            row
        })
        .collect();
    Ok(csv_string(&header, &rows)?)
}

fn verify_lemma1(a: &VerifyLemma1Args, r: &mut Resolver, seed: u64) -> Result<Output> {
    let d = r.value("d", a.d, 10)?;
    let k = r.value("K", a.k, 4)?;
    let mc = r.value("mc", a.mc, 100_000)?;
    if d == 0 {
        bail!(ZossError::InvalidArgument("d must be >= 1".into()));
    }
    let v = r.list("v", a.v.clone(), vec![1.0 / (d as f64).sqrt(); d])?;
    let rep = verify_variance_reduction(d, k, &v, mc, seed)?;
    let rec = rep.record();
    let mut out = Output::default();
    out.check(
        format!("variance reduction d {d} K {k}"),
        rep.pass,
        format!(
            "E|g - V|^2 = {} +/- {} vs bound {}; second moment {} vs exact {}",
            short(rep.lhs_mean),
            short(rep.lhs_mean_stderr),
            short(rep.bound_first),
            short(rep.lhs_second_moment),
            short(rep.exact_second)
        ),
    );
    out.json("lemma1.json", &rep)?;
    out.files.push(("lemma1.csv".into(), records_csv(&[rec])?));
    Ok(out)
}

fn verify_moments(a: &VerifyMomentsArgs, r: &mut Resolver, seed: u64) -> Result<Output> {
    let dims = r.list("d", a.d.clone(), vec![1, 3, 10])?;
    let mc = r.value("mc", a.mc, 100_000)?;
    let mut out = Output::default();
    let mut reports = Vec::with_capacity(dims.len());
    for &d in &dims {
        let rep = verify_third_moment(d, mc, seed)?;
        out.check(
            format!("third moment d {d}"),
            rep.pass,
            format!(
                "E|u|^3 = {} +/- {} (exact {}) vs bound {}",
                short(rep.mc_estimate),
                short(rep.stderr),
                short(rep.exact),
                short(rep.bound)
            ),
        );
        reports.push(rep);
    }
    let records: Vec<VerifierRecord> = reports.iter().map(|x| x.record()).collect();
    out.json("moments.json", &reports)?;
    out.files.push(("moments.csv".into(), records_csv(&records)?));
    Ok(out)
}

fn parse_queries(s: &str) -> Result<Option<usize>> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(None),
        v => Ok(Some(
            v.parse()
                .map_err(|e| ZossError::InvalidArgument(format!("K = {v:?}: {e}")))?,
        )),
    }
}

fn queries_cell(k: Option<usize>) -> String {
    k.map(|k| k.to_string()).unwrap_or_else(|| "inf".into())
}

pub const BOUNDS_HEADER: [&str; 13] = [
    "name", "value", "L", "beta", "n", "T", "d", "K", "C", "c", "mu", "m", "t0",
];
pub const TABLE1_HEADER: [&str; 9] = [
    "row",
    "algorithm",
    "step_rule",
    "bound",
    "value",
    "sgd_limit",
    "nonconvex",
    "unbounded",
    "minibatch",
];

fn bound_row(b: &BoundReport) -> Vec<String> {
    let i = &b.inputs;
    vec![
        b.name.clone(),
        fmt_float(b.value),
        fmt_float(i.l),
        fmt_float(i.beta),
        i.n.to_string(),
        i.t_total.to_string(),
        i.d.to_string(),
        queries_cell(i.k),
        fmt_float(i.c_step),
        fmt_float(i.c_cap),
        fmt_float(i.mu),
        i.m.to_string(),
        i.t0.to_string(),
    ]
}

fn table1_row(t: &Table1Row) -> Vec<String> {
    vec![
        t.row.to_string(),
        t.algorithm.clone(),
        t.step_rule.clone(),
        t.bound.clone(),
        fmt_float(t.value),
        fmt_float(t.sgd_limit),
        t.nonconvex.to_string(),
        t.unbounded.to_string(),
        t.minibatch.to_string(),
    ]
}

#[derive(Serialize)]
struct Table1Json<'a> {
    inputs: &'a BoundInputs,
    rows: &'a [Table1Row],
}

fn bounds_table(a: &BoundsArgs, r: &mut Resolver) -> Result<Output> {
    let l = r.value("L", a.l, 1.0)?;
    let beta = r.value("beta", a.beta, 1.0)?;
    let n = r.value("n", a.n, 100)?;
    let t_total = r.value("T", a.t, 100)?;
    let d = r.value("d", a.d, 5)?;
    let k = parse_queries(&r.value("K", a.k.clone(), "4".to_string())?)?;
    let c_step = r.value("C", a.c_step, 1.0)?;
    let c_cap = r.value("c", a.c_cap, 0.1)?;
    let mu = r.optional("mu", a.mu)?;
    let m = r.value("m", a.m, 1)?;
    let t0 = r.value("t0", a.t0, 0)?;
    let kind: ScheduleKind = r
        .value(
            "schedule",
            a.schedule.clone(),
            ScheduleKind::DecreasingOverGamma.name().to_string(),
        )?
        .parse()?;
    let table1 = r.value("table1", a.table1.then_some(true), false)?;
    let format = r.value("format", a.format.clone(), "csv".to_string())?;
    if format != "csv" && format != "json" {
        bail!(ZossError::InvalidArgument(format!(
            "format must be csv or json, got {format:?}"
        )));
    }

    let mut inputs = BoundInputs::new(l, beta, n, t_total, d, k, c_step)
        .with_cap(c_cap)
        .with_batch(m)
        .with_t0(t0);
    inputs = match mu {
        Some(mu) => inputs.with_mu(mu),
        None => inputs.with_mu_at_cap(),
    };
    r.record("mu", &inputs.mu);
    inputs.validate()?;

    let mut out = Output::default();
    let (json, csv) = if table1 {
        let rows = bounds::table1(&inputs)?;
        let json = to_json(&Table1Json {
            inputs: &inputs,
            rows: &rows,
        })?;
        let csv = csv_string(&TABLE1_HEADER, &rows.iter().map(table1_row).collect::<Vec<_>>())?;
        out.files.push(("table1.json".into(), json.clone()));
        out.files.push(("table1.csv".into(), csv.clone()));
        (json, csv)
    } else {
        let schedule = inputs.schedule(kind)?;
        let mut reports = Vec::new();
        let mut keep = |res: zoss_core::Result<BoundReport>| match res {
            Ok(b) => reports.push(b),
            Err(ZossError::Precondition(why)) => eprintln!("skipped: {why}"),
            Err(e) => eprintln!("skipped: {e}"),
        };
        keep(bounds::stability_bound_nonconvex(&inputs, &schedule));
        keep(bounds::stability_bound_convex(&inputs, &schedule));
        match bounds::gen_bound_bounded_decreasing(&inputs) {
            Ok(b) => b.reports(&inputs).into_iter().for_each(|x| keep(Ok(x))),
            Err(e) => keep(Err(e)),
        }
        keep(bounds::gen_bound_dimension_free(&inputs));
        keep(bounds::gen_bound_unbounded_constant(&inputs, ConstantCase::LogSchedule));
        keep(bounds::gen_bound_unbounded_constant(
            &inputs,
            ConstantCase::PlainConstant,
        ));
        keep(bounds::gen_bound_unbounded_decreasing(&inputs));
        let json = to_json(&reports)?;
        let csv = csv_string(&BOUNDS_HEADER, &reports.iter().map(bound_row).collect::<Vec<_>>())?;
        out.files.push(("bounds.json".into(), json.clone()));
        out.files.push(("bounds.csv".into(), csv.clone()));
        (json, csv)
    };
    out.stdout = if format == "json" { json } else { csv };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queries_accept_infinity() {
        assert_eq!(parse_queries("inf").unwrap(), None);
        assert_eq!(parse_queries("16").unwrap(), Some(16));
        assert!(parse_queries("x").is_err());
    }

    #[test]
    fn record_csv_takes_union_of_params() {
        let a = VerifierRecord::new("a", true).param("d", 1.0).values(1.0, 0.1, 2.0);
        let b = VerifierRecord::new("b", false).param("K", 4.0).values(3.0, 0.1, 2.0);
        let text = records_csv(&[a, b]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("lemma,K,d,estimate,stderr,bound,pass"));
        assert_eq!(lines.next(), Some("a,,1,1,0.1,2,true"));
        assert_eq!(lines.next(), Some("b,4,,3,0.1,2,false"));
    }
}
