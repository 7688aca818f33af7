//! One runner per experiment kind. Each is a pure function of its config.

use std::path::PathBuf;

use crate::algorithms::{measure_stability, measure_success, AlgorithmRegistry, SuccessScale};
use crate::coupling::{fragility_report, verify_margin_bound};
use crate::enumerate::{classify_isolation, clusters, enumerate_solutions};
use crate::error::{Error, Result};
use crate::io::{instance_digest, load_instance, save_instance};
use crate::model::{ConstraintSpec, DisorderInstance};
use crate::par::Execution;
use crate::partition::{
    bound_root, hardness_pipeline, partition_halves, partition_thirds, pitt_check, random_pitt_setup, setup_seed,
    Monotonicity, PartitionResult, PipelineConfig, Verdict, VerdictStatus, WeightVector,
};
use crate::rng::{derive_seed, tag, RandomStream};

use super::config::{describe_spec, ExperimentConfig, ExperimentKind};
use super::report::{num, opt_num, Report, Table};

/// A finished experiment: its report and, when tabular, a CSV table.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub report: Report,
    pub table: Option<Table>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.kind {
        ExperimentKind::Gen => gen(cfg),
        ExperimentKind::Enumerate => enumerate(cfg),
        ExperimentKind::Fragility => fragility(cfg),
        ExperimentKind::Pipeline => pipeline(cfg),
        ExperimentKind::Stability => stability(cfg),
        ExperimentKind::Success => success(cfg),
        ExperimentKind::PartitionTest => partition_test(cfg),
        ExperimentKind::PittTest => pitt_test(cfg),
    }
}

fn exact(name: &'static str, ok: bool, detail: String) -> Verdict {
    Verdict {
        name,
        status: if ok { VerdictStatus::Pass } else { VerdictStatus::Fail },
        hard_failure: !ok,
        detail,
    }
}

fn vacuous(name: &'static str, detail: &str) -> Verdict {
    Verdict {
        name,
        status: VerdictStatus::Vacuous,
        hard_failure: false,
        detail: detail.into(),
    }
}

/// Family parameters (N, M, spec) echoed into the config section.
fn family(cfg: &ExperimentConfig, report: &mut Report) -> Result<(usize, usize, ConstraintSpec)> {
    let n = cfg.n()?;
    let m = cfg.m(n)?;
    let spec = cfg.spec()?;
    let sec = report.section("config");
    sec.put("n", n).put("m", m);
    if let Some(a) = cfg.raw("alpha") {
        sec.put("alpha", a);
    }
    sec.put("spec", describe_spec(&spec));
    Ok((n, m, spec))
}

/// The instance named by `input`, or one sampled from (N, M, spec, seed).
fn instance(cfg: &ExperimentConfig, report: &mut Report) -> Result<DisorderInstance> {
    let g = match cfg.path("input") {
        Some(path) => {
            let g = load_instance(&path)?;
            report.section("config").put("input", path.display());
            g
        }
        None => {
            let (n, m, spec) = family(cfg, report)?;
            let seed = cfg.seed()?;
            report.section("config").put("seed", seed);
            DisorderInstance::sample(n, m, seed, spec)?
        }
    };
    report
        .section("instance")
        .put("n", g.n())
        .put("m", g.m())
        .put("seed", g.seed())
        .put("spec", describe_spec(g.spec()))
        .put("digest", format!("{:016x}", instance_digest(&g)))
        .put("g_inf", num(g.max_abs()));
    Ok(g)
}

fn gen(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut report = Report::new("gen");
    let (n, m, spec) = family(cfg, &mut report)?;
    let seed = cfg.seed()?;
    let out = cfg.path("out").unwrap_or_else(|| PathBuf::from("instance.pgl"));
    report.section("config").put("seed", seed).put("out", out.display());
    let g = DisorderInstance::sample(n, m, seed, spec)?;
    let digest = save_instance(&out, &g)?;
    report
        .section("instance")
        .put("digest", format!("{digest:016x}"))
        .put("bytes", crate::io::encode_instance(&g).len());
    Ok(RunOutput { report, table: None })
}

fn enumerate(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut report = Report::new("enumerate");
    let g = instance(cfg, &mut report)?;
    let k = cfg.k(g.n())?;
    let link: usize = cfg.get_or("link", 1)?;
    report.section("config").put("k", k).put("link", link);
    let s = enumerate_solutions(&g)?;
    let iso = classify_isolation(&s, k)?;
    let cl = clusters(&s, link)?;
    let mb = verify_margin_bound(&g, &s)?;
    let res = report.section("results");
    res.put("solutions", s.len());
    for (j, c) in iso.counts.iter().enumerate() {
        res.put(&format!("isolated_{}", j + 1), c);
    }
    res.put("clusters", cl.clusters.len())
        .put("largest_cluster", cl.clusters.iter().map(|c| c.members.len()).max().unwrap_or(0))
        .put("max_diameter", cl.clusters.iter().map(|c| c.diameter).max().unwrap_or(0))
        .put("margin_bound", num(mb.bound))
        .put("margin_bound_checked", mb.checked);
    report.verdicts.push(exact(
        "margin_bound",
        mb.passed(),
        format!("{} of {} 1-isolated solutions above 2|G|inf/sqrt(N), exact", mb.violations.len(), mb.checked),
    ));
    let assignment = cl.assignment();
    let mut t = Table::new(&["encoding", "margin", "nearest_within_k", "isolated", "cluster"]);
    for (i, sigma) in s.members().iter().enumerate() {
        t.push(vec![
            sigma.bits().to_string(),
            num(s.margins()[i]),
            iso.nearest[i].map(|d| d.to_string()).unwrap_or_default(),
            (iso.flags[i] as u8).to_string(),
            assignment[sigma].to_string(),
        ]);
    }
    Ok(RunOutput { report, table: Some(t) })
}

fn fragility(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut report = Report::new("fragility");
    let instances: usize = cfg.get_or("instances", 1)?;
    if cfg.has("input") && instances != 1 {
        return Err(Error::Config {
            key: "instances".into(),
            message: "must be 1 when an input instance is given".into(),
        });
    }
    let graphs: Vec<DisorderInstance> = if cfg.has("input") {
        vec![instance(cfg, &mut report)?]
    } else {
        let (n, m, spec) = family(cfg, &mut report)?;
        let seed = cfg.seed()?;
        report.section("config").put("seed", seed).put("instances", instances);
        (0..instances)
            .map(|i| DisorderInstance::sample(n, m, derive_seed(seed, tag::DISORDER, i as u64), spec.clone()))
            .collect::<Result<_>>()?
    };
    let n = graphs[0].n();
    let k = cfg.k(n)?;
    let eta = cfg.eta(n)?;
    report.section("config").put("k", k).put("eta", num(eta));

    let mut t = Table::new(&["instance", "sigma", "tau", "distance", "probability", "threshold"]);
    let (mut excluded, mut checked_isolated, mut mb_viol, mut mb_checked, mut exceed) = (0, 0, 0, 0, 0);
    let mut max_p: f64 = 0.0;
    let mut epsilon = None;
    for (i, g) in graphs.iter().enumerate() {
        let s = enumerate_solutions(g)?;
        let mb = verify_margin_bound(g, &s)?;
        mb_viol += mb.violations.len();
        mb_checked += mb.checked;
        let fr = fragility_report(g, &s, k, eta)?;
        if !fr.norm_event_holds {
            excluded += 1;
            continue;
        }
        epsilon = epsilon.or(fr.epsilon);
        checked_isolated += fr.isolated;
        exceed += fr.exceedances.len();
        max_p = max_p.max(fr.max_probability);
        for r in &fr.records {
            t.push(vec![
                i.to_string(),
                r.sigma.bits().to_string(),
                r.tau.bits().to_string(),
                r.distance.to_string(),
                num(r.probability),
                opt_num(fr.threshold),
            ]);
        }
    }
    report
        .section("results")
        .put("instances", graphs.len())
        .put("excluded_norm_event", excluded)
        .put("isolated_checked", checked_isolated)
        .put("max_probability", num(max_p))
        .put("epsilon_first_instance", epsilon.map(num).unwrap_or_else(|| "none".into()));
    report.verdicts.push(exact(
        "margin_bound",
        mb_viol == 0,
        format!("{mb_viol} violations over {mb_checked} 1-isolated solutions, exact"),
    ));
    if matches!(graphs[0].spec(), ConstraintSpec::HalfSpace { .. }) {
        report.verdicts.push(exact(
            "fragility",
            exceed == 0,
            format!("{exceed} probabilities above 1/2 + eps + 1e-9"),
        ));
    } else {
        report
            .verdicts
            .push(vacuous("fragility", "tolerance defined for half-space constraints only"));
    }
    Ok(RunOutput { report, table: Some(t) })
}

fn describe_partition(p: &PartitionResult) -> String {
    let join = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
    format!("C1 = {{{}}}, C2 = {{{}}}", join(&p.c1), join(&p.c2))
}

fn pipeline(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut report = Report::new("pipeline");
    let g = instance(cfg, &mut report)?;
    let n = g.n();
    let registry = AlgorithmRegistry::with_defaults();
    let alg_id = cfg.raw("algorithm").unwrap_or("majority").to_string();
    let alg = registry.get(&alg_id)?;
    let pc = PipelineConfig {
        omega: cfg.get_or("omega", 0)?,
        eta: cfg.eta(n)?,
        k: cfg.k(n)?,
        rho_budget: cfg.get_or("rho", 2.0)?,
        samples: cfg.get_or("samples", 10_000)?,
        seed: cfg.seed()?,
        active_threshold: cfg.get("threshold")?,
    };
    report
        .section("config")
        .put("algorithm", &alg_id)
        .put("omega", pc.omega)
        .put("eta", num(pc.eta))
        .put("k", pc.k)
        .put("rho", num(pc.rho_budget))
        .put("samples", pc.samples)
        .put("sample_seed", pc.seed)
        .put("threshold", pc.active_threshold.map(num).unwrap_or_else(|| "default".into()));
    let r = hardness_pipeline(&g, alg.as_ref(), &pc)?;

    report
        .section("locate")
        .put("located", r.located())
        .put(
            "sigma_star",
            r.sigma_star.map(|s| format!("{:#x}", s.bits())).unwrap_or_else(|| "none".into()),
        )
        .put("dist_to_isolated", r.dist_to_isolated.map(num).unwrap_or_else(|| "none".into()));
    report
        .section("candidates")
        .put("radius", num(r.cand_radius))
        .put("size", r.cand.len())
        .put("min_overlap", num(r.min_overlap));
    report
        .section("singleton")
        .put("samples", r.singleton.trials)
        .put("hits", r.singleton.hits)
        .put("s_hat", num(r.s_hat()))
        .put("s_se", num(r.singleton.se()))
        .put("p_tau_sum", num(r.p_tau.iter().sum()));
    {
        let sec = report.section("p_tau");
        for (tau, p) in r.cand.iter().zip(&r.p_tau) {
            if *p > 0.0 {
                sec.put(&format!("{:#x}", tau.bits()), num(*p));
            }
        }
    }
    {
        let sec = report.section("partition");
        sec.put("source", format!("{:?}", r.partition_source).to_lowercase());
        if let Some(p) = &r.partition {
            sec.put("sets", describe_partition(p))
                .put("sum1", num(p.sum1))
                .put("sum2", num(p.sum2));
        }
    }
    if let Some(ev) = &r.events {
        report
            .section("events")
            .put("e1", num(ev.f.p()))
            .put("e1_se", num(ev.f.se()))
            .put("e2", num(ev.g.p()))
            .put("e2_se", num(ev.g.se()))
            .put("joint", num(ev.joint.p()))
            .put("joint_se", num(ev.joint.se()))
            .put("gap", num(ev.gap))
            .put("gap_se", num(ev.gap_se))
            .put("multiple", num(r.multiple.p()))
            .put("multiple_se", num(r.multiple.se()));
    }
    if let Some(a) = &r.active_side {
        report
            .section("active_side")
            .put("threshold", num(a.threshold))
            .put("window", num(a.window))
            .put("rel_minus", a.rel_minus.len())
            .put("rel_plus", a.rel_plus.len())
            .put("violations", a.violations.len());
    }
    let root = bound_root();
    report
        .section("constants")
        .put("root", num(root))
        .put("root_residual", num(2.0 * root * root / 9.0 + root - 1.0));
    report.verdicts = r.verdicts.clone();

    let mut t = Table::new(&["sample_index", "count_in_cand", "is_singleton"]);
    for (j, c) in r.counts.iter().enumerate() {
        t.push(vec![j.to_string(), c.to_string(), ((*c == 1) as u8).to_string()]);
    }
    Ok(RunOutput { report, table: Some(t) })
}

fn stability(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut report = Report::new("stability");
    let (n, m, spec) = family(cfg, &mut report)?;
    let registry = AlgorithmRegistry::with_defaults();
    let alg_id = cfg.raw("algorithm").unwrap_or("majority").to_string();
    let alg = registry.get(&alg_id)?;
    let eta = cfg.eta(n)?;
    let trials: usize = cfg.get_or("trials", 200)?;
    let seed = cfg.seed()?;
    report
        .section("config")
        .put("algorithm", &alg_id)
        .put("eta", num(eta))
        .put("trials", trials)
        .put("seed", seed);
    let r = measure_stability(alg.as_ref(), n, m, &spec, eta, trials, seed, None, Execution::default())?;
    {
        let sec = report.section("results");
        sec.put("mean_sq", num(r.mean_sq)).put("mean_sq_se", num(r.mean_sq_se));
        for (q, v) in &r.quantiles {
            sec.put(&format!("quantile_{q}"), num(*v));
        }
    }
    {
        let sec = report.section("curve");
        for (rho, t) in &r.curve {
            sec.put(&format!("rho_{}", num(*rho)), num(*t));
        }
    }
    let monotone = r.curve.windows(2).all(|w| w[1].1 <= w[0].1);
    report
        .verdicts
        .push(exact("curve_nonincreasing", monotone, "t(rho) over the rho grid".into()));
    let mut t = Table::new(&["trial", "distance"]);
    for (i, d) in r.distances.iter().enumerate() {
        t.push(vec![i.to_string(), num(*d)]);
    }
    Ok(RunOutput { report, table: Some(t) })
}

fn success(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut report = Report::new("success");
    let (n, m, spec) = family(cfg, &mut report)?;
    let registry = AlgorithmRegistry::with_defaults();
    let alg_id = cfg.raw("algorithm").unwrap_or("majority").to_string();
    let alg = registry.get(&alg_id)?;
    let scale = match (cfg.get::<usize>("k")?, cfg.get::<f64>("iota")?) {
        (Some(_), Some(_)) => {
            return Err(Error::Config {
                key: "iota".into(),
                message: "give at most one of k and iota".into(),
            })
        }
        (None, Some(iota)) => SuccessScale::Iota(iota),
        _ => SuccessScale::K(cfg.k(n)?),
    };
    let trials: usize = cfg.get_or("trials", 100)?;
    let seed = cfg.seed()?;
    let sec = report.section("config");
    sec.put("algorithm", &alg_id);
    match scale {
        SuccessScale::K(k) => sec.put("k", k),
        SuccessScale::Iota(i) => sec.put("iota", num(i)),
    };
    sec.put("trials", trials).put("seed", seed);
    let r = measure_success(alg.as_ref(), n, m, &spec, scale, trials, seed, Execution::default())?;
    report
        .section("results")
        .put("k", r.k)
        .put("radius", num(r.radius))
        .put("located", num(r.located.p()))
        .put("located_se", num(r.located.se()))
        .put("located_isolated", num(r.located_isolated.p()))
        .put("located_isolated_se", num(r.located_isolated.se()))
        .put("delta_hat", num(r.delta_hat))
        .put("rate_bound", num(r.rate_bound));
    let per_trial_ok = r.trials.iter().all(|t| t.dist_isolated.is_none() || t.dist_solution.is_some());
    report.verdicts.push(exact(
        "isolated_within_success",
        per_trial_ok && r.located_isolated.hits <= r.located.hits,
        "isolated success implies success at equal radii, per trial and in aggregate".into(),
    ));
    let mut t = Table::new(&["trial", "solutions", "dist_solution", "dist_isolated"]);
    for (i, tr) in r.trials.iter().enumerate() {
        t.push(vec![
            i.to_string(),
            tr.solutions.to_string(),
            opt_num(tr.dist_solution),
            opt_num(tr.dist_isolated),
        ]);
    }
    Ok(RunOutput { report, table: Some(t) })
}

/// Random weights for the thirds lemma: total in [0.8, 1], max ≤ 0.51.
pub fn random_thirds_weights(rs: &mut RandomStream) -> Vec<f64> {
    loop {
        let len = 1 + rs.below(40) as usize;
        let raw: Vec<f64> = (0..len).map(|_| rs.next_uniform().powi(2)).collect();
        let total = rs.range_f64(0.8, 1.0);
        let s: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x * total / s).collect();
        if p.iter().all(|&x| x <= 0.51) && p.iter().sum::<f64>() >= 0.8 {
            return p;
        }
    }
}

/// Random weights for the halves lemma: max ≤ R/100.
pub fn random_halves_weights(rs: &mut RandomStream) -> Vec<f64> {
    loop {
        let len = 150 + rs.below(250) as usize;
        let scale = rs.range_f64(0.01, 10.0);
        let p: Vec<f64> = (0..len).map(|_| scale * (0.5 + rs.next_uniform())).collect();
        let r: f64 = p.iter().sum();
        if p.iter().all(|&x| x <= r / 100.0) {
            return p;
        }
    }
}

fn covers(p: &PartitionResult, len: usize) -> bool {
    let mut all: Vec<usize> = p.c1.iter().chain(&p.c2).copied().collect();
    all.sort_unstable();
    all == (0..len).collect::<Vec<_>>()
}

fn partition_test(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut report = Report::new("partition-test");
    let cases: usize = cfg.get_or("cases", 10_000)?;
    let seed = cfg.seed()?;
    report.section("config").put("cases", cases).put("seed", seed);
    let mut t = Table::new(&["case", "lemma", "len", "total", "sum1", "sum2", "ok"]);
    let (mut bad_thirds, mut bad_halves) = (0, 0);
    for c in 0..cases {
        let mut rs = RandomStream::derived(seed, tag::SETUP, c as u64);
        let w = WeightVector::new(random_thirds_weights(&mut rs))?;
        let r = partition_thirds(&w)?;
        let tot = w.total();
        let tol = 1e-12 * tot;
        let ok = covers(&r, w.len())
            && r.sum1 >= tot / 3.0 - tol
            && r.sum2 >= tot / 3.0 - tol
            && r.sum1 * r.sum2 >= 2.0 * tot * tot / 9.0 - tol;
        bad_thirds += !ok as usize;
        t.push(vec![
            c.to_string(),
            "thirds".into(),
            w.len().to_string(),
            num(tot),
            num(r.sum1),
            num(r.sum2),
            (ok as u8).to_string(),
        ]);

        let w = WeightVector::new(random_halves_weights(&mut rs))?;
        let r = partition_halves(&w)?;
        let tot = w.total();
        let tol = 1e-12 * tot;
        let ok = covers(&r, w.len()) && r.sum1.min(r.sum2) >= 0.49 * tot - tol && r.sum1 <= 0.5 * tot + tol;
        bad_halves += !ok as usize;
        t.push(vec![
            c.to_string(),
            "halves".into(),
            w.len().to_string(),
            num(tot),
            num(r.sum1),
            num(r.sum2),
            (ok as u8).to_string(),
        ]);
    }
    report
        .section("results")
        .put("thirds_violations", bad_thirds)
        .put("halves_violations", bad_halves);
    report.verdicts.push(exact(
        "thirds_guarantees",
        bad_thirds == 0,
        format!("{bad_thirds} of {cases} cases; sums >= R/3 and product >= 2R^2/9 up to 1e-12 R"),
    ));
    report.verdicts.push(exact(
        "halves_guarantees",
        bad_halves == 0,
        format!("{bad_halves} of {cases} cases; both sums >= 0.49R up to 1e-12 R"),
    ));
    Ok(RunOutput { report, table: Some(t) })
}

fn pitt_test(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut report = Report::new("pitt-test");
    let cases: usize = cfg.get_or("cases", 50)?;
    let samples: usize = cfg.get_or("samples", 100_000)?;
    let seed = cfg.seed()?;
    report
        .section("config")
        .put("cases", cases)
        .put("samples", samples)
        .put("seed", seed);
    let mut t = Table::new(&["case", "dim", "direction", "p_f", "p_g", "joint", "gap", "se"]);
    let (mut soft, mut hard) = (0, 0);
    let mut worst = f64::INFINITY;
    for c in 0..cases {
        let s = random_pitt_setup(setup_seed(seed, c as u64))?;
        let est = pitt_check(
            &s.cov,
            &s.mean,
            &s.f,
            &s.g,
            samples,
            derive_seed(seed, tag::TRIAL, c as u64),
            Execution::default(),
        )?;
        if est.gap < -3.0 * est.gap_se {
            soft += 1;
        }
        if est.gap < -5.0 * est.gap_se {
            hard += 1;
        }
        if est.gap_se > 0.0 {
            worst = worst.min(est.gap / est.gap_se);
        }
        t.push(vec![
            c.to_string(),
            s.cov.nrows().to_string(),
            match s.f.direction {
                Monotonicity::Increasing => "increasing".into(),
                Monotonicity::Decreasing => "decreasing".into(),
            },
            num(est.f.p()),
            num(est.g.p()),
            num(est.joint.p()),
            num(est.gap),
            num(est.gap_se),
        ]);
    }
    report
        .section("results")
        .put("below_3se", soft)
        .put("below_5se", hard)
        .put("min_gap_over_se", if worst.is_finite() { num(worst) } else { "none".into() });
    report.verdicts.push(Verdict {
        name: "correlation",
        status: if soft == 0 { VerdictStatus::Pass } else { VerdictStatus::Fail },
        hard_failure: hard > 0,
        detail: format!("{soft} of {cases} gaps below -3se, {hard} below -5se"),
    });
    Ok(RunOutput { report, table: Some(t) })
}
