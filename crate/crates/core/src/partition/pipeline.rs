//! The finite-N hardness pipeline: locate an isolated solution near an
//! algorithm's output, estimate how often the resampled instance has exactly
//! one solution near it, split the candidates and test every inequality in
//! the chain that bounds that probability.

use crate::algorithms::{nearest_within_radius, Algorithm};
use crate::coupling::{check_eta, mix};
use crate::enumerate::{candidate_set, enumerate_solutions};
use crate::error::{Error, Result};
use crate::io::instance_digest;
use crate::model::{ConstraintSpec, DisorderInstance, SpinConfig};
use crate::par::{self, Execution};
use crate::rng::{tag, RandomStream};
use crate::stats::Proportion;

use super::active_side::{active_side_analysis, default_active_threshold, ActiveSideReport, Side};
use super::pitt::PittEstimate;
use super::{bound_root, partition_thirds, PartitionResult, WeightVector, SUM_SLACK};

/// Largest N the pipeline enumerates.
pub const PIPELINE_LIMIT: usize = 24;
/// Realizations whose incremental candidate count is re-verified directly.
const RECHECKS: usize = 100;
/// Fields this close to a boundary are recomputed directly.
const BOUNDARY_RECHECK: f64 = 1e-9;
/// Steps between direct recomputations along the candidate walk.
const REFRESH_EVERY: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub omega: u64,
    pub eta: f64,
    pub k: usize,
    /// Extra radius ρ added to √k/3 when forming the candidate set.
    pub rho_budget: f64,
    /// Realizations of G̃ in each of the two sampling phases.
    pub samples: usize,
    pub seed: u64,
    /// Near-boundary threshold for interval unions; defaults to 5/log N.
    pub active_threshold: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerdictStatus {
    Pass,
    Fail,
    /// The hypotheses of the check do not hold on this run.
    Vacuous,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub name: &'static str,
    pub status: VerdictStatus,
    /// An exact inequality is violated, or an estimate misses by more than
    /// five standard errors.
    pub hard_failure: bool,
    pub detail: String,
}

impl Verdict {
    fn vacuous(name: &'static str, why: impl Into<String>) -> Self {
        Self {
            name,
            status: VerdictStatus::Vacuous,
            hard_failure: false,
            detail: why.into(),
        }
    }

    fn exact(name: &'static str, ok: bool, detail: String) -> Self {
        Self {
            name,
            status: if ok { VerdictStatus::Pass } else { VerdictStatus::Fail },
            hard_failure: !ok,
            detail,
        }
    }

    /// `slack ≥ −3·se` passes; below `−5·se` is a hard failure.
    fn estimated(name: &'static str, slack: f64, se: f64, detail: String) -> Self {
        Self {
            name,
            status: if slack >= -3.0 * se { VerdictStatus::Pass } else { VerdictStatus::Fail },
            hard_failure: slack < -5.0 * se,
            detail: format!("{detail}; slack {slack:.6e}, se {se:.3e}, pass at -3se"),
        }
    }

    fn soft(name: &'static str, ok: bool, detail: String) -> Self {
        Self {
            name,
            status: if ok { VerdictStatus::Pass } else { VerdictStatus::Fail },
            hard_failure: false,
            detail,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionSource {
    /// The greedy-thirds split of the singleton weights.
    Thirds,
    /// Split by encoding order because the thirds hypotheses failed.
    Diagnostic,
    /// Fewer than two candidates.
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineReport {
    pub n: usize,
    pub m: usize,
    pub instance_digest: u64,
    pub algorithm: String,
    pub config: PipelineConfig,
    pub output: Vec<f64>,
    pub sigma_star: Option<SpinConfig>,
    pub dist_to_isolated: Option<f64>,
    /// √k/3 + ρ.
    pub cand_radius: f64,
    pub cand: Vec<SpinConfig>,
    /// Smallest pairwise overlap inside the candidate set.
    pub min_overlap: f64,
    /// Number of feasible candidates per phase-one realization.
    pub counts: Vec<u32>,
    /// Realizations with exactly one feasible candidate.
    pub singleton: Proportion,
    /// Per candidate, realizations in which it is the unique feasible one.
    pub tau_tallies: Vec<u64>,
    pub p_tau: Vec<f64>,
    pub partition: Option<PartitionResult>,
    pub partition_source: PartitionSource,
    pub active_side: Option<ActiveSideReport>,
    /// Events E₁, E₂ ("some candidate of C_i is feasible") on phase two.
    pub events: Option<PittEstimate>,
    /// The monotone surrogates of E₁, E₂ for interval unions.
    pub active_events: Option<PittEstimate>,
    pub multiple: Proportion,
    pub rechecked: usize,
    pub recheck_mismatches: usize,
    pub root: f64,
    pub verdicts: Vec<Verdict>,
}

impl PipelineReport {
    pub fn located(&self) -> bool {
        self.sigma_star.is_some()
    }

    pub fn s_hat(&self) -> f64 {
        self.singleton.p()
    }

    pub fn hard_failure(&self) -> bool {
        self.verdicts.iter().any(|v| v.hard_failure)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

/// A relevant constraint pinned to one endpoint value.
#[derive(Clone, Copy, Debug)]
struct Pin {
    constraint: usize,
    side: Side,
    value: f64,
}

/// Evaluates every candidate against one realization of G̃ by walking the
/// candidate list and updating fields only for the flipped coordinates.
struct CandidateWalk<'a> {
    n: usize,
    m: usize,
    spec: &'a ConstraintSpec,
    cand: &'a [SpinConfig],
    pins: &'a [Pin],
}

impl CandidateWalk<'_> {
    fn field(&self, entries: &[f64], a: usize, tau: &SpinConfig) -> f64 {
        let row = &entries[a * self.n..(a + 1) * self.n];
        row.iter().enumerate().map(|(i, g)| g * tau.spin(i)).sum::<f64>() / (self.n as f64).sqrt()
    }

    /// Per candidate: (feasible, surrogate event holds).
    fn run(&self, entries: &[f64]) -> Vec<(bool, bool)> {
        let scale = 2.0 / (self.n as f64).sqrt();
        let mut fields = vec![0.0; self.m];
        let mut prev: Option<SpinConfig> = None;
        let mut out = Vec::with_capacity(self.cand.len());
        for (step, tau) in self.cand.iter().enumerate() {
            match prev {
                Some(p) if step % REFRESH_EVERY != 0 => {
                    let mut diff = p.bits() ^ tau.bits();
                    while diff != 0 {
                        let i = diff.trailing_zeros() as usize;
                        diff &= diff - 1;
                        let s = tau.spin(i) * scale;
                        for (a, f) in fields.iter_mut().enumerate() {
                            *f += entries[a * self.n + i] * s;
                        }
                    }
                }
                _ => {
                    for (a, f) in fields.iter_mut().enumerate() {
                        *f = self.field(entries, a, tau);
                    }
                }
            }
            prev = Some(*tau);
            let mut feasible = true;
            for (a, f) in fields.iter().enumerate() {
                let fa = if self.spec.constraint_margin(*f).abs() < BOUNDARY_RECHECK {
                    self.field(entries, a, tau)
                } else {
                    *f
                };
                if !self.spec.contains(fa) {
                    feasible = false;
                    break;
                }
            }
            let surrogate = self.pins.iter().all(|pin| {
                let mut f = fields[pin.constraint];
                if (f - pin.value).abs() < BOUNDARY_RECHECK {
                    f = self.field(entries, pin.constraint, tau);
                }
                match pin.side {
                    Side::Left => f >= pin.value,
                    Side::Right => f <= pin.value,
                }
            });
            out.push((feasible, surrogate));
        }
        out
    }

    fn naive(&self, entries: &[f64]) -> Vec<bool> {
        self.cand
            .iter()
            .map(|tau| (0..self.m).all(|a| self.spec.contains(self.field(entries, a, tau))))
            .collect()
    }
}

/// One realization of G̃'s entries, drawn from `(seed, phase_tag, j)`.
fn realization(g: &DisorderInstance, eta: f64, seed: u64, phase_tag: u64, j: usize) -> Vec<f64> {
    let mut fresh = vec![0.0; g.entries().len()];
    RandomStream::derived(seed, phase_tag, j as u64).fill_normal(&mut fresh);
    let mut tilde = vec![0.0; fresh.len()];
    mix(g.entries(), &fresh, eta, &mut tilde);
    tilde
}

pub fn hardness_pipeline(g: &DisorderInstance, alg: &dyn Algorithm, cfg: &PipelineConfig) -> Result<PipelineReport> {
    hardness_pipeline_with(g, alg, cfg, Execution::default())
}

pub fn hardness_pipeline_with(
    g: &DisorderInstance,
    alg: &dyn Algorithm,
    cfg: &PipelineConfig,
    exec: Execution,
) -> Result<PipelineReport> {
    let (n, m) = (g.n(), g.m());
    if n > PIPELINE_LIMIT {
        return Err(Error::Capacity { n, limit: PIPELINE_LIMIT });
    }
    check_eta(cfg.eta)?;
    if cfg.k < 1 || cfg.k > n {
        return Err(Error::out_of_range("k", cfg.k, "1 <= k <= N"));
    }
    if !(cfg.rho_budget >= 0.0 && cfg.rho_budget.is_finite()) {
        return Err(Error::out_of_range("rho_budget", cfg.rho_budget, "finite and >= 0"));
    }
    if cfg.samples < 2 {
        return Err(Error::out_of_range("samples", cfg.samples, ">= 2"));
    }

    // Step 1: the algorithm's output and the nearest k-isolated solution.
    let output = alg.run(g, cfg.omega);
    if output.len() != n {
        return Err(Error::Dimension(format!("algorithm returned {} coordinates for N = {n}", output.len())));
    }
    let s = enumerate_solutions(g)?;
    let success_radius = (cfg.k as f64).sqrt() / 3.0;
    let near = nearest_within_radius(&s, &output, cfg.k, success_radius)?;
    let sigma_star = near.isolated.map(|p| p.0);

    // Step 2: candidates around the output.
    let cand_radius = success_radius + cfg.rho_budget;
    let cand = candidate_set(&output, cand_radius)?;
    let mut min_overlap = 1.0f64;
    for (i, a) in cand.iter().enumerate() {
        for b in &cand[i + 1..] {
            min_overlap = min_overlap.min(a.overlap(b)?);
        }
    }

    let active_side = match (g.spec(), sigma_star) {
        (ConstraintSpec::IntervalUnion(_), Some(star)) => {
            let thr = cfg.active_threshold.unwrap_or_else(|| default_active_threshold(n));
            Some(active_side_analysis(g, &star, &cand, thr)?)
        }
        _ => None,
    };
    let pins: Vec<Pin> = match (g.spec(), &active_side) {
        (ConstraintSpec::IntervalUnion(u), Some(r)) => r
            .assigned
            .iter()
            .map(|&(c, e)| Pin {
                constraint: c,
                side: e.side,
                value: e.value(u),
            })
            .collect(),
        _ => Vec::new(),
    };
    let walk = CandidateWalk {
        n,
        m,
        spec: g.spec(),
        cand: &cand,
        pins: &pins,
    };

    // Step 3: how often exactly one candidate survives resampling.
    let phase1 = par::map_indexed(exec, cfg.samples, |j| {
        let tilde = realization(g, cfg.eta, cfg.seed, tag::FRESH, j);
        let flags = walk.run(&tilde);
        let count = flags.iter().filter(|f| f.0).count() as u32;
        let unique = (count == 1).then(|| flags.iter().position(|f| f.0).expect("one feasible"));
        let mismatch = j < RECHECKS && walk.naive(&tilde) != flags.iter().map(|f| f.0).collect::<Vec<_>>();
        (count, unique, mismatch)
    });
    let counts: Vec<u32> = phase1.iter().map(|r| r.0).collect();
    let singleton = Proportion::from_flags(counts.iter().map(|&c| c == 1));
    let mut tau_tallies = vec![0u64; cand.len()];
    for r in &phase1 {
        if let Some(i) = r.1 {
            tau_tallies[i] += 1;
        }
    }
    let rechecked = RECHECKS.min(cfg.samples);
    let recheck_mismatches = phase1.iter().filter(|r| r.2).count();
    let p_tau: Vec<f64> = tau_tallies.iter().map(|&t| t as f64 / cfg.samples as f64).collect();
    let s_hat = singleton.p();

    // Step 4: split the candidates.
    let weights = WeightVector::new(p_tau.clone())?;
    let hypotheses = s_hat >= 0.8 && weights.max() <= 0.51;
    let (partition, partition_source) = if hypotheses {
        (Some(partition_thirds(&weights)?), PartitionSource::Thirds)
    } else if cand.len() >= 2 {
        let half = cand.len().div_ceil(2);
        let c1: Vec<usize> = (0..half).collect();
        let c2: Vec<usize> = (half..cand.len()).collect();
        let sum1 = c1.iter().map(|&i| p_tau[i]).sum();
        let sum2 = c2.iter().map(|&i| p_tau[i]).sum();
        (
            Some(PartitionResult {
                c1,
                c2,
                sum1,
                sum2,
                case: super::PartitionCase::Prefix,
            }),
            PartitionSource::Diagnostic,
        )
    } else {
        (None, PartitionSource::None)
    };

    // Phase two: events on fresh realizations.
    let (events, active_events, multiple, implication_failures) = match &partition {
        Some(part) => {
            let mut side = vec![0u8; cand.len()];
            part.c1.iter().for_each(|&i| side[i] = 1);
            part.c2.iter().for_each(|&i| side[i] = 2);
            let rows = par::map_indexed(exec, cfg.samples, |j| {
                let tilde = realization(g, cfg.eta, cfg.seed, tag::PHASE, j);
                let flags = walk.run(&tilde);
                let any = |which: u8, pick: fn(&(bool, bool)) -> bool| {
                    flags.iter().zip(&side).any(|(f, &s)| s == which && pick(f))
                };
                let count = flags.iter().filter(|f| f.0).count();
                (any(1, |f| f.0), any(2, |f| f.0), any(1, |f| f.1), any(2, |f| f.1), count)
            });
            let ev: Vec<(bool, bool)> = rows.iter().map(|r| (r.0, r.1)).collect();
            let act: Vec<(bool, bool)> = rows.iter().map(|r| (r.2, r.3)).collect();
            let multiple = Proportion::from_flags(rows.iter().map(|r| r.4 >= 2));
            let failures = rows.iter().filter(|r| r.0 && r.1 && r.4 < 2).count();
            let active = (!pins.is_empty()).then(|| PittEstimate::from_flags(&act));
            (Some(PittEstimate::from_flags(&ev)), active, multiple, failures)
        }
        None => (None, None, Proportion::new(0, 0), 0),
    };

    // Verdicts.
    let root = bound_root();
    let mut verdicts = Vec::new();
    let tally_total: u64 = tau_tallies.iter().sum();
    verdicts.push(Verdict::exact(
        "tally_sum",
        tally_total == singleton.hits,
        format!("sum of per-candidate tallies {tally_total} vs singleton count {}", singleton.hits),
    ));
    verdicts.push(Verdict::exact(
        "incremental_recheck",
        recheck_mismatches == 0,
        format!("{recheck_mismatches} mismatches in {rechecked} direct rechecks"),
    ));
    let overlap_ok = min_overlap >= 0.0;
    verdicts.push(Verdict::soft(
        "overlap_nonnegative",
        overlap_ok,
        format!("min overlap {min_overlap:.6} over {} candidates", cand.len()),
    ));
    match (&partition, partition_source) {
        (Some(p), PartitionSource::Thirds) => {
            let need = 2.0 * s_hat * s_hat / 9.0;
            verdicts.push(Verdict::exact(
                "partition_product",
                p.sum1 * p.sum2 >= need - SUM_SLACK * s_hat.max(1.0),
                format!("sum1*sum2 = {:.6e} vs 2S^2/9 = {need:.6e}", p.sum1 * p.sum2),
            ));
        }
        _ => verdicts.push(Verdict::vacuous(
            "partition_product",
            format!("thirds hypotheses unmet (S = {s_hat:.4}, max p = {:.4})", weights.max()),
        )),
    }
    match (&partition, &events) {
        (Some(p), Some(ev)) => {
            for (name, est, sum) in [("event1_lower", ev.f, p.sum1), ("event2_lower", ev.g, p.sum2)] {
                let se = (est.se().powi(2) + singleton.se().powi(2)).sqrt();
                verdicts.push(Verdict::estimated(
                    name,
                    est.p() - sum,
                    se,
                    format!("P[E] = {:.6} vs singleton weight {sum:.6}", est.p()),
                ));
            }
        }
        _ => {
            verdicts.push(Verdict::vacuous("event1_lower", "no partition"));
            verdicts.push(Verdict::vacuous("event2_lower", "no partition"));
        }
    }
    let is_half_space = matches!(g.spec(), ConstraintSpec::HalfSpace { .. });
    let correlation_events = if is_half_space { events.as_ref() } else { active_events.as_ref() };
    match correlation_events {
        Some(_) if !overlap_ok => verdicts.push(Verdict::vacuous("correlation", "negative overlap in candidates")),
        Some(est) => verdicts.push(Verdict::estimated(
            "correlation",
            est.gap,
            est.gap_se,
            format!(
                "P[E1 and E2] = {:.6}, P[E1]P[E2] = {:.6}",
                est.joint.p(),
                est.f.p() * est.g.p()
            ),
        )),
        None if is_half_space => verdicts.push(Verdict::vacuous("correlation", "no partition")),
        None => verdicts.push(Verdict::vacuous("correlation", "no located solution or no pinned constraint")),
    }
    if events.is_some() {
        verdicts.push(Verdict::exact(
            "multiplicity_vs_joint",
            implication_failures == 0,
            format!("{implication_failures} realizations with E1 and E2 but fewer than two feasible candidates"),
        ));
    } else {
        verdicts.push(Verdict::vacuous("multiplicity_vs_joint", "no partition"));
    }
    match &events {
        Some(ev) if is_half_space && overlap_ok => {
            let se = (multiple.se().powi(2) + ev.gap_se.powi(2)).sqrt();
            verdicts.push(Verdict::estimated(
                "multiplicity_vs_product",
                multiple.p() - ev.f.p() * ev.g.p(),
                se,
                format!("P[count >= 2] = {:.6}", multiple.p()),
            ));
        }
        _ => verdicts.push(Verdict::vacuous(
            "multiplicity_vs_product",
            "needs a half-space partition with nonnegative overlaps",
        )),
    }
    if partition_source == PartitionSource::Thirds && overlap_ok {
        let slack = 1.0 - s_hat - 2.0 * s_hat * s_hat / 9.0;
        let se = (1.0 + 4.0 * s_hat / 9.0) * singleton.se();
        verdicts.push(Verdict::estimated(
            "singleton_ceiling",
            slack,
            se,
            format!("1 - S = {:.6} vs 2S^2/9 = {:.6}", 1.0 - s_hat, 2.0 * s_hat * s_hat / 9.0),
        ));
    } else {
        verdicts.push(Verdict::vacuous("singleton_ceiling", "thirds hypotheses unmet"));
    }
    if let Some(a) = &active_side {
        verdicts.push(Verdict::soft(
            "active_side",
            a.passed(),
            format!("window {:.4}, {} violations", a.window, a.violations.len()),
        ));
    }

    Ok(PipelineReport {
        n,
        m,
        instance_digest: instance_digest(g),
        algorithm: alg.id().to_string(),
        config: cfg.clone(),
        output,
        sigma_star,
        dist_to_isolated: near.isolated.map(|p| p.1),
        cand_radius,
        cand,
        min_overlap,
        counts,
        singleton,
        tau_tallies,
        p_tau,
        partition,
        partition_source,
        active_side,
        events,
        active_events,
        multiple,
        rechecked,
        recheck_mismatches,
        root,
        verdicts,
    })
}
