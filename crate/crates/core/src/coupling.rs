//! The Gaussian resampling coupling G̃ = √(1−η)·G + √η·G′ and the
//! quantities that are exact given G: conditional feasibility, the
//! isolation-forces-small-margin bound and fragility under resampling.

use crate::enumerate::{classify_isolation, SolutionSet};
use crate::error::{Error, Result};
use crate::model::{hamming_ball, ConstraintSpec, DisorderInstance, SpinConfig};
use crate::par::{self, Execution};
use crate::rng::{derive_seed, tag, RandomStream};
use crate::stats::{kahan_sum, normal_cdf, Proportion};

pub(crate) fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::out_of_range("eta", eta, "0 < eta < 1"));
    }
    Ok(())
}

/// Default noise level 3·log(N)/N, clamped into [1e-6, 0.99] for the few
/// small N where it leaves (0, 1).
pub fn default_eta(n: usize) -> f64 {
    (3.0 * (n as f64).ln() / n as f64).clamp(1e-6, 0.99)
}

/// ‖G‖∞ ≤ 10·√(log N), the high-probability norm event conditioned on by the
/// fragility and active-side checks.
pub fn norm_event_holds(g: &DisorderInstance) -> bool {
    g.max_abs() <= 10.0 * (g.n() as f64).ln().max(0.0).sqrt()
}

/// `out = √(1−η)·base + √η·fresh` entrywise.
pub(crate) fn mix(base: &[f64], fresh: &[f64], eta: f64, out: &mut [f64]) {
    let (a, b) = ((1.0 - eta).sqrt(), eta.sqrt());
    for ((o, x), y) in out.iter_mut().zip(base).zip(fresh) {
        *o = a * x + b * y;
    }
}

/// A base instance G, an independent copy G′ and the noise level η.
#[derive(Clone, Debug)]
pub struct CoupledInstance {
    base: DisorderInstance,
    fresh: DisorderInstance,
    eta: f64,
}

impl CoupledInstance {
    /// Draw G′ from `fresh_seed` with the base's dimensions and spec.
    pub fn new(base: DisorderInstance, fresh_seed: u64, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        let fresh = DisorderInstance::sample(base.n(), base.m(), fresh_seed, base.spec().clone())?;
        Ok(Self { base, fresh, eta })
    }

    pub fn from_parts(base: DisorderInstance, fresh: DisorderInstance, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        if base.n() != fresh.n() || base.m() != fresh.m() {
            return Err(Error::Dimension(format!(
                "base is {}x{}, fresh copy is {}x{}",
                base.m(),
                base.n(),
                fresh.m(),
                fresh.n()
            )));
        }
        Ok(Self { base, fresh, eta })
    }

    pub fn base(&self) -> &DisorderInstance {
        &self.base
    }

    pub fn fresh(&self) -> &DisorderInstance {
        &self.fresh
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// λ = 1 − √(1−η), the weight of the private component when the pair is
    /// written as G = √(1−λ)G₁ + √λG₂, G̃ = √(1−λ)G₁ + √λG₃.
    pub fn shared_lambda(&self) -> f64 {
        1.0 - (1.0 - self.eta).sqrt()
    }

    pub fn realize_tilde(&self) -> DisorderInstance {
        let mut entries = vec![0.0; self.base.entries().len()];
        mix(self.base.entries(), self.fresh.entries(), self.eta, &mut entries);
        DisorderInstance::from_entries(
            self.base.n(),
            self.base.m(),
            derive_seed(self.base.seed(), tag::FRESH, self.fresh.seed()),
            self.base.spec().clone(),
            entries,
        )
        .expect("mixture of finite matrices is finite")
    }
}

pub fn realize_tilde(c: &CoupledInstance) -> DisorderInstance {
    c.realize_tilde()
}

/// P[τ ∈ S(G̃) | G], exactly.
///
/// Given G, the resampled fields are independent across rows with
/// field̃_a ~ Normal(√(1−η)·f_a, η), so the probability factorizes.
pub fn conditional_feasibility(g: &DisorderInstance, tau: &SpinConfig, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let fields = g.fields(tau)?;
    let (shrink, sd) = ((1.0 - eta).sqrt(), eta.sqrt());
    Ok(fields
        .iter()
        .map(|f| g.spec().feasibility_probability(shrink * f, sd))
        .product())
}

/// Monte Carlo estimate of P[τ ∈ S(G̃) | G] over `samples` fresh copies G′,
/// sample `j` drawn from `derive_seed(seed, TRIAL, j)`.
pub fn conditional_feasibility_mc(
    g: &DisorderInstance,
    tau: &SpinConfig,
    eta: f64,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<Proportion> {
    check_eta(eta)?;
    g.fields(tau)?;
    let flags = par::map_indexed(exec, samples, |j| {
        let fresh = DisorderInstance::sample(g.n(), g.m(), derive_seed(seed, tag::TRIAL, j as u64), g.spec().clone())
            .expect("dimensions already validated");
        let c = CoupledInstance::from_parts(g.clone(), fresh, eta).expect("same shape");
        c.realize_tilde().is_solution_unchecked(tau)
    });
    Ok(Proportion::from_flags(flags))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginViolation {
    pub sigma: SpinConfig,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginBoundReport {
    /// 2‖G‖∞/√N
    pub bound: f64,
    /// Number of 1-isolated solutions checked.
    pub checked: usize,
    pub violations: Vec<MarginViolation>,
}

impl MarginBoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Every 1-isolated solution (hence every k-isolated one) must have margin
/// at most 2‖G‖∞/√N. Holds for both constraint families.
pub fn verify_margin_bound(g: &DisorderInstance, s: &SolutionSet) -> Result<MarginBoundReport> {
    let bound = 2.0 * g.max_abs() / (g.n() as f64).sqrt();
    let iso = classify_isolation(s, 1)?;
    let mut violations = Vec::new();
    let mut checked = 0;
    for (idx, sigma) in s.members().iter().enumerate() {
        if !iso.flags[idx] {
            continue;
        }
        checked += 1;
        let margin = s.margins()[idx];
        if margin > bound {
            violations.push(MarginViolation { sigma: *sigma, margin });
        }
    }
    Ok(MarginBoundReport {
        bound,
        checked,
        violations,
    })
}

/// Finite-N slack ε = Φ(0) − Φ(−|T|), with
/// T = [κ(1−√(1−η)) − √(1−η)·m]/√η evaluated at m = 2‖G‖∞/√N.
pub fn fragility_tolerance(kappa: f64, eta: f64, margin_bound: f64) -> f64 {
    let shrink = (1.0 - eta).sqrt();
    let t = (kappa * (1.0 - shrink) - shrink * margin_bound) / eta.sqrt();
    0.5 - normal_cdf(-t.abs())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FragilityRecord {
    pub sigma: SpinConfig,
    pub tau: SpinConfig,
    pub distance: usize,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FragilityReport {
    pub k: usize,
    pub eta: f64,
    pub g_inf: f64,
    pub norm_event_holds: bool,
    /// Only defined for half-space constraints.
    pub epsilon: Option<f64>,
    /// 1/2 + ε + 1e−9
    pub threshold: Option<f64>,
    pub isolated: usize,
    pub records: Vec<FragilityRecord>,
    pub max_probability: f64,
    /// Indices into `records` above the threshold.
    pub exceedances: Vec<usize>,
}

impl FragilityReport {
    pub fn passed(&self) -> bool {
        self.exceedances.is_empty()
    }
}

/// Conditional feasibility of every τ within Hamming distance k of every
/// k-isolated σ, flagged against 1/2 + ε(N, η).
pub fn fragility_report(g: &DisorderInstance, s: &SolutionSet, k: usize, eta: f64) -> Result<FragilityReport> {
    fragility_report_with(g, s, k, eta, Execution::default())
}

pub fn fragility_report_with(
    g: &DisorderInstance,
    s: &SolutionSet,
    k: usize,
    eta: f64,
    exec: Execution,
) -> Result<FragilityReport> {
    check_eta(eta)?;
    let iso = classify_isolation(s, k)?;
    let g_inf = g.max_abs();
    let margin_bound = 2.0 * g_inf / (g.n() as f64).sqrt();
    let epsilon = match g.spec() {
        ConstraintSpec::HalfSpace { kappa } => Some(fragility_tolerance(*kappa, eta, margin_bound)),
        ConstraintSpec::IntervalUnion(_) => None,
    };
    let threshold = epsilon.map(|e| 0.5 + e + 1e-9);
    let per_sigma = par::map_slice(exec, &iso.isolated, |sigma| {
        hamming_ball(sigma, k)
            .into_iter()
            .map(|tau| FragilityRecord {
                sigma: *sigma,
                tau,
                distance: sigma.hamming_unchecked(&tau),
                probability: conditional_feasibility(g, &tau, eta).expect("validated"),
            })
            .collect::<Vec<_>>()
    });
    let records: Vec<FragilityRecord> = per_sigma.into_iter().flatten().collect();
    let max_probability = records.iter().map(|r| r.probability).fold(0.0, f64::max);
    let exceedances = match threshold {
        Some(t) => records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.probability > t)
            .map(|(i, _)| i)
            .collect(),
        None => Vec::new(),
    };
    Ok(FragilityReport {
        k,
        eta,
        g_inf,
        norm_event_holds: norm_event_holds(g),
        epsilon,
        threshold,
        isolated: iso.isolated.len(),
        records,
        max_probability,
        exceedances,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceEntry {
    pub a: usize,
    pub a2: usize,
    pub predicted: f64,
    pub empirical: f64,
    pub se: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceCheck {
    pub overlap: f64,
    pub samples: usize,
    pub entries: Vec<CovarianceEntry>,
}

impl CovarianceCheck {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }
}

pub const MIN_COVARIANCE_SAMPLES: usize = 10_000;

/// Empirical Cov(X_{τ,a}, X_{τ′,a′}) over fresh copies G′ against the
/// prediction η·q(τ,τ′)·1{a = a′}, each entry within 4 standard errors.
///
/// Sample `j` uses the stream `derive_seed(C.fresh.seed, TRIAL, j)`.
pub fn overlap_covariance_check(
    c: &CoupledInstance,
    tau: &SpinConfig,
    tau2: &SpinConfig,
    samples: usize,
    exec: Execution,
) -> Result<CovarianceCheck> {
    if samples < MIN_COVARIANCE_SAMPLES {
        return Err(Error::out_of_range("samples", samples, ">= 10000"));
    }
    let g = c.base();
    let q = tau.overlap(tau2)?;
    let f1 = g.fields(tau)?;
    let f2 = g.fields(tau2)?;
    let (m, n, eta) = (g.m(), g.n(), c.eta());
    let (shrink, sd) = ((1.0 - eta).sqrt(), eta.sqrt());
    let seed = c.fresh().seed();
    let draws: Vec<(Vec<f64>, Vec<f64>)> = par::map_indexed(exec, samples, |j| {
        let fresh = DisorderInstance::sample(n, m, derive_seed(seed, tag::TRIAL, j as u64), g.spec().clone())
            .expect("validated");
        let x1 = (0..m).map(|a| shrink * f1[a] + sd * fresh.field_unchecked(a, tau)).collect();
        let x2 = (0..m).map(|a| shrink * f2[a] + sd * fresh.field_unchecked(a, tau2)).collect();
        (x1, x2)
    });
    let ns = samples as f64;
    let mean1: Vec<f64> = (0..m).map(|a| kahan_sum(draws.iter().map(|d| d.0[a])) / ns).collect();
    let mean2: Vec<f64> = (0..m).map(|a| kahan_sum(draws.iter().map(|d| d.1[a])) / ns).collect();
    let mut entries = Vec::with_capacity(m * m);
    for a in 0..m {
        for a2 in 0..m {
            let prods: Vec<f64> = draws
                .iter()
                .map(|d| (d.0[a] - mean1[a]) * (d.1[a2] - mean2[a2]))
                .collect();
            let (mean, se) = crate::stats::mean_se(&prods);
            let empirical = mean * ns / (ns - 1.0);
            let predicted = if a == a2 { eta * q } else { 0.0 };
            entries.push(CovarianceEntry {
                a,
                a2,
                predicted,
                empirical,
                se,
                passed: (empirical - predicted).abs() <= 4.0 * se,
            });
        }
    }
    Ok(CovarianceCheck {
        overlap: q,
        samples,
        entries,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct JensenReport {
    pub trials: usize,
    /// Estimate of P[E] pooled over both members of each coupled pair.
    pub marginal: f64,
    /// Estimate of P[E(G) ∧ E(G̃)].
    pub joint: f64,
    /// Standard error of joint − marginal² (delta method).
    pub combined_se: f64,
    pub passed: bool,
}

/// P[E(G) ∧ E(G̃)] ≥ P[E]² − 4·SE, with the pair generated through the
/// shared-component representation G = √(1−λ)G₁ + √λG₂,
/// G̃ = √(1−λ)G₁ + √λG₃, λ = 1 − √(1−η).
#[allow(clippy::too_many_arguments)]
pub fn jensen_coupling_check<E>(
    n: usize,
    m: usize,
    spec: &ConstraintSpec,
    eta: f64,
    event: E,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<JensenReport>
where
    E: Fn(&DisorderInstance) -> bool + Sync + Send,
{
    check_eta(eta)?;
    if trials < 2 {
        return Err(Error::out_of_range("trials", trials, ">= 2"));
    }
    DisorderInstance::sample(n, m, 0, spec.clone())?;
    let lambda = 1.0 - (1.0 - eta).sqrt();
    let outcomes = par::map_indexed(exec, trials, |t| {
        let trial_seed = derive_seed(seed, tag::TRIAL, t as u64);
        let draw = |part: u64| {
            let mut v = vec![0.0; n * m];
            RandomStream::new(trial_seed, part).fill_normal(&mut v);
            v
        };
        let (shared, own1, own2) = (draw(1), draw(2), draw(3));
        let build = |own: &[f64]| {
            let mut e = vec![0.0; n * m];
            // λ plays the role of η in the mixing weights
            mix(&shared, own, lambda, &mut e);
            DisorderInstance::from_entries(n, m, trial_seed, spec.clone(), e).expect("finite")
        };
        (event(&build(&own1)), event(&build(&own2)))
    });
    let tn = trials as f64;
    let joint = outcomes.iter().filter(|(a, b)| *a && *b).count() as f64 / tn;
    let marginal = outcomes.iter().map(|(a, b)| (*a as u8 + *b as u8) as f64).sum::<f64>() / (2.0 * tn);
    let influence: Vec<f64> = outcomes
        .iter()
        .map(|(a, b)| {
            let j = (*a && *b) as u8 as f64;
            let y = (*a as u8 + *b as u8) as f64 / 2.0;
            j - 2.0 * marginal * y
        })
        .collect();
    let (_, combined_se) = crate::stats::mean_se(&influence);
    Ok(JensenReport {
        trials,
        marginal,
        joint,
        combined_se,
        passed: joint >= marginal * marginal - 4.0 * combined_se,
    })
}
