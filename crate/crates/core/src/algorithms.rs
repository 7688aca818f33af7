//! Algorithms mapping (G, ω) to a point of ℝ^N, and the empirical stability,
//! success and noise-sensitivity measurements run on them.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::coupling::{check_eta, mix};
use crate::enumerate::{candidate_set, enumerate_solutions, SolutionSet};
use crate::error::{Error, Result};
use crate::model::{ConstraintSpec, DisorderInstance, SpinConfig};
use crate::par::{self, Execution};
use crate::partition::high_success_rate;
use crate::rng::{derive_seed, tag, RandomStream};
use crate::stats::{kahan_sum, mean_se, quantile_sorted, Proportion};

/// A possibly randomized algorithm; ω is its only source of randomness.
pub trait Algorithm: Send + Sync {
    fn id(&self) -> &str;
    fn run(&self, g: &DisorderInstance, omega: u64) -> Vec<f64>;
}

/// Coordinatewise projection onto [−1, 1].
pub fn clip(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.clamp(-1.0, 1.0)).collect()
}

/// Output of the column-sign rule.
#[derive(Clone, Debug, PartialEq)]
pub struct MajorityOutput {
    pub output: Vec<f64>,
    /// M = 0, so every column sum is zero and the output is all +1.
    pub degenerate: bool,
}

/// x_i = sign(Σ_a g^a_i) with sign(0) = +1.
pub fn run_majority(g: &DisorderInstance) -> MajorityOutput {
    let output = (0..g.n())
        .map(|i| {
            let s: f64 = (0..g.m()).map(|a| g.entry(a, i)).sum();
            if s >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    MajorityOutput {
        output,
        degenerate: g.m() == 0,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepairStep {
    pub constraint: usize,
    pub coordinate: usize,
    pub margin_before: f64,
    pub margin_after: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepairOutcome {
    pub config: SpinConfig,
    pub steps: Vec<RepairStep>,
    pub feasible: bool,
    /// Stopped because no single flip improves the targeted constraint.
    pub stuck: bool,
}

/// Repeatedly pick the most violated constraint (lowest index on ties) and flip
/// the coordinate that most increases its slack (lowest index on ties),
/// stopping when feasible, stuck, or after `max_iters` flips.
pub fn greedy_repair_from(g: &DisorderInstance, start: SpinConfig, max_iters: usize) -> Result<RepairOutcome> {
    let mut fields = g.fields(&start)?;
    let mut sigma = start;
    let spec = g.spec();
    let scale = 1.0 / (g.n() as f64).sqrt();
    let mut steps = Vec::new();
    let mut stuck = false;
    while steps.len() < max_iters {
        let (target, worst) = fields
            .iter()
            .map(|&f| spec.constraint_margin(f))
            .enumerate()
            .fold((usize::MAX, f64::INFINITY), |acc, (a, m)| if m < acc.1 { (a, m) } else { acc });
        if target == usize::MAX || worst >= 0.0 {
            break;
        }
        let row = g.row(target);
        let (coord, best) = (0..g.n())
            .map(|i| spec.constraint_margin(fields[target] - 2.0 * row[i] * sigma.spin(i) * scale))
            .enumerate()
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, (i, m)| if m > acc.1 { (i, m) } else { acc });
        if !(best > worst) {
            stuck = true;
            break;
        }
        let s = sigma.spin(coord);
        for (a, f) in fields.iter_mut().enumerate() {
            *f -= 2.0 * g.entry(a, coord) * s * scale;
        }
        fields[target] = g.field_unchecked(target, &sigma.flip(coord));
        sigma = sigma.flip(coord);
        steps.push(RepairStep {
            constraint: target,
            coordinate: coord,
            margin_before: worst,
            margin_after: spec.constraint_margin(fields[target]),
        });
    }
    Ok(RepairOutcome {
        config: sigma,
        feasible: g.is_solution_unchecked(&sigma),
        steps,
        stuck,
    })
}

/// Majority start with each bit flipped independently with probability
/// `flip_prob` from ω's stream.
pub fn perturbed_majority(g: &DisorderInstance, omega: u64, flip_prob: f64) -> SpinConfig {
    let mut rs = RandomStream::derived(omega, tag::PERTURB, 0);
    let maj = SpinConfig::from_signs(&run_majority(g).output).expect("N is valid for an instance");
    let mask = (0..g.n()).fold(0u32, |acc, i| if rs.bernoulli(flip_prob) { acc | 1 << i } else { acc });
    maj.flip_mask(mask)
}

pub fn run_greedy_repair(g: &DisorderInstance, omega: u64, max_iters: usize) -> Vec<f64> {
    let start = perturbed_majority(g, omega, GreedyRepair::FLIP_PROB);
    greedy_repair_from(g, start, max_iters)
        .expect("start has the instance's N")
        .config
        .spins()
}

pub struct Majority;

impl Algorithm for Majority {
    fn id(&self) -> &str {
        "majority"
    }

    fn run(&self, g: &DisorderInstance, _omega: u64) -> Vec<f64> {
        run_majority(g).output
    }
}

pub struct GreedyRepair {
    pub max_iters: usize,
}

impl GreedyRepair {
    pub const FLIP_PROB: f64 = 0.05;
}

impl Algorithm for GreedyRepair {
    fn id(&self) -> &str {
        "greedy-repair"
    }

    fn run(&self, g: &DisorderInstance, omega: u64) -> Vec<f64> {
        run_greedy_repair(g, omega, self.max_iters)
    }
}

/// Outputs the same value in every coordinate.
pub struct Constant {
    pub id: String,
    pub value: f64,
}

impl Algorithm for Constant {
    fn id(&self) -> &str {
        &self.id
    }

    fn run(&self, g: &DisorderInstance, _omega: u64) -> Vec<f64> {
        vec![self.value; g.n()]
    }
}

/// clip(g¹): the first pattern projected onto the cube; zero when M = 0.
pub struct FirstRow;

impl Algorithm for FirstRow {
    fn id(&self) -> &str {
        "first-row"
    }

    fn run(&self, g: &DisorderInstance, _omega: u64) -> Vec<f64> {
        if g.m() == 0 {
            return vec![0.0; g.n()];
        }
        clip(g.row(0))
    }
}

/// Uniform random signs drawn from ω alone.
pub struct OmegaSigns;

impl Algorithm for OmegaSigns {
    fn id(&self) -> &str {
        "omega-signs"
    }

    fn run(&self, g: &DisorderInstance, omega: u64) -> Vec<f64> {
        let mut rs = RandomStream::derived(omega, tag::OMEGA, 0);
        (0..g.n()).map(|_| if rs.bernoulli(0.5) { 1.0 } else { -1.0 }).collect()
    }
}

/// Wraps an algorithm and clips its output.
pub struct Clipped<A>(pub A);

impl<A: Algorithm> Algorithm for Clipped<A> {
    fn id(&self) -> &str {
        self.0.id()
    }

    fn run(&self, g: &DisorderInstance, omega: u64) -> Vec<f64> {
        clip(&self.0.run(g, omega))
    }
}

/// Algorithms looked up by string id.
#[derive(Clone, Default)]
pub struct AlgorithmRegistry {
    map: BTreeMap<String, Arc<dyn Algorithm>>,
}

impl AlgorithmRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        r.register(Arc::new(Majority));
        r.register(Arc::new(GreedyRepair { max_iters: 200 }));
        r.register(Arc::new(Constant {
            id: "zero".into(),
            value: 0.0,
        }));
        r.register(Arc::new(Constant {
            id: "plus-ones".into(),
            value: 1.0,
        }));
        r.register(Arc::new(FirstRow));
        r.register(Arc::new(OmegaSigns));
        r
    }

    pub fn register(&mut self, alg: Arc<dyn Algorithm>) {
        self.map.insert(alg.id().to_string(), alg);
    }

    pub fn get(&self, id: &str) -> Result<Arc<dyn Algorithm>> {
        self.map.get(id).cloned().ok_or_else(|| Error::UnknownAlgorithm(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }
}

/// Seeds of the `t`-th trial: (G, G′, ω).
fn trial_seeds(seed: u64, t: usize) -> (u64, u64, u64) {
    let t = t as u64;
    (
        derive_seed(seed, tag::DISORDER, t),
        derive_seed(seed, tag::FRESH, t),
        derive_seed(seed, tag::OMEGA, t),
    )
}

fn l2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub const STABILITY_QUANTILES: [f64; 5] = [0.5, 0.9, 0.95, 0.99, 1.0];
pub const MIN_STABILITY_TRIALS: usize = 100;

/// Distribution of ‖A(G, ω) − A(G̃, ω)‖₂ over independent trials.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub algorithm: String,
    pub n: usize,
    pub m: usize,
    pub eta: f64,
    /// Per trial, in trial order.
    pub distances: Vec<f64>,
    pub mean_sq: f64,
    pub mean_sq_se: f64,
    pub quantiles: Vec<(f64, f64)>,
    /// (ρ, fraction of trials with distance > ρ).
    pub curve: Vec<(f64, f64)>,
}

/// Tail fraction P̂[distance > ρ] for each ρ.
pub fn stability_curve(distances: &[f64], rhos: &[f64]) -> Vec<(f64, f64)> {
    let n = distances.len().max(1) as f64;
    rhos.iter()
        .map(|&r| (r, distances.iter().filter(|&&d| d > r).count() as f64 / n))
        .collect()
}

/// Default ρ grid: 21 evenly spaced points from 0 to the largest distance,
/// or just ρ = 0 when every distance is 0.
pub fn default_rho_grid(distances: &[f64]) -> Vec<f64> {
    let max = distances.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return vec![0.0];
    }
    (0..=20).map(|i| max * i as f64 / 20.0).collect()
}

#[allow(clippy::too_many_arguments)]
pub fn measure_stability(
    alg: &dyn Algorithm,
    n: usize,
    m: usize,
    spec: &ConstraintSpec,
    eta: f64,
    trials: usize,
    seed: u64,
    rhos: Option<&[f64]>,
    exec: Execution,
) -> Result<StabilityReport> {
    check_eta(eta)?;
    if trials < MIN_STABILITY_TRIALS {
        return Err(Error::out_of_range("trials", trials, ">= 100"));
    }
    DisorderInstance::sample(n, 0, 0, spec.clone())?;
    let distances = par::map_indexed(exec, trials, |t| {
        let (gs, fs, omega) = trial_seeds(seed, t);
        let g = DisorderInstance::sample(n, m, gs, spec.clone()).expect("dimension validated");
        let fresh = DisorderInstance::sample(n, m, fs, spec.clone()).expect("dimension validated");
        let mut tilde = vec![0.0; n * m];
        mix(g.entries(), fresh.entries(), eta, &mut tilde);
        let gt = DisorderInstance::from_entries(n, m, fs, spec.clone(), tilde).expect("finite mixture");
        l2(&alg.run(&g, omega), &alg.run(&gt, omega))
    });
    let sq: Vec<f64> = distances.iter().map(|d| d * d).collect();
    let (mean_sq, mean_sq_se) = mean_se(&sq);
    let mut sorted = distances.clone();
    sorted.sort_by(f64::total_cmp);
    let quantiles = STABILITY_QUANTILES.iter().map(|&q| (q, quantile_sorted(&sorted, q))).collect();
    let grid = match rhos {
        Some(r) => r.to_vec(),
        None => default_rho_grid(&distances),
    };
    Ok(StabilityReport {
        algorithm: alg.id().to_string(),
        n,
        m,
        eta,
        curve: stability_curve(&distances, &grid),
        distances,
        mean_sq,
        mean_sq_se,
        quantiles,
    })
}

/// How the isolation scale and success radius are set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SuccessScale {
    /// k-isolation, radius √k/3.
    K(usize),
    /// k = ⌊ιN⌋, radius √(ιN)/3.
    Iota(f64),
}

impl SuccessScale {
    /// (k, radius) for dimension `n`.
    pub fn resolve(&self, n: usize) -> Result<(usize, f64)> {
        let (k, r) = match *self {
            SuccessScale::K(k) => (k, (k as f64).sqrt() / 3.0),
            SuccessScale::Iota(iota) => {
                if !(iota > 0.0 && iota <= 1.0) {
                    return Err(Error::out_of_range("iota", iota, "0 < iota <= 1"));
                }
                ((iota * n as f64).floor() as usize, (iota * n as f64).sqrt() / 3.0)
            }
        };
        if k < 1 || k > n {
            return Err(Error::out_of_range("k", k, "1 <= k <= N"));
        }
        Ok((k, r))
    }
}

pub const SUCCESS_LIMIT: usize = 24;

/// Nearest solution and nearest k-isolated solution of `s` within `radius`
/// of `x`. Anything closer than `radius` lies in the candidate set, so the
/// distances are exact whenever they are reported.
pub fn nearest_within_radius(s: &SolutionSet, x: &[f64], k: usize, radius: f64) -> Result<NearbySolutions> {
    let mut out = NearbySolutions::default();
    for tau in candidate_set(x, radius)? {
        if let Some(idx) = s.index_of(&tau) {
            let d = l2(x, &tau.spins());
            let better = |cur: &Option<(SpinConfig, f64)>| cur.is_none_or(|(_, c)| d < c);
            if better(&out.solution) {
                out.solution = Some((tau, d));
            }
            if s.nearest_within(idx, k).is_none() && better(&out.isolated) {
                out.isolated = Some((tau, d));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NearbySolutions {
    pub solution: Option<(SpinConfig, f64)>,
    pub isolated: Option<(SpinConfig, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuccessTrial {
    pub solutions: usize,
    /// Distance to S(G) when it is within the radius.
    pub dist_solution: Option<f64>,
    /// Distance to the k-isolated solutions when within the radius.
    pub dist_isolated: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuccessReport {
    pub algorithm: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub radius: f64,
    pub trials: Vec<SuccessTrial>,
    pub located: Proportion,
    pub located_isolated: Proportion,
    /// 1 − P̂[located].
    pub delta_hat: f64,
    /// The isolated-success ceiling at δ̂.
    pub rate_bound: f64,
}

/// Estimate P[dist(A(G,ω), S) ≤ r] and P[dist(A(G,ω), S°_k) ≤ r] against
/// exhaustive enumeration of every trial instance.
#[allow(clippy::too_many_arguments)]
pub fn measure_success(
    alg: &dyn Algorithm,
    n: usize,
    m: usize,
    spec: &ConstraintSpec,
    scale: SuccessScale,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<SuccessReport> {
    if n > SUCCESS_LIMIT {
        return Err(Error::Capacity { n, limit: SUCCESS_LIMIT });
    }
    if trials < MIN_STABILITY_TRIALS {
        return Err(Error::out_of_range("trials", trials, ">= 100"));
    }
    DisorderInstance::sample(n, 0, 0, spec.clone())?;
    let (k, radius) = scale.resolve(n)?;
    let per_trial = par::map_indexed(exec, trials, |t| -> Result<SuccessTrial> {
        let (gs, _, omega) = trial_seeds(seed, t);
        let g = DisorderInstance::sample(n, m, gs, spec.clone())?;
        let x = alg.run(&g, omega);
        if x.len() != n {
            return Err(Error::Dimension(format!("algorithm returned {} coordinates for N = {n}", x.len())));
        }
        let s = enumerate_solutions(&g)?;
        let near = nearest_within_radius(&s, &x, k, radius)?;
        Ok(SuccessTrial {
            solutions: s.len(),
            dist_solution: near.solution.map(|p| p.1),
            dist_isolated: near.isolated.map(|p| p.1),
        })
    });
    let per_trial: Vec<SuccessTrial> = per_trial.into_iter().collect::<Result<_>>()?;
    let located = Proportion::from_flags(per_trial.iter().map(|t| t.dist_solution.is_some()));
    let located_isolated = Proportion::from_flags(per_trial.iter().map(|t| t.dist_isolated.is_some()));
    debug_assert!(per_trial.iter().all(|t| t.dist_isolated.is_none() || t.dist_solution.is_some()));
    let delta_hat = 1.0 - located.p();
    Ok(SuccessReport {
        algorithm: alg.id().to_string(),
        n,
        m,
        k,
        radius,
        trials: per_trial,
        located,
        located_isolated,
        delta_hat,
        rate_bound: high_success_rate(delta_hat),
    })
}

/// coef · Π_{v ∈ vars} G_v, with G indexed row-major (a·N + i).
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub vars: Vec<usize>,
}

/// Samples of the second moment used to estimate C.
pub const MOMENT_SAMPLES: usize = 10_000;
/// Inflation applied to an estimated C.
pub const MOMENT_INFLATION: f64 = 1.2;

/// A vector of polynomials in the entries of G, one per output coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialOutput {
    n: usize,
    m: usize,
    coords: Vec<Vec<Monomial>>,
}

impl PolynomialOutput {
    pub fn new(n: usize, m: usize, coords: Vec<Vec<Monomial>>) -> Result<Self> {
        if coords.len() != n {
            return Err(Error::Dimension(format!("{} coordinate polynomials for N = {n}", coords.len())));
        }
        for mono in coords.iter().flatten() {
            if let Some(v) = mono.vars.iter().find(|&&v| v >= n * m) {
                return Err(Error::Dimension(format!("variable {v} out of range for a {m}x{n} matrix")));
            }
            if !mono.coef.is_finite() {
                return Err(Error::Precondition("monomial coefficient must be finite".into()));
            }
        }
        Ok(Self { n, m, coords })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn coords(&self) -> &[Vec<Monomial>] {
        &self.coords
    }

    pub fn degree(&self) -> usize {
        self.coords.iter().flatten().map(|m| m.vars.len()).max().unwrap_or(0)
    }

    pub fn evaluate(&self, entries: &[f64]) -> Vec<f64> {
        self.coords
            .iter()
            .map(|poly| {
                poly.iter()
                    .map(|mono| mono.coef * mono.vars.iter().map(|&v| entries[v]).product::<f64>())
                    .sum()
            })
            .collect()
    }

    /// Per coordinate, the constant term and the merged linear coefficients;
    /// `None` if some monomial has degree ≥ 2.
    fn affine_parts(&self) -> Option<Vec<(f64, BTreeMap<usize, f64>)>> {
        self.coords
            .iter()
            .map(|poly| {
                let mut c0 = 0.0;
                let mut lin = BTreeMap::new();
                for mono in poly {
                    match mono.vars.as_slice() {
                        [] => c0 += mono.coef,
                        [v] => *lin.entry(*v).or_insert(0.0) += mono.coef,
                        _ => return None,
                    }
                }
                Some((c0, lin))
            })
            .collect()
    }

    /// Exact E‖f(G)‖² for degree ≤ 1.
    pub fn exact_second_moment(&self) -> Option<f64> {
        self.affine_parts().map(|parts| {
            parts
                .iter()
                .map(|(c0, lin)| c0 * c0 + lin.values().map(|c| c * c).sum::<f64>())
                .sum()
        })
    }

    /// Monte Carlo E‖f(G)‖²/N over `samples` draws, sample `j` from
    /// `derive_seed(seed, SETUP, j)`.
    pub fn estimate_moment(&self, samples: usize, seed: u64, exec: Execution) -> (f64, f64) {
        let vals = par::map_indexed(exec, samples, |j| {
            let mut e = vec![0.0; self.n * self.m];
            RandomStream::derived(seed, tag::SETUP, j as u64).fill_normal(&mut e);
            self.evaluate(&e).iter().map(|y| y * y).sum::<f64>() / self.n as f64
        });
        mean_se(&vals)
    }
}

impl Algorithm for PolynomialOutput {
    fn id(&self) -> &str {
        "polynomial"
    }

    fn run(&self, g: &DisorderInstance, _omega: u64) -> Vec<f64> {
        self.evaluate(g.entries())
    }
}

/// Random polynomial of degree exactly `degree` (for `degree ≥ 1` and M ≥ 1):
/// each coordinate gets `terms` monomials of random degree 0..=degree and
/// coordinate 0's first monomial has full degree.
pub fn random_polynomial(n: usize, m: usize, degree: usize, terms: usize, seed: u64) -> Result<PolynomialOutput> {
    if n * m == 0 && degree > 0 {
        return Err(Error::Precondition("a polynomial of positive degree needs M >= 1".into()));
    }
    let mut rs = RandomStream::derived(seed, tag::SETUP, u64::MAX);
    let scale = 1.0 / (terms.max(1) as f64).sqrt();
    let coords = (0..n)
        .map(|i| {
            (0..terms)
                .map(|t| {
                    let d = if i == 0 && t == 0 { degree } else { rs.below(degree as u64 + 1) as usize };
                    let vars = (0..d).map(|_| rs.below((n * m) as u64) as usize).collect();
                    Monomial {
                        coef: scale * rs.next_normal(),
                        vars,
                    }
                })
                .collect()
        })
        .collect();
    PolynomialOutput::new(n, m, coords)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SensitivityMode {
    /// Closed form, degree ≤ 1 only.
    Exact,
    MonteCarlo { trials: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSensitivityReport {
    pub degree: usize,
    pub eta: f64,
    /// Normalized second moment E‖f‖²/N used in the bound.
    pub c: f64,
    /// `c` is a Monte Carlo estimate inflated by 1.2.
    pub c_estimated: bool,
    /// E‖f(G) − f(G̃)‖².
    pub measured: f64,
    pub se: f64,
    /// 2·C·D·η·N.
    pub bound: f64,
    /// Same quantity after clipping, Monte Carlo mode only.
    pub clipped: Option<f64>,
    /// Clipped distance ≤ unclipped distance in every trial.
    pub clipped_dominated: bool,
    pub passed: bool,
    pub hard_failure: bool,
}

/// E‖f(G) − f(G̃)‖² against the bound 2·C·D·η·N.
///
/// `c` overrides the second moment; otherwise it is exact for degree ≤ 1
/// and estimated from 10⁴ samples (×1.2) for higher degree.
pub fn poly_noise_sensitivity(
    p: &PolynomialOutput,
    eta: f64,
    mode: SensitivityMode,
    c: Option<f64>,
    exec: Execution,
) -> Result<NoiseSensitivityReport> {
    check_eta(eta)?;
    let degree = p.degree();
    let (c, c_estimated) = match (c, p.exact_second_moment()) {
        (Some(c), _) => (c, false),
        (None, Some(m2)) => (m2 / p.n() as f64, false),
        (None, None) => {
            let seed = match mode {
                SensitivityMode::MonteCarlo { seed, .. } => seed,
                SensitivityMode::Exact => 0,
            };
            (p.estimate_moment(MOMENT_SAMPLES, seed, exec).0 * MOMENT_INFLATION, true)
        }
    };
    let bound = 2.0 * c * degree as f64 * eta * p.n() as f64;
    let (measured, se, clipped, clipped_dominated) = match mode {
        SensitivityMode::Exact => {
            let parts = p
                .affine_parts()
                .ok_or_else(|| Error::Precondition("exact noise sensitivity needs degree <= 1".into()))?;
            let lin_sq: f64 = parts.iter().map(|(_, lin)| lin.values().map(|c| c * c).sum::<f64>()).sum();
            (2.0 * (1.0 - (1.0 - eta).sqrt()) * lin_sq, 0.0, None, true)
        }
        SensitivityMode::MonteCarlo { trials, seed } => {
            if trials < 2 {
                return Err(Error::out_of_range("trials", trials, ">= 2"));
            }
            let len = p.n() * p.m();
            let pairs = par::map_indexed(exec, trials, |t| {
                let (gs, fs, _) = trial_seeds(seed, t);
                let (mut g, mut fresh, mut tilde) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
                RandomStream::new(gs, 0).fill_normal(&mut g);
                RandomStream::new(fs, 0).fill_normal(&mut fresh);
                mix(&g, &fresh, eta, &mut tilde);
                let (y, yt) = (p.evaluate(&g), p.evaluate(&tilde));
                let raw: f64 = y.iter().zip(&yt).map(|(a, b)| (a - b) * (a - b)).sum();
                let clipped: f64 = clip(&y).iter().zip(clip(&yt)).map(|(a, b)| (a - b) * (a - b)).sum();
                (raw, clipped)
            });
            let raw: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let (mean, se) = mean_se(&raw);
            let clipped = kahan_sum(pairs.iter().map(|p| p.1)) / trials as f64;
            let dominated = pairs.iter().all(|&(r, c)| c <= r + 1e-12 * (1.0 + r));
            (mean, se, Some(clipped), dominated)
        }
    };
    Ok(NoiseSensitivityReport {
        degree,
        eta,
        c,
        c_estimated,
        measured,
        se,
        bound,
        clipped,
        clipped_dominated,
        passed: measured <= bound + 3.0 * se + 1e-12 * bound.max(1.0) && clipped_dominated,
        hard_failure: measured > bound + 5.0 * se + 1e-12 * bound.max(1.0),
    })
}
