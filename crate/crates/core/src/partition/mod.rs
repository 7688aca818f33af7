//! Balanced two-way partitions of nonnegative weights, the Gaussian
//! correlation check, the interval-union active-side analysis and the
//! end-to-end finite-N pipeline built on them.

mod active_side;
mod pipeline;
mod pitt;

pub use active_side::{active_side_analysis, default_active_threshold, ActiveSideReport, Endpoint, Side};
pub use pipeline::{
    hardness_pipeline, hardness_pipeline_with, PartitionSource, PipelineConfig, PipelineReport, Verdict,
    VerdictStatus, PIPELINE_LIMIT,
};
pub use pitt::{
    pitt_check, psd_cholesky, random_pitt_setup, repair_covariance, setup_seed, Monotonicity, PittEstimate, PittSetup,
    ThresholdEvent,
};

use crate::error::{Error, Result};

/// Relative slack applied to every weight-sum comparison, absorbing the
/// rounding of sequential prefix sums.
pub const SUM_SLACK: f64 = 1e-12;

/// Nonnegative weights with their cached total.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    p: Vec<f64>,
    total: f64,
}

impl WeightVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(i) = p.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Precondition(format!("weight {i} = {} is not a finite nonnegative number", p[i])));
        }
        let total = p.iter().sum();
        Ok(Self { p, total })
    }

    pub fn weights(&self) -> &[f64] {
        &self.p
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.p.iter().copied().fold(0.0, f64::max)
    }

    fn sum_of(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.p[i]).sum()
    }

    /// Smallest `j` with p_0 + … + p_j ≥ target (within slack).
    fn first_reaching(&self, target: f64) -> Option<(usize, f64)> {
        let tol = SUM_SLACK * self.total;
        let mut prefix = 0.0;
        for (j, x) in self.p.iter().enumerate() {
            prefix += x;
            if prefix >= target - tol {
                return Some((j, prefix));
            }
        }
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionCase {
    /// C₁ is the prefix up to and including the item that crosses R/3.
    Prefix,
    /// The crossing item alone is already heavier than R/3 and forms C₁.
    HeavyItem,
    /// Prefix up to the item that crosses 0.49R.
    HalvesPrefix,
}

/// A split of the index set into C₁ ⊔ C₂.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionResult {
    pub c1: Vec<usize>,
    pub c2: Vec<usize>,
    pub sum1: f64,
    pub sum2: f64,
    pub case: PartitionCase,
}

impl PartitionResult {
    fn build(w: &WeightVector, c1: Vec<usize>, case: PartitionCase) -> Self {
        let mut in1 = vec![false; w.len()];
        c1.iter().for_each(|&i| in1[i] = true);
        let c2: Vec<usize> = (0..w.len()).filter(|&i| !in1[i]).collect();
        Self {
            sum1: w.sum_of(&c1),
            sum2: w.sum_of(&c2),
            c1,
            c2,
            case,
        }
    }
}

/// Greedy split with both sides at least R/3, hence product ≥ 2R²/9.
///
/// Requires R ≥ 0.8 and max p ≤ 0.51. Items are taken in input order until
/// the prefix first reaches R/3; if that prefix is still ≤ 2R/3 it becomes
/// C₁, otherwise the crossing item alone does.
pub fn partition_thirds(w: &WeightVector) -> Result<PartitionResult> {
    let r = w.total();
    if r < 0.8 - SUM_SLACK {
        return Err(Error::Precondition(format!("total weight {r} is below 0.8")));
    }
    let max = w.max();
    if max > 0.51 + SUM_SLACK {
        return Err(Error::Precondition(format!("largest weight {max} exceeds 0.51")));
    }
    let (j, prefix) = w.first_reaching(r / 3.0).expect("the full prefix reaches R/3");
    if prefix <= 2.0 * r / 3.0 + SUM_SLACK * r {
        Ok(PartitionResult::build(w, (0..=j).collect(), PartitionCase::Prefix))
    } else {
        Ok(PartitionResult::build(w, vec![j], PartitionCase::HeavyItem))
    }
}

/// Greedy split with both sides at least 0.49R. Requires R > 0 and
/// max p ≤ R/100.
pub fn partition_halves(w: &WeightVector) -> Result<PartitionResult> {
    let r = w.total();
    if !(r > 0.0) {
        return Err(Error::Precondition("total weight must be positive".into()));
    }
    let max = w.max();
    if max > r / 100.0 * (1.0 + SUM_SLACK) {
        return Err(Error::Precondition(format!("largest weight {max} exceeds R/100 = {}", r / 100.0)));
    }
    let (j, _) = w.first_reaching(0.49 * r).expect("the full prefix reaches 0.49R");
    Ok(PartitionResult::build(w, (0..=j).collect(), PartitionCase::HalvesPrefix))
}

/// The positive root of 2s²/9 + s − 1 = 0, i.e. (3√17 − 9)/4 ≈ 0.8423292249.
pub fn bound_root() -> f64 {
    // s = (−b + √(b² − 4ac)) / 2a with a = 2/9, b = 1, c = −1
    (3.0 * 17f64.sqrt() - 9.0) / 4.0
}

/// min{√500·δ^{1/4}, 40^{1/4}·δ^{1/8}}: the ceiling on isolated-solution
/// success for a stable algorithm that locates some solution with
/// probability 1 − δ.
pub fn high_success_rate(delta: f64) -> f64 {
    let d = delta.clamp(0.0, 1.0);
    (500f64.sqrt() * d.powf(0.25)).min(40f64.powf(0.25) * d.powf(0.125))
}
