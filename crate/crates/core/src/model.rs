//! Disorder, spin configurations, constraint families, fields and margins.

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::stats::{normal_interval, normal_sf};

/// Largest supported dimension: a configuration fits in one `u32`.
pub const MAX_N: usize = 32;

#[inline]
pub(crate) fn low_mask(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

/// A point of {−1,+1}^N; bit `i` set means σ_i = +1.
///
/// Ordering is by encoding, which is the order used by every sorted
/// configuration list in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfig {
    bits: u32,
    n: u8,
}

impl SpinConfig {
    pub fn new(bits: u32, n: usize) -> Result<Self> {
        check_dimension(n)?;
        if bits & !low_mask(n) != 0 {
            return Err(Error::Dimension(format!(
                "encoding {bits:#x} has bits above position {n}"
            )));
        }
        Ok(Self { bits, n: n as u8 })
    }

    /// Caller guarantees `1 <= n <= 32` and no stray high bits.
    #[inline]
    pub(crate) fn from_raw(bits: u32, n: usize) -> Self {
        debug_assert!((1..=MAX_N).contains(&n) && bits & !low_mask(n) == 0);
        Self { bits, n: n as u8 }
    }

    pub fn all_plus(n: usize) -> Result<Self> {
        Self::new(low_mask(n), n)
    }

    /// From a slice of ±1 values; any value `>= 0` maps to +1.
    pub fn from_signs(signs: &[f64]) -> Result<Self> {
        check_dimension(signs.len())?;
        let bits = signs
            .iter()
            .enumerate()
            .fold(0u32, |acc, (i, &s)| if s >= 0.0 { acc | (1 << i) } else { acc });
        Ok(Self::from_raw(bits, signs.len()))
    }

    #[inline]
    pub fn bits(&self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn spin(&self, i: usize) -> f64 {
        if self.bits >> i & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn spins(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.spin(i)).collect()
    }

    #[inline]
    pub fn flip(&self, i: usize) -> Self {
        Self::from_raw(self.bits ^ (1 << i), self.n())
    }

    #[inline]
    pub fn flip_mask(&self, mask: u32) -> Self {
        Self::from_raw(self.bits ^ (mask & low_mask(self.n())), self.n())
    }

    /// −σ.
    pub fn negate(&self) -> Self {
        self.flip_mask(u32::MAX)
    }

    pub fn hamming(&self, other: &SpinConfig) -> Result<usize> {
        same_n(self, other)?;
        Ok(self.hamming_unchecked(other))
    }

    #[inline]
    pub(crate) fn hamming_unchecked(&self, other: &SpinConfig) -> usize {
        (self.bits ^ other.bits).count_ones() as usize
    }

    /// ‖σ − τ‖₂², which is exactly 4·d_H(σ, τ).
    pub fn l2_sq(&self, other: &SpinConfig) -> Result<f64> {
        Ok(4.0 * self.hamming(other)? as f64)
    }

    /// q(σ, τ) = (1/N) Σ σ_i τ_i = 1 − 2 d_H / N.
    pub fn overlap(&self, other: &SpinConfig) -> Result<f64> {
        Ok(1.0 - 2.0 * self.hamming(other)? as f64 / self.n() as f64)
    }
}

pub fn hamming(sigma: &SpinConfig, tau: &SpinConfig) -> Result<usize> {
    sigma.hamming(tau)
}

pub fn l2_sq(sigma: &SpinConfig, tau: &SpinConfig) -> Result<f64> {
    sigma.l2_sq(tau)
}

fn same_n(a: &SpinConfig, b: &SpinConfig) -> Result<()> {
    if a.n != b.n {
        return Err(Error::Dimension(format!(
            "configurations of length {} and {}",
            a.n, b.n
        )));
    }
    Ok(())
}

pub(crate) fn check_dimension(n: usize) -> Result<()> {
    if n == 0 || n > MAX_N {
        return Err(Error::Dimension(format!("N = {n} must lie in [1, {MAX_N}]")));
    }
    Ok(())
}

/// Iterator over all `n`-bit masks with exactly `w` bits set, in increasing
/// numeric order (Gosper's hack).
pub fn masks_of_weight(n: usize, w: usize) -> impl Iterator<Item = u32> {
    let limit: u64 = 1u64 << n;
    let mut next: Option<u64> = if w > n {
        None
    } else if w == 0 {
        Some(0)
    } else {
        Some((1u64 << w) - 1)
    };
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 {
            None
        } else {
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            let nx = (((r ^ cur) >> 2) / c) | r;
            (nx < limit).then_some(nx)
        };
        Some(cur as u32)
    })
}

/// All configurations within Hamming distance `radius` of `center`, ordered by
/// distance and then by mask.
pub fn hamming_ball(center: &SpinConfig, radius: usize) -> Vec<SpinConfig> {
    let n = center.n();
    (0..=radius.min(n))
        .flat_map(|w| masks_of_weight(n, w))
        .map(|mask| center.flip_mask(mask))
        .collect()
}

/// A union of disjoint closed intervals `[a_1,b_1] ∪ … ∪ [a_L,b_L]` with
/// `a_1 < b_1 < a_2 < … < b_L`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Spec("an interval union needs at least one interval".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for (idx, &(a, b)) in intervals.iter().enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::Spec(format!("interval {idx} has a non-finite endpoint")));
            }
            if !(a < b) {
                return Err(Error::Spec(format!("interval {idx}: need a < b, got [{a}, {b}]")));
            }
            if !(prev < a) {
                return Err(Error::Spec(format!(
                    "interval {idx} starts at {a}, not strictly after the previous endpoint {prev}"
                )));
            }
            prev = b;
        }
        Ok(Self { intervals })
    }

    /// The symmetric slab [−κ, κ].
    pub fn symmetric(kappa: f64) -> Result<Self> {
        Self::new(vec![(-kappa, kappa)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= x && x <= b)
    }

    /// Index of the interval containing `x`.
    pub fn locate(&self, x: f64) -> Option<usize> {
        self.intervals.iter().position(|&(a, b)| a <= x && x <= b)
    }

    /// dist(x, ℝ∖𝒰) inside 𝒰, −dist(x, 𝒰) outside.
    pub fn signed_margin(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(i) => {
                let (a, b) = self.intervals[i];
                (x - a).min(b - x)
            }
            None => -self
                .intervals
                .iter()
                .map(|&(a, b)| (a - x).max(x - b))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// The per-constraint feasible region shared by all rows.
#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintSpec {
    /// field ≥ κ
    HalfSpace { kappa: f64 },
    /// field ∈ 𝒰
    IntervalUnion(IntervalUnion),
}

impl ConstraintSpec {
    pub fn half_space(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::Spec(format!("kappa must be finite, got {kappa}")));
        }
        Ok(ConstraintSpec::HalfSpace { kappa })
    }

    /// Symmetric binary perceptron: |field| ≤ κ.
    pub fn symmetric(kappa: f64) -> Result<Self> {
        Ok(ConstraintSpec::IntervalUnion(IntervalUnion::symmetric(kappa)?))
    }

    pub fn intervals(intervals: Vec<(f64, f64)>) -> Result<Self> {
        Ok(ConstraintSpec::IntervalUnion(IntervalUnion::new(intervals)?))
    }

    #[inline]
    pub fn contains(&self, field: f64) -> bool {
        match self {
            ConstraintSpec::HalfSpace { kappa } => field >= *kappa,
            ConstraintSpec::IntervalUnion(u) => u.contains(field),
        }
    }

    /// Signed slack of a single field; `>= 0` iff feasible.
    #[inline]
    pub fn constraint_margin(&self, field: f64) -> f64 {
        match self {
            ConstraintSpec::HalfSpace { kappa } => field - kappa,
            ConstraintSpec::IntervalUnion(u) => u.signed_margin(field),
        }
    }

    /// P[X feasible] for X ~ Normal(mean, sd²), sd > 0.
    pub fn feasibility_probability(&self, mean: f64, sd: f64) -> f64 {
        match self {
            ConstraintSpec::HalfSpace { kappa } => normal_sf((kappa - mean) / sd),
            ConstraintSpec::IntervalUnion(u) => u
                .intervals()
                .iter()
                .map(|&(a, b)| normal_interval((a - mean) / sd, (b - mean) / sd))
                .sum::<f64>()
                .min(1.0),
        }
    }
}

/// An M×N Gaussian disorder matrix G (row `a` is the pattern g^a) together
/// with the constraint family it is read against.
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderInstance {
    n: usize,
    m: usize,
    seed: u64,
    spec: ConstraintSpec,
    entries: Vec<f64>,
}

impl DisorderInstance {
    /// Draw i.i.d. standard normal entries, row-major, from the stream keyed by
    /// `seed`.
    pub fn sample(n: usize, m: usize, seed: u64, spec: ConstraintSpec) -> Result<Self> {
        check_dimension(n)?;
        let mut entries = vec![0.0; n * m];
        RandomStream::new(seed, 0).fill_normal(&mut entries);
        Ok(Self {
            n,
            m,
            seed,
            spec,
            entries,
        })
    }

    pub fn from_entries(
        n: usize,
        m: usize,
        seed: u64,
        spec: ConstraintSpec,
        entries: Vec<f64>,
    ) -> Result<Self> {
        check_dimension(n)?;
        if entries.len() != n * m {
            return Err(Error::Dimension(format!(
                "{} entries supplied for an {m}x{n} matrix",
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::Dimension(format!("entry {pos} is not finite")));
        }
        Ok(Self {
            n,
            m,
            seed,
            spec,
            entries,
        })
    }

    pub fn with_spec(mut self, spec: ConstraintSpec) -> Self {
        self.spec = spec;
        self
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> &ConstraintSpec {
        &self.spec
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn row(&self, a: usize) -> &[f64] {
        &self.entries[a * self.n..(a + 1) * self.n]
    }

    #[inline]
    pub fn entry(&self, a: usize, i: usize) -> f64 {
        self.entries[a * self.n + i]
    }

    /// ‖G‖∞ = max |g^a_i|, zero for M = 0.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |acc: f64, x| acc.max(x.abs()))
    }

    fn check(&self, sigma: &SpinConfig) -> Result<()> {
        if sigma.n() != self.n {
            return Err(Error::Dimension(format!(
                "configuration has N = {}, instance has N = {}",
                sigma.n(),
                self.n
            )));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn field_unchecked(&self, a: usize, sigma: &SpinConfig) -> f64 {
        let row = self.row(a);
        let mut s = 0.0;
        for (i, g) in row.iter().enumerate() {
            if sigma.bits >> i & 1 == 1 {
                s += g;
            } else {
                s -= g;
            }
        }
        s / (self.n as f64).sqrt()
    }

    pub(crate) fn is_solution_unchecked(&self, sigma: &SpinConfig) -> bool {
        (0..self.m).all(|a| self.spec.contains(self.field_unchecked(a, sigma)))
    }

    pub(crate) fn margin_unchecked(&self, sigma: &SpinConfig) -> f64 {
        (0..self.m)
            .map(|a| self.spec.constraint_margin(self.field_unchecked(a, sigma)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Normalized fields ⟨g^a, σ⟩/√N for every row.
    pub fn fields(&self, sigma: &SpinConfig) -> Result<Vec<f64>> {
        self.check(sigma)?;
        Ok((0..self.m).map(|a| self.field_unchecked(a, sigma)).collect())
    }

    /// Every field lies in the (closed) feasible region.
    pub fn is_solution(&self, sigma: &SpinConfig) -> Result<bool> {
        self.check(sigma)?;
        Ok(self.is_solution_unchecked(sigma))
    }

    /// min over rows of the signed constraint slack; `+∞` when M = 0.
    pub fn margin(&self, sigma: &SpinConfig) -> Result<f64> {
        self.check(sigma)?;
        Ok(self.margin_unchecked(sigma))
    }
}

/// min over σ ∈ T of ‖x − σ‖₂; `+∞` for empty T.
pub fn dist_to_set(x: &[f64], set: &[SpinConfig]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for sigma in set {
        if sigma.n() != x.len() {
            return Err(Error::Dimension(format!(
                "point of length {} vs configuration of length {}",
                x.len(),
                sigma.n()
            )));
        }
        let d2: f64 = x
            .iter()
            .enumerate()
            .map(|(i, xi)| (xi - sigma.spin(i)).powi(2))
            .sum();
        best = best.min(d2);
    }
    Ok(best.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny(entries: Vec<f64>, n: usize, spec: ConstraintSpec) -> DisorderInstance {
        let m = entries.len() / n;
        DisorderInstance::from_entries(n, m, 0, spec, entries).unwrap()
    }

    #[test]
    fn sampling_is_deterministic_and_seeded() {
        let spec = ConstraintSpec::half_space(0.0).unwrap();
        let a = DisorderInstance::sample(4, 2, 7, spec.clone()).unwrap();
        let b = DisorderInstance::sample(4, 2, 7, spec.clone()).unwrap();
        let c = DisorderInstance::sample(4, 2, 8, spec).unwrap();
        assert_eq!(a.entries().len(), 8);
        assert!(a.entries().iter().zip(b.entries()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a.entries().iter().zip(c.entries()).any(|(x, y)| x != y));
    }

    #[test]
    fn sampling_rejects_bad_dimensions() {
        let spec = ConstraintSpec::half_space(0.0).unwrap();
        assert!(matches!(DisorderInstance::sample(0, 1, 1, spec.clone()), Err(Error::Dimension(_))));
        assert!(matches!(DisorderInstance::sample(33, 1, 1, spec), Err(Error::Dimension(_))));
    }

    #[test]
    fn single_entry_moments() {
        // one entry per seed, 10^4 seeds
        let spec = ConstraintSpec::half_space(0.0).unwrap();
        let xs: Vec<f64> = (0..10_000u64)
            .map(|s| DisorderInstance::sample(1, 1, s, spec.clone()).unwrap().entry(0, 0))
            .collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.06, "var {var}");
    }

    #[test]
    fn small_hand_instance() {
        let g = tiny(vec![1.0, 1.0], 2, ConstraintSpec::half_space(0.0).unwrap());
        let pp = SpinConfig::new(0b11, 2).unwrap();
        let mm = SpinConfig::new(0b00, 2).unwrap();
        let f = g.fields(&pp).unwrap();
        assert!((f[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!(g.is_solution(&pp).unwrap());
        assert!(!g.is_solution(&mm).unwrap());
        assert!((g.margin(&pp).unwrap() - 2f64.sqrt()).abs() < 1e-15);

        let slab = g.clone().with_spec(ConstraintSpec::symmetric(1.0).unwrap());
        let pm = SpinConfig::new(0b01, 2).unwrap();
        assert_eq!(slab.fields(&pm).unwrap(), vec![0.0]);
        assert!(slab.is_solution(&pm).unwrap());
        assert_eq!(slab.margin(&pm).unwrap(), 1.0);
    }

    #[test]
    fn no_constraints() {
        let g = DisorderInstance::sample(3, 0, 1, ConstraintSpec::half_space(5.0).unwrap()).unwrap();
        let s = SpinConfig::new(0b101, 3).unwrap();
        assert!(g.fields(&s).unwrap().is_empty());
        assert!(g.is_solution(&s).unwrap());
        assert_eq!(g.margin(&s).unwrap(), f64::INFINITY);
    }

    #[test]
    fn dimension_mismatch() {
        let g = DisorderInstance::sample(4, 1, 1, ConstraintSpec::half_space(0.0).unwrap()).unwrap();
        let s = SpinConfig::new(0, 3).unwrap();
        assert!(g.fields(&s).is_err());
        assert!(g.is_solution(&s).is_err());
        assert!(g.margin(&s).is_err());
        assert!(s.hamming(&SpinConfig::new(0, 4).unwrap()).is_err());
        assert!(dist_to_set(&[0.0; 4], &[s]).is_err());
    }

    #[test]
    fn fields_match_naive_resummation() {
        let g = DisorderInstance::sample(8, 5, 99, ConstraintSpec::half_space(0.0).unwrap()).unwrap();
        for bits in [0u32, 0x5a, 0xff, 0x13] {
            let s = SpinConfig::new(bits, 8).unwrap();
            let spins = s.spins();
            let f = g.fields(&s).unwrap();
            for a in 0..5 {
                let naive: f64 = (0..8).map(|i| g.entry(a, i) * spins[i]).sum::<f64>() / 8f64.sqrt();
                assert!((f[a] - naive).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interval_union_validation() {
        assert!(IntervalUnion::new(vec![]).is_err());
        assert!(IntervalUnion::new(vec![(1.0, 1.0)]).is_err());
        assert!(IntervalUnion::new(vec![(0.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(IntervalUnion::new(vec![(0.0, 1.0), (-2.0, -1.0)]).is_err());
        assert!(IntervalUnion::new(vec![(0.0, f64::INFINITY)]).is_err());
        assert!(IntervalUnion::new(vec![(-2.0, -1.0), (0.0, 1.0)]).is_ok());
        assert!(ConstraintSpec::half_space(f64::NAN).is_err());
    }

    #[test]
    fn interval_signed_margin() {
        let u = IntervalUnion::new(vec![(-3.0, -1.0), (1.0, 2.0)]).unwrap();
        assert_eq!(u.signed_margin(-2.0), 1.0);
        assert_eq!(u.signed_margin(1.5), 0.5);
        assert_eq!(u.signed_margin(0.0), -1.0);
        assert_eq!(u.signed_margin(0.5), -0.5);
        assert_eq!(u.signed_margin(5.0), -3.0);
        assert_eq!(u.signed_margin(1.0), 0.0);
    }

    #[test]
    fn distances() {
        let s = SpinConfig::new(0b1010, 4).unwrap();
        assert_eq!(s.hamming(&s).unwrap(), 0);
        assert_eq!(s.hamming(&s.negate()).unwrap(), 4);
        assert_eq!(s.overlap(&s.negate()).unwrap(), -1.0);
        assert_eq!(dist_to_set(&s.spins(), &[s]).unwrap(), 0.0);
        assert_eq!(dist_to_set(&[0.0; 4], &[]).unwrap(), f64::INFINITY);
        assert_eq!(dist_to_set(&[0.0; 4], &[s]).unwrap(), 2.0);
    }

    #[test]
    fn gosper_masks() {
        let m: Vec<u32> = masks_of_weight(4, 2).collect();
        assert_eq!(m, vec![0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100]);
        assert_eq!(masks_of_weight(5, 0).collect::<Vec<_>>(), vec![0]);
        assert_eq!(masks_of_weight(3, 4).count(), 0);
        assert_eq!(masks_of_weight(32, 1).count(), 32);
        assert_eq!(masks_of_weight(32, 32).collect::<Vec<_>>(), vec![u32::MAX]);
        let c = SpinConfig::new(0, 6).unwrap();
        assert_eq!(hamming_ball(&c, 2).len(), 1 + 6 + 15);
    }

    fn arb_pair() -> impl Strategy<Value = (SpinConfig, SpinConfig, SpinConfig)> {
        (1usize..=32).prop_flat_map(|n| {
            let mask = low_mask(n);
            (any::<u32>(), any::<u32>(), any::<u32>()).prop_map(move |(a, b, c)| {
                (
                    SpinConfig::new(a & mask, n).unwrap(),
                    SpinConfig::new(b & mask, n).unwrap(),
                    SpinConfig::new(c & mask, n).unwrap(),
                )
            })
        })
    }

    proptest! {
        #[test]
        fn l2_is_four_hamming_and_metric((s, t, u) in arb_pair()) {
            let d = s.hamming(&t).unwrap();
            let direct: f64 = s.spins().iter().zip(t.spins()).map(|(a, b)| (a - b).powi(2)).sum();
            prop_assert_eq!(s.l2_sq(&t).unwrap(), 4.0 * d as f64);
            prop_assert_eq!(direct, 4.0 * d as f64);
            prop_assert_eq!(d, t.hamming(&s).unwrap());
            prop_assert_eq!(s.hamming(&s).unwrap(), 0);
            prop_assert!(s.hamming(&u).unwrap() <= d + t.hamming(&u).unwrap());
            prop_assert!((s == t) == (d == 0));
        }

        #[test]
        fn decoded_spins_are_pm_one((s, _, _) in arb_pair()) {
            prop_assert!(s.spins().iter().all(|&x| x == 1.0 || x == -1.0));
            prop_assert_eq!(SpinConfig::from_signs(&s.spins()).unwrap(), s);
        }

        #[test]
        fn margin_sign_matches_feasibility(seed in any::<u64>(), bits in any::<u32>(), kappa in -1.5f64..1.5, slab in any::<bool>()) {
            let spec = if slab {
                ConstraintSpec::intervals(vec![(-2.0, -0.5), (kappa.abs().min(1.4) - 0.1, 2.0)]).unwrap()
            } else {
                ConstraintSpec::half_space(kappa).unwrap()
            };
            let g = DisorderInstance::sample(10, 4, seed, spec).unwrap();
            let s = SpinConfig::new(bits & low_mask(10), 10).unwrap();
            prop_assert_eq!(g.margin(&s).unwrap() >= 0.0, g.is_solution(&s).unwrap());
        }

        #[test]
        fn single_flip_moves_field_by_two_g(seed in any::<u64>(), bits in any::<u32>(), i in 0usize..9) {
            let g = DisorderInstance::sample(9, 3, seed, ConstraintSpec::half_space(0.0).unwrap()).unwrap();
            let s = SpinConfig::new(bits & low_mask(9), 9).unwrap();
            let f0 = g.fields(&s).unwrap();
            let f1 = g.fields(&s.flip(i)).unwrap();
            for a in 0..3 {
                let expect = -2.0 * g.entry(a, i) * s.spin(i) / 3.0;
                prop_assert!((f1[a] - f0[a] - expect).abs() < 1e-12);
            }
        }
    }
}
