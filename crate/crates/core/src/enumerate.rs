//! Exhaustive solution enumeration, isolation classification, clustering and
//! the discrete ℓ₂ search ball.
//!
//! The enumerator walks {−1,+1}^N in binary-reflected Gray-code order, so
//! consecutive configurations differ in one coordinate and all M fields are
//! updated in O(M) per step. The walk is cut into contiguous chunks that each
//! start from freshly computed fields; chunks run under the chosen
//! [`Execution`] policy and their members are merged and sorted, so the result
//! does not depend on the policy.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::io::instance_digest;
use crate::model::{check_dimension, masks_of_weight, DisorderInstance, SpinConfig};
use crate::par::{self, Execution};

/// Largest N accepted by the exhaustive enumerator.
pub const ENUMERATION_LIMIT: usize = 28;

/// Gray-code steps per chunk; also bounds the incremental-update drift.
const CHUNK_LOG2: usize = 14;

/// Incremental fields within this distance of a boundary are re-decided from
/// freshly computed fields.
const BOUNDARY_RECHECK: f64 = 1e-9;

/// Relative slack on ℓ₂ ball membership, absorbing rounding in ‖τ − x‖².
pub const RADIUS_SLACK: f64 = 1e-12;

#[inline]
pub(crate) fn within_radius(dist_sq: f64, radius: f64) -> bool {
    let r2 = radius * radius;
    dist_sq <= r2 + RADIUS_SLACK * r2.max(1.0)
}

#[inline]
pub fn gray(index: u64) -> u32 {
    (index ^ (index >> 1)) as u32
}

/// Solutions of one instance, sorted by encoding, with their margins.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionSet {
    instance_digest: u64,
    n: usize,
    members: Vec<SpinConfig>,
    margins: Vec<f64>,
}

impl SolutionSet {
    /// Build from an explicit list of solutions of `g`. Duplicates are
    /// removed; a non-solution is an error.
    pub fn from_configs(g: &DisorderInstance, configs: Vec<SpinConfig>) -> Result<Self> {
        let mut members = configs;
        for s in &members {
            if !g.is_solution(s)? {
                return Err(Error::Precondition(format!(
                    "configuration {:#x} is not a solution",
                    s.bits()
                )));
            }
        }
        members.sort_unstable();
        members.dedup();
        let margins = members.iter().map(|s| g.margin_unchecked(s)).collect();
        Ok(Self {
            instance_digest: instance_digest(g),
            n: g.n(),
            members,
            margins,
        })
    }

    pub fn instance_digest(&self) -> u64 {
        self.instance_digest
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn members(&self) -> &[SpinConfig] {
        &self.members
    }

    pub fn margins(&self) -> &[f64] {
        &self.margins
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, sigma: &SpinConfig) -> bool {
        contains_sorted(&self.members, sigma)
    }

    /// Distance from member `idx` to the closest other member when it is at
    /// most `k`; `None` means the member is k-isolated.
    pub fn nearest_within(&self, idx: usize, k: usize) -> Option<usize> {
        let method = resolve(IsolationMethod::Auto, self.n, k, self.len());
        nearest_within(&self.members, idx, k, method)
    }

    pub fn index_of(&self, sigma: &SpinConfig) -> Option<usize> {
        self.members.binary_search(sigma).ok()
    }
}

#[inline]
fn contains_sorted(members: &[SpinConfig], sigma: &SpinConfig) -> bool {
    members.binary_search(sigma).is_ok()
}

pub fn enumerate_solutions(g: &DisorderInstance) -> Result<SolutionSet> {
    enumerate_solutions_with(g, Execution::default())
}

pub fn enumerate_solutions_with(g: &DisorderInstance, exec: Execution) -> Result<SolutionSet> {
    let n = g.n();
    if n > ENUMERATION_LIMIT {
        return Err(Error::Capacity {
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let m = g.m();
    let total: u64 = 1 << n;
    let chunk: u64 = 1 << CHUNK_LOG2.min(n);
    let chunks = (total / chunk) as usize;

    // delta[i * m + a] = 2 g^a_i / √N, the field change when σ_i goes − → +
    let scale = 2.0 / (n as f64).sqrt();
    let mut delta = vec![0.0; n * m];
    for a in 0..m {
        for i in 0..n {
            delta[i * m + a] = scale * g.entry(a, i);
        }
    }
    let spec = g.spec();

    let per_chunk = par::map_indexed(exec, chunks, |c| {
        let start = c as u64 * chunk;
        let end = start + chunk;
        let mut bits = gray(start);
        let mut fields: Vec<f64> = (0..m)
            .map(|a| g.field_unchecked(a, &SpinConfig::from_raw(bits, n)))
            .collect();
        let mut found = Vec::new();
        let mut idx = start;
        loop {
            let mut verdict = Some(true);
            for f in &fields {
                let slack = spec.constraint_margin(*f);
                if slack < -BOUNDARY_RECHECK {
                    verdict = Some(false);
                    break;
                }
                if slack <= BOUNDARY_RECHECK {
                    verdict = None;
                }
            }
            let feasible = match verdict {
                Some(v) => v,
                None => g.is_solution_unchecked(&SpinConfig::from_raw(bits, n)),
            };
            if feasible {
                found.push(SpinConfig::from_raw(bits, n));
            }
            idx += 1;
            if idx == end {
                break;
            }
            let i = idx.trailing_zeros() as usize;
            bits ^= 1 << i;
            let d = &delta[i * m..(i + 1) * m];
            if bits >> i & 1 == 1 {
                fields.iter_mut().zip(d).for_each(|(f, d)| *f += d);
            } else {
                fields.iter_mut().zip(d).for_each(|(f, d)| *f -= d);
            }
        }
        found
    });

    let mut members: Vec<SpinConfig> = per_chunk.into_iter().flatten().collect();
    members.sort_unstable();
    let margins = par::map_slice(exec, &members, |s| g.margin_unchecked(s));
    Ok(SolutionSet {
        instance_digest: instance_digest(g),
        n,
        members,
        margins,
    })
}

/// How nearest-neighbour queries inside a solution set are answered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IsolationMethod {
    /// Probe every configuration within distance k by sorted-set lookup.
    FlipScan,
    /// Compare against every other member.
    Pairwise,
    /// Pick the cheaper of the two.
    Auto,
}

fn ball_volume(n: usize, k: usize) -> u128 {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for j in 1..=k.min(n) {
        c = c * (n - j + 1) as u128 / j as u128;
        total += c;
    }
    total
}

fn resolve(method: IsolationMethod, n: usize, k: usize, size: usize) -> IsolationMethod {
    match method {
        IsolationMethod::Auto => {
            if ball_volume(n, k) <= size as u128 {
                IsolationMethod::FlipScan
            } else {
                IsolationMethod::Pairwise
            }
        }
        m => m,
    }
}

/// Distance from `members[idx]` to the closest other member, if it is ≤ k.
fn nearest_within(members: &[SpinConfig], idx: usize, k: usize, method: IsolationMethod) -> Option<usize> {
    let sigma = members[idx];
    match method {
        IsolationMethod::FlipScan | IsolationMethod::Auto => (1..=k.min(sigma.n())).find(|&r| {
            masks_of_weight(sigma.n(), r).any(|mask| contains_sorted(members, &sigma.flip_mask(mask)))
        }),
        IsolationMethod::Pairwise => members
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != idx)
            .map(|(_, t)| sigma.hamming_unchecked(t))
            .filter(|&d| d <= k)
            .min(),
    }
}

/// k-isolation flags for every member of a solution set.
#[derive(Clone, Debug, PartialEq)]
pub struct IsolationReport {
    pub k: usize,
    /// Parallel to the solution set's members.
    pub flags: Vec<bool>,
    /// Distance to the nearest other solution when it is at most `k`.
    pub nearest: Vec<Option<usize>>,
    /// `counts[j - 1]` = number of j-isolated members, for j = 1..=k.
    pub counts: Vec<usize>,
    pub isolated: Vec<SpinConfig>,
    pub method: IsolationMethod,
}

impl IsolationReport {
    pub fn is_isolated_at(&self, idx: usize, k: usize) -> bool {
        assert!(k >= 1 && k <= self.k, "k outside the classified range");
        self.nearest[idx].is_none_or(|d| d > k)
    }
}

pub fn classify_isolation(s: &SolutionSet, k: usize) -> Result<IsolationReport> {
    classify_isolation_with(s, k, IsolationMethod::Auto, Execution::default())
}

pub fn classify_isolation_with(
    s: &SolutionSet,
    k: usize,
    method: IsolationMethod,
    exec: Execution,
) -> Result<IsolationReport> {
    if k < 1 || k > s.n() {
        return Err(Error::out_of_range("k", k, "1 <= k <= N"));
    }
    let method = resolve(method, s.n(), k, s.len());
    let members = s.members();
    let nearest = par::map_indexed(exec, members.len(), |idx| nearest_within(members, idx, k, method));
    let flags: Vec<bool> = nearest.iter().map(Option::is_none).collect();
    let counts = (1..=k)
        .map(|j| nearest.iter().filter(|d| d.is_none_or(|d| d > j)).count())
        .collect();
    let isolated = members
        .iter()
        .zip(&flags)
        .filter(|(_, &f)| f)
        .map(|(s, _)| *s)
        .collect();
    Ok(IsolationReport {
        k,
        flags,
        nearest,
        counts,
        isolated,
        method,
    })
}

/// One connected component of the "d_H ≤ link" graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    /// Smallest encoding in the cluster.
    pub representative: SpinConfig,
    pub members: Vec<SpinConfig>,
    pub diameter: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterReport {
    pub link_distance: usize,
    /// Ordered by representative.
    pub clusters: Vec<Cluster>,
}

impl ClusterReport {
    /// Map from member to the index of its cluster.
    pub fn assignment(&self) -> HashMap<SpinConfig, usize> {
        self.clusters
            .iter()
            .enumerate()
            .flat_map(|(c, cl)| cl.members.iter().map(move |s| (*s, c)))
            .collect()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    // smaller index (= smaller encoding) becomes the root
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

fn diameter(members: &[SpinConfig]) -> usize {
    if members.len() <= 4096 {
        let mut best = 0;
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                best = best.max(a.hamming_unchecked(b));
            }
        }
        return best;
    }
    // search outward from each member's antipode
    let n = members[0].n();
    let mut best = 0;
    for x in members {
        let anti = x.negate();
        for r in 0..=n {
            if n - r <= best {
                break;
            }
            if masks_of_weight(n, r).any(|mask| contains_sorted(members, &anti.flip_mask(mask))) {
                best = n - r;
                break;
            }
        }
        if best == n {
            break;
        }
    }
    best
}

pub fn clusters(s: &SolutionSet, link_distance: usize) -> Result<ClusterReport> {
    clusters_with(s, link_distance, IsolationMethod::Auto, Execution::default())
}

pub fn clusters_with(
    s: &SolutionSet,
    link_distance: usize,
    method: IsolationMethod,
    exec: Execution,
) -> Result<ClusterReport> {
    if link_distance < 1 {
        return Err(Error::out_of_range("link_distance", link_distance, ">= 1"));
    }
    let members = s.members();
    let link = link_distance.min(s.n());
    let method = resolve(method, s.n(), link, members.len());
    let neighbours: Vec<Vec<usize>> = par::map_indexed(exec, members.len(), |i| {
        let sigma = members[i];
        match method {
            IsolationMethod::Pairwise | IsolationMethod::Auto => (i + 1..members.len())
                .filter(|&j| sigma.hamming_unchecked(&members[j]) <= link)
                .collect(),
            IsolationMethod::FlipScan => (1..=link)
                .flat_map(|r| masks_of_weight(sigma.n(), r))
                .filter_map(|mask| members.binary_search(&sigma.flip_mask(mask)).ok())
                .filter(|&j| j > i)
                .collect(),
        }
    });
    let mut uf = UnionFind::new(members.len());
    for (i, nb) in neighbours.iter().enumerate() {
        for &j in nb {
            uf.union(i, j);
        }
    }
    let mut by_root: Vec<Vec<SpinConfig>> = vec![Vec::new(); members.len()];
    for (i, sigma) in members.iter().enumerate() {
        let r = uf.find(i);
        by_root[r].push(*sigma);
    }
    let groups: Vec<Vec<SpinConfig>> = by_root.into_iter().filter(|g| !g.is_empty()).collect();
    let clusters = par::map_slice(exec, &groups, |g| Cluster {
        representative: g[0],
        diameter: diameter(g),
        members: g.clone(),
    });
    Ok(ClusterReport {
        link_distance,
        clusters,
    })
}

/// All τ ∈ {−1,+1}^N with ‖τ − center‖₂ ≤ radius, sorted by encoding.
///
/// Depth-first over coordinates in decreasing |center_i|, trying the sign of
/// `center_i` first and pruning on accumulated squared distance plus the
/// cheapest completion of the remaining coordinates.
pub fn candidate_set(center: &[f64], radius: f64) -> Result<Vec<SpinConfig>> {
    let n = center.len();
    check_dimension(n)?;
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::out_of_range("radius", radius, "finite and >= 0"));
    }
    if center.iter().any(|c| !c.is_finite()) {
        return Err(Error::Dimension("center has a non-finite coordinate".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| center[j].abs().total_cmp(&center[i].abs()).then(i.cmp(&j)));
    let pref: Vec<f64> = order.iter().map(|&i| (1.0 - center[i].abs()).powi(2)).collect();
    let mut suffix = vec![0.0; n + 1];
    for d in (0..n).rev() {
        suffix[d] = suffix[d + 1] + pref[d];
    }

    struct Search<'a> {
        center: &'a [f64],
        order: &'a [usize],
        suffix: &'a [f64],
        radius: f64,
        out: Vec<SpinConfig>,
    }
    impl Search<'_> {
        fn go(&mut self, depth: usize, bits: u32, acc: f64) {
            if !within_radius(acc + self.suffix[depth], self.radius) {
                return;
            }
            let n = self.center.len();
            if depth == n {
                self.out.push(SpinConfig::from_raw(bits, n));
                return;
            }
            let i = self.order[depth];
            let c = self.center[i];
            let first = if c >= 0.0 { 1.0 } else { -1.0 };
            for s in [first, -first] {
                let b = if s > 0.0 { bits | (1 << i) } else { bits };
                self.go(depth + 1, b, acc + (s - c) * (s - c));
            }
        }
    }
    let mut search = Search {
        center,
        order: &order,
        suffix: &suffix,
        radius,
        out: Vec::new(),
    };
    search.go(0, 0, 0.0);
    let mut out = search.out;
    out.sort_unstable();
    Ok(out)
}
