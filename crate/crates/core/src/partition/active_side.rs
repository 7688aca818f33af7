//! Which interval endpoint each near-boundary constraint is pressed against,
//! and whether that assignment is stable over a neighbourhood.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{ConstraintSpec, DisorderInstance, IntervalUnion, SpinConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    /// The left endpoint a_i: the field must stay ≥ a_i.
    Left,
    /// The right endpoint b_i: the field must stay ≤ b_i.
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub interval: usize,
    pub side: Side,
}

impl Endpoint {
    pub fn value(&self, u: &IntervalUnion) -> f64 {
        let (a, b) = u.intervals()[self.interval];
        match self.side {
            Side::Left => a,
            Side::Right => b,
        }
    }
}

/// Threshold 5/log N used to call a constraint near-boundary.
pub fn default_active_threshold(n: usize) -> f64 {
    5.0 / (n as f64).ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActiveSideReport {
    pub threshold: f64,
    /// Largest Hamming distance from σ* to a point of the ball.
    pub ball_radius: usize,
    /// 2‖G‖∞·radius/√N, the most any field can move across the ball.
    pub drift_bound: f64,
    /// threshold + drift_bound.
    pub window: f64,
    /// Constraints within `threshold` of the left endpoint of their interval.
    pub rel_minus: Vec<(usize, usize)>,
    /// Constraints within `threshold` of the right endpoint of their interval.
    pub rel_plus: Vec<(usize, usize)>,
    /// Endpoint assigned to each relevant constraint, by constraint index.
    pub assigned: Vec<(usize, Endpoint)>,
    pub violations: Vec<String>,
}

impl ActiveSideReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Assigned endpoint of constraint `c`, if relevant.
    pub fn endpoint_of(&self, c: usize) -> Option<Endpoint> {
        self.assigned.iter().find(|(i, _)| *i == c).map(|(_, e)| *e)
    }
}

fn endpoints_near(u: &IntervalUnion, x: f64, w: f64) -> impl Iterator<Item = Endpoint> + '_ {
    u.intervals().iter().enumerate().flat_map(move |(i, &(a, b))| {
        let left = ((x - a).abs() <= w).then_some(Endpoint { interval: i, side: Side::Left });
        let right = ((x - b).abs() <= w).then_some(Endpoint { interval: i, side: Side::Right });
        left.into_iter().chain(right)
    })
}

/// Classify the near-boundary constraints of σ* and check that across `ball`
/// every constraint is near at most one endpoint, relevant constraints stay
/// near their assigned endpoint, and none is pressed on both sides.
///
/// "Near" at each point of the ball uses `threshold` on that point's own
/// fields. A relevant constraint may drift by at most the drift bound, so it
/// only has to stay within threshold + drift bound of its endpoint.
pub fn active_side_analysis(
    g: &DisorderInstance,
    sigma_star: &SpinConfig,
    ball: &[SpinConfig],
    threshold: f64,
) -> Result<ActiveSideReport> {
    let u = match g.spec() {
        ConstraintSpec::IntervalUnion(u) => u,
        ConstraintSpec::HalfSpace { .. } => {
            return Err(Error::Precondition("active-side analysis needs an interval-union spec".into()))
        }
    };
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::out_of_range("threshold", threshold, "a positive finite number"));
    }
    let fields = g.fields(sigma_star)?;
    if !g.is_solution_unchecked(sigma_star) {
        return Err(Error::Precondition("sigma_star is not a solution".into()));
    }
    if !ball.contains(sigma_star) {
        return Err(Error::Precondition("the ball must contain sigma_star".into()));
    }
    let mut ball_radius = 0;
    for tau in ball {
        ball_radius = ball_radius.max(sigma_star.hamming(tau)?);
    }
    let drift_bound = 2.0 * g.max_abs() * ball_radius as f64 / (g.n() as f64).sqrt();
    let window = threshold + drift_bound;

    let (mut rel_minus, mut rel_plus, mut assigned, mut violations) = (vec![], vec![], vec![], vec![]);
    for (c, &f) in fields.iter().enumerate() {
        let i = u.locate(f).expect("solution fields are feasible");
        let (a, b) = u.intervals()[i];
        let near_left = f - a <= threshold;
        let near_right = b - f <= threshold;
        if near_left {
            rel_minus.push((c, i));
        }
        if near_right {
            rel_plus.push((c, i));
        }
        match (near_left, near_right) {
            (true, true) => violations.push(format!("constraint {c} is near both endpoints of interval {i}")),
            (true, false) => assigned.push((c, Endpoint { interval: i, side: Side::Left })),
            (false, true) => assigned.push((c, Endpoint { interval: i, side: Side::Right })),
            (false, false) => {}
        }
    }

    let ball_fields: Vec<Vec<f64>> = ball.iter().map(|t| g.fields(t)).collect::<Result<_>>()?;
    for c in 0..g.m() {
        let mut seen = BTreeSet::new();
        for tf in &ball_fields {
            seen.extend(endpoints_near(u, tf[c], threshold));
        }
        if seen.len() > 1 {
            violations.push(format!("constraint {c} comes near {} different endpoints across the ball", seen.len()));
        }
        if let Some(e) = assigned.iter().find(|(i, _)| *i == c).map(|(_, e)| *e) {
            let value = e.value(u);
            if let Some((t, tf)) = ball.iter().zip(&ball_fields).find(|(_, tf)| (tf[c] - value).abs() > window) {
                violations.push(format!(
                    "constraint {c} leaves the window of its endpoint at {:#x} (field {}, endpoint {value})",
                    t.bits(),
                    tf[c]
                ));
            }
        }
    }
    Ok(ActiveSideReport {
        threshold,
        ball_radius,
        drift_bound,
        window,
        rel_minus,
        rel_plus,
        assigned,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hamming_ball;

    #[test]
    fn single_constraint_near_right_endpoint() {
        let spec = ConstraintSpec::intervals(vec![(-1.0, 1.0)]).unwrap();
        let sigma = SpinConfig::all_plus(4).unwrap();
        // field = (4·g)/2 = 2g; choose g so that the field is 0.99
        let g = DisorderInstance::from_entries(4, 1, 0, spec, vec![0.495; 4]).unwrap();
        let r = active_side_analysis(&g, &sigma, &[sigma], 0.1).unwrap();
        assert_eq!(r.rel_plus, vec![(0, 0)]);
        assert!(r.rel_minus.is_empty());
        assert_eq!(r.drift_bound, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn both_sides_is_a_violation() {
        let spec = ConstraintSpec::intervals(vec![(-0.05, 0.05)]).unwrap();
        let sigma = SpinConfig::all_plus(4).unwrap();
        let g = DisorderInstance::from_entries(4, 1, 0, spec, vec![0.0; 4]).unwrap();
        let r = active_side_analysis(&g, &sigma, &[sigma], 0.1).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn ball_points_use_their_own_fields() {
        let spec = ConstraintSpec::intervals(vec![(-1.0, 1.0)]).unwrap();
        let sigma = SpinConfig::all_plus(4).unwrap();
        // field 0 at sigma, ±0.6 after one flip; drift bound 0.6
        let g = DisorderInstance::from_entries(4, 1, 0, spec, vec![0.6, 0.6, -0.6, -0.6]).unwrap();
        let ball = hamming_ball(&sigma, 1);
        let r = active_side_analysis(&g, &sigma, &ball, 0.3).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        let r = active_side_analysis(&g, &sigma, &ball, 0.5).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn preconditions() {
        let sigma = SpinConfig::all_plus(4).unwrap();
        let g = DisorderInstance::sample(4, 2, 1, ConstraintSpec::half_space(0.0).unwrap()).unwrap();
        assert!(active_side_analysis(&g, &sigma, &[sigma], 0.1).is_err());
        let spec = ConstraintSpec::intervals(vec![(10.0, 11.0)]).unwrap();
        let g = DisorderInstance::sample(4, 2, 1, spec).unwrap();
        assert!(active_side_analysis(&g, &sigma, &[sigma], 0.1).is_err());
    }
}
