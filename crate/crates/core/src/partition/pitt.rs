//! Monte Carlo check of the Gaussian correlation inequality
//! P[F ∧ G] ≥ P[F]·P[G] for two monotone events of one Gaussian vector with
//! nonnegative covariance.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rng::{derive_seed, tag, RandomStream};
use crate::stats::{kahan_sum, Proportion};

/// Relative tolerance on pivots and symmetry in the PSD factorization.
const PSD_TOL: f64 = 1e-10;

/// Lower-triangular L with L·Lᵀ = Σ for a positive semidefinite Σ.
///
/// Pivots below `1e-10·scale` are treated as zero; the matching column of L is
/// then zero, which is only consistent if the residual column also vanishes.
pub fn psd_cholesky(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = cov.nrows();
    if cov.ncols() != d {
        return Err(Error::Dimension(format!("covariance is {}x{}", d, cov.ncols())));
    }
    if cov.iter().any(|x| !x.is_finite()) {
        return Err(Error::Precondition("covariance has non-finite entries".into()));
    }
    let scale = (0..d).map(|i| cov[(i, i)].abs()).fold(1.0, f64::max);
    let tol = PSD_TOL * scale;
    for i in 0..d {
        for j in 0..i {
            if (cov[(i, j)] - cov[(j, i)]).abs() > tol {
                return Err(Error::Precondition(format!("covariance is not symmetric at ({i}, {j})")));
            }
        }
    }
    let mut l = DMatrix::<f64>::zeros(d, d);
    for j in 0..d {
        let pivot = cov[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
        if pivot < -tol {
            return Err(Error::Precondition(format!("covariance is not positive semidefinite (pivot {pivot} at {j})")));
        }
        if pivot <= tol {
            for i in j + 1..d {
                let r = cov[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
                if r.abs() > tol.sqrt() * scale.sqrt() {
                    return Err(Error::Precondition(format!(
                        "covariance is not positive semidefinite (zero pivot at {j} with residual {r})"
                    )));
                }
            }
            continue;
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..d {
            let r = cov[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
            l[(i, j)] = r / ljj;
        }
    }
    Ok(l)
}

/// Project onto matrices that are PSD with nonnegative entries: clip negative
/// entries, floor eigenvalues at zero, then verify the result.
pub fn repair_covariance(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let clipped = cov.map(|x| x.max(0.0));
    let sym = (&clipped + clipped.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&vals) * v.transpose();
    let mut out = (&rebuilt + rebuilt.transpose()) * 0.5;
    let scale = (0..out.nrows()).map(|i| out[(i, i)]).fold(1.0, f64::max);
    for x in out.iter_mut() {
        if *x < -1e-12 * scale {
            return Err(Error::Precondition(format!("repair left a negative covariance entry {x}")));
        }
        *x = x.max(0.0);
    }
    psd_cholesky(&out)?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotonicity {
    /// ⋀_j {x_j ≥ t_j}
    Increasing,
    /// ⋀_j {x_j ≤ t_j}
    Decreasing,
}

/// A coordinatewise threshold event, monotone in the stated direction.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdEvent {
    pub direction: Monotonicity,
    pub coords: Vec<usize>,
    pub thresholds: Vec<f64>,
}

impl ThresholdEvent {
    pub fn new(direction: Monotonicity, coords: Vec<usize>, thresholds: Vec<f64>) -> Result<Self> {
        if coords.len() != thresholds.len() {
            return Err(Error::Dimension(format!(
                "{} coordinates but {} thresholds",
                coords.len(),
                thresholds.len()
            )));
        }
        Ok(Self {
            direction,
            coords,
            thresholds,
        })
    }

    pub fn holds(&self, x: &[f64]) -> bool {
        let mut it = self.coords.iter().zip(&self.thresholds);
        match self.direction {
            Monotonicity::Increasing => it.all(|(&c, &t)| x[c] >= t),
            Monotonicity::Decreasing => it.all(|(&c, &t)| x[c] <= t),
        }
    }
}

/// Estimates of P[F], P[G], P[F∧G] and the gap P[F∧G] − P[F]P[G].
#[derive(Clone, Debug, PartialEq)]
pub struct PittEstimate {
    pub samples: usize,
    pub f: Proportion,
    pub g: Proportion,
    pub joint: Proportion,
    pub gap: f64,
    /// Delta-method standard error of the gap.
    pub gap_se: f64,
}

impl PittEstimate {
    /// gap ≥ −`sigmas`·SE.
    pub fn passes(&self, sigmas: f64) -> bool {
        self.gap >= -sigmas * self.gap_se
    }

    pub(crate) fn from_flags(flags: &[(bool, bool)]) -> Self {
        let n = flags.len();
        let f = Proportion::from_flags(flags.iter().map(|x| x.0));
        let g = Proportion::from_flags(flags.iter().map(|x| x.1));
        let joint = Proportion::from_flags(flags.iter().map(|x| x.0 && x.1));
        let (pf, pg) = (f.p(), g.p());
        let gap = joint.p() - pf * pg;
        // influence of the gap functional: FG − p_G·F − p_F·G
        let psi: Vec<f64> = flags
            .iter()
            .map(|&(a, b)| {
                let (a, b) = (a as u8 as f64, b as u8 as f64);
                a * b - pg * a - pf * b
            })
            .collect();
        let gap_se = if n < 2 {
            0.0
        } else {
            let mean = kahan_sum(psi.iter().copied()) / n as f64;
            let var = kahan_sum(psi.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Self {
            samples: n,
            f,
            g,
            joint,
            gap,
            gap_se,
        }
    }
}

/// Sample X = μ + L·Z and estimate the correlation gap of two events.
///
/// Both events must share one direction and every covariance entry must be
/// nonnegative; sample `j` uses the stream `derive_seed(seed, TRIAL, j)`.
pub fn pitt_check(
    cov: &DMatrix<f64>,
    mean: &[f64],
    f: &ThresholdEvent,
    g: &ThresholdEvent,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<PittEstimate> {
    let d = cov.nrows();
    if mean.len() != d {
        return Err(Error::Dimension(format!("mean has length {}, covariance is {d}x{d}", mean.len())));
    }
    if f.direction != g.direction {
        return Err(Error::Precondition("events have opposite monotonicity".into()));
    }
    if let Some(&c) = f.coords.iter().chain(&g.coords).find(|&&c| c >= d) {
        return Err(Error::Dimension(format!("event coordinate {c} out of range for dimension {d}")));
    }
    if let Some(x) = cov.iter().find(|x| **x < 0.0) {
        return Err(Error::Precondition(format!("covariance has a negative entry {x}")));
    }
    if samples == 0 {
        return Err(Error::Precondition("at least one sample is required".into()));
    }
    let l = psd_cholesky(cov)?;
    let flags = par::map_indexed(exec, samples, |j| {
        let mut rs = RandomStream::derived(seed, tag::TRIAL, j as u64);
        let mut z = vec![0.0; d];
        rs.fill_normal(&mut z);
        let x: Vec<f64> = (0..d)
            .map(|i| mean[i] + (0..=i).map(|k| l[(i, k)] * z[k]).sum::<f64>())
            .collect();
        (f.holds(&x), g.holds(&x))
    });
    Ok(PittEstimate::from_flags(&flags))
}

/// A randomly generated Gaussian setup with two same-direction events.
#[derive(Clone, Debug)]
pub struct PittSetup {
    pub cov: DMatrix<f64>,
    pub mean: Vec<f64>,
    pub f: ThresholdEvent,
    pub g: ThresholdEvent,
}

/// Random setup in dimension 2..=8: a Wishart matrix repaired to be PSD with
/// nonnegative entries, a random mean and two random threshold events.
pub fn random_pitt_setup(seed: u64) -> Result<PittSetup> {
    let mut rs = RandomStream::derived(seed, tag::SETUP, 0);
    let d = 2 + rs.below(7) as usize;
    let mut a = DMatrix::<f64>::zeros(d, d + 2);
    for x in a.iter_mut() {
        *x = rs.next_normal() + 0.3;
    }
    let wishart = &a * a.transpose() / (d + 2) as f64;
    let cov = repair_covariance(&wishart)?;
    let mean: Vec<f64> = (0..d).map(|_| 0.5 * rs.next_normal()).collect();
    let direction = if rs.bernoulli(0.5) {
        Monotonicity::Increasing
    } else {
        Monotonicity::Decreasing
    };
    let event = |rs: &mut RandomStream| {
        let mut coords: Vec<usize> = (0..d).filter(|_| rs.bernoulli(0.4)).collect();
        if coords.is_empty() {
            coords.push(rs.below(d as u64) as usize);
        }
        let thresholds = coords
            .iter()
            .map(|&c| {
                let sd = cov[(c, c)].sqrt();
                let z = rs.range_f64(-1.0, 0.5);
                match direction {
                    Monotonicity::Increasing => mean[c] + z * sd,
                    Monotonicity::Decreasing => mean[c] - z * sd,
                }
            })
            .collect();
        ThresholdEvent::new(direction, coords, thresholds).expect("lengths match")
    };
    let f = event(&mut rs);
    let g = event(&mut rs);
    Ok(PittSetup { cov, mean, f, g })
}

/// Seed for the `i`-th setup of a batch.
pub fn setup_seed(seed: u64, i: u64) -> u64 {
    derive_seed(seed, tag::SETUP, i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::normal_cdf;

    #[test]
    fn cholesky_reconstructs() {
        let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, 0.3, 0.1, 0.3, 1.5]);
        let l = psd_cholesky(&cov).unwrap();
        assert!((&l * l.transpose() - &cov).abs().max() < 1e-12);
    }

    #[test]
    fn cholesky_accepts_singular_psd() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let l = psd_cholesky(&cov).unwrap();
        assert!((&l * l.transpose() - &cov).abs().max() < 1e-12);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(psd_cholesky(&bad).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
        assert!(psd_cholesky(&asym).is_err());
    }

    #[test]
    fn repair_output_is_valid() {
        let cov = DMatrix::from_row_slice(3, 3, &[1.0, -0.5, 0.9, -0.5, 1.0, 0.9, 0.9, 0.9, 1.0]);
        let fixed = repair_covariance(&cov).unwrap();
        assert!(fixed.iter().all(|x| *x >= 0.0));
        assert!(psd_cholesky(&fixed).is_ok());
    }

    #[test]
    fn independent_coordinates_have_zero_gap() {
        let cov = DMatrix::identity(2, 2);
        let f = ThresholdEvent::new(Monotonicity::Increasing, vec![0], vec![0.0]).unwrap();
        let g = ThresholdEvent::new(Monotonicity::Increasing, vec![1], vec![0.0]).unwrap();
        let est = pitt_check(&cov, &[0.0, 0.0], &f, &g, 100_000, 3, Execution::default()).unwrap();
        assert!(est.gap.abs() <= 3.0 * est.gap_se + 1e-12, "gap {} se {}", est.gap, est.gap_se);
        assert!((est.f.p() - 0.5).abs() < 0.01);
    }

    #[test]
    fn identical_events_give_variance() {
        let cov = DMatrix::identity(1, 1);
        let f = ThresholdEvent::new(Monotonicity::Decreasing, vec![0], vec![0.3]).unwrap();
        let est = pitt_check(&cov, &[0.0], &f, &f, 50_000, 9, Execution::default()).unwrap();
        let p = normal_cdf(0.3);
        assert!((est.gap - p * (1.0 - p)).abs() < 0.01);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, -0.2, -0.2, 1.0]);
        let f = ThresholdEvent::new(Monotonicity::Increasing, vec![0], vec![0.0]).unwrap();
        let g = ThresholdEvent::new(Monotonicity::Decreasing, vec![1], vec![0.0]).unwrap();
        assert!(pitt_check(&cov, &[0.0; 2], &f, &f, 10, 0, Execution::Sequential).is_err());
        let ok = DMatrix::identity(2, 2);
        assert!(pitt_check(&ok, &[0.0; 2], &f, &g, 10, 0, Execution::Sequential).is_err());
        let far = ThresholdEvent::new(Monotonicity::Increasing, vec![5], vec![0.0]).unwrap();
        assert!(pitt_check(&ok, &[0.0; 2], &f, &far, 10, 0, Execution::Sequential).is_err());
    }

    #[test]
    fn random_setups_are_valid() {
        for i in 0..20 {
            let s = random_pitt_setup(setup_seed(1, i)).unwrap();
            assert!(s.cov.iter().all(|x| *x >= 0.0));
            assert!(psd_cholesky(&s.cov).is_ok());
            assert_eq!(s.f.direction, s.g.direction);
        }
    }
}
