//! Nearest-neighbour mutual information between a continuous variable and a discrete action,
//! optionally conditioned on the previous state and action.

use alloc::vec;
use alloc::vec::Vec;

use crate::expert::DemoSet;

pub const DEFAULT_K: usize = 5;
pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MiError {
    #[error("{got} samples is too few, at least {needed} are required")]
    TooFew { needed: usize, got: usize },
    #[error("dimension {index} out of range for {dim}-dimensional samples")]
    Dimension { index: usize, dim: usize },
    #[error("samples disagree in shape")]
    Ragged,
}

/// `x` and the action at time `t`, with `z` taken from time `t - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MISample {
    pub x: Vec<f64>,
    pub a: usize,
    pub z: Vec<f64>,
}

/// All transitions after the first of each episode. `z` is the previous observation followed
/// by the previous action.
pub fn mi_samples(demos: &DemoSet) -> Vec<MISample> {
    demos
        .transitions
        .windows(2)
        .filter(|w| w[0].episode_id == w[1].episode_id && w[1].t == w[0].t + 1)
        .map(|w| {
            let mut z = w[0].observation.x.to_vec();
            z.push(w[0].action.encoded());
            MISample {
                x: w[1].observation.x.to_vec(),
                a: w[1].action.index(),
                z,
            }
        })
        .collect()
}

pub fn digamma(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let f = 1.0 / (x * x);
    let series = f * (1.0 / 12.0 - f * (1.0 / 120.0 - f * (1.0 / 252.0 - f * (1.0 / 240.0 - f / 132.0))));
    shift + libm::log(x) - 0.5 / x - series
}

fn standardize(column: &mut [f64]) {
    let n = column.len() as f64;
    let mean = column.iter().sum::<f64>() / n;
    let var = column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = libm::sqrt(var);
    let sd = if sd > 1e-12 { sd } else { 1.0 };
    column.iter_mut().for_each(|v| *v = (*v - mean) / sd);
}

/// Target column, actions and conditioning columns.
type Columns = (Vec<f64>, Vec<usize>, Vec<Vec<f64>>);

fn columns(samples: &[MISample], i: usize, conditional: bool) -> Result<Columns, MiError> {
    let dim = samples[0].x.len();
    let zdim = samples[0].z.len();
    if i >= dim {
        return Err(MiError::Dimension { index: i, dim });
    }
    if samples.iter().any(|s| s.x.len() != dim || s.z.len() != zdim) {
        return Err(MiError::Ragged);
    }
    let mut x: Vec<f64> = samples.iter().map(|s| s.x[i]).collect();
    standardize(&mut x);
    let a = samples.iter().map(|s| s.a).collect();
    let mut z = Vec::new();
    if conditional {
        for j in 0..zdim {
            let mut col: Vec<f64> = samples.iter().map(|s| s.z[j]).collect();
            standardize(&mut col);
            z.push(col);
        }
    }
    Ok((x, a, z))
}

/// `I(X_i; A)` or `I(X_i; A | Z)` in bits, clipped below at zero, with `k = 5`.
pub fn estimate_mi(samples: &[MISample], i: usize, conditional: bool) -> Result<f64, MiError> {
    estimate_mi_k(samples, i, conditional, DEFAULT_K)
}

/// Nearest-neighbour estimator for a discrete action under the max norm, in the form
/// `psi(k) - psi(m) - psi(N_a) + psi(N)` with every count taken inside the Z-neighbourhood.
/// The action uses the discrete metric, so joint-space neighbours share the action. Where
/// the `k`-th neighbour sits at distance zero, the count of tied points replaces `k`.
pub fn estimate_mi_k(samples: &[MISample], i: usize, conditional: bool, k: usize) -> Result<f64, MiError> {
    let needed = MIN_SAMPLES.max(k + 1);
    if samples.len() < needed {
        return Err(MiError::TooFew {
            needed,
            got: samples.len(),
        });
    }
    let (x, a, z) = columns(samples, i, conditional)?;
    let n = x.len();
    let zdist = |p: usize, q: usize| z.iter().fold(0.0f64, |m, col| m.max(libm::fabs(col[p] - col[q])));
    let mut joint = vec![0.0; n];
    let mut total = 0.0;
    for p in 0..n {
        // Joint-space distances to points with the same action; others are infinitely far.
        let mut m = 0;
        for q in 0..n {
            if q != p && a[q] == a[p] {
                joint[m] = libm::fabs(x[q] - x[p]).max(zdist(p, q));
                m += 1;
            }
        }
        let contribution = if m < k {
            // Too few same-action points to define a neighbourhood; treat as uninformative.
            0.0
        } else {
            let (_, rho, _) = joint[..m].select_nth_unstable_by(k - 1, f64::total_cmp);
            let rho = *rho;
            let k_eff = if rho == 0.0 {
                joint[..m].iter().filter(|d| **d == 0.0).count()
            } else {
                k
            };
            let (mut n_xz, mut n_az, mut n_z) = (0usize, 0usize, 0usize);
            for q in 0..n {
                if q == p {
                    continue;
                }
                let dz = zdist(p, q);
                if dz > rho {
                    continue;
                }
                n_z += 1;
                if libm::fabs(x[q] - x[p]).max(dz) <= rho {
                    n_xz += 1;
                }
                if a[q] == a[p] {
                    n_az += 1;
                }
            }
            // Without Z every point is a Z-neighbour and the first and last terms become
            // the familiar psi(N) - psi(N_a) of the marginal estimator.
            digamma(k_eff as f64) - digamma(n_xz.max(1) as f64) - digamma(n_az as f64 + 1.0)
                + digamma(n_z as f64 + 1.0)
        };
        total += contribution;
    }
    Ok((total / n as f64 / core::f64::consts::LN_2).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn sample(x: f64, a: usize, z: f64) -> MISample {
        MISample {
            x: vec![x],
            a,
            z: vec![z],
        }
    }

    #[test]
    fn digamma_values() {
        // psi(1) = -gamma, psi(n + 1) = psi(n) + 1/n.
        assert!((digamma(1.0) + 0.577_215_664_901_532_9).abs() < 1e-12);
        assert!((digamma(3.0) - (1.5 - 0.577_215_664_901_532_9)).abs() < 1e-12);
        assert!((digamma(100.5) - digamma(99.5) - 1.0 / 99.5).abs() < 1e-12);
    }

    #[test]
    fn independent_variables_carry_no_information() {
        let mut rng = rng_from_seed(1);
        let samples: Vec<_> = (0..10_000)
            .map(|_| sample(StandardNormal.sample(&mut rng), rng.random_range(0..3), 0.0))
            .collect();
        let mi = estimate_mi(&samples, 0, false).unwrap();
        assert!(mi < 0.05, "{mi}");
    }

    #[test]
    fn deterministic_binary_action_recovers_its_entropy() {
        let mut rng = rng_from_seed(2);
        // P(A = 1) = P(X > 0.5) for a standard normal X.
        let samples: Vec<_> = (0..5000)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                sample(x, usize::from(x > 0.5), 0.0)
            })
            .collect();
        let p = 0.308_537_538_725_986_9;
        let h = -(p * libm::log2(p) + (1.0 - p) * libm::log2(1.0 - p));
        let mi = estimate_mi(&samples, 0, false).unwrap();
        assert!((mi - h).abs() < 0.1, "{mi} vs {h}");
    }

    #[test]
    fn conditioning_on_the_cause_removes_the_dependence() {
        let mut rng = rng_from_seed(3);
        // A is a function of Z; X is a noisy copy of Z.
        let samples: Vec<_> = (0..3000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                let e: f64 = StandardNormal.sample(&mut rng);
                sample(z + 0.3 * e, usize::from(z > 0.0), z)
            })
            .collect();
        let marginal = estimate_mi(&samples, 0, false).unwrap();
        let conditional = estimate_mi(&samples, 0, true).unwrap();
        assert!(marginal > 0.4, "{marginal}");
        assert!(conditional < 0.05, "{conditional}");
    }

    #[test]
    fn too_few_samples() {
        let samples = vec![sample(0.0, 0, 0.0); 10];
        assert_eq!(
            estimate_mi(&samples, 0, false),
            Err(MiError::TooFew { needed: 1000, got: 10 })
        );
        let samples = vec![sample(0.0, 0, 0.0); 1000];
        assert_eq!(estimate_mi(&samples, 1, false), Err(MiError::Dimension { index: 1, dim: 1 }));
    }
}
