//! Aggregates over seeds and the paired Wilcoxon signed-rank test.

use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub std: f64,
    pub sem: f64,
    pub median: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    let m = mean(values);
    let std = if n > 1 {
        (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Summary {
        n,
        mean: m,
        std,
        sem: if n > 0 { std / (n as f64).sqrt() } else { f64::NAN },
        median: median(values),
    }
}

/// Beyond this many nonzero differences the normal approximation is used.
const EXACT_LIMIT: usize = 60;

/// One-sided p-value for `H1: x - y` is shifted above zero. Zero differences are dropped
/// and ties share mid-ranks; the null distribution is enumerated exactly for small samples.
pub fn wilcoxon_greater(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "paired samples");
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return 1.0;
    }
    let ranks = doubled_midranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let w_plus: u64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| *r).sum();
    if n <= EXACT_LIMIT {
        // counts[s] = number of sign assignments with doubled positive-rank sum s.
        let total: u64 = ranks.iter().sum();
        let mut counts = vec![0f64; total as usize + 1];
        counts[0] = 1.0;
        for &r in &ranks {
            for s in (r as usize..counts.len()).rev() {
                counts[s] += counts[s - r as usize];
            }
        }
        let tail: f64 = counts[w_plus as usize..].iter().sum();
        tail / counts.iter().sum::<f64>()
    } else {
        let w = w_plus as f64 / 2.0;
        let nf = n as f64;
        let mu = nf * (nf + 1.0) / 4.0;
        let half: Vec<f64> = ranks.iter().map(|r| *r as f64 / 2.0).collect();
        let sigma = (half.iter().map(|r| r * r).sum::<f64>() / 4.0).sqrt();
        let z = (w - mu - 0.5) / sigma;
        1.0 - Normal::standard().cdf(z)
    }
}

/// Twice the mid-rank of each absolute value, so that tied ranks stay integral.
fn doubled_midranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j hold ranks i+1..=j+1; twice their mean is i + j + 2.
        for &k in &order[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        i = j + 1;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_values() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(s.median, 2.5);
        assert_eq!(summarize(&[7.0]).std, 0.0);
    }

    #[test]
    fn all_positive_differences_give_the_smallest_p() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 + 10.0).collect();
        let y = vec![0.0; 20];
        assert!((wilcoxon_greater(&x, &y) - 0.5f64.powi(20)).abs() < 1e-18);
        assert!((wilcoxon_greater(&y, &x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_exact_case() {
        // d = [1, -2, 3] has W+ = 4; compare with brute-force enumeration of the signs.
        let p = wilcoxon_greater(&[1.0, -2.0, 3.0], &[0.0, 0.0, 0.0]);
        let mut hits = 0;
        for mask in 0..8u32 {
            let w: u32 = (0..3).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum();
            hits += u32::from(w >= 4);
        }
        assert_eq!(p, hits as f64 / 8.0);
    }

    #[test]
    fn ties_use_midranks() {
        assert_eq!(doubled_midranks(&[2.0, 1.0, 2.0, 5.0]), vec![5, 2, 5, 8]);
        let p = wilcoxon_greater(&[1.0, 1.0, -1.0], &[0.0; 3]);
        // Ranks 2,2,2: W+ >= 4 means at least two positives, 4 of 8 patterns.
        assert_eq!(p, 0.5);
    }

    #[test]
    fn normal_approximation_is_close_to_exact() {
        let x: Vec<f64> = (0..60).map(|i| ((i * 37) % 17) as f64 - 6.0 + 0.01 * i as f64).collect();
        let y = vec![0.0; 60];
        let exact = wilcoxon_greater(&x, &y);
        let x2: Vec<f64> = x.iter().chain(x.iter()).copied().collect();
        let approx = wilcoxon_greater(&x2, &[0.0; 120]);
        assert!(exact > 0.0 && exact < 1.0);
        assert!(approx < exact, "doubling the sample sharpens the test");
    }
}
