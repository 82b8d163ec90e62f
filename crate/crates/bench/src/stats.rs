//! Normal-approximation intervals and the paired sign test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

/// Fewest samples for which a normal-approximation interval is reported.
pub const MIN_SAMPLES_FOR_CI: usize = 30;

const Z95: f64 = 1.96;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean from the unbiased sample variance.
pub fn std_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// `1.96 * stderr`, or `None` below [`MIN_SAMPLES_FOR_CI`] samples.
pub fn ci95_halfwidth(xs: &[f64]) -> Option<f64> {
    (xs.len() >= MIN_SAMPLES_FOR_CI).then(|| Z95 * std_error(xs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// Two-sided exact binomial p-value over the non-tied pairs.
    pub p_value: f64,
}

pub fn sign_test(a: &[f64], b: &[f64]) -> SignTest {
    assert_eq!(a.len(), b.len(), "sign test needs paired samples");
    let (mut wins, mut losses, mut ties) = (0, 0, 0);
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Greater) => wins += 1,
            Some(std::cmp::Ordering::Less) => losses += 1,
            _ => ties += 1,
        }
    }
    let n = (wins + losses) as u64;
    let p_value = if n == 0 {
        1.0
    } else {
        let binom = Binomial::new(0.5, n).expect("valid binomial");
        (2.0 * binom.cdf(wins.min(losses) as u64)).min(1.0)
    };
    SignTest {
        wins,
        losses,
        ties,
        p_value,
    }
}

/// Mean of `a - b` over pairs with its normal-approximation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    pub mean: f64,
    pub ci95_halfwidth: Option<f64>,
}

impl PairedDifference {
    pub fn new(a: &[f64], b: &[f64]) -> Self {
        assert_eq!(a.len(), b.len(), "paired difference needs paired samples");
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        Self {
            mean: mean(&d),
            ci95_halfwidth: ci95_halfwidth(&d),
        }
    }

    /// Whether the interval lies strictly above zero.
    pub fn positive_at_95(&self) -> bool {
        self.ci95_halfwidth.is_some_and(|h| self.mean - h > 0.0)
    }

    /// Whether the interval does not lie strictly below zero.
    pub fn non_negative_at_95(&self) -> bool {
        self.ci95_halfwidth.is_some_and(|h| self.mean + h >= 0.0)
    }
}
