//! McNemar's paired significance test over discordant counts.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Paired correctness counts for two systems on identical instances.
///
/// Only trials answered by both systems contribute. `first_only` (b) and
/// `second_only` (c) are the discordant counts the test runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContingencyTable {
    /// a: both systems correct.
    pub both_correct: u64,
    /// b: only the first system correct.
    pub first_only: u64,
    /// c: only the second system correct.
    pub second_only: u64,
    /// d: both systems wrong.
    pub both_wrong: u64,
}

impl ContingencyTable {
    pub fn new(both_correct: u64, first_only: u64, second_only: u64, both_wrong: u64) -> Self {
        Self {
            both_correct,
            first_only,
            second_only,
            both_wrong,
        }
    }

    pub fn total(&self) -> u64 {
        self.both_correct + self.first_only + self.second_only + self.both_wrong
    }
}

/// Exact two-sided binomial p for the discordant pair under H0: b ~ Bin(b+c, 1/2).
///
/// Reported alongside the chi-square approximation in the small-sample
/// regime, where the continuity-corrected statistic is least reliable.
pub const EXACT_REPORT_LIMIT: u64 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McnemarResult {
    /// Continuity-corrected chi-square statistic, (|b - c| - 1)^2 / (b + c).
    pub statistic: f64,
    /// Upper tail of chi-square with 1 degree of freedom at the statistic.
    pub p_value: f64,
    /// Exact binomial p, present when b + c < EXACT_REPORT_LIMIT.
    pub exact_p: Option<f64>,
}

/// Continuity-corrected McNemar test. A table with no disagreements is the
/// degenerate no-evidence case: statistic 0, p = 1.
pub fn mcnemar(table: &ContingencyTable) -> McnemarResult {
    let b = table.first_only;
    let c = table.second_only;
    let n = b + c;
    if n == 0 {
        return McnemarResult {
            statistic: 0.0,
            p_value: 1.0,
            exact_p: Some(1.0),
        };
    }
    let diff = b.abs_diff(c) as f64;
    let statistic = (diff - 1.0).powi(2) / n as f64;
    let p_value = chi_square_upper_tail_1df(statistic);
    let exact_p = (n < EXACT_REPORT_LIMIT).then(|| exact_binomial_p(b, c));
    McnemarResult {
        statistic,
        p_value,
        exact_p,
    }
}

fn chi_square_upper_tail_1df(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(1.0)
        .expect("1 degree of freedom is valid")
        .sf(x)
}

fn exact_binomial_p(b: u64, c: u64) -> f64 {
    let n = b + c;
    let k = b.min(c);
    // Lower tail of Bin(n, 1/2) up to k, doubled for the two-sided test.
    let mut coeff = 1.0f64; // C(n, 0)
    let mut tail = coeff;
    for i in 1..=k {
        coeff *= (n - i + 1) as f64 / i as f64;
        tail += coeff;
    }
    (2.0 * tail * 0.5f64.powi(n as i32)).min(1.0)
}
