use super::{clamp_unit, Result, StatsError, TestResult};
use crate::scalar::Real;

/// `ln C(n, s)` as a running sum of `ln((n - s + j) / j)`.
fn ln_choose<T: Real>(n: usize, s: usize) -> T {
    let s = s.min(n - s);
    (1..=s).fold(T::zero(), |acc, j| acc + (T::of_usize(n - s + j) / T::of_usize(j)).ln())
}

/// One-sided exact binomial test: `P(X >= successes)` for `X ~ Bin(trials, p0)`.
pub fn binomial_test_greater<T: Real>(successes: usize, trials: usize, p0: T) -> Result<TestResult<T>> {
    if trials == 0 {
        return Err(StatsError::InvalidArgument("trials must be at least 1".into()));
    }
    if successes > trials {
        return Err(StatsError::InvalidArgument(format!("{successes} successes out of {trials} trials")));
    }
    if !(p0 > T::zero() && p0 < T::one()) {
        return Err(StatsError::InvalidArgument(format!("p0 = {p0} outside (0, 1)")));
    }
    let stat = T::of_usize(successes) / T::of_usize(trials);
    let done = |p: T| TestResult { statistic: stat, p_value: clamp_unit(p), n_source: successes, n_target: trials };
    if successes == 0 {
        return Ok(done(T::one()));
    }
    let (lp, lq) = (p0.ln(), (T::one() - p0).ln());
    let odds = lp - lq;
    // Log-pmf at i, advanced by the ratio pmf(i+1)/pmf(i).
    let mut terms = Vec::with_capacity(trials - successes + 1);
    let mut l = ln_choose::<T>(trials, successes) + T::of_usize(successes) * lp + T::of_usize(trials - successes) * lq;
    terms.push(l);
    for i in successes..trials {
        l += (T::of_usize(trials - i) / T::of_usize(i + 1)).ln() + odds;
        terms.push(l);
    }
    let max = terms.iter().copied().fold(T::neg_infinity(), T::max);
    let sum = terms.iter().fold(T::zero(), |acc, &t| acc + (t - max).exp());
    Ok(done((max + sum.ln()).exp()))
}
