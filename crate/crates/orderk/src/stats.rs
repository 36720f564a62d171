//! Goodness-of-fit machinery: chi-square tests with adjacent-bin pooling and
//! binomial proportion intervals.
//!
//! The chi-square p-value is computed from the regularized incomplete gamma
//! function implemented here (series branch for `x < a + 1`, Lentz continued
//! fraction otherwise), so the tests carry no external numerics dependency.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactdist::Pmf;

/// Default minimum expected count per pooled bin.
pub const DEFAULT_MIN_EXPECTED: f64 = 5.0;

/// Outcome of a chi-square goodness-of-fit test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofResult {
    pub statistic: f64,
    pub degrees_of_freedom: u64,
    pub p_value: f64,
    /// Number of bins after pooling.
    pub bins: usize,
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub(crate) fn ln_gamma(x: f64) -> f64 {
    // Reference coefficients kept verbatim; the extra digits round away.
    #[allow(clippy::excessive_precision)]
    const COEF: [f64; 8] = [
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    debug_assert!(x > 0.0);
    let z = x - 1.0;
    #[allow(clippy::excessive_precision)]
    let mut acc = 0.999_999_999_999_809_93;
    for (k, c) in COEF.iter().enumerate() {
        acc += c / (z + k as f64 + 1.0);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma `P(a, x)` for `a > 0`, `x >= 0`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "gamma_p requires a > 0, x >= 0");
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "gamma_q requires a > 0, x >= 0");
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Standard normal quantile (Acklam's rational approximation, relative error
/// below 1.2e-9 over (0, 1)).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile requires p in (0, 1)");
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

/// Point estimate and confidence halfwidth for a binomial proportion
/// (normal approximation, halfwidth clipped into `[0, 1]`).
pub fn proportion_ci(successes: u64, trials: u64, level: f64) -> (f64, f64) {
    assert!(trials > 0, "proportion_ci requires at least one trial");
    assert!(level > 0.0 && level < 1.0, "level must be in (0, 1)");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = normal_quantile(0.5 + level / 2.0);
    let hw = (z * (p * (1.0 - p) / n).sqrt()).clamp(0.0, 1.0);
    (p, hw)
}

struct PooledBin {
    observed: f64,
    expected: f64,
}

/// One-sample chi-square test of integer-valued observations against an exact
/// distribution. Adjacent support values are pooled left to right until each
/// bin's expected count reaches `min_expected`; mass above the table support
/// (`tail_bound`) is pooled into the final bin, as are observations beyond it.
pub fn chi_square_one_sample(
    counts: &BTreeMap<u64, u64>,
    expected: &Pmf,
    min_expected: f64,
) -> Result<GofResult> {
    let n_total: u64 = counts.values().sum();
    if n_total < 100 {
        return Err(Error::Degenerate(format!(
            "one-sample test needs at least 100 observations, got {n_total}"
        )));
    }
    let n = n_total as f64;
    let n_max = expected.n_max();

    let mut bins: Vec<PooledBin> = Vec::new();
    let mut acc_obs = 0.0;
    let mut acc_exp = 0.0;
    for v in 0..=n_max {
        acc_obs += counts.get(&v).copied().unwrap_or(0) as f64;
        acc_exp += n * expected.prob(v);
        if acc_exp >= min_expected {
            bins.push(PooledBin {
                observed: acc_obs,
                expected: acc_exp,
            });
            acc_obs = 0.0;
            acc_exp = 0.0;
        }
    }
    // Final bin: leftover accumulation, the certified tail mass, and any
    // observations beyond the table support.
    let beyond: u64 = counts.range(n_max + 1..).map(|(_, c)| c).sum();
    acc_obs += beyond as f64;
    acc_exp += n * expected.tail_bound();
    if acc_exp > 0.0 || acc_obs > 0.0 {
        bins.push(PooledBin {
            observed: acc_obs,
            expected: acc_exp,
        });
    }
    while bins.len() > 1 && bins.last().map(|b| b.expected < min_expected) == Some(true) {
        let last = bins.pop().expect("nonempty");
        let prev = bins.last_mut().expect("nonempty");
        prev.observed += last.observed;
        prev.expected += last.expected;
    }
    finish_chi_square(&bins)
}

/// Two-sample chi-square test that two integer-valued samples share a common
/// law. Bins are adjacent support values pooled until the expected count under
/// the pooled margins reaches `min_expected` in both samples.
pub fn chi_square_two_sample(
    counts_a: &BTreeMap<u64, u64>,
    counts_b: &BTreeMap<u64, u64>,
    min_expected: f64,
) -> Result<GofResult> {
    let n_a: u64 = counts_a.values().sum();
    let n_b: u64 = counts_b.values().sum();
    if n_a < 100 || n_b < 100 {
        return Err(Error::Degenerate(format!(
            "two-sample test needs at least 100 observations per sample, got {n_a} and {n_b}"
        )));
    }
    let total = (n_a + n_b) as f64;
    let (fa, fb) = (n_a as f64 / total, n_b as f64 / total);
    let min_frac = fa.min(fb);

    let mut values: Vec<u64> = counts_a.keys().chain(counts_b.keys()).copied().collect();
    values.sort_unstable();
    values.dedup();

    // Pool so that column_total * min_frac >= min_expected, which bounds the
    // expected count in the smaller sample from below.
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc_a = 0.0;
    let mut acc_b = 0.0;
    for v in values {
        acc_a += counts_a.get(&v).copied().unwrap_or(0) as f64;
        acc_b += counts_b.get(&v).copied().unwrap_or(0) as f64;
        if (acc_a + acc_b) * min_frac >= min_expected {
            pooled.push((acc_a, acc_b));
            acc_a = 0.0;
            acc_b = 0.0;
        }
    }
    if acc_a + acc_b > 0.0 {
        pooled.push((acc_a, acc_b));
    }
    while pooled.len() > 1
        && pooled.last().map(|&(a, b)| (a + b) * min_frac < min_expected) == Some(true)
    {
        let (la, lb) = pooled.pop().expect("nonempty");
        let prev = pooled.last_mut().expect("nonempty");
        prev.0 += la;
        prev.1 += lb;
    }
    if pooled.len() < 2 {
        return Err(Error::Degenerate(format!(
            "pooling left {} bin(s); need at least 2",
            pooled.len()
        )));
    }

    let mut statistic = 0.0;
    for &(oa, ob) in &pooled {
        let col = oa + ob;
        let ea = col * fa;
        let eb = col * fb;
        statistic += (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb;
    }
    let df = (pooled.len() - 1) as u64;
    Ok(GofResult {
        statistic,
        degrees_of_freedom: df,
        p_value: gamma_q(df as f64 / 2.0, statistic / 2.0),
        bins: pooled.len(),
    })
}

fn finish_chi_square(bins: &[PooledBin]) -> Result<GofResult> {
    if bins.len() < 2 {
        return Err(Error::Degenerate(format!(
            "pooling left {} bin(s); need at least 2",
            bins.len()
        )));
    }
    let mut statistic = 0.0;
    for b in bins {
        debug_assert!(b.expected > 0.0);
        statistic += (b.observed - b.expected).powi(2) / b.expected;
    }
    let df = (bins.len() - 1) as u64;
    Ok(GofResult {
        statistic,
        degrees_of_freedom: df,
        p_value: gamma_q(df as f64 / 2.0, statistic / 2.0),
        bins: bins.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn incomplete_gamma_pins_known_values() {
        // P(1, x) = 1 - e^{-x}
        assert_relative_eq!(gamma_p(1.0, 2.0), 1.0 - (-2.0f64).exp(), epsilon = 1e-14);
        // Chi-square with 2 df: Q(1, x/2) = e^{-x/2}
        assert_relative_eq!(gamma_q(1.0, 1.5), (-1.5f64).exp(), epsilon = 1e-14);
        // Median-ish point of chi-square_1: Q(1/2, 1/2) = erfc(1/sqrt(2))
        assert_relative_eq!(gamma_q(0.5, 0.5), 0.317_310_507_862_914, epsilon = 1e-12);
        assert_eq!(gamma_p(3.0, 0.0), 0.0);
        assert_eq!(gamma_q(3.0, 0.0), 1.0);
    }

    #[test]
    fn p_and_q_are_complementary() {
        for &a in &[0.5, 1.0, 2.5, 10.0, 50.0] {
            for &x in &[0.1, 1.0, 5.0, 25.0, 80.0] {
                assert_relative_eq!(gamma_p(a, x) + gamma_q(a, x), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn normal_quantile_matches_reference_points() {
        assert_relative_eq!(normal_quantile(0.975), 1.959_963_984_540_054, epsilon = 1e-8);
        assert_relative_eq!(normal_quantile(0.5), 0.0, epsilon = 1e-9);
        assert_relative_eq!(
            normal_quantile(0.025),
            -1.959_963_984_540_054,
            epsilon = 1e-8
        );
        assert_relative_eq!(normal_quantile(0.995), 2.575_829_303_548_901, epsilon = 1e-8);
    }

    #[test]
    fn proportion_ci_pins_hand_computed_case() {
        let (p, hw) = proportion_ci(444, 1000, 0.95);
        assert_eq!(p, 0.444);
        let z = 1.959_963_984_540_054;
        assert_relative_eq!(hw, z * (0.444f64 * 0.556 / 1000.0).sqrt(), epsilon = 1e-9);
        assert_relative_eq!(hw, 0.030_795, epsilon = 2e-5);
    }

    #[test]
    fn proportion_ci_degenerate_extremes_have_zero_halfwidth() {
        let (p, hw) = proportion_ci(1000, 1000, 0.95);
        assert_eq!(p, 1.0);
        assert_eq!(hw, 0.0);
        let (p, hw) = proportion_ci(0, 1000, 0.95);
        assert_eq!(p, 0.0);
        assert_eq!(hw, 0.0);
    }
}
