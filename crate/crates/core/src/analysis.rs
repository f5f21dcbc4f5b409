//! Entropies, the correction probability, the asymptotic six-state rate, the
//! diamond-norm bound and the key-expenditure arithmetic.
//!
//! Bound terms are handled in log2: `(n+1)^15` and `2^-kappa` leave the range
//! of `f64` long before `n` reaches 10^4.

use serde::{Deserialize, Serialize};

use crate::primitives::{correctable_errors, Encoding};
use crate::{Error, Result};

/// Exponent of the post-selection factor `(n+1)^(d^2 - 1)` for qubits.
pub const POSTSELECTION_EXPONENT: f64 = 15.0;

fn plogp(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// `h(p) = p log 1/p + (1-p) log 1/(1-p)`, base 2.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfDomain {
            name: "p",
            value: p,
            domain: "[0, 1]",
        });
    }
    Ok(plogp(p) + plogp(1.0 - p))
}

/// `sum_i p_i log 1/p_i`, base 2.
pub fn entropy_multi(probabilities: &[f64]) -> Result<f64> {
    if let Some(&p) = probabilities.iter().find(|&&p| p.is_nan() || p < 0.0) {
        return Err(Error::InvalidDistribution(format!("invalid probability {p}")));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
    }
    Ok(probabilities.iter().map(|&p| plogp(p)).sum())
}

/// `h({1 - 3g/2, g/2, g/2, g/2})`: entropy of the Bell-diagonal state
/// of a six-state channel with bit error rate `g`.
pub fn six_state_entropy(gamma: f64) -> Result<f64> {
    if !(0.0..=2.0 / 3.0).contains(&gamma) {
        return Err(Error::OutOfDomain {
            name: "gamma",
            value: gamma,
            domain: "[0, 2/3]",
        });
    }
    let half = gamma / 2.0;
    entropy_multi(&[1.0 - 1.5 * gamma, half, half, half])
}

/// `log2 P_corr(n, beta, gamma)`; `-inf` when correction is impossible.
pub fn log2_p_corr(n: usize, beta: f64, gamma: f64) -> f64 {
    let cmax = correctable_errors(n, beta).min(n);
    if gamma <= 0.0 {
        return 0.0;
    }
    if gamma >= 1.0 {
        return if cmax == n { 0.0 } else { f64::NEG_INFINITY };
    }
    if cmax == n {
        return 0.0;
    }
    // ln of C(n,c) g^c (1-g)^(n-c), built up incrementally in c.
    let ln_ratio = gamma.ln() - (-gamma).ln_1p();
    let mut ln_term = n as f64 * (-gamma).ln_1p();
    let mut ln_terms = Vec::with_capacity(cmax + 1);
    ln_terms.push(ln_term);
    for c in 1..=cmax {
        ln_term += ((n - c + 1) as f64 / c as f64).ln() + ln_ratio;
        ln_terms.push(ln_term);
    }
    let peak = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Kahan summation of the rescaled terms.
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for t in &ln_terms {
        let y = (t - peak).exp() - carry;
        let s = sum + y;
        carry = (s - sum) - y;
        sum = s;
    }
    ((peak + sum.ln()) / std::f64::consts::LN_2).min(0.0)
}

/// `P_corr(n, beta, gamma) = sum_{c=0}^{floor(n beta)} C(n,c) g^c (1-g)^(n-c)`.
pub fn p_corr(n: usize, beta: f64, gamma: f64) -> f64 {
    log2_p_corr(n, beta, gamma).exp2()
}

/// `1 - h({1 - 3g/2, g/2, g/2, g/2})`.
pub fn asymptotic_rate_6state(gamma: f64) -> Result<f64> {
    if !(0.0..2.0 / 3.0).contains(&gamma) {
        return Err(Error::OutOfDomain {
            name: "gamma",
            value: gamma,
            domain: "[0, 2/3)",
        });
    }
    Ok(1.0 - six_state_entropy(gamma)?)
}

/// Rate for a given encoding. Only the six-state expression is available.
pub fn asymptotic_rate(encoding: Encoding, gamma: f64) -> Result<f64> {
    match encoding {
        Encoding::SixState => asymptotic_rate_6state(gamma),
        Encoding::Bb84 => Err(Error::UnsupportedFormula("BB84 encoding")),
    }
}

/// Bit error rate at which the six-state rate reaches zero, by bisection on
/// `[0, 1/2]` (the rate decreases monotonically there).
pub fn rate_threshold_6state(tolerance: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if asymptotic_rate_6state(mid).expect("mid is in the domain") > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityBudget {
    /// Target security level in bits.
    pub alpha: f64,
    pub lambda: usize,
    pub n: usize,
    pub kappa: usize,
    pub gamma: f64,
    pub beta: f64,
    pub q_bits: usize,
}

impl SecurityBudget {
    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_nan() || self.alpha < 1.0 {
            return Err(Error::param("alpha", format!("{} is below 1", self.alpha)));
        }
        if !(0.0..0.5).contains(&self.gamma) {
            return Err(Error::OutOfDomain {
                name: "gamma",
                value: self.gamma,
                domain: "[0, 1/2)",
            });
        }
        if !(0.0..=0.5).contains(&self.beta) {
            return Err(Error::OutOfDomain {
                name: "beta",
                value: self.beta,
                domain: "[0, 1/2]",
            });
        }
        if self.n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        if self.kappa > self.n {
            return Err(Error::param("kappa", format!("{} exceeds n = {}", self.kappa, self.n)));
        }
        Ok(())
    }
}

/// Terms of `2^(-lambda+1) + (n+1)^15 [ 1/(2 sqrt|Q|) + min(P_corr, A) ]`
/// with the accept term `A = 1/2 * 2^((-kappa + n h4(g) - n h(g)) / 2)` in its
/// asymptotic (zero smoothing) form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `-lambda + 1`.
    pub log2_tag: f64,
    /// `15 log2(n+1) - 1 - q_bits/2`.
    pub log2_reject: f64,
    /// `15 log2(n+1) + min(log2 P_corr, log2 A)`.
    pub log2_accept: f64,
    /// `log2 A`, uncapped and without the post-selection factor.
    pub log2_accept_asymptotic: f64,
    pub log2_p_corr: f64,
    /// `log2` of the sum of the three terms, not clamped.
    pub log2_total: f64,
    /// The sum clamped to `[0, 1]`.
    pub total: f64,
}

/// `log2(2^a + 2^b + ...)` without leaving the log domain.
pub fn log2_sum(terms: &[f64]) -> f64 {
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return peak;
    }
    let scaled: f64 = terms.iter().map(|t| (t - peak).exp2()).sum();
    peak + scaled.log2()
}

pub fn diamond_bound(budget: &SecurityBudget) -> Result<BoundReport> {
    budget.validate()?;
    let n = budget.n as f64;
    let postselection = POSTSELECTION_EXPONENT * (n + 1.0).log2();
    let log2_tag = 1.0 - budget.lambda as f64;
    let log2_reject = postselection - 1.0 - budget.q_bits as f64 / 2.0;
    let h4 = six_state_entropy(budget.gamma)?;
    let h = binary_entropy(budget.gamma)?;
    let log2_accept_asymptotic = -1.0 + (-(budget.kappa as f64) + n * h4 - n * h) / 2.0;
    let log2_p_corr = log2_p_corr(budget.n, budget.beta, budget.gamma);
    let log2_accept = postselection + log2_p_corr.min(log2_accept_asymptotic);
    let log2_total = log2_sum(&[log2_tag, log2_reject, log2_accept]);
    Ok(BoundReport {
        log2_tag,
        log2_reject,
        log2_accept,
        log2_accept_asymptotic,
        log2_p_corr,
        log2_total,
        total: log2_total.exp2().min(1.0),
    })
}

/// Smallest integer `log2|Q|` strictly above `30 log2(n+1) - 2 + 2 alpha`.
pub fn min_q_bits(n: usize, alpha: u32) -> u64 {
    let bound = 2.0 * POSTSELECTION_EXPONENT * ((n + 1) as f64).log2() - 2.0 + 2.0 * alpha as f64;
    bound.floor() as u64 + 1
}

/// Reservoir bits drawn per Reject: `n + lambda + q_bits`.
pub fn reject_expenditure(n: usize, lambda: usize, q_bits: usize) -> u64 {
    (n + lambda + q_bits) as u64
}

/// Closed-form Reject expenditure `n - 1 + 30 log2(n+1) + lambda + 2 alpha`.
pub fn reject_expenditure_closed_form(n: usize, lambda: usize, alpha: u32) -> f64 {
    n as f64 - 1.0 + 30.0 * ((n + 1) as f64).log2() + lambda as f64 + 2.0 * alpha as f64
}

/// Asymptotic error-correction redundancy `n h(gamma)`.
pub fn required_redundancy(n: usize, gamma: f64) -> Result<f64> {
    Ok(n as f64 * binary_entropy(gamma)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Sum over all 2^n error patterns of weight <= floor(n beta).
    fn p_corr_by_enumeration(n: usize, beta: f64, gamma: f64) -> f64 {
        let cmax = correctable_errors(n, beta);
        (0u32..1 << n)
            .filter(|e| e.count_ones() as usize <= cmax)
            .map(|e| {
                let w = e.count_ones() as i32;
                gamma.powi(w) * (1.0 - gamma).powi(n as i32 - w)
            })
            .sum()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(entropy_multi(&[0.25; 4]).unwrap(), 2.0);
        assert!(binary_entropy(1.1).is_err());
        assert!(entropy_multi(&[0.5, 0.6]).is_err());
        assert!(entropy_multi(&[1.5, -0.5]).is_err());
    }

    #[test]
    fn p_corr_examples() {
        assert_eq!(p_corr(100, 0.1, 0.0), 1.0);
        assert!((p_corr(50, 0.0, 0.1) - 0.9f64.powi(50)).abs() < 1e-15);
        // Weight-0 pattern 0.729 plus three weight-1 patterns 0.081 each.
        assert!((p_corr(3, 1.0 / 3.0, 0.1) - 0.972).abs() < 1e-12);
        assert_eq!(log2_p_corr(10, 0.2, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn p_corr_matches_enumeration() {
        for n in 1..=12 {
            for beta in [0.0, 0.1, 0.125, 0.25, 1.0 / 3.0, 0.5] {
                for gamma in [0.05, 0.1, 0.25] {
                    let direct = p_corr(n, beta, gamma);
                    let brute = p_corr_by_enumeration(n, beta, gamma);
                    assert!((direct - brute).abs() < 1e-12, "n={n} beta={beta} gamma={gamma}");
                }
            }
        }
    }

    #[test]
    fn p_corr_monotonicity() {
        let grid = [0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.45];
        for n in [8, 64, 500] {
            for w in grid.windows(2) {
                for &g in &grid[1..] {
                    assert!(p_corr(n, w[1], g) >= p_corr(n, w[0], g) - 1e-12);
                }
                for &b in &grid {
                    assert!(p_corr(n, b, w[1]) <= p_corr(n, b, w[0]) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn p_corr_stays_finite_for_large_n() {
        let lp = log2_p_corr(100_000, 0.05, 0.2);
        assert!(lp.is_finite() && lp < -1000.0);
    }

    #[test]
    fn rate_examples() {
        assert_eq!(asymptotic_rate_6state(0.0).unwrap(), 1.0);
        let r05 = asymptotic_rate_6state(0.05).unwrap();
        assert!(r05 > 0.0 && r05 < asymptotic_rate_6state(0.01).unwrap());
        assert!(asymptotic_rate_6state(0.7).is_err());
        assert_eq!(
            asymptotic_rate(Encoding::Bb84, 0.01),
            Err(Error::UnsupportedFormula("BB84 encoding"))
        );
    }

    #[test]
    fn rate_matches_literal_entropy_definition() {
        for i in 0..60 {
            let g = i as f64 * 0.01;
            let p = [1.0 - 1.5 * g, g / 2.0, g / 2.0, g / 2.0];
            let literal: f64 = p
                .iter()
                .filter(|&&x| x > 0.0)
                .map(|&x| x * (1.0 / x).log2())
                .sum();
            assert!((asymptotic_rate_6state(g).unwrap() - (1.0 - literal)).abs() < 1e-14);
        }
    }

    #[test]
    fn threshold_is_near_twelve_point_six_percent() {
        let t = rate_threshold_6state(1e-12);
        assert!((t - 0.1262).abs() < 1e-4, "{t}");
    }

    #[test]
    fn min_q_bits_examples() {
        assert_eq!(min_q_bits(1024, 64), 427);
        assert_eq!(min_q_bits(1, 1), 31);
        assert_eq!(min_q_bits(1024, 74) - min_q_bits(1024, 64), 20);
    }

    #[test]
    fn min_q_bits_brackets_the_security_target() {
        for n in [1, 2, 3, 7, 100, 1024, 5000, 65535] {
            for alpha in [1, 8, 32, 64, 128] {
                let q = min_q_bits(n, alpha) as f64;
                let lhs = 15.0 * ((n + 1) as f64).log2() - 1.0;
                assert!(lhs - q / 2.0 < -(alpha as f64));
                assert!(-(alpha as f64) <= lhs - (q - 1.0) / 2.0 + 1e-9);
            }
        }
    }

    #[test]
    fn expenditure_examples() {
        assert_eq!(reject_expenditure(1024, 64, 427), 1515);
        let closed = reject_expenditure_closed_form(1024, 64, 64);
        assert!((closed - 1515.04).abs() < 0.01, "{closed}");
        assert_eq!(reject_expenditure(77, 0, 0), 77);
    }

    #[test]
    fn redundancy_examples() {
        assert_eq!(required_redundancy(1000, 0.0).unwrap(), 0.0);
        assert_eq!(required_redundancy(1000, 0.5).unwrap(), 1000.0);
        // h(0.11) = 0.4999157..., from the series definition at high precision.
        assert!((required_redundancy(1000, 0.11).unwrap() - 499.9157).abs() < 1e-3);
    }

    fn budget() -> SecurityBudget {
        SecurityBudget {
            alpha: 64.0,
            lambda: 66,
            n: 1024,
            kappa: 0,
            gamma: 0.0,
            beta: 0.1,
            q_bits: 427,
        }
    }

    #[test]
    fn bound_meets_target_with_recommended_sizing() {
        let n = 1024usize;
        let alpha = 64u32;
        let postsel = 15.0 * ((n + 1) as f64).log2();
        let b = SecurityBudget {
            kappa: (2.0 * (alpha as f64 + postsel)).ceil() as usize,
            q_bits: min_q_bits(n, alpha) as usize,
            lambda: alpha as usize + 2,
            ..budget()
        };
        let report = diamond_bound(&b).unwrap();
        assert!(report.log2_total <= -(alpha as f64) + 2.0, "{report:?}");
        assert_eq!(report.log2_reject, postsel - 1.0 - b.q_bits as f64 / 2.0);
        assert_eq!(report.log2_tag, -65.0);
    }

    #[test]
    fn reject_term_vanishes_with_large_q() {
        let small = diamond_bound(&budget()).unwrap();
        let large = diamond_bound(&SecurityBudget { q_bits: 100_000, ..budget() }).unwrap();
        assert!(large.log2_reject < small.log2_reject - 49_000.0);
    }

    #[test]
    fn accept_term_slope_in_n() {
        let gamma = 0.05;
        let slope = (six_state_entropy(gamma).unwrap() - binary_entropy(gamma).unwrap()) / 2.0;
        assert!(slope > 0.0);
        let at = |n| {
            diamond_bound(&SecurityBudget { n, kappa: 0, gamma, ..budget() })
                .unwrap()
                .log2_accept_asymptotic
        };
        assert!(((at(2000) - at(1000)) / 1000.0 - slope).abs() < 1e-12);
    }

    #[test]
    fn total_dominates_each_term() {
        for gamma in [0.0, 0.02, 0.08, 0.2] {
            for n in [16, 256, 4096, 20_000] {
                let r = diamond_bound(&SecurityBudget { n, gamma, kappa: n / 4, ..budget() }).unwrap();
                for t in [r.log2_tag, r.log2_reject, r.log2_accept] {
                    assert!(t.is_finite());
                    assert!(r.log2_total >= t);
                }
                assert!((0.0..=1.0).contains(&r.total));
            }
        }
    }

    #[test]
    fn budget_validation() {
        assert!(diamond_bound(&SecurityBudget { gamma: 0.5, ..budget() }).is_err());
        assert!(diamond_bound(&SecurityBudget { alpha: 0.5, ..budget() }).is_err());
        assert!(diamond_bound(&SecurityBudget { kappa: 2000, ..budget() }).is_err());
    }
}
