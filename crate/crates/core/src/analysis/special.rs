//! Negative-binomial waiting times and the regularized incomplete beta function.

use crate::error::{Error, Result};

fn check_probability(q: f64) -> Result<()> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::ProbabilityDomain(q))
    }
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// ln C(n, k). Exact-ish summation when the smaller side is short, Lanczos otherwise.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    if k <= 64 {
        (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
    } else {
        ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    }
}

/// P(T = t) for the trial `T` of the `m`-th success in Bernoulli(`q`) trials.
pub fn negbin_pmf(t: u64, m: u32, q: f64) -> Result<f64> {
    check_probability(q)?;
    let m = m as u64;
    if t < m || m == 0 {
        return Ok(0.0);
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    if q == 1.0 {
        return Ok(if t == m { 1.0 } else { 0.0 });
    }
    let ln = ln_binomial(t - 1, m - 1) + m as f64 * q.ln() + (t - m) as f64 * (-q).ln_1p();
    Ok(ln.exp())
}

/// P(T > t) = 1 - I_q(m, t - m + 1), evaluated as the binomial tail
/// P(Bin(t, q) <= m - 1), which for integer parameters is an `m`-term sum.
pub fn negbin_ccdf(t: u64, m: u32, q: f64) -> Result<f64> {
    check_probability(q)?;
    let m = m as u64;
    if t < m {
        return Ok(1.0);
    }
    if q == 0.0 {
        return Ok(1.0);
    }
    if q == 1.0 {
        return Ok(0.0);
    }
    let (lq, lp) = (q.ln(), (-q).ln_1p());
    let sum = (0..m)
        .map(|j| (ln_binomial(t, j) + j as f64 * lq + (t - j) as f64 * lp).exp())
        .sum::<f64>();
    Ok(sum.min(1.0))
}

/// Regularized incomplete beta function I_x(a, b) for real a, b > 0, by the
/// modified Lentz continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    check_probability(x)?;
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter {
            name: "beta shape",
            reason: format!("a = {a}, b = {b} must both be positive"),
        });
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    // The fraction converges fast for x < (a + 1) / (a + b + 2); use symmetry otherwise.
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(ln_front.exp() * beta_cf(x, a, b)? / a)
    } else {
        Ok(1.0 - ln_front.exp() * beta_cf(1.0 - x, b, a)? / b)
    }
}

fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 100_000;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::NonConvergent(format!(
        "incomplete beta continued fraction at x = {x}, a = {a}, b = {b}"
    )))
}
