//! Skellam distribution kernel: truncated modified-Bessel series in log
//! space, log-pmf, per-dyad negative log-likelihood with derivatives, and
//! Poisson / Skellam samplers.

use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};

/// Number of series terms kept for `I_nu(x)`.
pub const BESSEL_TERMS: usize = 50;

/// Rates below this are clamped before taking logs.
pub const RATE_FLOOR: f64 = 1e-30;

/// Poisson sampler switches from inversion to transformed rejection here.
pub const POISSON_INVERSION_LIMIT: f64 = 30.0;

const LN_FACTORIAL_TABLE: usize = 1024;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_TABLE);
        let mut acc = 0.0f64;
        t.push(0.0);
        for k in 1..LN_FACTORIAL_TABLE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`. Table lookup below 1024, Stirling series above.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < LN_FACTORIAL_TABLE {
        return ln_factorial_table()[n as usize];
    }
    let x = n as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkellamRates {
    pos: f64,
    neg: f64,
}

impl SkellamRates {
    pub fn new(lambda_pos: f64, lambda_neg: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(lambda_pos) || !ok(lambda_neg) {
            return Err(Error::NonFinite(format!(
                "Skellam rates must be positive and finite, got ({lambda_pos}, {lambda_neg})"
            )));
        }
        Ok(Self {
            pos: lambda_pos,
            neg: lambda_neg,
        })
    }

    pub fn lambda_pos(&self) -> f64 {
        self.pos
    }

    pub fn lambda_neg(&self) -> f64 {
        self.neg
    }

    pub fn mean(&self) -> f64 {
        self.pos - self.neg
    }

    pub fn variance(&self) -> f64 {
        self.pos + self.neg
    }
}

/// Result of summing the truncated Bessel series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselSeries {
    /// `ln I_nu(x)` from the truncated series.
    pub log_value: f64,
    /// `I_{nu+1}(x) / I_nu(x)` from the same terms, clamped to `[0, 1]`.
    pub ratio: f64,
    /// False when the last retained term still mattered at 1e-12 relative.
    pub converged: bool,
}

/// Above this `x / 2` the scaled terms could overflow and the sum runs in
/// log space.
const DIRECT_SUM_LIMIT: f64 = 300.0;

/// Truncated series for `I_order(x)` given `half_log = ln(x / 2)`.
///
/// Terms are `t_k = (x/2)^(order+2k) / (k! (order+k)!)`. They are summed as
/// `t_0 * sum_k t_k / t_0`, or with log-sum-exp for large `x`. Past the peak
/// the term ratio is decreasing, so once a term is below 1e-17 of the sum
/// (`exp(-40)` of the largest term in log space) and the next ratio is at
/// most 1/2, the tail is negligible and summation stops early.
pub fn bessel_series(order: u32, half_log: f64) -> BesselSeries {
    if half_log == f64::NEG_INFINITY {
        return BesselSeries {
            log_value: if order == 0 { 0.0 } else { f64::NEG_INFINITY },
            ratio: 0.0,
            converged: true,
        };
    }
    let half_x = half_log.exp();
    if half_x > DIRECT_SUM_LIMIT {
        return bessel_series_log(order, half_log);
    }
    let nu = order as f64;
    let q = half_x * half_x;
    let mut r = 1.0;
    let mut sum = 1.0;
    let mut weighted = 1.0 / (nu + 1.0);
    let mut early = false;
    let mut last = 1.0;
    for k in 1..BESSEL_TERMS {
        let kf = k as f64;
        let step = q / (kf * (nu + kf));
        r *= step;
        sum += r;
        weighted += r / (nu + kf + 1.0);
        last = r;
        if step <= 1.0 && r < 1e-17 * sum {
            let next = q / ((kf + 1.0) * (nu + kf + 1.0));
            if next <= 0.5 {
                early = true;
                break;
            }
        }
    }
    let log_t0 = nu * half_log - ln_factorial(order as u64);
    let log_value = log_t0 + sum.ln();
    BesselSeries {
        log_value,
        ratio: (half_x * weighted / sum).clamp(0.0, 1.0),
        converged: early || last < 1e-12 * sum,
    }
}

fn bessel_series_log(order: u32, half_log: f64) -> BesselSeries {
    let nu = order as u64;
    let quarter_sq = (2.0 * half_log).exp();
    let mut log_terms = [0.0f64; BESSEL_TERMS];
    let mut n_terms = 0;
    let mut max_log = f64::NEG_INFINITY;
    let mut early = false;
    let mut log_t = nu as f64 * half_log - ln_factorial(nu);
    for k in 0..BESSEL_TERMS {
        if k > 0 {
            // t_k / t_{k-1} = (x/2)^2 / (k (nu + k))
            log_t += 2.0 * half_log - ((k as f64) * ((nu + k as u64) as f64)).ln();
        }
        log_terms[k] = log_t;
        n_terms = k + 1;
        if log_t > max_log {
            max_log = log_t;
        } else {
            let next_ratio = quarter_sq / (((k + 1) as f64) * ((nu + k as u64 + 1) as f64));
            if log_t < max_log - 40.0 && next_ratio <= 0.5 {
                early = true;
                break;
            }
        }
    }
    let half_x = half_log.exp();
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (k, &lt) in log_terms[..n_terms].iter().enumerate() {
        let w = (lt - max_log).exp();
        sum += w;
        weighted += w * half_x / ((nu + k as u64 + 1) as f64);
    }
    let log_value = max_log + sum.ln();
    let converged = early || log_terms[n_terms - 1] - log_value < (1e-12f64).ln();
    BesselSeries {
        log_value,
        ratio: (weighted / sum).clamp(0.0, 1.0),
        converged,
    }
}

/// `ln I_order(x)` from the 50-term series.
pub fn log_bessel_i(order: u32, x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Bessel argument must be finite and non-negative, got {x}"
        )));
    }
    let series = bessel_series(order, (0.5 * x).ln());
    if !series.converged {
        log::warn!("Bessel series for order {order} at x = {x} not converged after {BESSEL_TERMS} terms");
    }
    Ok(series.log_value)
}

/// Skellam log-pmf `-(l+ + l-) + (y/2) ln(l+/l-) + ln I_|y|(2 sqrt(l+ l-))`.
pub fn skellam_log_pmf(y: i64, rates: SkellamRates) -> f64 {
    let (lp, ln) = (rates.pos.ln(), rates.neg.ln());
    let order = y.unsigned_abs() as u32;
    let series = bessel_series(order, 0.5 * (lp + ln));
    -(rates.pos + rates.neg) + 0.5 * (y as f64) * (lp - ln) + series.log_value
}

/// Negative log-likelihood of one dyad and its derivatives with respect to
/// the log-rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadTerm {
    pub nll: f64,
    pub d_log_pos: f64,
    pub d_log_neg: f64,
    pub converged: bool,
}

/// Dyad term `l+ + l- - (y/2)(a - b) - ln I_|y|(2 exp((a+b)/2))` with
/// `a = ln l+`, `b = ln l-`, both clamped below at `ln(RATE_FLOOR)`.
/// Derivatives are zero through an active clamp.
#[inline]
pub fn dyad_nll(y: i32, log_pos: f64, log_neg: f64) -> DyadTerm {
    let floor = RATE_FLOOR.ln();
    let (a, pos_active) = if log_pos < floor { (floor, false) } else { (log_pos, true) };
    let (b, neg_active) = if log_neg < floor { (floor, false) } else { (log_neg, true) };
    let lam_pos = a.exp();
    let lam_neg = b.exp();
    let nu = y.unsigned_abs();
    let half_log = 0.5 * (a + b);
    let series = bessel_series(nu, half_log);
    let yf = y as f64;
    let nll = lam_pos + lam_neg - 0.5 * yf * (a - b) - series.log_value;
    // d ln I_nu(x) / d a = (x/2) * I_{nu+1}/I_nu + nu/2
    let shared = (lam_pos * lam_neg).sqrt() * series.ratio + 0.5 * nu as f64;
    let d_log_pos = if pos_active { lam_pos - 0.5 * yf - shared } else { 0.0 };
    let d_log_neg = if neg_active { lam_neg + 0.5 * yf - shared } else { 0.0 };
    DyadTerm {
        nll,
        d_log_pos,
        d_log_neg,
        converged: series.converged,
    }
}

/// Poisson draw: sequential inversion below `POISSON_INVERSION_LIMIT`,
/// transformed rejection (PTRS) above.
pub fn poisson_sample<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u64 {
    if !(rate > 0.0) {
        return 0;
    }
    if rate < POISSON_INVERSION_LIMIT {
        let u: f64 = rng.random();
        let mut p = (-rate).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf {
            k += 1;
            p *= rate / k as f64;
            let next = cdf + p;
            if next == cdf {
                break;
            }
            cdf = next;
        }
        return k;
    }
    let smu = rate.sqrt();
    let b = 0.931 + 2.53 * smu;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    let log_rate = rate.ln();
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + rate + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -rate + k * log_rate - ln_factorial(k as u64);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// Skellam draw as the difference of two independent Poisson draws.
pub fn skellam_sample<R: Rng + ?Sized>(rates: SkellamRates, rng: &mut R) -> i64 {
    poisson_sample(rates.pos, rng) as i64 - poisson_sample(rates.neg, rng) as i64
}
