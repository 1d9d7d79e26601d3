//! Goodness-of-fit and time-series summaries used by the verification suite.

use statrs::distribution::{ContinuousCDF, Gamma};
use statrs::function::erf::erf;

use crate::error::{Error, Result};

/// One-sample Kolmogorov–Smirnov statistic `sup |F_n - F|`; sorts `xs` in place.
pub fn ks_statistic<F: Fn(f64) -> f64>(xs: &mut [f64], cdf: F) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("KS statistic of an empty sample".into()));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("KS sample contains NaN".into()));
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Asymptotic 1% critical value with the Stephens small-sample correction.
pub fn ks_critical_1pct(n: usize) -> f64 {
    let s = (n as f64).sqrt();
    1.628 / (s + 0.12 + 0.11 / s)
}

/// CDF of Gamma(shape, rate).
pub fn gamma_cdf(shape: f64, rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    Gamma::new(shape, rate).map(|g| g.cdf(x)).unwrap_or(f64::NAN)
}

/// CDF of N(0, sd²).
pub fn normal_cdf(sd: f64, x: f64) -> f64 {
    0.5 * (1.0 + erf(x / (sd * std::f64::consts::SQRT_2)))
}

/// CDF of |N(0, sd²)|.
pub fn folded_normal_cdf(sd: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    erf(x / (sd * std::f64::consts::SQRT_2))
}

/// Integrated autocorrelation time (in samples) with Sokal's adaptive window `M >= 5 τ`.
pub fn autocorrelation_time(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 2 {
        return Err(Error::InvalidArgument("autocorrelation of fewer than two samples".into()));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0 = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return Ok(1.0);
    }
    let mut tau = 1.0;
    for lag in 1..n {
        let c = series[..n - lag]
            .iter()
            .zip(&series[lag..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / n as f64;
        tau += 2.0 * c / c0;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    Ok(tau.max(1.0))
}
