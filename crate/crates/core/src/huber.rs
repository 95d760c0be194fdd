//! Robust straight-line fitting.
//!
//! The fit minimizes Huber's joint location/scale objective
//!
//! ```text
//!   F(a, b, s) = sum_i [ s + s * H(r_i / s) ],   r_i = v_i - (a * t_i + b)
//!   H(z) = z^2             if |z| <= delta
//!        = 2 delta |z| - delta^2 otherwise
//! ```
//!
//! so `delta` is a threshold on standardized residuals and the residual scale
//! `s` is estimated alongside the line. Iteratively reweighted least squares
//! alternates an exact one-dimensional minimization over `s` with a weighted
//! least-squares line fit using weights `min(1, delta * s / |r|)`.

use thiserror::Error;

pub const MAX_ITERATIONS: usize = 50;
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HuberError {
    #[error("need at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("all samples share the same abscissa")]
    DegenerateInput,
    #[error("non-finite sample")]
    NonFinite,
    #[error("delta must be positive and finite")]
    InvalidDelta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Final residual scale estimate (zero for OLS fits).
    pub scale: f64,
    pub iterations: usize,
}

impl LineFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.slope * t + self.intercept
    }
}

fn weighted_line(samples: &[(f64, f64)], weights: &[f64]) -> Option<(f64, f64)> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let t_mean = samples.iter().zip(weights).map(|((t, _), w)| w * t).sum::<f64>() / total;
    let v_mean = samples.iter().zip(weights).map(|((_, v), w)| w * v).sum::<f64>() / total;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for ((t, v), w) in samples.iter().zip(weights) {
        let dt = t - t_mean;
        sxx += w * dt * dt;
        sxy += w * dt * (v - v_mean);
    }
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, v_mean - slope * t_mean))
}

fn validate(samples: &[(f64, f64)]) -> Result<(), HuberError> {
    if samples.len() < 2 {
        return Err(HuberError::TooFewSamples(samples.len()));
    }
    if samples.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
        return Err(HuberError::NonFinite);
    }
    let t0 = samples[0].0;
    if samples.iter().all(|(t, _)| *t == t0) {
        return Err(HuberError::DegenerateInput);
    }
    Ok(())
}

/// Ordinary least squares.
pub fn ols_fit(samples: &[(f64, f64)]) -> Result<LineFit, HuberError> {
    validate(samples)?;
    let (slope, intercept) = weighted_line(samples, &vec![1.0; samples.len()]).ok_or(HuberError::DegenerateInput)?;
    Ok(LineFit { slope, intercept, scale: 0.0, iterations: 0 })
}

fn scale_objective(abs_res: &[f64], delta: f64, s: f64) -> f64 {
    abs_res
        .iter()
        .map(|&r| if r <= delta * s { s + r * r / s } else { s + 2.0 * delta * r - delta * delta * s })
        .sum()
}

/// Exact minimizer over `s > 0` of the objective for fixed residuals. The
/// objective is convex and piecewise of the form `A s + B / s + C` between
/// consecutive breakpoints `|r_i| / delta`, so checking each piece's
/// stationary point and every breakpoint is enough.
fn optimal_scale(abs_res: &[f64], delta: f64, floor: f64) -> f64 {
    let n = abs_res.len() as f64;
    let mut sorted: Vec<f64> = abs_res.to_vec();
    sorted.sort_by(f64::total_cmp);
    let breaks: Vec<f64> = sorted.iter().map(|r| r / delta).collect();

    let mut candidates = vec![floor];
    candidates.extend(breaks.iter().copied().filter(|&b| b > floor));
    let mut inlier_sq = 0.0;
    for k in 0..=sorted.len() {
        // piece where the k smallest residuals are inliers
        if k > 0 {
            inlier_sq += sorted[k - 1] * sorted[k - 1];
        }
        let lo = if k == 0 { floor } else { breaks[k - 1].max(floor) };
        let hi = if k < breaks.len() { breaks[k] } else { f64::INFINITY };
        let a = n - delta * delta * (sorted.len() - k) as f64;
        if a > 0.0 && inlier_sq > 0.0 {
            let s = (inlier_sq / a).sqrt();
            if s > lo && s < hi {
                candidates.push(s);
            }
        }
    }
    let mut best = (f64::INFINITY, floor);
    for s in candidates {
        let f = scale_objective(abs_res, delta, s);
        if f < best.0 {
            best = (f, s);
        }
    }
    best.1
}

/// Robust line `v ~ slope * t + intercept`.
pub fn huber_fit(samples: &[(f64, f64)], delta: f64) -> Result<LineFit, HuberError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(HuberError::InvalidDelta);
    }
    let start = ols_fit(samples)?;
    let magnitude = samples.iter().map(|(_, v)| v.abs()).fold(1.0, f64::max);
    let floor = 1e-12 * magnitude;

    let (mut slope, mut intercept) = (start.slope, start.intercept);
    let mut scale = 0.0;
    let mut iterations = 0;
    let mut abs_res = vec![0.0; samples.len()];
    let mut weights = vec![1.0; samples.len()];
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for (r, (t, v)) in abs_res.iter_mut().zip(samples) {
            *r = (v - (slope * t + intercept)).abs();
        }
        scale = optimal_scale(&abs_res, delta, floor);
        let cutoff = delta * scale;
        for (w, &r) in weights.iter_mut().zip(&abs_res) {
            *w = if r <= cutoff { 1.0 } else { cutoff / r };
        }
        let Some((ns, ni)) = weighted_line(samples, &weights) else {
            break;
        };
        let change = (ns - slope).abs().max((ni - intercept).abs());
        slope = ns;
        intercept = ni;
        if change < TOLERANCE {
            break;
        }
    }
    Ok(LineFit { slope, intercept, scale, iterations })
}
