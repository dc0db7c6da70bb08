//! Log-log fits of RMSE against sample size.

use serde::Serialize;

use crate::config::RATE_MIN_SIZES;
use crate::error::{HarnessError, Result};
use crate::experiment::Summary;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub estimator: String,
    pub slope: f64,
    pub intercept: f64,
    /// OLS standard error of the slope.
    pub slope_se: f64,
    pub points: usize,
}

/// OLS of `log rmse` on `log n`.
pub fn fit_rate(estimator: &str, points: &[(usize, f64)]) -> Result<RateFit> {
    if points.len() < RATE_MIN_SIZES {
        return Err(HarnessError::Data(format!(
            "{estimator}: a rate needs at least {RATE_MIN_SIZES} sample sizes, got {}",
            points.len()
        )));
    }
    if let Some(&(n, _)) = points.iter().find(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
        return Err(HarnessError::Data(format!("{estimator}: RMSE at n = {n} is not positive")));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::Data(format!("{estimator}: sample sizes must differ")));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_se = (rss / (m - 2.0) / sxx).sqrt();
    Ok(RateFit {
        estimator: estimator.to_string(),
        slope,
        intercept,
        slope_se,
        points: points.len(),
    })
}

/// One fit per estimator, in first-appearance order.
pub fn fit_rates(summaries: &[Summary]) -> Result<Vec<RateFit>> {
    let mut names: Vec<&str> = Vec::new();
    for s in summaries {
        if !names.contains(&s.estimator.as_str()) {
            names.push(&s.estimator);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let pts: Vec<(usize, f64)> = summaries
                .iter()
                .filter(|s| s.estimator == name)
                .map(|s| (s.n, s.rmse))
                .collect();
            fit_rate(name, &pts)
        })
        .collect()
}
