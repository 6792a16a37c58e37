//! Cumulative regret and least-squares trend statistics.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 for a constant series fit exactly.
    pub r2: f64,
}

/// Running sum of per-event regret.
pub fn cumulative_regret(per_event: &[f64]) -> Vec<f64> {
    per_event
        .iter()
        .scan(0.0, |acc, &r| {
            *acc += r;
            Some(*acc)
        })
        .collect()
}

/// Ordinary least squares; `None` with fewer than two distinct x values.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some(LinearFit { slope, intercept, r2 })
}

/// Least-squares slope of the cumulative curve over its final third.
pub fn final_third_slope(cumulative: &[f64]) -> Option<f64> {
    let start = cumulative.len() - cumulative.len() / 3;
    let tail = &cumulative[start.min(cumulative.len())..];
    let xs: Vec<f64> = (start..cumulative.len()).map(|i| i as f64).collect();
    linear_fit(&xs, tail).map(|f| f.slope)
}
