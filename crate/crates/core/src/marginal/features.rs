//! Price scaling and displacement features.

use serde::{Deserialize, Serialize};

use crate::error::{GrstError, Result};
use crate::marginal::ingest::BarSeries;

/// Default amplification of displacements, √60.
pub fn default_scale() -> f64 {
    60f64.sqrt()
}

/// Maps every price to `s0 + c (s - s0)` with `s0` the day's first price and
/// stretches time by `c^2`, leaving the diffusion coefficient unchanged.
pub fn scale_series(bars: &BarSeries, c: f64) -> Result<BarSeries> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(GrstError::invalid(format!(
            "scale factor must be positive, got {c}"
        )));
    }
    let mut out = bars.clone();
    out.time_scale *= c * c;
    for day in &mut out.days {
        let Some(&s0) = day.prices.first() else {
            continue;
        };
        for p in &mut day.prices {
            *p = s0 + c * (*p - s0);
        }
    }
    Ok(out)
}

/// Row-major matrix of displacement vectors `Y[i][j-1] = s[i+j] - s[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(GrstError::InsufficientData(
                "feature matrix is empty".into(),
            ));
        }
        if rows.iter().any(|r| r.len() != cols) {
            return Err(GrstError::invalid("ragged feature rows"));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(GrstError::invalid("non-finite feature value"));
        }
        Ok(Self {
            rows: data.len() / cols,
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (acc, v) in m.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        m.iter().map(|s| s / self.rows as f64).collect()
    }

    /// Population variances (divisor `rows`).
    pub fn column_variances(&self) -> Vec<f64> {
        let means = self.column_means();
        let mut v = vec![0.0; self.cols];
        for i in 0..self.rows {
            for ((acc, x), m) in v.iter_mut().zip(self.row(i)).zip(&means) {
                *acc += (x - m) * (x - m);
            }
        }
        v.iter().map(|s| s / self.rows as f64).collect()
    }
}

/// Stacks every day's `M = L - N` displacement rows, days in order.
pub fn feature_matrix(bars: &BarSeries, window: usize) -> Result<FeatureMatrix> {
    if window == 0 {
        return Err(GrstError::invalid("window must be at least 1"));
    }
    let len = bars.days.iter().map(|d| d.prices.len()).min().unwrap_or(0);
    if len <= window {
        return Err(GrstError::InsufficientData(format!(
            "day length {len} does not exceed window {window}"
        )));
    }
    let m = len - window;
    let mut rows = Vec::with_capacity(m * bars.days.len());
    for day in &bars.days {
        let s = &day.prices;
        for i in 0..m {
            rows.push((1..=window).map(|j| s[i + j] - s[i]).collect());
        }
    }
    FeatureMatrix::from_rows(rows)
}
