//! Scaling-law fit: compute time shrinks like `a/n + b` as agents are
//! added while communication grows like `c + d*n`, so the total is a
//! U-shaped curve with a best agent count and, past it, a point where the
//! cluster is slower than a single machine.

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;

/// One measured run at a given cluster size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub agents: u32,
    pub compute_seconds: f64,
    pub comm_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// compute(n) = a / n + b
    pub a: f64,
    pub b: f64,
    /// comm(n) = c + d * n
    pub c: f64,
    pub d: f64,
}

impl ScalingFit {
    pub fn compute(&self, n: f64) -> f64 {
        self.a / n + self.b
    }

    pub fn comm(&self, n: f64) -> f64 {
        self.c + self.d * n
    }

    pub fn total(&self, n: f64) -> f64 {
        self.compute(n) + self.comm(n)
    }

    /// Agent count past which adding a node no longer reduces total time
    /// (the first n where total(n+1) >= total(n)), searched up to `max_n`.
    pub fn stagnation_n(&self, max_n: u32) -> u32 {
        for n in 1..max_n {
            if self.total((n + 1) as f64) >= self.total(n as f64) {
                return n;
            }
        }
        max_n
    }

    /// Smallest cluster that is slower than one machine, if any exists
    /// below `max_n`.
    pub fn worse_than_serial_n(&self, max_n: u32) -> Option<u32> {
        let serial = self.total(1.0);
        (2..=max_n).find(|&n| self.total(n as f64) > serial)
    }
}

/// Ordinary least squares of y on x with an intercept; returns
/// (slope, intercept).
fn lsq(xs: &[f64], ys: &[f64]) -> Result<(f64, f64), MetricsError> {
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    if sxx <= 0.0 {
        return Err(MetricsError::DegenerateFit(
            "all scale points have the same agent count".into(),
        ));
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    Ok((slope, mean_y - slope * mean_x))
}

/// Fits the two scaling laws to measured points. Needs at least three
/// distinct cluster sizes.
pub fn fit_scaling(points: &[ScalingPoint]) -> Result<ScalingFit, MetricsError> {
    if points.len() < 3 {
        return Err(MetricsError::TooFewScales(points.len()));
    }
    let inv_n: Vec<f64> = points.iter().map(|p| 1.0 / p.agents as f64).collect();
    let n: Vec<f64> = points.iter().map(|p| p.agents as f64).collect();
    let compute: Vec<f64> = points.iter().map(|p| p.compute_seconds).collect();
    let comm: Vec<f64> = points.iter().map(|p| p.comm_seconds).collect();
    let (a, b) = lsq(&inv_n, &compute)?;
    let (d, c) = lsq(&n, &comm)?;
    Ok(ScalingFit { a, b, c, d })
}
