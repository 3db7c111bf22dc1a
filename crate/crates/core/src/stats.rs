//! Streaming mean/variance accumulators.
//!
//! Welford updates inside a chunk, Chan's pairwise formula to merge chunks.

use serde::Serialize;

/// A value with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Running mean and sum of squared deviations for a fixed-length vector of cells.
#[derive(Clone, Debug, PartialEq)]
pub struct CellStats {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl CellStats {
    pub fn new(cells: usize) -> CellStats {
        CellStats { count: 0, mean: vec![0.0; cells], m2: vec![0.0; cells] }
    }

    pub fn cells(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Adds one observation per cell.
    pub fn push(&mut self, sample: &[f64]) {
        assert_eq!(sample.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(sample) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
    }

    pub fn merge(&mut self, other: &CellStats) {
        assert_eq!(self.mean.len(), other.mean.len());
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean(&self, cell: usize) -> f64 {
        self.mean[cell]
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample variance (0 with fewer than two observations).
    pub fn variance(&self, cell: usize) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2[cell] / (self.count - 1) as f64).max(0.0)
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self, cell: usize) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance(cell) / self.count as f64).sqrt()
    }

    pub fn estimate(&self, cell: usize) -> Estimate {
        Estimate { value: self.mean(cell), stderr: self.stderr(cell) }
    }
}

/// Least-squares fit of y = a + b x; returns (slope, intercept, slope standard error).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if x.len() > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, se)
}
