use crate::error::{Error, Result};

/// Relative tolerance used to identify coincident time points.
const POINT_TOL: f64 = 1e-12;

/// Strictly increasing time points `0 = t_0 < ... < t_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter(
                "a grid needs at least two points".into(),
            ));
        }
        if points[0] != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "grid must start at 0, found {}",
                points[0]
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("grid points must be finite".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "grid points must be strictly increasing".into(),
            ));
        }
        Ok(Self { points })
    }

    /// `n` equal intervals covering `[0, horizon]`.
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if n == 0 || !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "uniform grid needs n >= 1 and a positive horizon (n = {n}, T = {horizon})"
            )));
        }
        let mut points: Vec<f64> = (0..=n).map(|k| horizon * k as f64 / n as f64).collect();
        points[n] = horizon;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn n_intervals(&self) -> usize {
        self.points.len() - 1
    }

    pub fn end(&self) -> f64 {
        *self.points.last().expect("grid is never empty")
    }

    pub fn step(&self, i: usize) -> f64 {
        self.points[i + 1] - self.points[i]
    }

    fn tol(&self) -> f64 {
        POINT_TOL * self.end().max(1.0)
    }

    /// Index of the interval `[t_i, t_{i+1})` containing `t` (the last interval is closed).
    pub fn locate(&self, t: f64) -> Option<usize> {
        if t < -self.tol() || t > self.end() + self.tol() {
            return None;
        }
        let idx = self.points.partition_point(|&p| p <= t);
        Some(idx.saturating_sub(1).min(self.n_intervals() - 1))
    }

    /// True when every point of `other` inside our span is also one of our points.
    pub fn contains_points_of(&self, other: &Grid) -> bool {
        let tol = self.tol();
        other
            .points
            .iter()
            .filter(|&&p| p <= self.end() + tol)
            .all(|&p| {
                let k = self.points.partition_point(|&q| q < p - tol);
                k < self.points.len() && (self.points[k] - p).abs() <= tol
            })
    }

    /// Union of the points of both grids, truncated to our horizon.
    pub fn merge(&self, other: &Grid) -> Grid {
        let tol = self.tol();
        let mut all: Vec<f64> = self
            .points
            .iter()
            .chain(other.points.iter().filter(|&&p| p < self.end()))
            .copied()
            .collect();
        all.sort_by(f64::total_cmp);
        let mut points: Vec<f64> = Vec::with_capacity(all.len());
        for p in all {
            match points.last() {
                Some(&q) if p - q <= tol => {}
                _ => points.push(p),
            }
        }
        // keep the exact horizon
        *points.last_mut().expect("non-empty") = self.end();
        Grid { points }
    }

    /// For each interval of `fine`, the index of our interval containing it.
    pub fn cell_map(&self, fine: &Grid) -> Result<Vec<usize>> {
        if fine.end() > self.end() + self.tol() {
            return Err(Error::GridMismatch(format!(
                "grid ends at {} beyond the horizon {}",
                fine.end(),
                self.end()
            )));
        }
        if !fine.contains_points_of(self) {
            return Err(Error::GridMismatch(
                "a breakpoint is not a grid node".into(),
            ));
        }
        let pts = fine.points();
        Ok((0..fine.n_intervals())
            .map(|i| {
                self.locate(0.5 * (pts[i] + pts[i + 1]))
                    .expect("midpoint inside the span")
            })
            .collect())
    }

    /// Splits every interval into `k` equal pieces.
    pub fn subdivide(&self, k: usize) -> Grid {
        assert!(k >= 1);
        let mut points = Vec::with_capacity(self.n_intervals() * k + 1);
        for w in self.points.windows(2) {
            for j in 0..k {
                points.push(w[0] + (w[1] - w[0]) * j as f64 / k as f64);
            }
        }
        points.push(self.end());
        Grid { points }
    }
}
