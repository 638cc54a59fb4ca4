use crate::error::{Error, Result};
use crate::maps::HALF;

/// Piecewise-constant density on N equal cells of I = [-1/2, 1/2].
#[derive(Debug, Clone, PartialEq)]
pub struct Density1D {
    values: Vec<f64>,
}

impl Density1D {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument(
                "density needs at least one cell".into(),
            ));
        }
        if let Some(&v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "density value {v} is not a nonnegative number"
            )));
        }
        Ok(Density1D { values })
    }

    pub fn uniform(n: usize) -> Self {
        Density1D {
            values: vec![1.0; n],
        }
    }

    /// Density of the cell masses `m` (so that the result integrates to Σ m).
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        let n = masses.len() as f64;
        Self::new(masses.iter().map(|m| m * n).collect())
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let w = 1.0 / n as f64;
        Self::new((0..n).map(|i| f(-HALF + (i as f64 + 0.5) * w)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn width(&self) -> f64 {
        1.0 / self.values.len() as f64
    }

    pub fn edge(&self, i: usize) -> f64 {
        -HALF + i as f64 * self.width()
    }

    pub fn center(&self, i: usize) -> f64 {
        -HALF + (i as f64 + 0.5) * self.width()
    }

    pub fn cell_of(&self, x: f64) -> usize {
        let n = self.values.len();
        (((x + HALF) * n as f64).floor().max(0.0) as usize).min(n - 1)
    }

    pub fn masses(&self) -> Vec<f64> {
        let w = self.width();
        self.values.iter().map(|v| v * w).collect()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.width()
    }

    pub fn normalized(&self) -> Result<Self> {
        let m = self.mass();
        if m <= 0.0 {
            return Err(Error::InvalidArgument(
                "cannot normalize a zero density".into(),
            ));
        }
        Ok(Density1D {
            values: self.values.iter().map(|v| v / m).collect(),
        })
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Grid variation: interior jumps only, boundary values excluded.
    pub fn variation(&self) -> f64 {
        variation(&self.values)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -HALF {
            return 0.0;
        }
        if x >= HALF {
            return self.mass();
        }
        let i = self.cell_of(x);
        let w = self.width();
        let below: f64 = self.values[..i].iter().sum::<f64>() * w;
        below + self.values[i] * (x - self.edge(i))
    }

    /// Mass of [a, b] ∩ I.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(-HALF), b.min(HALF));
        if b <= a {
            return 0.0;
        }
        let (i0, i1) = (self.cell_of(a), self.cell_of(b));
        let mut m = 0.0;
        for i in i0..=i1 {
            let lo = self.edge(i).max(a);
            let hi = self.edge(i + 1).min(b);
            if hi > lo {
                m += self.values[i] * (hi - lo);
            }
        }
        m
    }

    /// ∫ g f dx, given the per-cell integrals ∫_cell g dx.
    pub fn integrate_cells(&self, cell_integral: impl Fn(f64, f64) -> f64) -> f64 {
        (0..self.len())
            .map(|i| {
                let v = self.values[i];
                if v == 0.0 {
                    0.0
                } else {
                    v * cell_integral(self.edge(i), self.edge(i + 1))
                }
            })
            .sum()
    }

    pub fn l1_distance(&self, other: &Density1D) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch);
        }
        let w = self.width();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * w)
    }

    pub fn sup_distance(&self, other: &Density1D) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Averages pairs of cells; only defined for an even number of cells.
    pub fn coarsen(&self) -> Result<Self> {
        if !self.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument("odd cell count".into()));
        }
        Ok(Density1D {
            values: self.values.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect(),
        })
    }
}

/// Σ |v_{i+1} - v_i|.
pub fn variation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}
