//! Draws from the physical measure: a cell of the grid family picked by mass, a uniform
//! point inside it, then a burn-in along the true dynamics to wash out the grid.

use rand::Rng;

use crate::error::{Error, Result};
use crate::maps::{SectionPoint, SkewProduct, HALF};
use crate::measures::LeafFamily;
use crate::rng::Stream;

/// Fiber contraction is at most 2^-1.5 per step for the reference model, so 32 steps
/// leave no trace of the initial cell at double precision.
pub const DEFAULT_BURN_IN: usize = 32;

#[derive(Debug, Clone)]
pub struct SrbSampler {
    n: usize,
    m: usize,
    cumulative: Vec<f64>,
}

impl SrbSampler {
    pub fn new(fam: &LeafFamily) -> Result<Self> {
        let cumulative = fam.cumulative();
        match cumulative.last() {
            Some(&t) if t > 0.0 && t.is_finite() => {}
            _ => {
                return Err(Error::InvalidArgument(
                    "family has no mass to sample".into(),
                ))
            }
        }
        Ok(SrbSampler {
            n: fam.columns(),
            m: fam.rows(),
            cumulative,
        })
    }

    /// A point distributed as the piecewise-uniform grid measure.
    pub fn draw_cell_point(&self, rng: &mut Stream) -> SectionPoint {
        let total = *self.cumulative.last().unwrap();
        let u = rng.random::<f64>() * total;
        let idx = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        let (i, k) = (idx / self.m, idx % self.m);
        let x = -HALF + (i as f64 + rng.random::<f64>()) / self.n as f64;
        let y = -HALF + (k as f64 + rng.random::<f64>()) / self.m as f64;
        SectionPoint::new(x, y)
    }

    pub fn draw<S: SkewProduct>(&self, s: &S, burn_in: usize, rng: &mut Stream) -> SectionPoint {
        let mut q = self.draw_cell_point(rng);
        for _ in 0..burn_in {
            q = s.step(q, rng);
        }
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{DoublingSkew, ValidatedModel};
    use crate::measures::srb_iterate;
    use rand::SeedableRng;

    #[test]
    fn cell_draws_follow_cell_masses() {
        let mut cells = vec![0.0; 16 * 16];
        cells[3 * 16 + 5] = 0.75;
        cells[10 * 16 + 1] = 0.25;
        let fam = LeafFamily::from_cells(16, 16, cells).unwrap();
        let s = SrbSampler::new(&fam).unwrap();
        let mut rng = Stream::seed_from_u64(1);
        let mut hits = 0;
        for _ in 0..10_000 {
            let q = s.draw_cell_point(&mut rng);
            let i = ((q.x + 0.5) * 16.0) as usize;
            let k = ((q.y + 0.5) * 16.0) as usize;
            assert!((i, k) == (3, 5) || (i, k) == (10, 1));
            hits += ((i, k) == (3, 5)) as u32;
        }
        assert!((hits as f64 / 10_000.0 - 0.75).abs() < 0.02);
    }

    #[test]
    fn empty_family_rejected() {
        let fam = LeafFamily::from_cells(16, 16, vec![0.0; 256]);
        assert!(fam.map_or(true, |f| SrbSampler::new(&f).is_err()));
    }

    #[test]
    fn burned_in_points_lie_in_the_fiber_bands() {
        // after one step |y - (∓1/4)| ≤ σ(1/2)^β·(1/2)
        let m = ValidatedModel::reference();
        let fam = srb_iterate(&m, 64, 64, 4).unwrap();
        let s = SrbSampler::new(&fam).unwrap();
        let mut rng = Stream::seed_from_u64(2);
        let h = 0.5f64.powf(2.5);
        for _ in 0..1000 {
            let q = s.draw(&m, DEFAULT_BURN_IN, &mut rng);
            assert!((q.y.abs() - 0.25).abs() <= h + 1e-12, "{q:?}");
        }
        let baker = DoublingSkew::baker();
        let q = s.draw(&baker, 8, &mut rng);
        assert!(q.x.abs() <= 0.5 && q.y.abs() <= 0.5);
    }
}
