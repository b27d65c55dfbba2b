//! Brownian paths realized by midpoint bridging over a fixed dyadic skeleton.
//!
//! The value at every skeleton node is a deterministic function of the node's
//! index: node `id` reads the four ChaCha words at position `4·id`. Any grid
//! therefore sees the same path values wherever grids share points, and
//! increments of a refined grid telescope to the coarse increments.
//!
//! Node numbering: `0` is the endpoint `W(T)`, and the midpoint of cell `j`
//! at level `ℓ` (cells of width `T/2^ℓ`) is `2^ℓ + j`. A breadth-first walk
//! visits ids in increasing order, so full dyadic grids read a contiguous
//! prefix of the stream.

use rand_chacha::rand_core::RngCore;
use rand_chacha::ChaCha8Rng;

use super::DriverError;

/// Skeleton resolution: `2^20` intervals over the horizon.
pub const SKELETON_DEPTH: u32 = 20;
const SKELETON_CELLS: u64 = 1 << SKELETON_DEPTH;
/// Off-skeleton points allowed inside one skeleton cell.
const FINE_SLOTS: u64 = 64;
const SNAP: f64 = 1e-7;

pub struct BrownianPath {
    horizon: f64,
    skeleton: NodeNormals,
    fine: NodeNormals,
}

struct NodeNormals {
    rng: ChaCha8Rng,
}

impl NodeNormals {
    fn normal(&mut self, id: u64) -> f64 {
        let pos = u128::from(id) * 4;
        if self.rng.get_word_pos() != pos {
            self.rng.set_word_pos(pos);
        }
        // (0, 1] keeps the logarithm finite
        let u1 = 1.0 - (self.rng.next_u64() >> 11) as f64 * f64::EPSILON / 2.0;
        let u2 = (self.rng.next_u64() >> 11) as f64 * f64::EPSILON / 2.0;
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

enum Location {
    Skeleton(u64),
    Cell(u64),
}

struct Cell {
    level: u32,
    j: u64,
    left: u64,
    right: u64,
    wl: f64,
    wr: f64,
}

impl BrownianPath {
    pub fn new(horizon: f64, skeleton: ChaCha8Rng, fine: ChaCha8Rng) -> Self {
        Self {
            horizon,
            skeleton: NodeNormals { rng: skeleton },
            fine: NodeNormals { rng: fine },
        }
    }

    fn locate(&self, t: f64) -> Location {
        let s = t / self.horizon * SKELETON_CELLS as f64;
        let k = s.round();
        if (s - k).abs() <= SNAP {
            Location::Skeleton(k as u64)
        } else {
            Location::Cell(s.floor() as u64)
        }
    }

    /// `W(t)` for each `t` in a non-decreasing list inside `[0, T]`.
    pub fn values_at(&mut self, times: &[f64]) -> Result<Vec<f64>, DriverError> {
        self.check_range(times)?;
        for (i, &t) in times.iter().enumerate() {
            if i > 0 && t < times[i - 1] {
                return Err(DriverError::NotIncreasing(i));
            }
        }
        let locs: Vec<Location> = times.iter().map(|&t| self.locate(t)).collect();
        let mut needed: Vec<u64> = locs
            .iter()
            .flat_map(|l| match *l {
                Location::Skeleton(k) => [k, k],
                Location::Cell(c) => [c, c + 1],
            })
            .collect();
        needed.sort_unstable();
        needed.dedup();
        let skeleton = self.skeleton_values(&needed);
        let at = |k: u64| skeleton[needed.binary_search(&k).unwrap()];

        let mut out = Vec::with_capacity(times.len());
        let mut i = 0;
        while i < times.len() {
            match locs[i] {
                Location::Skeleton(k) => {
                    out.push(at(k));
                    i += 1;
                }
                Location::Cell(c) => {
                    let start = i;
                    while i < times.len() && matches!(locs[i], Location::Cell(d) if d == c) {
                        i += 1;
                    }
                    self.bridge_cell(c, &times[start..i], at(c), at(c + 1), &mut out)?;
                }
            }
        }
        Ok(out)
    }

    /// Increments of `W` along a strictly increasing grid; empty for grids of
    /// fewer than two points.
    pub fn increments(&mut self, grid: &[f64]) -> Result<Vec<f64>, DriverError> {
        self.check_range(grid)?;
        for i in 1..grid.len() {
            if grid[i] <= grid[i - 1] {
                return Err(DriverError::NotIncreasing(i));
            }
        }
        let w = self.values_at(grid)?;
        Ok(w.windows(2).map(|p| p[1] - p[0]).collect())
    }

    fn check_range(&self, times: &[f64]) -> Result<(), DriverError> {
        match times.iter().find(|&&t| !(t >= 0.0 && t <= self.horizon * (1.0 + 1e-12))) {
            Some(&time) => Err(DriverError::OutsideHorizon {
                time,
                horizon: self.horizon,
            }),
            None => Ok(()),
        }
    }

    fn cell_time(&self, k: u64) -> f64 {
        k as f64 / SKELETON_CELLS as f64 * self.horizon
    }

    /// Breadth-first bridging restricted to cells that contain a needed index.
    fn skeleton_values(&mut self, needed: &[u64]) -> Vec<f64> {
        let mut vals = vec![0.0; needed.len()];
        let w_end = self.horizon.sqrt() * self.skeleton.normal(0);
        let mut set = |k: u64, w: f64| {
            if let Ok(pos) = needed.binary_search(&k) {
                vals[pos] = w;
            }
        };
        set(0, 0.0);
        set(SKELETON_CELLS, w_end);

        let interior = |l: u64, r: u64| {
            let lo = needed.partition_point(|&k| k <= l);
            lo < needed.len() && needed[lo] < r
        };
        let mut level_cells = Vec::new();
        if interior(0, SKELETON_CELLS) {
            level_cells.push(Cell {
                level: 0,
                j: 0,
                left: 0,
                right: SKELETON_CELLS,
                wl: 0.0,
                wr: w_end,
            });
        }
        while !level_cells.is_empty() {
            let mut next = Vec::with_capacity(level_cells.len() * 2);
            for cell in level_cells {
                let mid = (cell.left + cell.right) / 2;
                let width = self.cell_time(cell.right - cell.left);
                let z = self.skeleton.normal((1u64 << cell.level) + cell.j);
                let wm = 0.5 * (cell.wl + cell.wr) + (0.25 * width).sqrt() * z;
                set(mid, wm);
                if interior(cell.left, mid) {
                    next.push(Cell {
                        level: cell.level + 1,
                        j: 2 * cell.j,
                        left: cell.left,
                        right: mid,
                        wl: cell.wl,
                        wr: wm,
                    });
                }
                if interior(mid, cell.right) {
                    next.push(Cell {
                        level: cell.level + 1,
                        j: 2 * cell.j + 1,
                        left: mid,
                        right: cell.right,
                        wl: wm,
                        wr: cell.wr,
                    });
                }
            }
            level_cells = next;
        }
        vals
    }

    /// Sequential bridging for points strictly inside skeleton cell `c`.
    fn bridge_cell(
        &mut self,
        c: u64,
        times: &[f64],
        wa: f64,
        wb: f64,
        out: &mut Vec<f64>,
    ) -> Result<(), DriverError> {
        let b = self.cell_time(c + 1);
        let (mut t_prev, mut w_prev) = (self.cell_time(c), wa);
        let mut slot = 0;
        for &t in times {
            if t == t_prev {
                out.push(w_prev);
                continue;
            }
            if slot >= FINE_SLOTS {
                return Err(DriverError::TooDense { cell: c });
            }
            let z = self.fine.normal(c * FINE_SLOTS + slot);
            slot += 1;
            let frac = (t - t_prev) / (b - t_prev);
            let sd = ((t - t_prev) * (b - t) / (b - t_prev)).sqrt();
            let w = w_prev + frac * (wb - w_prev) + sd * z;
            out.push(w);
            t_prev = t;
            w_prev = w;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::{DriverKind, ExperimentKey, SeedPlan};

    fn path(seed: u64, particle: u64, horizon: f64) -> BrownianPath {
        let plan = SeedPlan::new(seed);
        let e = ExperimentKey::named("bm-test");
        BrownianPath::new(
            horizon,
            plan.stream(e, particle, DriverKind::Brownian),
            plan.stream(e, particle, DriverKind::BrownianFine),
        )
    }

    fn dyadic(horizon: f64, level: u32) -> Vec<f64> {
        let n = 1u64 << level;
        (0..=n).map(|k| k as f64 * horizon / n as f64).collect()
    }

    #[test]
    fn refinement_is_exact_on_shared_points() {
        let coarse = dyadic(1.5, 4);
        let fine = dyadic(1.5, 9);
        let wc = path(1, 3, 1.5).values_at(&coarse).unwrap();
        let wf = path(1, 3, 1.5).values_at(&fine).unwrap();
        for (k, w) in wc.iter().enumerate() {
            assert_eq!(*w, wf[k * 32]);
        }
        let dc = path(1, 3, 1.5).increments(&coarse).unwrap();
        let df = path(1, 3, 1.5).increments(&fine).unwrap();
        for (k, d) in dc.iter().enumerate() {
            let s: f64 = df[k * 32..(k + 1) * 32].iter().sum();
            assert!((s - d).abs() < 1e-12);
        }
    }

    #[test]
    fn single_path_object_is_order_independent() {
        let mut p = path(5, 0, 1.0);
        let a = p.values_at(&dyadic(1.0, 6)).unwrap();
        let _ = p.values_at(&[0.3, 0.7]).unwrap();
        let b = p.values_at(&dyadic(1.0, 6)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn off_skeleton_points_are_bridged() {
        let mut p = path(2, 0, 1.0);
        let w = p.values_at(&[0.0, 0.1, 0.2, 0.5, 1.0]).unwrap();
        let ws = path(2, 0, 1.0).values_at(&[0.5, 1.0]).unwrap();
        assert_eq!(w[0], 0.0);
        assert_eq!(w[3], ws[0]);
        assert_eq!(w[4], ws[1]);
        assert!(w.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn endpoint_variance_matches_horizon() {
        let horizon = 2.0;
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|i| path(9, i, horizon).increments(&[0.0, horizon]).unwrap()[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // SE of a sample variance of Gaussians: T·sqrt(2/(n-1))
        let se = horizon * (2.0 / (n - 1) as f64).sqrt();
        assert!((var - horizon).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn midpoint_increments_have_half_variance() {
        let n = 50_000;
        let (mut s1, mut s2, mut cross) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let d = path(4, i, 1.0).increments(&[0.0, 0.5, 1.0]).unwrap();
            s1 += d[0] * d[0];
            s2 += d[1] * d[1];
            cross += d[0] * d[1];
        }
        let nf = n as f64;
        assert!((s1 / nf - 0.5).abs() < 0.02);
        assert!((s2 / nf - 0.5).abs() < 0.02);
        assert!((cross / nf).abs() < 0.02);
    }

    #[test]
    fn grid_errors() {
        let mut p = path(0, 0, 1.0);
        assert!(p.increments(&[]).unwrap().is_empty());
        assert!(p.increments(&[0.5]).unwrap().is_empty());
        assert!(matches!(p.increments(&[0.0, 1.5]), Err(DriverError::OutsideHorizon { .. })));
        assert!(matches!(p.increments(&[0.0, -0.5]), Err(DriverError::OutsideHorizon { .. })));
        assert!(matches!(p.increments(&[0.0, 0.5, 0.5]), Err(DriverError::NotIncreasing(2))));
    }
}
