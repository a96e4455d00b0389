//! Occupation sinks: a regular grid accumulating mass * dt per cell (local
//! time before normalisation) and point probes recording occupation in small
//! boxes around chosen positions.

use crate::error::{Error, Result};
use crate::exponents::Dim;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpecNd {
    pub d: Dim,
    /// Lower corner of the grid.
    pub origin: Vec<f64>,
    /// Cell side.
    pub h: f64,
    /// Cells per axis.
    pub dims: Vec<usize>,
}

impl GridSpecNd {
    pub fn new(d: Dim, origin: Vec<f64>, h: f64, dims: Vec<usize>) -> Result<GridSpecNd> {
        let k = d.as_u32() as usize;
        if origin.len() != k || dims.len() != k {
            return Err(Error::input("grid spec: origin/dims must match dimension"));
        }
        if !(h > 0.0) || dims.iter().any(|&n| n == 0) {
            return Err(Error::input("grid spec: h > 0 and nonempty dims required"));
        }
        Ok(GridSpecNd { d, origin, h, dims })
    }

    /// Symmetric cube [-half, half]^d with the given cell side.
    pub fn centered(d: Dim, half: f64, h: f64) -> Result<GridSpecNd> {
        let k = d.as_u32() as usize;
        let n = (2.0 * half / h).round() as usize;
        GridSpecNd::new(d, vec![-half; k], h, vec![n; k])
    }

    pub fn n_cells(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d.as_u32() as i32)
    }

    pub fn index_of(&self, pos: &[f64]) -> Option<usize> {
        let mut idx = 0usize;
        for (k, &x) in pos.iter().enumerate() {
            let i = ((x - self.origin[k]) / self.h).floor();
            if i < 0.0 || i as usize >= self.dims[k] {
                return None;
            }
            idx = idx * self.dims[k] + i as usize;
        }
        Some(idx)
    }

    /// Integer coordinates of a flat index.
    pub fn coords_of(&self, mut idx: usize) -> Vec<usize> {
        let k = self.dims.len();
        let mut out = vec![0usize; k];
        for j in (0..k).rev() {
            out[j] = idx % self.dims[j];
            idx /= self.dims[j];
        }
        out
    }

    /// Centre of a cell given by integer coordinates.
    pub fn cell_center(&self, coords: &[usize]) -> Vec<f64> {
        coords
            .iter()
            .enumerate()
            .map(|(k, &i)| self.origin[k] + (i as f64 + 0.5) * self.h)
            .collect()
    }
}

/// Raw occupation counts: mass * dt summed per cell; positions outside the
/// grid aggregate into `outside`, never dropped silently.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OccupationGrid {
    pub spec: GridSpecNd,
    pub cells: Vec<f64>,
    pub outside: f64,
}

impl OccupationGrid {
    pub fn new(spec: GridSpecNd) -> OccupationGrid {
        let n = spec.n_cells();
        OccupationGrid {
            spec,
            cells: vec![0.0; n],
            outside: 0.0,
        }
    }

    pub fn add(&mut self, pos: &[f64], w: f64) {
        match self.spec.index_of(pos) {
            Some(i) => self.cells[i] += w,
            None => self.outside += w,
        }
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().sum::<f64>() + self.outside
    }

    /// Associative merge for parallel aggregation.
    pub fn merge(&mut self, other: &OccupationGrid) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::input("occupation merge: grid specs differ"));
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
        self.outside += other.outside;
        Ok(())
    }
}

/// Small boxes around probe points accumulating occupation, for per-replicate
/// local-time samples at fixed positions.
#[derive(Debug, Clone)]
pub struct ProbeSet {
    pub d: Dim,
    pub points: Vec<Vec<f64>>,
    /// Box half-width.
    pub half_width: f64,
    pub occupation: Vec<f64>,
}

impl ProbeSet {
    pub fn new(d: Dim, points: Vec<Vec<f64>>, half_width: f64) -> Result<ProbeSet> {
        let k = d.as_u32() as usize;
        if points.iter().any(|p| p.len() != k) {
            return Err(Error::input("probe set: point dimension mismatch"));
        }
        if !(half_width > 0.0) {
            return Err(Error::input("probe set: half_width must be > 0"));
        }
        let n = points.len();
        Ok(ProbeSet {
            d,
            points,
            half_width,
            occupation: vec![0.0; n],
        })
    }

    pub fn add(&mut self, pos: &[f64], w: f64) {
        'pts: for (j, p) in self.points.iter().enumerate() {
            for (a, b) in p.iter().zip(pos) {
                if (a - b).abs() > self.half_width {
                    continue 'pts;
                }
            }
            self.occupation[j] += w;
        }
    }

    /// Local-time estimates: occupation divided by box volume.
    pub fn local_time(&self) -> Vec<f64> {
        let vol = (2.0 * self.half_width).powi(self.d.as_u32() as i32);
        self.occupation.iter().map(|o| o / vol).collect()
    }

    pub fn reset(&mut self) {
        for o in &mut self.occupation {
            *o = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_roundtrip() {
        let spec = GridSpecNd::centered(Dim::D2, 2.0, 0.5).unwrap();
        assert_eq!(spec.n_cells(), 64);
        let idx = spec.index_of(&[0.1, -0.3]).unwrap();
        let c = spec.coords_of(idx);
        let center = spec.cell_center(&c);
        assert!((center[0] - 0.1).abs() <= 0.25 + 1e-12);
        assert!((center[1] + 0.3).abs() <= 0.25 + 1e-12);
        assert!(spec.index_of(&[5.0, 0.0]).is_none());
    }

    #[test]
    fn outside_bucket_accumulates() {
        let spec = GridSpecNd::centered(Dim::D1, 1.0, 0.25).unwrap();
        let mut g = OccupationGrid::new(spec);
        g.add(&[0.1], 2.0);
        g.add(&[10.0], 3.0);
        assert_eq!(g.outside, 3.0);
        assert!((g.total() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn merge_is_associative() {
        let spec = GridSpecNd::centered(Dim::D1, 1.0, 0.5).unwrap();
        let mut a = OccupationGrid::new(spec.clone());
        let mut b = OccupationGrid::new(spec);
        a.add(&[0.1], 1.0);
        b.add(&[0.1], 2.0);
        b.add(&[-0.6], 4.0);
        a.merge(&b).unwrap();
        assert!((a.total() - 7.0).abs() < 1e-15);
    }

    #[test]
    fn probes_collect_box_occupation() {
        let mut p = ProbeSet::new(Dim::D2, vec![vec![1.0, 0.0]], 0.1).unwrap();
        p.add(&[1.05, -0.05], 3.0);
        p.add(&[2.0, 0.0], 1.0);
        assert!((p.occupation[0] - 3.0).abs() < 1e-15);
        let lt = p.local_time();
        assert!((lt[0] - 3.0 / 0.04).abs() < 1e-12);
    }
}
