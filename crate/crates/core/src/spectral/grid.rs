use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Isotropic periodic grid on `[0, L)^N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    m: usize,
    length: f64,
}

impl Grid {
    pub fn new(dim: usize, m: usize, length: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dim must be 2 or 3, got {dim}")));
        }
        if m < 8 || !m.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("M must be a power of two >= 8, got {m}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length must be positive, got {length}")));
        }
        Ok(Self { dim, m, length })
    }

    /// `[0, 2 pi)^N` with `M` points per axis.
    pub fn periodic(dim: usize, m: usize) -> Result<Self> {
        Self::new(dim, m, 2.0 * PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.m
    }

    pub fn box_length(&self) -> f64 {
        self.length
    }

    pub fn with_box_length(&self, length: f64) -> Result<Self> {
        Self::new(self.dim, self.m, length)
    }

    pub fn with_points(&self, m: usize) -> Result<Self> {
        Self::new(self.dim, m, self.length)
    }

    pub fn npoints(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.m as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Lowest nonzero angular wavenumber `2 pi / L`.
    pub fn base_frequency(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rem % self.m;
            rem /= self.m;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().take(self.dim).fold(0, |acc, &i| acc * self.m + i)
    }

    /// Physical coordinates of grid point `flat`.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let h = self.spacing();
        [idx[0] as f64 * h, idx[1] as f64 * h, idx[2] as f64 * h]
    }

    pub fn signed_wavenumber(&self, j: usize) -> i64 {
        let half = self.m / 2;
        if j < half {
            j as i64
        } else {
            j as i64 - self.m as i64
        }
    }

    pub fn modes(&self) -> Arc<Modes> {
        type Cache = Mutex<HashMap<(usize, usize, u64), Arc<Modes>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (self.dim, self.m, self.length.to_bits());
        let mut guard = cache.lock().expect("mode cache poisoned");
        guard.entry(key).or_insert_with(|| Arc::new(Modes::build(self))).clone()
    }
}

/// Per-mode tables for a grid: integer wavenumbers, angular wavevectors,
/// Nyquist flags and the 2/3-rule mask.
#[derive(Debug)]
pub struct Modes {
    pub k: Vec<[i64; 3]>,
    pub xi: Vec<[f64; 3]>,
    pub xi2: Vec<f64>,
    pub nyquist: Vec<bool>,
    pub keep: Vec<bool>,
}

impl Modes {
    fn build(grid: &Grid) -> Self {
        let n = grid.npoints();
        let base = grid.base_frequency();
        let half = (grid.m / 2) as i64;
        let cut = (grid.m / 3) as i64;
        let mut k = Vec::with_capacity(n);
        let mut xi = Vec::with_capacity(n);
        let mut xi2 = Vec::with_capacity(n);
        let mut nyquist = Vec::with_capacity(n);
        let mut keep = Vec::with_capacity(n);
        for flat in 0..n {
            let idx = grid.multi_index(flat);
            let mut kk = [0i64; 3];
            let mut xx = [0f64; 3];
            let mut nyq = false;
            let mut kept = true;
            for axis in 0..grid.dim {
                kk[axis] = grid.signed_wavenumber(idx[axis]);
                xx[axis] = base * kk[axis] as f64;
                nyq |= kk[axis] == -half;
                kept &= kk[axis].abs() <= cut;
            }
            k.push(kk);
            xi2.push(xx.iter().map(|v| v * v).sum());
            xi.push(xx);
            nyquist.push(nyq);
            keep.push(kept);
        }
        Self { k, xi, xi2, nyquist, keep }
    }
}

/// Viscosity, elastic coupling and relaxation constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub nu: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl PhysicalConstants {
    pub fn new(nu: f64, lambda: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("nu", nu), ("lambda", lambda), ("gamma", gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidIndex(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { nu, lambda, gamma })
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { nu: 1.0, lambda: 1.0, gamma: 1.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(1, 16, 1.0).is_err());
        assert!(Grid::new(2, 12, 1.0).is_err());
        assert!(Grid::new(2, 4, 1.0).is_err());
        assert!(Grid::new(3, 16, -1.0).is_err());
        assert!(Grid::new(3, 16, 1.0).is_ok());
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::periodic(3, 8).unwrap();
        for flat in [0, 7, 63, 200, 511] {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
        }
    }

    #[test]
    fn mode_tables() {
        let g = Grid::periodic(2, 8).unwrap();
        let modes = g.modes();
        assert_eq!(modes.k[1], [0, 1, 0]);
        assert_eq!(modes.k[8 * 7], [-1, 0, 0]);
        assert!(modes.nyquist[4]);
        assert!(!modes.keep[3]);
        assert!(modes.keep[2]);
    }
}
