use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Which of the two mutually dual lattices a grid function lives on.
///
/// Wigner functions and classical densities use the direct lattice; tomograms
/// of the Fourier-Wigner transform use the dual lattice, whose spacing is
/// `pi / half_width` so that the symplectic Fourier transform maps one onto
/// the other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lattice {
    Direct,
    Dual,
}

impl Lattice {
    pub fn dual(self) -> Self {
        match self {
            Self::Direct => Self::Dual,
            Self::Dual => Self::Direct,
        }
    }
}

/// Square sampling of the phase plane with `n` points per axis.
///
/// Direct points are `x_j = -L + j (2L/n)`, so index `n/2` is the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseGrid {
    n: usize,
    half_width: f64,
}

impl PhaseGrid {
    pub const DEFAULT_POINTS: usize = 256;
    pub const DEFAULT_HALF_WIDTH: f64 = 8.0;

    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        let grid = Self { n, half_width };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 || !self.n.is_power_of_two() {
            return invalid(format!("grid size must be a power of two >= 4, got {}", self.n));
        }
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return invalid(format!("grid half-width must be positive, got {}", self.half_width));
        }
        Ok(())
    }

    /// `n = 256`, `L = 8`.
    pub fn standard() -> Self {
        Self { n: Self::DEFAULT_POINTS, half_width: Self::DEFAULT_HALF_WIDTH }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self, lattice: Lattice) -> f64 {
        match lattice {
            Lattice::Direct => 2.0 * self.half_width / self.n as f64,
            Lattice::Dual => PI / self.half_width,
        }
    }

    /// Coordinate of index `j` along either axis.
    pub fn coord(&self, lattice: Lattice, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.step(lattice)
    }

    pub fn coords(&self, lattice: Lattice) -> Vec<f64> {
        (0..self.n).map(|j| self.coord(lattice, j)).collect()
    }

    /// Lattice index of coordinate `x`, if it is a grid point within range.
    pub fn index_of(&self, lattice: Lattice, x: f64) -> Option<usize> {
        let t = x / self.step(lattice) + (self.n / 2) as f64;
        let j = t.round();
        ((t - j).abs() <= 1e-9 && j >= 0.0 && j < self.n as f64).then_some(j as usize)
    }

    /// Haar weight of one cell: `step^2 / (2 pi)`.
    pub fn haar_weight(&self, lattice: Lattice) -> f64 {
        self.step(lattice).powi(2) / TAU
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(PhaseGrid::new(100, 8.0).is_err());
        assert!(PhaseGrid::new(2, 8.0).is_err());
        assert!(PhaseGrid::new(64, 0.0).is_err());
    }

    #[test]
    fn dual_steps_multiply_to_two_pi_over_n() {
        let g = PhaseGrid::standard();
        let prod = g.step(Lattice::Direct) * g.step(Lattice::Dual);
        assert!((prod - TAU / g.n() as f64).abs() < 1e-15);
        assert_eq!(g.coord(Lattice::Direct, 0), -8.0);
        assert_eq!(g.coord(Lattice::Dual, 128), 0.0);
    }

    #[test]
    fn index_lookup() {
        let g = PhaseGrid::new(32, 4.0).unwrap();
        assert_eq!(g.index_of(Lattice::Direct, -4.0), Some(0));
        assert_eq!(g.index_of(Lattice::Direct, 0.25), Some(17));
        assert_eq!(g.index_of(Lattice::Direct, 0.3), None);
        assert_eq!(g.index_of(Lattice::Direct, 4.0), None);
    }
}
