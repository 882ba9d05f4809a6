use std::f64::consts::TAU;

use rustfft::FftPlanner;

use super::function::{Domain, PhaseFunction};
use crate::error::{invalid, Result};
use crate::ops::C64;

/// Symplectic Fourier transform `(F f)(q,p) = (2 pi)^-1 int f(q',p') e^{i(q p' - p q')} dq' dp'`.
///
/// Maps the direct lattice onto the dual one and back; applying it twice is
/// the identity up to rounding. Quadrature is the plain Riemann sum, which
/// turns the centered grid sums into two passes of 1-D FFTs with
/// checkerboard sign corrections.
pub fn symplectic_fourier(f: &PhaseFunction) -> Result<PhaseFunction> {
    let Domain::Grid { grid, lattice } = *f.domain() else {
        return invalid("symplectic Fourier transform needs a phase-space grid");
    };
    grid.validate()?;
    let n = grid.n();
    let scale = grid.step(lattice).powi(2) / TAU;
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };

    let mut planner = FftPlanner::<f64>::new();
    let inverse = planner.plan_fft_inverse(n);
    let forward = planner.plan_fft_forward(n);

    // rows j, columns l: sum over l with e^{+2 pi i a l / n}
    let mut work: Vec<C64> = f.values().iter().enumerate().map(|(k, v)| v * sign(k / n + k % n)).collect();
    for row in work.chunks_exact_mut(n) {
        inverse.process(row);
    }
    // transpose so the remaining sum over j runs along rows
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for a in 0..n {
            out[a * n + j] = work[j * n + a];
        }
    }
    for row in out.chunks_exact_mut(n) {
        forward.process(row);
    }
    for (k, v) in out.iter_mut().enumerate() {
        *v *= scale * sign(k / n + k % n);
    }
    PhaseFunction::new(Domain::Grid { grid, lattice: lattice.dual() }, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weyl::grid::{Lattice, PhaseGrid};
    use rand::Rng;

    fn gaussian(grid: PhaseGrid, lattice: Lattice) -> PhaseFunction {
        PhaseFunction::from_fn(Domain::Grid { grid, lattice }, |g| {
            let (q, p) = g.coords();
            C64::new((-(q * q + p * p) / 2.0).exp(), 0.0)
        })
    }

    #[test]
    fn gaussian_is_fixed_point() {
        let grid = PhaseGrid::standard();
        let f = gaussian(grid, Lattice::Direct);
        let g = symplectic_fourier(&f).unwrap();
        assert_eq!(g.domain(), &Domain::Grid { grid, lattice: Lattice::Dual });
        let expected = gaussian(grid, Lattice::Dual);
        assert!(g.max_abs_diff(&expected).unwrap() < 1e-8);
    }

    #[test]
    fn matches_direct_quadrature_at_samples() {
        let grid = PhaseGrid::new(32, 4.0).unwrap();
        let dom = Domain::Grid { grid, lattice: Lattice::Direct };
        let f = PhaseFunction::from_fn(dom, |g| {
            let (q, p) = g.coords();
            C64::new((-(q - 0.5).powi(2) - p * p).exp(), q * (-(q * q + p * p)).exp())
        });
        let fast = symplectic_fourier(&f).unwrap();
        let w = grid.step(Lattice::Direct).powi(2) / TAU;
        for idx in [0usize, 17, 100, 513, 700, 1023] {
            let (q, p) = fast.domain().point(idx).coords();
            let direct: C64 = (0..dom.len())
                .map(|k| {
                    let (q1, p1) = dom.point(k).coords();
                    f.values()[k] * C64::from_polar(1.0, q * p1 - p * q1)
                })
                .sum::<C64>()
                * w;
            assert!((direct - fast.values()[idx]).norm() < 1e-12);
        }
    }

    #[test]
    fn involutive_and_unitary() {
        let grid = PhaseGrid::new(64, 6.0).unwrap();
        let mut rng = crate::ops::seeded_rng(3);
        let vals: Vec<C64> = (0..grid.len()).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let f = PhaseFunction::new(Domain::Grid { grid, lattice: Lattice::Direct }, vals).unwrap();
        let g = symplectic_fourier(&f).unwrap();
        assert!((g.norm() - f.norm()).abs() < 1e-10 * f.norm());
        let back = symplectic_fourier(&g).unwrap();
        assert!(back.max_abs_diff(&f).unwrap() < 1e-10);
    }

    #[test]
    fn rejects_finite_domain() {
        assert!(symplectic_fourier(&PhaseFunction::zeros(Domain::Finite { d: 3 })).is_err());
    }
}
