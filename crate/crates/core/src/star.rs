//! Star products: twisted convolution on the Fourier-Wigner side, the
//! Groenewold-Moyal twisted product on the Wigner side, and the finite analogue.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::group::{half_mod, root_of_unity};
use crate::ops::C64;
use crate::weyl::{symplectic_fourier, Domain, Lattice, PhaseFunction};

/// Largest grid the `O(n^4)` routes accept.
pub const MAX_QUADRATIC_GRID: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StarKind {
    TwistedConvolution,
    TwistedProduct,
    FiniteTwisted,
}

/// Kernel prefactor of a star product, with respect to the plain sum (finite)
/// or Lebesgue measure (plane).
///
/// The values are the ones forced by `f(A) * f(B) = f(AB)`; the tests pin
/// them against operator multiplication.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarKernel {
    pub kind: StarKind,
    pub normalization: f64,
}

impl StarKernel {
    /// `(2 pi)^-1`: Haar density over `d_U = 1`.
    pub fn twisted_convolution() -> Self {
        Self { kind: StarKind::TwistedConvolution, normalization: 1.0 / TAU }
    }

    /// `pi^-2`, with kernel `exp(2i sigma(x' - x, x'' - x))`.
    pub fn twisted_product() -> Self {
        Self { kind: StarKind::TwistedProduct, normalization: 1.0 / (PI * PI) }
    }

    /// `d^-1/2`: counting measure over `d_U = sqrt(d)`.
    pub fn finite_twisted(d: usize) -> Self {
        Self { kind: StarKind::FiniteTwisted, normalization: 1.0 / (d as f64).sqrt() }
    }
}

/// How a grid star product is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// `O(n^4)` quadrature, small grids only.
    Direct,
    /// Row-wise FFT convolutions.
    Fast,
}

/// Twisted-product evaluation route.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductRoute {
    /// Quadrature of the Groenewold-Moyal integral.
    Kernel,
    /// `F_s((F_s f1) * (F_s f2))`.
    Fourier,
}

fn grid_of(f: &PhaseFunction) -> Result<(crate::weyl::PhaseGrid, Lattice)> {
    f.domain().grid().ok_or_else(|| Error::DomainMismatch("star product needs grid functions".into()))
}

fn check_quadratic(n: usize) -> Result<()> {
    if n > MAX_QUADRATIC_GRID {
        return Err(Error::CostLimit(format!(
            "quadrature route is O(n^4); grid n = {n} exceeds {MAX_QUADRATIC_GRID} ({} kernel evaluations)",
            (n as u128).pow(4)
        )));
    }
    Ok(())
}

/// `(f1 * f2)(g) = (2 pi)^-1 int f1(h) f2(g - h) exp(-(i/2)(h_q g_p - h_p g_q)) dh`.
///
/// Values outside the grid are treated as zero.
pub fn twisted_convolution(f1: &PhaseFunction, f2: &PhaseFunction, route: Route) -> Result<PhaseFunction> {
    f1.domain().check_same(f2.domain())?;
    let (grid, lattice) = grid_of(f1)?;
    let n = grid.n();
    let s = grid.step(lattice);
    let c = n / 2;
    let scale = StarKernel::twisted_convolution().normalization * s * s;
    // E[a][b] = exp(-(i/2) s^2 (a - c)(b - c))
    let table: Vec<C64> = (0..n * n)
        .map(|k| C64::from_polar(1.0, -0.5 * s * s * ((k / n) as f64 - c as f64) * ((k % n) as f64 - c as f64)))
        .collect();
    let e = |a: usize, b: usize| table[a * n + b];
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    match route {
        Route::Direct => {
            check_quadratic(n)?;
            for i in 0..n {
                for j in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for i1 in 0..n {
                        let Some(i2) = (i + c).checked_sub(i1).filter(|&v| v < n) else { continue };
                        for j1 in 0..n {
                            let Some(j2) = (j + c).checked_sub(j1).filter(|&v| v < n) else { continue };
                            // phase exp(-(i/2)(h_q g_p - h_p g_q))
                            acc += f1.at(i1, j1) * f2.at(i2, j2) * e(i1, j) * e(j1, i).conj();
                        }
                    }
                    out[i * n + j] = acc * scale;
                }
            }
        }
        Route::Fast => fast_twisted(f1, f2, n, &e, &mut out, scale),
    }
    PhaseFunction::new(*f1.domain(), out)
}

fn row_is_negligible(row: &[C64], cutoff: f64) -> bool {
    row.iter().all(|z| z.norm() <= cutoff)
}

/// For fixed output row `q` and source row `q'` the `p'` sum is an ordinary
/// 1-D convolution once `f1` is dressed with `exp((i/2) q p')`.
fn fast_twisted(f1: &PhaseFunction, f2: &PhaseFunction, n: usize, e: &dyn Fn(usize, usize) -> C64, out: &mut [C64], scale: f64) {
    let c = n / 2;
    let len = 2 * n;
    let mut planner = FftPlanner::<f64>::new();
    let fwd: Arc<dyn Fft<f64>> = planner.plan_fft_forward(len);
    let inv: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(len);
    let zero = C64::new(0.0, 0.0);
    // rows whose every entry is below this are dropped; far under rounding of the result
    let cutoff = 1e-30 * f1.max_abs().max(f2.max_abs());
    let f1_live: Vec<bool> = (0..n).map(|i| !row_is_negligible(&f1.values()[i * n..(i + 1) * n], cutoff)).collect();
    let f2_spec: Vec<Option<Vec<C64>>> = (0..n)
        .map(|i| {
            let row = &f2.values()[i * n..(i + 1) * n];
            (!row_is_negligible(row, cutoff)).then(|| {
                let mut buf = vec![zero; len];
                buf[..n].copy_from_slice(row);
                fwd.process(&mut buf);
                buf
            })
        })
        .collect();
    let mut buf = vec![zero; len];
    let mut acc = vec![zero; n];
    for i in 0..n {
        acc.iter_mut().for_each(|z| *z = zero);
        let mut any = false;
        for i1 in 0..n {
            if !f1_live[i1] {
                continue;
            }
            let Some(i2) = (i + c).checked_sub(i1).filter(|&v| v < n) else { continue };
            let Some(spec2) = &f2_spec[i2] else { continue };
            any = true;
            for j1 in 0..n {
                // exp((i/2) q p') with q = row i, p' = column j1
                buf[j1] = f1.at(i1, j1) * e(j1, i).conj();
            }
            buf[n..].iter_mut().for_each(|z| *z = zero);
            fwd.process(&mut buf);
            for (a, b) in buf.iter_mut().zip(spec2) {
                *a *= b;
            }
            inv.process(&mut buf);
            for j in 0..n {
                // exp(-(i/2) q' p)
                acc[j] += buf[j + c] * e(i1, j);
            }
        }
        if any {
            let norm = scale / len as f64;
            for j in 0..n {
                out[i * n + j] = acc[j] * norm;
            }
        }
    }
}

/// `(f1 * f2)(g) = d^-1/2 sum_h f1(h) f2(g - h) conj(m(h, g - h))` on `Z_d^2`.
pub fn finite_twisted(f1: &PhaseFunction, f2: &PhaseFunction) -> Result<PhaseFunction> {
    f1.domain().check_same(f2.domain())?;
    let Domain::Finite { d } = *f1.domain() else {
        return Err(Error::DomainMismatch("finite twisted convolution needs functions on Z_d^2".into()));
    };
    let scale = StarKernel::finite_twisted(d).normalization;
    let h2 = half_mod(d);
    let mut out = vec![C64::new(0.0, 0.0); d * d];
    for a in 0..d {
        for b in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for a1 in 0..d {
                for b1 in 0..d {
                    let v1 = f1.at(a1, b1);
                    if v1 == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let v2 = f2.at((a + d - a1) % d, (b + d - b1) % d);
                    // conj(m(h, g - h)) = w^{-(d+1)/2 (a1 b - b1 a)}
                    let k = h2 * ((a1 * b) as i64 - (b1 * a) as i64);
                    acc += v1 * v2 * root_of_unity(d, -k);
                }
            }
            out[a * d + b] = acc * scale;
        }
    }
    PhaseFunction::new(*f1.domain(), out)
}

/// Twisted (Moyal) product of two Wigner-side functions on the direct lattice.
pub fn twisted_product(f1: &PhaseFunction, f2: &PhaseFunction, route: ProductRoute) -> Result<PhaseFunction> {
    f1.domain().check_same(f2.domain())?;
    let (grid, lattice) = grid_of(f1)?;
    if lattice != Lattice::Direct {
        return invalid("twisted product acts on direct-lattice (Wigner-side) functions");
    }
    match route {
        ProductRoute::Fourier => {
            let g1 = symplectic_fourier(f1)?;
            let g2 = symplectic_fourier(f2)?;
            symplectic_fourier(&twisted_convolution(&g1, &g2, Route::Fast)?)
        }
        ProductRoute::Kernel => {
            let n = grid.n();
            check_quadratic(n)?;
            let h = grid.step(lattice);
            let x = grid.coords(lattice);
            // F2(y) = sum_{x''} f2(x'') exp(2i sigma(y, x'')) for y on the difference lattice
            let m = 2 * n - 1;
            let diff = |k: usize| (k as f64 - (n - 1) as f64) * h;
            let mut f2hat = vec![C64::new(0.0, 0.0); m * m];
            for (ya, slot_row) in f2hat.chunks_exact_mut(m).enumerate() {
                let yq = diff(ya);
                for (yb, slot) in slot_row.iter_mut().enumerate() {
                    let yp = diff(yb);
                    let mut acc = C64::new(0.0, 0.0);
                    for i2 in 0..n {
                        for j2 in 0..n {
                            let v = f2.at(i2, j2);
                            if v != C64::new(0.0, 0.0) {
                                acc += v * C64::from_polar(1.0, 2.0 * (yq * x[j2] - yp * x[i2]));
                            }
                        }
                    }
                    *slot = acc;
                }
            }
            // (f1 * f2)(x) = pi^-2 h^4 sum_{x'} f1(x') exp(-2i sigma(x' - x, x)) F2(x' - x)
            let scale = StarKernel::twisted_product().normalization * h.powi(4);
            let mut out = vec![C64::new(0.0, 0.0); n * n];
            for i in 0..n {
                for j in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for i1 in 0..n {
                        for j1 in 0..n {
                            let v = f1.at(i1, j1);
                            if v == C64::new(0.0, 0.0) {
                                continue;
                            }
                            let (dq, dp) = (x[i1] - x[i], x[j1] - x[j]);
                            let phase = -2.0 * (dq * x[j] - dp * x[i]);
                            let k = (i1 + n - 1 - i) * m + (j1 + n - 1 - j);
                            acc += v * C64::from_polar(1.0, phase) * f2hat[k];
                        }
                    }
                    out[i * n + j] = acc * scale;
                }
            }
            PhaseFunction::new(*f1.domain(), out)
        }
    }
}
