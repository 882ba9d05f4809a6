use super::fourier::symplectic_fourier;
use super::function::{Domain, PhaseFunction, Side, Tomogram};
use super::grid::{Lattice, PhaseGrid};
use super::rep::{RepDescriptor, Representation};
use crate::error::{invalid, Error, Result};
use crate::ops::{Operator, C64};

/// Normalization of the direct pure-state formula relative to `F_s W_U`.
///
/// With the `(2 pi)^-1 dq dp` Haar measure the composition equals the Weyl
/// symbol, i.e. `2 pi` times the probability-normalized Wigner function, so
/// the integral `int psi(q - y/2) conj(psi(q + y/2)) e^{ipy} dy` is taken
/// with prefactor one.
pub const WIGNER_DIRECT_PREFACTOR: f64 = 1.0;

/// Fourier-Wigner tomogram `g -> d_U^-1 tr(U(g)* rho)`.
pub fn fw_transform(rep: &Representation, rho: &Operator) -> Result<Tomogram> {
    let scale = 1.0 / rep.duflo_moore();
    let values = rep.descriptor().raw_trace_all(rho)?.into_iter().map(|z| z * scale).collect();
    let function = PhaseFunction::new(rep.fw_domain(), values)?;
    Ok(Tomogram::new(Side::FourierWigner, rep.descriptor().clone(), function))
}

/// Inverse of [`fw_transform`]: `d_U^-1 sum_g f(g) U(g) w`.
pub fn fw_inverse(rep: &Representation, f: &PhaseFunction) -> Result<Operator> {
    rep.fw_domain().check_same(f.domain())?;
    let scale = f.domain().haar_weight() / rep.duflo_moore();
    let coeffs: Vec<C64> = f.values().iter().map(|z| z * scale).collect();
    Ok(Operator::from_matrix_unchecked(rep.descriptor().weighted_sum(&coeffs)?))
}

/// Wigner-side tomogram `F_s W_U rho` on the direct lattice.
pub fn wigner_transform(rep: &Representation, rho: &Operator) -> Result<Tomogram> {
    if !matches!(rep.descriptor(), RepDescriptor::FockDisplacement { .. }) {
        return Err(Error::Unsupported("the Wigner side exists for the phase plane only".into()));
    }
    let fw = fw_transform(rep, rho)?;
    let w = symplectic_fourier(fw.function())?;
    Ok(Tomogram::new(Side::Wigner, rep.descriptor().clone(), w))
}

/// Back from the Wigner side: `W_U^-1 F_s`.
pub fn wigner_inverse(rep: &Representation, w: &PhaseFunction) -> Result<Operator> {
    fw_inverse(rep, &symplectic_fourier(w)?)
}

/// Position-space Hermite functions `psi_0..psi_{k-1}` at `x`.
fn hermite_functions(k: usize, x: f64, out: &mut [f64]) {
    if k == 0 {
        return;
    }
    out[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    if k > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for n in 1..k - 1 {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

/// Wigner function of the pure state with Fock amplitudes `psi`, straight from
/// the position-space integral, on the direct lattice of `grid`.
///
/// The `y` integral uses the trapezoid rule with step `2h` so every
/// evaluation point `q +- y/2` lies on the (extended) grid.
pub fn wigner_pure_state(grid: PhaseGrid, psi: &[C64]) -> Result<PhaseFunction> {
    grid.validate()?;
    if psi.is_empty() {
        return invalid("state vector must be non-empty");
    }
    let n = grid.n() as i64;
    let h = grid.step(Lattice::Direct);
    // wavefunction on x_j = (j - n/2) h for j in [-n, 2n)
    let offset = n;
    let mut basis = vec![0.0; psi.len()];
    let wave: Vec<C64> = (-n..2 * n)
        .map(|j| {
            let x = (j - n / 2) as f64 * h;
            hermite_functions(psi.len(), x, &mut basis);
            psi.iter().zip(&basis).map(|(c, b)| c * b).sum()
        })
        .collect();
    let at = |j: i64| wave[(j + offset) as usize];
    let ps = grid.coords(Lattice::Direct);
    let domain = Domain::Grid { grid, lattice: Lattice::Direct };
    let mut values = vec![C64::new(0.0, 0.0); domain.len()];
    let mut terms = Vec::with_capacity(2 * n as usize + 1);
    for i in 0..n {
        terms.clear();
        for k in -n..=n {
            terms.push((k, at(i - k) * at(i + k).conj()));
        }
        for (jp, &p) in ps.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &(k, v) in &terms {
                acc += v * C64::from_polar(1.0, p * 2.0 * k as f64 * h);
            }
            values[i as usize * n as usize + jp] = acc * (2.0 * h * WIGNER_DIRECT_PREFACTOR);
        }
    }
    PhaseFunction::new(domain, values)
}

/// `sum A(x) rho(x) w` over the grid: the classical-looking form of `tr(A rho)`.
pub fn expectation_phase_space(a: &Tomogram, rho: &Tomogram) -> Result<f64> {
    if a.side() != Side::Wigner || rho.side() != Side::Wigner {
        return invalid("phase-space expectation needs Wigner-side tomograms");
    }
    a.domain().check_same(rho.domain())?;
    let s: C64 = a.values().iter().zip(rho.values()).map(|(x, y)| x * y).sum();
    Ok(s.re * a.domain().haar_weight())
}
