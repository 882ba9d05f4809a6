//! Square-integrable projective representations of the two phase spaces.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::function::Domain;
use super::grid::{Lattice, PhaseGrid};
use crate::error::{invalid, Error, Result};
use crate::group::{half_mod, multiplier_value, root_of_unity, GroupContext, GroupElement};
use crate::ops::{random_density, random_density_embedded, Operator, C64};

/// Smallest Fock truncation accepted by [`displacement`].
pub const MIN_FOCK_DIM: usize = 8;
/// Largest `d` for the discrete Weyl system.
pub const MAX_WEYL_DIM: usize = 128;
/// Largest Fock truncation.
pub const MAX_FOCK_DIM: usize = 64;

const DUFLO_SPREAD_FINITE: f64 = 1e-6;
const DUFLO_SPREAD_GRID: f64 = 1e-3;
const KLM_CALIBRATION_TOL: f64 = 1e-8;

/// Serializable description of a representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RepDescriptor {
    DiscreteWeyl { d: usize },
    FockDisplacement { n_fock: usize, grid: PhaseGrid },
}

impl RepDescriptor {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::DiscreteWeyl { d } => {
                GroupContext::finite(*d)?;
                if *d > MAX_WEYL_DIM {
                    return invalid(format!("discrete Weyl dimension {d} exceeds {MAX_WEYL_DIM}"));
                }
                Ok(())
            }
            Self::FockDisplacement { n_fock, grid } => {
                if *n_fock < MIN_FOCK_DIM || *n_fock > MAX_FOCK_DIM {
                    return invalid(format!("Fock truncation must lie in {MIN_FOCK_DIM}..={MAX_FOCK_DIM}, got {n_fock}"));
                }
                grid.validate()
            }
        }
    }

    pub fn context(&self) -> GroupContext {
        match *self {
            Self::DiscreteWeyl { d } => GroupContext::Finite { d },
            Self::FockDisplacement { .. } => GroupContext::Plane,
        }
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        match *self {
            Self::DiscreteWeyl { d } => d,
            Self::FockDisplacement { n_fock, .. } => n_fock,
        }
    }

    /// Domain of Fourier-Wigner tomograms: `Z_d^2` or the dual lattice.
    pub fn fw_domain(&self) -> Domain {
        match *self {
            Self::DiscreteWeyl { d } => Domain::Finite { d },
            Self::FockDisplacement { grid, .. } => Domain::Grid { grid, lattice: Lattice::Dual },
        }
    }

    pub fn grid(&self) -> Option<PhaseGrid> {
        match *self {
            Self::FockDisplacement { grid, .. } => Some(grid),
            Self::DiscreteWeyl { .. } => None,
        }
    }

    /// The operator `U(g)`; for the plane, the exponential of the truncated generator.
    ///
    /// Transforms do not use this: they take matrix elements of the exact
    /// displacement, which the truncated exponential only matches near the origin.
    pub fn unitary(&self, g: &GroupElement) -> Result<Operator> {
        self.context().check(g)?;
        match (self, *g) {
            (Self::DiscreteWeyl { d }, GroupElement::Finite(a, b)) => discrete_weyl(*d, (a, b)),
            (Self::FockDisplacement { n_fock, .. }, GroupElement::Plane(q, p)) => displacement(*n_fock, (q, p)),
            _ => Err(Error::GroupMismatch),
        }
    }

    /// `tr(U(g)* rho)`.
    pub(crate) fn raw_trace(&self, g: &GroupElement, rho: &Operator) -> Result<C64> {
        check_dim(self, rho)?;
        self.context().check(g)?;
        match (self, *g) {
            (Self::DiscreteWeyl { d }, GroupElement::Finite(a, b)) => Ok(weyl_trace(*d, a, b, rho)),
            (Self::FockDisplacement { .. }, GroupElement::Plane(q, p)) => {
                let k = rho.support_size();
                let mut scratch = BlockScratch::new(k);
                Ok(scratch.trace_adjoint(q, p, rho))
            }
            _ => Err(Error::GroupMismatch),
        }
    }

    /// `tr(U(g)* rho)` at every point of [`RepDescriptor::fw_domain`].
    pub(crate) fn raw_trace_all(&self, rho: &Operator) -> Result<Vec<C64>> {
        check_dim(self, rho)?;
        let domain = self.fw_domain();
        match *self {
            Self::DiscreteWeyl { d } => Ok((0..domain.len()).map(|k| weyl_trace(d, k / d, k % d, rho)).collect()),
            Self::FockDisplacement { grid, .. } => {
                let mut scratch = BlockScratch::new(rho.support_size());
                let coords = grid.coords(Lattice::Dual);
                let mut out = Vec::with_capacity(domain.len());
                for &q in &coords {
                    for &p in &coords {
                        out.push(scratch.trace_adjoint(q, p, rho));
                    }
                }
                Ok(out)
            }
        }
    }

    /// First `cols` columns of `U(g)`; exact displacement matrix elements on the plane.
    pub(crate) fn unitary_columns(&self, g: &GroupElement, cols: usize) -> Result<DMatrix<C64>> {
        self.context().check(g)?;
        match (self, *g) {
            (Self::DiscreteWeyl { d }, GroupElement::Finite(a, b)) => {
                Ok(discrete_weyl(*d, (a, b))?.into_matrix().columns(0, cols).into_owned())
            }
            (Self::FockDisplacement { n_fock, .. }, GroupElement::Plane(q, p)) => Ok(displacement_columns(*n_fock, cols, q, p)),
            _ => Err(Error::GroupMismatch),
        }
    }

    /// `U(g) A U(g)*`, using only the leading support block of `A`.
    pub(crate) fn conjugate(&self, g: &GroupElement, a: &Operator) -> Result<Operator> {
        check_dim(self, a)?;
        let k = a.support_size().max(1);
        let u = self.unitary_columns(g, k)?;
        let block = a.matrix().view((0, 0), (k, k));
        Ok(Operator::from_matrix_unchecked(&u * block * u.adjoint()))
    }

    /// `sum_k c_k U(g_k)` over the points of [`RepDescriptor::fw_domain`]; zero coefficients are skipped.
    pub(crate) fn weighted_sum(&self, coeffs: &[C64]) -> Result<DMatrix<C64>> {
        let domain = self.fw_domain();
        if coeffs.len() != domain.len() {
            return Err(Error::DimensionMismatch(coeffs.len(), domain.len()));
        }
        let n = self.dim();
        let mut acc = DMatrix::zeros(n, n);
        match *self {
            Self::DiscreteWeyl { d } => {
                for (k, c) in coeffs.iter().enumerate() {
                    let (a, b) = (k / d, k % d);
                    let base = half_mod(d) * (a * b) as i64;
                    for j in 0..d {
                        acc[((j + a) % d, j)] += c * root_of_unity(d, base + (b * j) as i64);
                    }
                }
            }
            Self::FockDisplacement { .. } => {
                let mut scratch = BlockScratch::new(n);
                for (k, c) in coeffs.iter().enumerate() {
                    if *c == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let (q, p) = domain.point(k).coords();
                    scratch.fill(q, p);
                    for (dst, src) in acc.iter_mut().zip(&scratch.block) {
                        *dst += c * src;
                    }
                }
            }
        }
        Ok(acc)
    }
}

fn check_dim(desc: &RepDescriptor, rho: &Operator) -> Result<()> {
    if rho.dim() != desc.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), desc.dim()));
    }
    Ok(())
}

/// Discrete Weyl operator `U(a, b) = w^{(d+1)/2 ab} X^a Z^b` on `C^d`.
pub fn discrete_weyl(d: usize, g: (usize, usize)) -> Result<Operator> {
    GroupContext::finite(d)?;
    let (a, b) = (g.0 % d, g.1 % d);
    let mut m = DMatrix::zeros(d, d);
    let base = half_mod(d) * (a * b) as i64;
    for k in 0..d {
        m[((k + a) % d, k)] = root_of_unity(d, base + (b * k) as i64);
    }
    Ok(Operator::from_matrix_unchecked(m))
}

/// `tr(U(a,b)* rho)` using the monomial structure of `U(a, b)`.
fn weyl_trace(d: usize, a: usize, b: usize, rho: &Operator) -> C64 {
    let base = half_mod(d) * (a * b) as i64;
    (0..d).map(|k| root_of_unity(d, base + (b * k) as i64).conj() * rho.get((k + a) % d, k)).sum()
}

/// `exp(i(p Q - q P))` on the `n`-dimensional truncated Fock space, by matrix exponential.
pub fn displacement(n: usize, g: (f64, f64)) -> Result<Operator> {
    if n < MIN_FOCK_DIM {
        return invalid(format!("Fock truncation must be at least {MIN_FOCK_DIM}, got {n}"));
    }
    let alpha = C64::new(g.0, g.1) * std::f64::consts::FRAC_1_SQRT_2;
    // alpha a^dagger - conj(alpha) a
    let gen = DMatrix::from_fn(n, n, |i, j| {
        if i == j + 1 {
            alpha * (i as f64).sqrt()
        } else if j == i + 1 {
            -alpha.conj() * (j as f64).sqrt()
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Operator::new(gen.exp())
}

/// Top-left `k x k` block of the exact displacement operator in the Fock basis.
pub fn displacement_block(k: usize, q: f64, p: f64) -> DMatrix<C64> {
    displacement_columns(k, k, q, p)
}

/// First `cols` columns of the exact displacement operator, rows `0..rows`.
pub fn displacement_columns(rows: usize, cols: usize, q: f64, p: f64) -> DMatrix<C64> {
    let mut scratch = BlockScratch::with_shape(rows, cols);
    scratch.fill(q, p);
    DMatrix::from_column_slice(rows, cols, &scratch.block)
}

/// Column recurrence for `<m|D(alpha)|n>`:
/// `<m|D|n+1> = (sqrt(m) <m-1|D|n> - conj(alpha) <m|D|n>) / sqrt(n+1)`,
/// seeded by the coherent state `<m|D|0>`.
struct BlockScratch {
    rows: usize,
    cols: usize,
    sqrt: Vec<f64>,
    block: Vec<C64>,
}

impl BlockScratch {
    fn new(k: usize) -> Self {
        Self::with_shape(k, k)
    }

    fn with_shape(rows: usize, cols: usize) -> Self {
        let top = rows.max(cols);
        Self {
            rows,
            cols,
            sqrt: (0..=top).map(|j| (j as f64).sqrt()).collect(),
            block: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Column-major block.
    fn fill(&mut self, q: f64, p: f64) {
        let (rows, cols) = (self.rows, self.cols);
        if rows == 0 || cols == 0 {
            return;
        }
        let alpha = C64::new(q, p) * std::f64::consts::FRAC_1_SQRT_2;
        let ac = alpha.conj();
        let r2 = alpha.norm_sqr();
        let mut c = C64::new((-0.5 * r2).exp(), 0.0);
        self.block[0] = c;
        for m in 1..rows {
            c = c * alpha / self.sqrt[m];
            self.block[m] = c;
        }
        for n in 0..cols - 1 {
            let (prev, next) = self.block.split_at_mut((n + 1) * rows);
            let col = &prev[n * rows..];
            let inv = 1.0 / self.sqrt[n + 1];
            next[0] = -ac * col[0] * inv;
            for m in 1..rows {
                next[m] = (col[m - 1] * self.sqrt[m] - ac * col[m]) * inv;
            }
        }
    }

    /// `tr(D(q,p)* rho)` restricted to the first `k` basis states (square scratch).
    fn trace_adjoint(&mut self, q: f64, p: f64, rho: &Operator) -> C64 {
        self.fill(q, p);
        let k = self.rows;
        let mut acc = C64::new(0.0, 0.0);
        for n in 0..k {
            for m in 0..k {
                acc += self.block[n * k + m].conj() * rho.get(m, n);
            }
        }
        acc
    }
}

/// Phase of the twisted Gram matrix: `conj(m(g_j, g_k^-1))`.
///
/// With `B = sum_k c_k U(g_k)*`, `tr(B rho B*) = d_U sum conj(c_j) c_k f(g_j^-1 g_k) phi(g_j, g_k)`.
pub fn klm_phase(ctx: &GroupContext, gj: &GroupElement, gk: &GroupElement) -> Result<C64> {
    Ok(multiplier_value(ctx, gj, &ctx.inverse(gk)?)?.conj())
}

/// A representation together with its computed Duflo-Moore constant.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    descriptor: RepDescriptor,
    duflo_moore: f64,
    klm_residual: Option<f64>,
}

impl Representation {
    pub fn new(descriptor: RepDescriptor) -> Result<Self> {
        descriptor.validate()?;
        let probes = default_probes(&descriptor)?;
        let duflo_moore = duflo_moore_constant(&descriptor, &probes)?;
        let mut rep = Self { descriptor, duflo_moore, klm_residual: None };
        let residual = rep.klm_calibration_residual()?;
        rep.klm_residual = (residual <= KLM_CALIBRATION_TOL).then_some(residual);
        Ok(rep)
    }

    pub fn discrete_weyl(d: usize) -> Result<Self> {
        Self::new(RepDescriptor::DiscreteWeyl { d })
    }

    pub fn fock(n_fock: usize, grid: PhaseGrid) -> Result<Self> {
        Self::new(RepDescriptor::FockDisplacement { n_fock, grid })
    }

    pub fn descriptor(&self) -> &RepDescriptor {
        &self.descriptor
    }

    pub fn context(&self) -> GroupContext {
        self.descriptor.context()
    }

    pub fn dim(&self) -> usize {
        self.descriptor.dim()
    }

    pub fn duflo_moore(&self) -> f64 {
        self.duflo_moore
    }

    pub fn fw_domain(&self) -> Domain {
        self.descriptor.fw_domain()
    }

    pub fn grid(&self) -> Option<PhaseGrid> {
        self.descriptor.grid()
    }

    pub fn unitary(&self, g: &GroupElement) -> Result<Operator> {
        self.descriptor.unitary(g)
    }

    /// Operator-oracle residual of the frozen twisted-Gram phase, if it validated.
    pub fn klm_residual(&self) -> Option<f64> {
        self.klm_residual
    }

    /// Single Fourier-Wigner sample `d_U^-1 tr(U(g)* rho)`.
    pub fn fw_value(&self, g: &GroupElement, rho: &Operator) -> Result<C64> {
        Ok(self.descriptor.raw_trace(g, rho)? / self.duflo_moore)
    }

    /// Compares the twisted Gram form against `d_U^-1 tr(B rho B*)` for a fixed probe.
    fn klm_calibration_residual(&self) -> Result<f64> {
        let ctx = self.context();
        let points: Vec<GroupElement> = match self.descriptor {
            RepDescriptor::DiscreteWeyl { .. } => [(0, 0), (1, 0), (0, 1), (2, 1), (1, 2)]
                .iter()
                .map(|&(a, b)| ctx.element(a, b))
                .collect::<Result<_>>()?,
            RepDescriptor::FockDisplacement { grid, .. } => {
                let s = grid.step(Lattice::Dual);
                [(0, 0), (1, 0), (0, 1), (1, -1), (-1, 2)]
                    .iter()
                    .map(|&(i, j)| GroupElement::Plane(i as f64 * s, j as f64 * s))
                    .collect()
            }
        };
        let rho = random_density_embedded(self.dim(), 3.min(self.dim()), 17)?;
        let coeffs: Vec<C64> = (0..points.len()).map(|k| C64::new(1.0 + 0.3 * k as f64, 0.5 - 0.2 * k as f64)).collect();
        let mut form = C64::new(0.0, 0.0);
        for (j, gj) in points.iter().enumerate() {
            for (k, gk) in points.iter().enumerate() {
                let diff = ctx.compose(&ctx.inverse(gj)?, gk)?;
                form += coeffs[j].conj() * coeffs[k] * self.fw_value(&diff, &rho)? * klm_phase(&ctx, gj, gk)?;
            }
        }
        let mut b = Operator::zeros(self.dim());
        for (k, gk) in points.iter().enumerate() {
            b = &b + &self.unitary(gk)?.adjoint().scale(coeffs[k]);
        }
        let oracle = (&(&b * &rho) * &b.adjoint()).trace() / self.duflo_moore;
        Ok((form - oracle).norm() / oracle.norm().max(1e-300))
    }
}

fn default_probes(desc: &RepDescriptor) -> Result<Vec<Operator>> {
    match *desc {
        RepDescriptor::DiscreteWeyl { d } => {
            (1..=3).map(|seed| random_density(d, seed).map(|r| r.into_operator())).collect()
        }
        RepDescriptor::FockDisplacement { n_fock, .. } => {
            let mut probes = vec![Operator::matrix_unit(n_fock, 0, 0)?];
            for seed in 1..=2 {
                probes.push(random_density_embedded(n_fock, 3, seed)?.into_operator());
            }
            Ok(probes)
        }
    }
}

/// Constant `c` with `sum_g |tr(U(g)* A)|^2 w_g = c^2 ||A||_HS^2` across the probes.
///
/// Fails when the per-probe values spread by more than `1e-6` (finite) or `1e-3` (grid).
pub fn duflo_moore_constant(desc: &RepDescriptor, probes: &[Operator]) -> Result<f64> {
    desc.validate()?;
    if probes.len() < 3 {
        return invalid(format!("need at least 3 probe operators, got {}", probes.len()));
    }
    let weight = desc.fw_domain().haar_weight();
    let mut values = Vec::with_capacity(probes.len());
    for a in probes {
        let norm2 = a.hs_norm().powi(2);
        if norm2 == 0.0 {
            return invalid("probe operators must be nonzero");
        }
        let sum: f64 = desc.raw_trace_all(a)?.iter().map(|z| z.norm_sqr()).sum::<f64>() * weight;
        values.push((sum / norm2).sqrt());
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let spread = (hi - lo) / mean;
    let threshold = match desc {
        RepDescriptor::DiscreteWeyl { .. } => DUFLO_SPREAD_FINITE,
        RepDescriptor::FockDisplacement { .. } => DUFLO_SPREAD_GRID,
    };
    if spread > threshold {
        return Err(Error::NotSquareIntegrable { spread, threshold });
    }
    Ok(mean)
}
