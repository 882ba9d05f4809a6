//! Dense complex operators on a finite-dimensional Hilbert space.
//!
//! [`Operator`] wraps a square `nalgebra` matrix and carries the
//! Hilbert-Schmidt structure used throughout the crate. [`DensityOperator`]
//! is the validated subtype for quantum states.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

/// Default tolerance for the Hermiticity and trace invariants.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Most negative eigenvalue tolerated for a density operator.
pub const EIGEN_TOL: f64 = 1e-10;

/// Square complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    data: DMatrix<C64>,
}

impl Operator {
    pub fn new(data: DMatrix<C64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return invalid(format!("operator must be square, got {}x{}", data.nrows(), data.ncols()));
        }
        if data.nrows() == 0 {
            return invalid("operator dimension must be positive");
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("operator entries must be finite");
        }
        Ok(Self { data })
    }

    /// Wraps a matrix already known to be square and finite.
    pub(crate) fn from_matrix_unchecked(data: DMatrix<C64>) -> Self {
        debug_assert_eq!(data.nrows(), data.ncols());
        Self { data }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { data: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { data: DMatrix::identity(dim, dim) }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// The matrix unit `|j><k|`.
    pub fn matrix_unit(dim: usize, j: usize, k: usize) -> Result<Self> {
        if j >= dim || k >= dim {
            return invalid(format!("matrix unit ({j},{k}) outside dimension {dim}"));
        }
        let mut data = DMatrix::zeros(dim, dim);
        data[(j, k)] = C64::new(1.0, 0.0);
        Ok(Self { data })
    }

    /// Rank-one projector onto the normalized vector `psi`.
    pub fn projector(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if psi.is_empty() || norm == 0.0 || !norm.is_finite() {
            return invalid("projector needs a nonzero finite vector");
        }
        let n = psi.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / (norm * norm)))
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self { data: self.data.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { data: &self.data * s }
    }

    /// Hilbert-Schmidt norm `sqrt(tr(A* A))`.
    pub fn hs_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Largest entry modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> Result<f64> {
        check_dims(self, other)?;
        Ok(self.data.iter().zip(other.data.iter()).fold(0.0, |m, (a, b)| m.max((a - b).norm())))
    }

    pub fn checked_mul(&self, rhs: &Operator) -> Result<Operator> {
        check_dims(self, rhs)?;
        Ok(Self { data: &self.data * &rhs.data })
    }

    /// Zero-pads into the top-left block of a `dim`-dimensional operator.
    pub fn embed(&self, dim: usize) -> Result<Operator> {
        if dim < self.dim() {
            return invalid(format!("cannot embed dimension {} into {dim}", self.dim()));
        }
        let mut data = DMatrix::zeros(dim, dim);
        data.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.data);
        Ok(Self { data })
    }

    /// One past the largest basis index carrying a nonzero row or column.
    pub fn support_size(&self) -> usize {
        let n = self.dim();
        (0..n)
            .rev()
            .find(|&k| (0..n).any(|j| self.data[(k, j)] != C64::new(0.0, 0.0) || self.data[(j, k)] != C64::new(0.0, 0.0)))
            .map_or(0, |k| k + 1)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.data)
    }
}

fn check_dims(a: &Operator, b: &Operator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(())
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator { data: &self.data + &rhs.data }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator { data: &self.data - &rhs.data }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator { data: &self.data * &rhs.data }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorRepr {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for Operator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let row = |i: usize, part: fn(&C64) -> f64| (0..n).map(|j| part(&self.data[(i, j)])).collect::<Vec<_>>();
        OperatorRepr {
            dim: n,
            re: (0..n).map(|i| row(i, |z| z.re)).collect(),
            im: (0..n).map(|i| row(i, |z| z.im)).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = OperatorRepr::deserialize(deserializer)?;
        let n = repr.dim;
        let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
        if !shape_ok(&repr.re) || !shape_ok(&repr.im) {
            return Err(D::Error::custom(format!("operator arrays must be {n}x{n}")));
        }
        let data = DMatrix::from_fn(n, n, |i, j| C64::new(repr.re[i][j], repr.im[i][j]));
        Operator::new(data).map_err(D::Error::custom)
    }
}

/// Hilbert-Schmidt inner product `tr(A* B)`.
pub fn hs_inner(a: &Operator, b: &Operator) -> Result<C64> {
    check_dims(a, b)?;
    Ok(a.data.iter().zip(b.data.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// Smallest eigenvalue of the Hermitian part `(A + A*)/2`.
pub fn min_hermitian_eigenvalue(a: &DMatrix<C64>) -> f64 {
    let herm = (a + a.adjoint()) * C64::new(0.5, 0.0);
    herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Eigen-decomposition of the Hermitian part, eigenvalues ascending.
pub fn hermitian_eigen(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let herm = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let n = herm.nrows();
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Deterministic generator used for every seeded draw in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A pair of independent standard normal deviates (Box-Muller).
pub fn box_muller<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Operator validated against the density-operator invariants at the default tolerances.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DensityOperator(Operator);

impl DensityOperator {
    /// Validates `op` with Hermiticity/trace at [`HERMITIAN_TOL`] and positivity at [`EIGEN_TOL`].
    pub fn new(op: Operator) -> Result<Self> {
        let report = validate_density_with(&op, HERMITIAN_TOL, EIGEN_TOL);
        if report.passed() {
            Ok(Self(op))
        } else {
            invalid(format!("not a density operator: {report}"))
        }
    }

    /// Validates every invariant at the single tolerance `tol`.
    pub fn with_tolerance(op: Operator, tol: f64) -> Result<Self> {
        let report = validate_density(&op, tol);
        if report.passed() {
            Ok(Self(op))
        } else {
            invalid(format!("not a density operator: {report}"))
        }
    }

    pub fn operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        Ok(Self(Operator::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0))))
    }

    /// Pure state `|n><n|` of a `dim`-dimensional space.
    pub fn basis_state(dim: usize, n: usize) -> Result<Self> {
        Ok(Self(Operator::matrix_unit(dim, n, n)?))
    }
}

impl std::ops::Deref for DensityOperator {
    type Target = Operator;
    fn deref(&self) -> &Operator {
        &self.0
    }
}

/// Ginibre-distributed random state `G G* / tr(G G*)`.
pub fn random_density(dim: usize, seed: u64) -> Result<DensityOperator> {
    if dim == 0 {
        return invalid("random_density: dimension must be positive");
    }
    let mut rng = seeded_rng(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let (x, y) = box_muller(&mut rng);
        C64::new(x, y) * std::f64::consts::FRAC_1_SQRT_2
    });
    let mut gg = &g * g.adjoint();
    let tr = gg.trace().re;
    gg /= C64::new(tr, 0.0);
    // exact Hermitian symmetrization removes rounding asymmetry from the product
    let herm = (&gg + gg.adjoint()) * C64::new(0.5, 0.0);
    Ok(DensityOperator(Operator::from_matrix_unchecked(herm)))
}

/// Random state of dimension `support` embedded in the low block of a `dim`-dimensional space.
pub fn random_density_embedded(dim: usize, support: usize, seed: u64) -> Result<DensityOperator> {
    if support == 0 || support > dim {
        return invalid(format!("support {support} must lie in 1..={dim}"));
    }
    Ok(DensityOperator(random_density(support, seed)?.0.embed(dim)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityInvariant {
    Hermitian,
    Positive,
    UnitTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub invariant: DensityInvariant,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Outcome of [`validate_density`]: one record per invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityReport {
    pub checks: Vec<InvariantCheck>,
}

impl DensityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn violations(&self) -> impl Iterator<Item = &InvariantCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, which: DensityInvariant) -> &InvariantCheck {
        self.checks.iter().find(|c| c.invariant == which).expect("all invariants are checked")
    }
}

impl fmt::Display for DensityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return write!(f, "ok");
        }
        let parts: Vec<String> =
            self.violations().map(|c| format!("{:?} deviation {:.3e} > {:.1e}", c.invariant, c.deviation, c.tolerance)).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks Hermiticity, positivity and unit trace of `a`, each at tolerance `tol`.
pub fn validate_density(a: &Operator, tol: f64) -> DensityReport {
    validate_density_with(a, tol, tol)
}

fn validate_density_with(a: &Operator, tol: f64, eigen_tol: f64) -> DensityReport {
    let m = a.matrix();
    let n = a.dim();
    let mut herm_dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            herm_dev = herm_dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    let neg_dev = (-min_hermitian_eigenvalue(m)).max(0.0);
    let trace_dev = (m.trace() - C64::new(1.0, 0.0)).norm();
    let record = |invariant, deviation: f64, tolerance: f64| InvariantCheck {
        invariant,
        deviation,
        tolerance,
        passed: deviation <= tolerance,
    };
    DensityReport {
        checks: vec![
            record(DensityInvariant::Hermitian, herm_dev, tol),
            record(DensityInvariant::Positive, neg_dev, eigen_tol),
            record(DensityInvariant::UnitTrace, trace_dev, tol),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> Operator {
        Operator::new(DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        ))
        .unwrap()
    }

    #[test]
    fn hs_inner_identity_is_dimension() {
        let i2 = Operator::identity(2);
        assert_eq!(hs_inner(&i2, &i2).unwrap(), C64::new(2.0, 0.0));
    }

    #[test]
    fn hs_inner_pauli_orthogonal() {
        let z = Operator::from_real_diagonal(&[1.0, -1.0]).unwrap();
        assert_eq!(hs_inner(&pauli_x(), &z).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn hs_inner_rejects_mismatch() {
        let err = hs_inner(&Operator::identity(2), &Operator::identity(3)).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch(2, 3));
    }

    #[test]
    fn random_density_dim_one_is_unit() {
        let rho = random_density(1, 99).unwrap();
        assert!((rho.get(0, 0) - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(random_density(0, 1).is_err());
    }

    #[test]
    fn random_density_is_deterministic() {
        let a = random_density(4, 7).unwrap();
        let b = random_density(4, 7).unwrap();
        assert_eq!(a, b);
        assert!(validate_density(&a, 1e-10).passed());
    }

    #[test]
    fn validate_flags_negativity_only() {
        let maximally_mixed = Operator::identity(2).scale(C64::new(0.5, 0.0));
        assert!(validate_density(&maximally_mixed, 1e-12).passed());

        let bad = Operator::from_real_diagonal(&[1.5, -0.5]).unwrap();
        let report = validate_density(&bad, 1e-12);
        assert!(!report.passed());
        let violated: Vec<_> = report.violations().map(|c| c.invariant).collect();
        assert_eq!(violated, vec![DensityInvariant::Positive]);
        assert!((report.check(DensityInvariant::Positive).deviation - 0.5).abs() < 1e-12);
    }

    #[test]
    fn operator_rejects_non_finite() {
        let m = DMatrix::from_element(2, 2, C64::new(f64::NAN, 0.0));
        assert!(Operator::new(m).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let rho = random_density(5, 3).unwrap().into_operator().scale(C64::new(1.0 / 3.0, 1e-300));
        let text = serde_json::to_string(&rho).unwrap();
        let back: Operator = serde_json::from_str(&text).unwrap();
        for (a, b) in rho.matrix().iter().zip(back.matrix().iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn json_rejects_ragged_arrays() {
        let text = r#"{"dim": 2, "re": [[1, 0]], "im": [[0, 0], [0, 0]]}"#;
        assert!(serde_json::from_str::<Operator>(text).is_err());
    }

    #[test]
    fn support_size_tracks_embedding() {
        let rho = random_density_embedded(10, 3, 1).unwrap();
        assert_eq!(rho.support_size(), 3);
        assert_eq!(Operator::zeros(4).support_size(), 0);
    }
}
