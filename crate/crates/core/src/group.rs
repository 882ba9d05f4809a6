//! Groups, multipliers and convolution semigroups of probability measures.
//!
//! Two groups are supported: the finite phase space `Z_d x Z_d` for odd `d`
//! (counting Haar measure) and the phase plane `R x R` (Haar measure
//! `(2 pi)^-1 dq dp`). Both are abelian and unimodular.

use std::cmp::Ordering;
use std::f64::consts::TAU;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::ops::{box_muller, min_hermitian_eigenvalue, seeded_rng, C64};

/// Tolerance on measure normalization and covariance symmetry/positivity.
pub const MEASURE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupContext {
    /// `Z_d x Z_d` with odd `d >= 3`.
    Finite { d: usize },
    /// Translations of the phase plane.
    Plane,
}

impl GroupContext {
    pub fn finite(d: usize) -> Result<Self> {
        let ctx = Self::Finite { d };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn plane() -> Self {
        Self::Plane
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Finite { d } if d < 3 || d % 2 == 0 => {
                invalid(format!("finite group needs odd d >= 3 (2 must be invertible mod d), got {d}"))
            }
            _ => Ok(()),
        }
    }

    /// Haar weight: 1 per element on `Z_d^2`, the density `1/(2 pi)` on the plane.
    pub fn haar_weight(&self) -> f64 {
        match self {
            Self::Finite { .. } => 1.0,
            Self::Plane => 1.0 / TAU,
        }
    }

    /// Both supported groups are unimodular.
    pub fn modular_value(&self, _g: &GroupElement) -> f64 {
        1.0
    }

    pub fn identity(&self) -> GroupElement {
        match self {
            Self::Finite { .. } => GroupElement::Finite(0, 0),
            Self::Plane => GroupElement::Plane(0.0, 0.0),
        }
    }

    /// Finite element with components reduced mod `d`.
    pub fn element(&self, a: i64, b: i64) -> Result<GroupElement> {
        match *self {
            Self::Finite { d } => {
                let d = d as i64;
                Ok(GroupElement::Finite(a.rem_euclid(d) as usize, b.rem_euclid(d) as usize))
            }
            Self::Plane => Err(Error::GroupMismatch),
        }
    }

    /// Order of the finite group modulus.
    pub fn modulus(&self) -> Option<usize> {
        match *self {
            Self::Finite { d } => Some(d),
            Self::Plane => None,
        }
    }

    /// All `d^2` elements in row-major order `(a, b) -> a * d + b`.
    pub fn elements(&self) -> Result<Vec<GroupElement>> {
        let d = self.modulus().ok_or_else(|| Error::Unsupported("the plane has no finite element list".into()))?;
        Ok((0..d * d).map(|k| GroupElement::Finite(k / d, k % d)).collect())
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        match (*self, *g) {
            (Self::Finite { d }, GroupElement::Finite(a, b)) => a < d && b < d,
            (Self::Plane, GroupElement::Plane(q, p)) => q.is_finite() && p.is_finite(),
            _ => false,
        }
    }

    pub fn check(&self, g: &GroupElement) -> Result<()> {
        match (self, g) {
            (Self::Finite { .. }, GroupElement::Finite(..)) | (Self::Plane, GroupElement::Plane(..)) => {
                if self.contains(g) {
                    Ok(())
                } else {
                    invalid(format!("{g:?} is not a reduced element of {self:?}"))
                }
            }
            _ => Err(Error::GroupMismatch),
        }
    }

    pub fn compose(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        self.check(h)?;
        Ok(match (*self, *g, *h) {
            (Self::Finite { d }, GroupElement::Finite(a, b), GroupElement::Finite(a2, b2)) => {
                GroupElement::Finite((a + a2) % d, (b + b2) % d)
            }
            (_, GroupElement::Plane(q, p), GroupElement::Plane(q2, p2)) => GroupElement::Plane(q + q2, p + p2),
            _ => unreachable!("checked above"),
        })
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        Ok(match (*self, *g) {
            (Self::Finite { d }, GroupElement::Finite(a, b)) => GroupElement::Finite((d - a) % d, (d - b) % d),
            (_, GroupElement::Plane(q, p)) => GroupElement::Plane(-q, -p),
            _ => unreachable!("checked above"),
        })
    }

    /// Index of a finite element in [`GroupContext::elements`] order.
    pub fn index_of(&self, g: &GroupElement) -> Result<usize> {
        self.check(g)?;
        match (*self, *g) {
            (Self::Finite { d }, GroupElement::Finite(a, b)) => Ok(a * d + b),
            _ => Err(Error::Unsupported("plane elements have no index".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GroupElement {
    Finite(usize, usize),
    Plane(f64, f64),
}

impl GroupElement {
    fn total_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Self::Finite(a, b), Self::Finite(c, d)) => (a, b).cmp(&(c, d)),
            (Self::Plane(a, b), Self::Plane(c, d)) => a.total_cmp(c).then(b.total_cmp(d)),
            (Self::Finite(..), Self::Plane(..)) => Ordering::Less,
            (Self::Plane(..), Self::Finite(..)) => Ordering::Greater,
        }
    }

    /// Components as reals, e.g. for the symplectic pairing.
    pub fn coords(&self) -> (f64, f64) {
        match *self {
            Self::Finite(a, b) => (a as f64, b as f64),
            Self::Plane(q, p) => (q, p),
        }
    }

    fn same_kind(&self, other: &Self) -> bool {
        matches!((self, other), (Self::Finite(..), Self::Finite(..)) | (Self::Plane(..), Self::Plane(..)))
    }
}

impl Serialize for GroupElement {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Self::Finite(a, b) => [a as u64, b as u64].serialize(s),
            Self::Plane(q, p) => [q, p].serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for GroupElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int([u64; 2]),
            Real([f64; 2]),
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Int([a, b]) => Self::Finite(a as usize, b as usize),
            Repr::Real([q, p]) => Self::Plane(q, p),
        })
    }
}

/// `exp(2 pi i k / d)` with `k` reduced first.
pub(crate) fn root_of_unity(d: usize, k: i64) -> C64 {
    let k = k.rem_euclid(d as i64);
    C64::from_polar(1.0, TAU * k as f64 / d as f64)
}

/// `(d + 1) / 2`, the inverse of 2 modulo odd `d`.
pub(crate) fn half_mod(d: usize) -> i64 {
    (d as i64 + 1) / 2
}

fn symplectic_int(g: (usize, usize), h: (usize, usize)) -> i64 {
    g.0 as i64 * h.1 as i64 - g.1 as i64 * h.0 as i64
}

/// Multiplier of the Weyl system.
///
/// Plane: `exp((i/2)(q p' - p q'))`. Finite: `w^{(d+1)/2 (a b' - b a')}` with `w = exp(2 pi i / d)`.
pub fn multiplier_value(ctx: &GroupContext, g: &GroupElement, h: &GroupElement) -> Result<C64> {
    ctx.check(g)?;
    ctx.check(h)?;
    Ok(match (*ctx, *g, *h) {
        (GroupContext::Finite { d }, GroupElement::Finite(a, b), GroupElement::Finite(a2, b2)) => {
            root_of_unity(d, half_mod(d) * symplectic_int((a, b), (a2, b2)))
        }
        (GroupContext::Plane, GroupElement::Plane(q, p), GroupElement::Plane(q2, p2)) => {
            C64::from_polar(1.0, 0.5 * (q * p2 - p * q2))
        }
        _ => return Err(Error::GroupMismatch),
    })
}

/// Phase of the two-sided representation: `m~(g, h) = conj(m(g, g^-1 h)) m(g^-1 h, g)`.
pub fn temme_value(ctx: &GroupContext, g: &GroupElement, h: &GroupElement) -> Result<C64> {
    let ginv_h = ctx.compose(&ctx.inverse(g)?, h)?;
    Ok(multiplier_value(ctx, g, &ginv_h)?.conj() * multiplier_value(ctx, &ginv_h, g)?)
}

/// Probability measure with finite support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteMeasure {
    support: Vec<GroupElement>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Merges repeated points, drops zero weights and sorts the support.
    pub fn new(support: Vec<GroupElement>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::DimensionMismatch(support.len(), weights.len()));
        }
        if support.is_empty() {
            return invalid("discrete measure needs a nonempty support");
        }
        if support.iter().any(|g| !g.same_kind(&support[0])) {
            return Err(Error::GroupMismatch);
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return invalid(format!("measure weights must be finite and nonnegative, got {w}"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MEASURE_TOL {
            return invalid(format!("measure weights sum to {total}, not 1"));
        }
        let mut pairs: Vec<(GroupElement, f64)> = support.into_iter().zip(weights).collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(GroupElement, f64)> = Vec::with_capacity(pairs.len());
        for (g, w) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == g => last.1 += w,
                _ => merged.push((g, w)),
            }
        }
        merged.retain(|(_, w)| *w > 0.0);
        let (support, weights) = merged.into_iter().unzip();
        Ok(Self { support, weights })
    }

    pub fn point_mass(g: GroupElement) -> Self {
        Self { support: vec![g], weights: vec![1.0] }
    }

    pub fn uniform(ctx: &GroupContext) -> Result<Self> {
        let elements = ctx.elements()?;
        let w = 1.0 / elements.len() as f64;
        Self::new(elements.clone(), vec![w; elements.len()])
    }

    /// Measure from a dense weight vector over `Z_d^2` (index `a * d + b`).
    pub fn from_dense(ctx: &GroupContext, dense: &[f64]) -> Result<Self> {
        let elements = ctx.elements()?;
        if dense.len() != elements.len() {
            return Err(Error::DimensionMismatch(dense.len(), elements.len()));
        }
        let (support, weights) = elements.into_iter().zip(dense.iter().copied()).filter(|(_, w)| *w != 0.0).unzip();
        Self::new(support, weights)
    }

    pub fn to_dense(&self, ctx: &GroupContext) -> Result<Vec<f64>> {
        let n = ctx.elements()?.len();
        let mut dense = vec![0.0; n];
        for (g, w) in self.iter() {
            dense[ctx.index_of(g)?] += w;
        }
        Ok(dense)
    }

    pub fn support(&self) -> &[GroupElement] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupElement, f64)> {
        self.support.iter().zip(self.weights.iter().copied())
    }

    pub fn check_in(&self, ctx: &GroupContext) -> Result<()> {
        self.support.iter().try_for_each(|g| ctx.check(g))
    }

    /// Weight at `g` (0 off the support).
    pub fn weight_of(&self, g: &GroupElement) -> f64 {
        self.iter().filter(|(h, _)| *h == g).map(|(_, w)| w).sum()
    }

    pub fn is_point_mass(&self) -> Option<GroupElement> {
        (self.support.len() == 1).then(|| self.support[0])
    }
}

/// Gaussian measure on the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianMeasure {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl GaussianMeasure {
    pub fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        check_psd(&cov)?;
        if mean.iter().any(|x| !x.is_finite()) {
            return invalid("gaussian mean must be finite");
        }
        Ok(Self { mean, cov })
    }

    /// Lower-triangular `L` with `L L^T = cov`, tolerant of a singular covariance.
    pub fn cholesky(&self) -> [[f64; 2]; 2] {
        cholesky2(&self.cov)
    }

    /// Density with respect to `dq dp` (requires a nonsingular covariance).
    pub fn density(&self, q: f64, p: f64) -> f64 {
        let [[a, b], [_, c]] = self.cov;
        let det = a * c - b * b;
        let (x, y) = (q - self.mean[0], p - self.mean[1]);
        let quad = (c * x * x - 2.0 * b * x * y + a * y * y) / det;
        (-0.5 * quad).exp() / (TAU * det.sqrt())
    }
}

pub(crate) fn check_psd(cov: &[[f64; 2]; 2]) -> Result<()> {
    if cov.iter().flatten().any(|x| !x.is_finite()) {
        return invalid("covariance must be finite");
    }
    if (cov[0][1] - cov[1][0]).abs() > MEASURE_TOL {
        return invalid(format!("covariance is not symmetric: {cov:?}"));
    }
    let b = 0.5 * (cov[0][1] + cov[1][0]);
    let (a, c) = (cov[0][0], cov[1][1]);
    let half_trace = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    if half_trace - disc < -MEASURE_TOL {
        return invalid(format!("covariance is not positive semidefinite: {cov:?}"));
    }
    Ok(())
}

fn cholesky2(cov: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let l11 = cov[0][0].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { cov[1][0] / l11 } else { 0.0 };
    let l22 = (cov[1][1] - l21 * l21).max(0.0).sqrt();
    [[l11, 0.0], [l21, l22]]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbabilityMeasure {
    Discrete(DiscreteMeasure),
    Gaussian(GaussianMeasure),
}

impl ProbabilityMeasure {
    pub fn point_mass(g: GroupElement) -> Self {
        Self::Discrete(DiscreteMeasure::point_mass(g))
    }

    pub fn dirac(ctx: &GroupContext) -> Self {
        Self::point_mass(ctx.identity())
    }

    pub fn as_discrete(&self) -> Option<&DiscreteMeasure> {
        match self {
            Self::Discrete(m) => Some(m),
            Self::Gaussian(_) => None,
        }
    }

    pub fn is_plane(&self) -> bool {
        match self {
            Self::Discrete(m) => matches!(m.support[0], GroupElement::Plane(..)),
            Self::Gaussian(_) => true,
        }
    }

    /// Largest parameter difference; `None` when the two forms differ.
    pub fn max_abs_diff(&self, other: &Self) -> Option<f64> {
        match (self, other) {
            (Self::Gaussian(a), Self::Gaussian(b)) => {
                let mean = (0..2).map(|i| (a.mean[i] - b.mean[i]).abs());
                let cov = (0..4).map(|k| (a.cov[k / 2][k % 2] - b.cov[k / 2][k % 2]).abs());
                Some(mean.chain(cov).fold(0.0, f64::max))
            }
            (Self::Discrete(a), Self::Discrete(b)) => {
                let mut dev = 0.0f64;
                for (g, w) in a.iter() {
                    dev = dev.max((w - b.weight_of(g)).abs());
                }
                for (g, w) in b.iter() {
                    dev = dev.max((w - a.weight_of(g)).abs());
                }
                Some(dev)
            }
            _ => None,
        }
    }
}

/// Convolution `mu * nu`; Gaussians add parameters, point masses shift a Gaussian.
pub fn convolve(ctx: &GroupContext, mu: &ProbabilityMeasure, nu: &ProbabilityMeasure) -> Result<ProbabilityMeasure> {
    use ProbabilityMeasure::{Discrete, Gaussian};
    match (mu, nu) {
        (Discrete(a), Discrete(b)) => {
            a.check_in(ctx)?;
            b.check_in(ctx)?;
            if let GroupContext::Finite { .. } = ctx {
                let (da, db) = (a.to_dense(ctx)?, b.to_dense(ctx)?);
                return Ok(Discrete(DiscreteMeasure::from_dense(ctx, &convolve_dense(ctx, &da, &db)?)?));
            }
            let mut support = Vec::with_capacity(a.support.len() * b.support.len());
            let mut weights = Vec::with_capacity(support.capacity());
            for (g, wg) in a.iter() {
                for (h, wh) in b.iter() {
                    support.push(ctx.compose(g, h)?);
                    weights.push(wg * wh);
                }
            }
            Ok(Discrete(DiscreteMeasure::new(support, weights)?))
        }
        (Gaussian(a), Gaussian(b)) => {
            let mut cov = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    cov[i][j] = a.cov[i][j] + b.cov[i][j];
                }
            }
            Ok(Gaussian(GaussianMeasure::new([a.mean[0] + b.mean[0], a.mean[1] + b.mean[1]], cov)?))
        }
        (Discrete(a), Gaussian(b)) | (Gaussian(b), Discrete(a)) => match a.is_point_mass() {
            Some(GroupElement::Plane(q, p)) if *ctx == GroupContext::Plane => {
                Ok(Gaussian(GaussianMeasure::new([b.mean[0] + q, b.mean[1] + p], b.cov)?))
            }
            _ => Err(Error::Unsupported("convolution of a general discrete measure with a gaussian".into())),
        },
    }
}

/// `(a * b)(g) = sum_h a(h) b(h^-1 g)` on dense `Z_d^2` weight vectors.
pub(crate) fn convolve_dense(ctx: &GroupContext, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let d = ctx.modulus().ok_or(Error::GroupMismatch)?;
    let mut out = vec![0.0; d * d];
    for (h, &wa) in a.iter().enumerate() {
        if wa == 0.0 {
            continue;
        }
        let (ha, hb) = (h / d, h % d);
        for (k, &wb) in b.iter().enumerate() {
            let (ka, kb) = (k / d, k % d);
            out[((ha + ka) % d) * d + (hb + kb) % d] += wa * wb;
        }
    }
    Ok(out)
}

/// Adjoint measure: the weight of `g` moves to `g^-1`.
pub fn adjoint_measure(ctx: &GroupContext, mu: &ProbabilityMeasure) -> Result<ProbabilityMeasure> {
    Ok(match mu {
        ProbabilityMeasure::Discrete(m) => {
            let support = m.support.iter().map(|g| ctx.inverse(g)).collect::<Result<Vec<_>>>()?;
            ProbabilityMeasure::Discrete(DiscreteMeasure::new(support, m.weights.clone())?)
        }
        ProbabilityMeasure::Gaussian(g) => {
            ProbabilityMeasure::Gaussian(GaussianMeasure { mean: [-g.mean[0], -g.mean[1]], cov: g.cov })
        }
    })
}

/// Compound-Poisson law `exp(t rate (P_base - I)) delta_e` on `Z_d^2`, by matrix exponential.
pub fn compound_poisson_at(ctx: &GroupContext, base: &DiscreteMeasure, rate: f64, t: f64) -> Result<ProbabilityMeasure> {
    let d = ctx.modulus().ok_or_else(|| Error::Unsupported("compound Poisson semigroups live on Z_d^2".into()))?;
    if !(t >= 0.0) || !t.is_finite() {
        return invalid(format!("time must be finite and nonnegative, got {t}"));
    }
    if !(rate > 0.0) || !rate.is_finite() {
        return invalid(format!("rate must be positive, got {rate}"));
    }
    base.check_in(ctx)?;
    let n = d * d;
    if t == 0.0 {
        return Ok(ProbabilityMeasure::dirac(ctx));
    }
    let nu = base.to_dense(ctx)?;
    // column h of P is nu translated by h: (P x)(g) = sum_h nu(g - h) x(h)
    let generator = DMatrix::from_fn(n, n, |g, h| {
        let diff = ((g / d + d - h / d) % d) * d + (g % d + d - h % d) % d;
        let diag = if g == h { 1.0 } else { 0.0 };
        t * rate * (nu[diff] - diag)
    });
    let propagator = generator.exp();
    // rounding can leave entries of order -1e-17
    let dense: Vec<f64> = propagator.column(0).iter().map(|w| w.max(0.0)).collect();
    Ok(ProbabilityMeasure::Discrete(DiscreteMeasure::from_dense(ctx, &dense)?))
}

/// Gaussian law with mean `t b` and covariance `t sigma`; a point mass when degenerate.
pub fn gaussian_at(drift: [f64; 2], diffusion: [[f64; 2]; 2], t: f64) -> Result<ProbabilityMeasure> {
    check_psd(&diffusion)?;
    if !(t >= 0.0) || !t.is_finite() {
        return invalid(format!("time must be finite and nonnegative, got {t}"));
    }
    let mean = [t * drift[0], t * drift[1]];
    let cov = [[t * diffusion[0][0], t * diffusion[0][1]], [t * diffusion[1][0], t * diffusion[1][1]]];
    if cov.iter().flatten().all(|x| *x == 0.0) {
        return Ok(ProbabilityMeasure::point_mass(GroupElement::Plane(mean[0], mean[1])));
    }
    Ok(ProbabilityMeasure::Gaussian(GaussianMeasure::new(mean, cov)?))
}

/// A family `t -> mu_t` with `mu_t * mu_s = mu_{t+s}` and `mu_0 = delta_e`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvolutionSemigroup {
    CompoundPoisson { d: usize, base: DiscreteMeasure, rate: f64 },
    Gaussian { drift: [f64; 2], diffusion: [[f64; 2]; 2] },
}

impl ConvolutionSemigroup {
    pub fn compound_poisson(ctx: &GroupContext, base: DiscreteMeasure, rate: f64) -> Result<Self> {
        let d = ctx.modulus().ok_or_else(|| Error::Unsupported("compound Poisson semigroups live on Z_d^2".into()))?;
        let s = Self::CompoundPoisson { d, base, rate };
        s.validate()?;
        Ok(s)
    }

    pub fn gaussian(drift: [f64; 2], diffusion: [[f64; 2]; 2]) -> Result<Self> {
        let s = Self::Gaussian { drift, diffusion };
        s.validate()?;
        Ok(s)
    }

    /// `mu_t = delta_e` for every `t`.
    pub fn trivial(ctx: &GroupContext) -> Self {
        match *ctx {
            GroupContext::Finite { d } => Self::CompoundPoisson {
                d,
                base: DiscreteMeasure::point_mass(ctx.identity()),
                rate: 1.0,
            },
            GroupContext::Plane => Self::Gaussian { drift: [0.0; 2], diffusion: [[0.0; 2]; 2] },
        }
    }

    pub fn context(&self) -> GroupContext {
        match *self {
            Self::CompoundPoisson { d, .. } => GroupContext::Finite { d },
            Self::Gaussian { .. } => GroupContext::Plane,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::CompoundPoisson { d, base, rate } => {
                let ctx = GroupContext::finite(*d)?;
                base.check_in(&ctx)?;
                if !(*rate > 0.0) || !rate.is_finite() {
                    return invalid(format!("rate must be positive, got {rate}"));
                }
                Ok(())
            }
            Self::Gaussian { drift, diffusion } => {
                if drift.iter().any(|x| !x.is_finite()) {
                    return invalid("drift must be finite");
                }
                check_psd(diffusion)
            }
        }
    }

    pub fn at(&self, t: f64) -> Result<ProbabilityMeasure> {
        match self {
            Self::CompoundPoisson { d, base, rate } => compound_poisson_at(&GroupContext::finite(*d)?, base, *rate, t),
            Self::Gaussian { drift, diffusion } => gaussian_at(*drift, *diffusion, t),
        }
    }

    /// The semigroup of adjoint measures.
    pub fn adjoint(&self) -> Result<Self> {
        Ok(match self {
            Self::CompoundPoisson { d, base, rate } => {
                let ctx = GroupContext::finite(*d)?;
                let adj = adjoint_measure(&ctx, &ProbabilityMeasure::Discrete(base.clone()))?;
                Self::CompoundPoisson {
                    d: *d,
                    base: adj.as_discrete().cloned().expect("adjoint keeps the discrete form"),
                    rate: *rate,
                }
            }
            Self::Gaussian { drift, diffusion } => Self::Gaussian { drift: [-drift[0], -drift[1]], diffusion: *diffusion },
        })
    }
}

/// `n` i.i.d. draws from `mu`, deterministic in `seed`.
pub fn sample(mu: &ProbabilityMeasure, n: usize, seed: u64) -> Result<Vec<GroupElement>> {
    if n == 0 {
        return invalid("sample size must be at least 1");
    }
    let mut rng = seeded_rng(seed);
    Ok(match mu {
        ProbabilityMeasure::Discrete(m) => {
            let mut cdf = Vec::with_capacity(m.weights.len());
            let mut acc = 0.0;
            for w in &m.weights {
                acc += w;
                cdf.push(acc);
            }
            (0..n)
                .map(|_| {
                    let u: f64 = rand::Rng::random::<f64>(&mut rng) * acc;
                    let k = cdf.partition_point(|c| *c <= u).min(cdf.len() - 1);
                    m.support[k]
                })
                .collect()
        }
        ProbabilityMeasure::Gaussian(g) => {
            let l = g.cholesky();
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let (z1, z2) = box_muller(&mut rng);
                for (a, b) in [(z1, z2), (z2, z1)] {
                    if out.len() < n {
                        let q = g.mean[0] + l[0][0] * a;
                        let p = g.mean[1] + l[1][0] * a + l[1][1] * b;
                        out.push(GroupElement::Plane(q, p));
                    }
                }
            }
            out
        }
    })
}

/// Symplectic characteristic function `int exp(i(q~ p - p~ q)) dmu(q, p)`.
pub fn symplectic_char(mu: &ProbabilityMeasure, point: (f64, f64)) -> Result<C64> {
    let (qt, pt) = point;
    match mu {
        ProbabilityMeasure::Discrete(m) => {
            if !mu.is_plane() {
                return Err(Error::Unsupported("symplectic characteristic function of a finite-group measure".into()));
            }
            Ok(m.iter()
                .map(|(g, w)| {
                    let (q, p) = g.coords();
                    C64::from_polar(w, qt * p - pt * q)
                })
                .sum())
        }
        ProbabilityMeasure::Gaussian(g) => {
            let k = [-pt, qt];
            let phase = qt * g.mean[1] - pt * g.mean[0];
            let quad = k[0] * (g.cov[0][0] * k[0] + g.cov[0][1] * k[1]) + k[1] * (g.cov[1][0] * k[0] + g.cov[1][1] * k[1]);
            Ok(C64::from_polar((-0.5 * quad).exp(), phase))
        }
    }
}

/// Largest matrix handled by [`is_positive_definite`].
pub const MAX_GRAM_POINTS: usize = 256;

/// Minimum eigenvalue of the plain Gram matrix `M_jk = f(g_j^-1 g_k)`.
pub fn is_positive_definite<F>(ctx: &GroupContext, points: &[GroupElement], f: F) -> Result<f64>
where
    F: Fn(&GroupElement) -> Option<C64>,
{
    if points.is_empty() || points.len() > MAX_GRAM_POINTS {
        return invalid(format!("need 1..={MAX_GRAM_POINTS} points, got {}", points.len()));
    }
    let n = points.len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let inv = ctx.inverse(&points[j])?;
        for k in 0..n {
            let diff = ctx.compose(&inv, &points[k])?;
            m[(j, k)] = f(&diff).ok_or_else(|| Error::DomainMismatch(format!("function undefined at {diff:?}")))?;
        }
    }
    Ok(min_hermitian_eigenvalue(&m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn finite_context_requires_odd_modulus() {
        assert!(GroupContext::finite(4).is_err());
        assert!(GroupContext::finite(1).is_err());
        assert!(GroupContext::finite(5).is_ok());
    }

    #[test]
    fn multiplier_identity_axiom() {
        let ctx = GroupContext::finite(5).unwrap();
        for g in ctx.elements().unwrap() {
            assert!(close(multiplier_value(&ctx, &ctx.identity(), &g).unwrap(), C64::new(1.0, 0.0), 1e-15));
            assert!(close(multiplier_value(&ctx, &g, &ctx.identity()).unwrap(), C64::new(1.0, 0.0), 1e-15));
        }
    }

    #[test]
    fn plane_multiplier_direct_value() {
        let m = multiplier_value(&GroupContext::Plane, &GroupElement::Plane(1.0, 0.0), &GroupElement::Plane(0.0, 1.0)).unwrap();
        assert!(close(m, C64::from_polar(1.0, 0.5), 1e-15));
    }

    #[test]
    fn cocycle_identity_all_triples_d3() {
        let ctx = GroupContext::finite(3).unwrap();
        let els = ctx.elements().unwrap();
        let mut count = 0;
        for g1 in &els {
            for g2 in &els {
                for g3 in &els {
                    let lhs = multiplier_value(&ctx, g1, &ctx.compose(g2, g3).unwrap()).unwrap()
                        * multiplier_value(&ctx, g2, g3).unwrap();
                    let rhs = multiplier_value(&ctx, &ctx.compose(g1, g2).unwrap(), g3).unwrap()
                        * multiplier_value(&ctx, g1, g2).unwrap();
                    assert!(close(lhs, rhs, 1e-14));
                    count += 1;
                }
            }
        }
        assert_eq!(count, 729);
    }

    #[test]
    fn mixed_kinds_rejected() {
        let ctx = GroupContext::finite(3).unwrap();
        let err = multiplier_value(&ctx, &GroupElement::Plane(0.0, 0.0), &ctx.identity()).unwrap_err();
        assert_eq!(err, Error::GroupMismatch);
    }

    #[test]
    fn temme_closed_forms() {
        let ctx = GroupContext::finite(3).unwrap();
        let els = ctx.elements().unwrap();
        for g in &els {
            for h in &els {
                let (GroupElement::Finite(a, b), GroupElement::Finite(at, bt)) = (*g, *h) else { unreachable!() };
                let closed = root_of_unity(3, -symplectic_int((a, b), (at, bt)));
                assert!(close(temme_value(&ctx, g, h).unwrap(), closed, 1e-14));
            }
            assert!(close(temme_value(&ctx, &ctx.identity(), g).unwrap(), C64::new(1.0, 0.0), 1e-15));
        }
        let plane = GroupContext::Plane;
        let (g, h) = (GroupElement::Plane(0.7, -1.3), GroupElement::Plane(2.1, 0.4));
        let closed = C64::from_polar(1.0, -(0.7 * 0.4 - (-1.3) * 2.1));
        assert!(close(temme_value(&plane, &g, &h).unwrap(), closed, 1e-14));
    }

    #[test]
    fn uniform_convolution_is_uniform() {
        let ctx = GroupContext::finite(3).unwrap();
        let u = ProbabilityMeasure::Discrete(DiscreteMeasure::uniform(&ctx).unwrap());
        let uu = convolve(&ctx, &u, &u).unwrap();
        assert!(uu.max_abs_diff(&u).unwrap() < 1e-15);
        let delta = ProbabilityMeasure::dirac(&ctx);
        assert!(convolve(&ctx, &delta, &u).unwrap().max_abs_diff(&u).unwrap() < 1e-15);
    }

    #[test]
    fn gaussian_convolution_adds_parameters() {
        let sigma = [[1.0, 0.2], [0.2, 0.5]];
        let a = gaussian_at([0.0; 2], sigma, 0.5).unwrap();
        let b = gaussian_at([0.0; 2], sigma, 1.5).unwrap();
        let ab = convolve(&GroupContext::Plane, &a, &b).unwrap();
        let direct = gaussian_at([0.0; 2], sigma, 2.0).unwrap();
        assert!(ab.max_abs_diff(&direct).unwrap() <= 1e-15);
    }

    #[test]
    fn gaussian_zero_time_is_point_mass() {
        let m = gaussian_at([1.0, 2.0], [[1.0, 0.0], [0.0, 1.0]], 0.0).unwrap();
        assert_eq!(m, ProbabilityMeasure::dirac(&GroupContext::Plane));
        let m2 = gaussian_at([0.0; 2], [[1.0, 0.0], [0.0, 1.0]], 2.0).unwrap();
        assert_eq!(m2, ProbabilityMeasure::Gaussian(GaussianMeasure { mean: [0.0; 2], cov: [[2.0, 0.0], [0.0, 2.0]] }));
        assert!(gaussian_at([0.0; 2], [[1.0, 0.0], [0.0, -1.0]], 1.0).is_err());
    }

    #[test]
    fn adjoint_is_involutive() {
        let ctx = GroupContext::finite(5).unwrap();
        let g = ctx.element(1, 3).unwrap();
        let delta_g = ProbabilityMeasure::point_mass(g);
        let adj = adjoint_measure(&ctx, &delta_g).unwrap();
        assert_eq!(adj, ProbabilityMeasure::point_mass(ctx.element(-1, -3).unwrap()));
        assert_eq!(adjoint_measure(&ctx, &adj).unwrap(), delta_g);
        let centered = gaussian_at([0.0; 2], [[1.0, 0.3], [0.3, 2.0]], 1.0).unwrap();
        assert_eq!(adjoint_measure(&GroupContext::Plane, &centered).unwrap(), centered);
    }

    #[test]
    fn compound_poisson_small_time_expansion() {
        let ctx = GroupContext::finite(3).unwrap();
        let base = DiscreteMeasure::new(vec![ctx.element(1, 0).unwrap(), ctx.element(0, 2).unwrap()], vec![0.25, 0.75]).unwrap();
        let (rate, t) = (2.0, 5e-5);
        let mu = compound_poisson_at(&ctx, &base, rate, t).unwrap();
        let lt = rate * t;
        let mut expected = vec![0.0; 9];
        expected[0] = 1.0 - lt;
        for (g, w) in base.iter() {
            expected[ctx.index_of(g).unwrap()] += lt * w;
        }
        let dense = mu.as_discrete().unwrap().to_dense(&ctx).unwrap();
        let err = dense.iter().zip(&expected).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= lt * lt, "err {err}");
        assert_eq!(compound_poisson_at(&ctx, &base, rate, 0.0).unwrap(), ProbabilityMeasure::dirac(&ctx));
        assert!(compound_poisson_at(&ctx, &base, rate, -1.0).is_err());
    }

    #[test]
    fn compound_poisson_semigroup_law() {
        let ctx = GroupContext::finite(3).unwrap();
        let base = DiscreteMeasure::new(vec![ctx.element(1, 1).unwrap(), ctx.element(2, 0).unwrap()], vec![0.5, 0.5]).unwrap();
        let s = ConvolutionSemigroup::compound_poisson(&ctx, base, 1.7).unwrap();
        let lhs = convolve(&ctx, &s.at(0.3).unwrap(), &s.at(0.9).unwrap()).unwrap();
        assert!(lhs.max_abs_diff(&s.at(1.2).unwrap()).unwrap() <= 1e-12);
    }

    #[test]
    fn sample_point_mass_and_determinism() {
        let g = GroupElement::Plane(0.5, -0.25);
        assert_eq!(sample(&ProbabilityMeasure::point_mass(g), 5, 11).unwrap(), vec![g; 5]);
        let ctx = GroupContext::finite(3).unwrap();
        let u = ProbabilityMeasure::Discrete(DiscreteMeasure::uniform(&ctx).unwrap());
        assert_eq!(sample(&u, 50, 3).unwrap(), sample(&u, 50, 3).unwrap());
        assert!(sample(&u, 0, 3).is_err());
    }

    #[test]
    fn gaussian_sample_mean_within_clt_bound() {
        let mu = gaussian_at([0.0; 2], [[1.0, 0.0], [0.0, 1.0]], 1.0).unwrap();
        let draws = sample(&mu, 100_000, 2024).unwrap();
        let (mut sq, mut sp) = (0.0, 0.0);
        for g in &draws {
            let (q, p) = g.coords();
            sq += q;
            sp += p;
        }
        let n = draws.len() as f64;
        assert!((sq / n).abs() < 0.02 && (sp / n).abs() < 0.02);
    }

    #[test]
    fn symplectic_char_examples() {
        let origin = ProbabilityMeasure::dirac(&GroupContext::Plane);
        assert_eq!(symplectic_char(&origin, (1.3, -0.4)).unwrap(), C64::new(1.0, 0.0));

        let shifted = ProbabilityMeasure::point_mass(GroupElement::Plane(0.5, 2.0));
        let v = symplectic_char(&shifted, (1.5, 0.3)).unwrap();
        assert!(close(v, C64::from_polar(1.0, 1.5 * 2.0 - 0.3 * 0.5), 1e-15));

        let std = gaussian_at([0.0; 2], [[1.0, 0.0], [0.0, 1.0]], 1.0).unwrap();
        let v = symplectic_char(&std, (1.0, 0.0)).unwrap();
        assert!((v.re - 0.60653).abs() < 1e-5 && v.im.abs() < 1e-15);

        let ctx = GroupContext::finite(3).unwrap();
        assert!(symplectic_char(&ProbabilityMeasure::dirac(&ctx), (0.0, 0.0)).is_err());
    }

    #[test]
    fn positive_definite_examples() {
        let ctx = GroupContext::Plane;
        let pts: Vec<_> = (0..5).map(|k| GroupElement::Plane(k as f64 * 0.5, -(k as f64))).collect();
        let min = is_positive_definite(&ctx, &pts, |_| Some(C64::new(1.0, 0.0))).unwrap();
        assert!(min.abs() < 1e-12);

        let a = 1.0;
        let pts = [GroupElement::Plane(0.0, 0.0), GroupElement::Plane(a, 0.0), GroupElement::Plane(0.0, 3.0)];
        let f = |g: &GroupElement| {
            let (q, p) = g.coords();
            Some(if (q.abs() - a).abs() < 1e-12 && p == 0.0 { C64::new(-1.0, 0.0) } else { C64::new(1.0, 0.0) })
        };
        assert!(is_positive_definite(&ctx, &pts, f).unwrap() < -0.5);
        assert!(is_positive_definite(&ctx, &pts, |_| None).is_err());
    }

    #[test]
    fn measure_json_shapes() {
        let ctx = GroupContext::finite(3).unwrap();
        let m = ProbabilityMeasure::Discrete(
            DiscreteMeasure::new(vec![ctx.element(0, 1).unwrap(), ctx.element(2, 2).unwrap()], vec![0.5, 0.5]).unwrap(),
        );
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, r#"{"support":[[0,1],[2,2]],"weights":[0.5,0.5]}"#);
        assert_eq!(serde_json::from_str::<ProbabilityMeasure>(&text).unwrap(), m);

        let g = gaussian_at([0.0; 2], [[1.0, 0.0], [0.0, 1.0]], 1.0).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(text, r#"{"mean":[0.0,0.0],"cov":[[1.0,0.0],[0.0,1.0]]}"#);
        assert_eq!(serde_json::from_str::<ProbabilityMeasure>(&text).unwrap(), g);

        let s = ConvolutionSemigroup::gaussian([0.0; 2], [[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(v["kind"], "gaussian");
    }
}
