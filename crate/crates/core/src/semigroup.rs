//! Randomly generated semigroups `T_t = int S(g) dmu_t(g)` in their three guises:
//! twirling channels on operators, tomographic semigroups on Fourier-Wigner
//! functions, and classical convolution (translation) semigroups.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::group::{
    adjoint_measure, sample, symplectic_char, temme_value, ConvolutionSemigroup, GaussianMeasure, GroupContext,
    GroupElement, ProbabilityMeasure,
};
use crate::ops::{validate_density, DensityOperator, DensityReport, Operator, C64};
use crate::weyl::{fw_transform, symplectic_fourier, Domain, PhaseFunction, RepDescriptor, Representation};

/// Nodes of the Gauss-Hermite rule behind the plane tomographic step.
pub const GAUSS_HERMITE_NODES: usize = 256;

const ZERO: C64 = C64::new(0.0, 0.0);

/// How a twirl integral is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TwirlMethod {
    /// Weighted sum over a discrete measure.
    Exact,
    /// Empirical mean over `samples` draws.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Twirled operator plus its Monte Carlo error, if sampled.
#[derive(Clone, Debug, PartialEq)]
pub struct TwirlOutcome {
    pub state: Operator,
    /// Entrywise standard error of the mean.
    pub std_error: Option<DMatrix<f64>>,
    /// Frobenius norm of `std_error`; zero for exact sums.
    pub error_estimate: f64,
}

fn check_measure(ctx: &GroupContext, mu: &ProbabilityMeasure) -> Result<()> {
    match mu {
        ProbabilityMeasure::Discrete(m) => m.check_in(ctx),
        ProbabilityMeasure::Gaussian(_) if *ctx == GroupContext::Plane => Ok(()),
        ProbabilityMeasure::Gaussian(_) => Err(Error::GroupMismatch),
    }
}

/// `int U(g) A U(g)* dmu(g)` without renormalization.
pub fn twirl_operator(rep: &Representation, a: &Operator, mu: &ProbabilityMeasure, method: TwirlMethod) -> Result<TwirlOutcome> {
    check_measure(&rep.context(), mu)?;
    if a.dim() != rep.dim() {
        return Err(Error::DimensionMismatch(a.dim(), rep.dim()));
    }
    match method {
        TwirlMethod::Exact => {
            let m = mu
                .as_discrete()
                .ok_or_else(|| Error::Unsupported("exact twirl needs a discrete measure; use monte_carlo".into()))?;
            let mut acc = DMatrix::zeros(a.dim(), a.dim());
            for (g, w) in m.iter() {
                acc += rep.descriptor().conjugate(g, a)?.into_matrix() * C64::new(w, 0.0);
            }
            Ok(TwirlOutcome { state: Operator::from_matrix_unchecked(acc), std_error: None, error_estimate: 0.0 })
        }
        TwirlMethod::MonteCarlo { samples, seed } => monte_carlo_twirl(rep.descriptor(), a, mu, samples, seed),
    }
}

fn monte_carlo_twirl(desc: &RepDescriptor, a: &Operator, mu: &ProbabilityMeasure, n: usize, seed: u64) -> Result<TwirlOutcome> {
    let dim = a.dim();
    let k = a.support_size().max(1);
    let block = a.matrix().view((0, 0), (k, k)).into_owned();
    let mut sum = DMatrix::<C64>::zeros(dim, dim);
    let mut sum_sq = DMatrix::<f64>::zeros(dim, dim);
    let mut left = DMatrix::<C64>::zeros(dim, k);
    let mut x = DMatrix::<C64>::zeros(dim, dim);
    let one = C64::new(1.0, 0.0);
    for g in sample(mu, n, seed)? {
        let u = desc.unitary_columns(&g, k)?;
        left.gemm(one, &u, &block, ZERO);
        x.gemm(one, &left, &u.adjoint(), ZERO);
        sum += &x;
        sum_sq.zip_apply(&x, |s, v| *s += v.norm_sqr());
    }
    let nf = n as f64;
    let mean = sum / C64::new(nf, 0.0);
    let std_error = DMatrix::from_fn(dim, dim, |i, j| ((sum_sq[(i, j)] / nf - mean[(i, j)].norm_sqr()).max(0.0) / nf).sqrt());
    let error_estimate = std_error.norm();
    Ok(TwirlOutcome { state: Operator::from_matrix_unchecked(mean), std_error: Some(std_error), error_estimate })
}

/// Twirling channel on a state, renormalized to unit trace.
pub fn twirl(rep: &Representation, rho: &DensityOperator, mu: &ProbabilityMeasure, method: TwirlMethod) -> Result<TwirlOutcome> {
    let out = twirl_operator(rep, rho.operator(), mu, method)?;
    let tr = out.state.trace().re;
    if !(tr > 0.0) {
        return invalid("twirled operator has non-positive trace");
    }
    Ok(TwirlOutcome {
        state: out.state.scale(C64::new(1.0 / tr, 0.0)),
        std_error: out.std_error.map(|e| e / tr),
        error_estimate: out.error_estimate / tr,
    })
}

fn check_function_in(ctx: &GroupContext, f: &PhaseFunction) -> Result<()> {
    if f.domain().context() != *ctx {
        return Err(Error::DomainMismatch(format!("function on {:?} but group is {ctx:?}", f.domain())));
    }
    Ok(())
}

/// Two-sided representation `(T(g) f)(h) = mt(g, h) f(g^-1 h g)`; the groups here are abelian.
pub fn two_sided_apply(ctx: &GroupContext, g: &GroupElement, f: &PhaseFunction) -> Result<PhaseFunction> {
    ctx.check(g)?;
    check_function_in(ctx, f)?;
    let mut out = f.clone();
    for (k, v) in out.values_mut().iter_mut().enumerate() {
        *v *= temme_value(ctx, g, &f.domain().point(k))?;
    }
    Ok(out)
}

fn gauss_hermite() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite_rule(GAUSS_HERMITE_NODES))
}

/// Golub-Welsch nodes and weights for the standard normal density.
///
/// The rule is symmetrized and nodes whose weight is below `1e-20` are
/// dropped, since they cannot move a unit-bounded integrand.
fn gauss_hermite_rule(m: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(m, m, |i, j| if i.abs_diff(j) == 1 { (i.max(j) as f64).sqrt() } else { 0.0 });
    let eig = SymmetricEigen::new(jacobi);
    let mut rule: Vec<(f64, f64)> = (0..m).map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2))).collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sym: Vec<(f64, f64)> = (0..m)
        .map(|k| {
            let (lo, hi) = (rule[k], rule[m - 1 - k]);
            ((lo.0 - hi.0) / 2.0, (lo.1 + hi.1) / 2.0)
        })
        .filter(|(_, w)| *w >= 1e-20)
        .collect();
    sym.into_iter().unzip()
}

/// `E exp(i x u)` for `x` standard normal, by quadrature; real because the rule is symmetric.
fn gh_char(nodes: &[f64], weights: &[f64], u: f64) -> f64 {
    nodes.iter().zip(weights).map(|(x, w)| w * (x * u).cos()).sum()
}

/// Tomographic semigroup `int T(g) f dmu_t(g)`.
///
/// Discrete measures are summed exactly. Gaussian measures are integrated
/// with a product Gauss-Hermite rule after the change of variables
/// `g = mean + L z`, which splits the two-sided phase into one-dimensional factors.
pub fn tomographic_step(f: &PhaseFunction, semigroup: &ConvolutionSemigroup, t: f64) -> Result<PhaseFunction> {
    let ctx = semigroup.context();
    check_function_in(&ctx, f)?;
    let mu = semigroup.at(t)?;
    let mut out = f.clone();
    match &mu {
        ProbabilityMeasure::Discrete(m) => {
            for (k, v) in out.values_mut().iter_mut().enumerate() {
                let h = f.domain().point(k);
                let mut avg = ZERO;
                for (g, w) in m.iter() {
                    avg += temme_value(&ctx, g, &h)? * w;
                }
                *v *= avg;
            }
        }
        ProbabilityMeasure::Gaussian(gm) => {
            let (grid, lattice) = f.domain().grid().ok_or_else(|| Error::DomainMismatch("grid function expected".into()))?;
            let (nodes, weights) = gauss_hermite();
            let l = gm.cholesky();
            let xs = grid.coords(lattice);
            let n = xs.len();
            // with kappa = (-p~, q~): u1 = a(p~) + b(q~) and u2 = l22 q~, so
            // cos(x u1) splits into per-column and per-row tables
            let mut cos_a = vec![0.0; nodes.len() * n];
            let mut sin_a = vec![0.0; nodes.len() * n];
            for (m, x) in nodes.iter().enumerate() {
                for (j, pt) in xs.iter().enumerate() {
                    let (s_, c_) = (-x * l[0][0] * pt).sin_cos();
                    cos_a[m * n + j] = c_;
                    sin_a[m * n + j] = s_;
                }
            }
            let mut phi1 = vec![0.0; n];
            for (i, qt) in xs.iter().enumerate() {
                phi1.iter_mut().for_each(|v| *v = 0.0);
                for (m, (x, w)) in nodes.iter().zip(weights).enumerate() {
                    let (sb, cb) = (x * l[1][0] * qt).sin_cos();
                    let (ca, sa) = (&cos_a[m * n..(m + 1) * n], &sin_a[m * n..(m + 1) * n]);
                    for j in 0..n {
                        phi1[j] += w * (ca[j] * cb - sa[j] * sb);
                    }
                }
                let phi2 = gh_char(nodes, weights, l[1][1] * qt);
                for (j, pt) in xs.iter().enumerate() {
                    let shift = C64::from_polar(1.0, -gm.mean[0] * pt + gm.mean[1] * qt);
                    out.values_mut()[i * n + j] *= shift * (phi1[j] * phi2);
                }
            }
        }
    }
    Ok(out)
}

fn require_plane(f: &PhaseFunction, semigroup: &ConvolutionSemigroup) -> Result<()> {
    if semigroup.context() != GroupContext::Plane || f.domain().grid().is_none() {
        return Err(Error::Unsupported("this step is defined on the phase plane only".into()));
    }
    Ok(())
}

/// Multiplication by the symplectic characteristic function of `mu_t`.
pub fn fw_multiply_step(f: &PhaseFunction, semigroup: &ConvolutionSemigroup, t: f64) -> Result<PhaseFunction> {
    require_plane(f, semigroup)?;
    let mu = semigroup.at(t)?;
    let mut out = f.clone();
    for (k, v) in out.values_mut().iter_mut().enumerate() {
        *v *= symplectic_char(&mu, f.domain().point(k).coords())?;
    }
    Ok(out)
}

/// Evaluation route for the Wigner-side convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolveRoute {
    /// `F_s` conjugated multiplication by the characteristic function.
    Fourier,
    /// Periodic convolution with the sampled density.
    Blur,
}

/// Wigner-side step `rho -> rho * mu_t`.
pub fn wigner_convolve_step(
    rho: &PhaseFunction,
    semigroup: &ConvolutionSemigroup,
    t: f64,
    route: ConvolveRoute,
) -> Result<PhaseFunction> {
    require_plane(rho, semigroup)?;
    match route {
        ConvolveRoute::Fourier => {
            let dual = symplectic_fourier(rho)?;
            symplectic_fourier(&fw_multiply_step(&dual, semigroup, t)?)
        }
        ConvolveRoute::Blur => periodic_convolve(rho, &semigroup.at(t)?),
    }
}

/// Which translation a classical semigroup averages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslateSide {
    /// `(L_g f)(x) = f(g^-1 x)`.
    Left,
    /// `(R_g f)(x) = f(x g)`.
    Right,
}

/// Probability semigroup `int (translate by g) f dmu_t(g)`.
///
/// On a grid the translations are periodic and Gaussian measures act through
/// their sampled density, so shifts of discrete plane measures must be whole
/// grid steps.
pub fn translate_step(f: &PhaseFunction, semigroup: &ConvolutionSemigroup, t: f64, side: TranslateSide) -> Result<PhaseFunction> {
    let ctx = semigroup.context();
    check_function_in(&ctx, f)?;
    let mu = semigroup.at(t)?;
    let mu = match side {
        TranslateSide::Left => mu,
        TranslateSide::Right => adjoint_measure(&ctx, &mu)?,
    };
    match *f.domain() {
        Domain::Finite { d } => {
            let m = mu.as_discrete().expect("finite-group measures are discrete");
            let mut out = PhaseFunction::zeros(*f.domain());
            for (g, w) in m.iter() {
                let GroupElement::Finite(a, b) = *g else { return Err(Error::GroupMismatch) };
                for (k, v) in out.values_mut().iter_mut().enumerate() {
                    let (x, y) = (k / d, k % d);
                    *v += f.at((x + d - a) % d, (y + d - b) % d) * w;
                }
            }
            Ok(out)
        }
        Domain::Grid { .. } => periodic_convolve(f, &mu),
    }
}

fn fft2(buf: &mut [C64], n: usize, forward: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if forward { planner.plan_fft_forward(n) } else { planner.plan_fft_inverse(n) };
    for row in buf.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut col = vec![ZERO; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = buf[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            buf[i * n + j] = col[i];
        }
    }
}

/// `x -> sum f(x - g) mu(g)` on the periodic grid.
fn periodic_convolve(f: &PhaseFunction, mu: &ProbabilityMeasure) -> Result<PhaseFunction> {
    let (grid, lattice) = f.domain().grid().ok_or_else(|| Error::DomainMismatch("grid function expected".into()))?;
    let n = grid.n();
    let step = grid.step(lattice);
    let period = n as f64 * step;
    // kernel indexed by wrapped offset
    let mut kernel = vec![ZERO; n * n];
    let wrap = |a: usize| if a < n / 2 { a as f64 } else { a as f64 - n as f64 };
    match mu {
        ProbabilityMeasure::Discrete(m) => {
            for (g, w) in m.iter() {
                let (q, p) = g.coords();
                let (a, b) = (q / step, p / step);
                let (ar, br) = (a.round(), b.round());
                if (a - ar).abs() > 1e-9 || (b - br).abs() > 1e-9 {
                    return invalid(format!("shift {g:?} is not a whole number of grid steps"));
                }
                let idx = |v: f64| (v as i64).rem_euclid(n as i64) as usize;
                kernel[idx(ar) * n + idx(br)] += C64::new(w, 0.0);
            }
        }
        ProbabilityMeasure::Gaussian(gm) => {
            let [[a, b], [_, c]] = gm.cov;
            if a * c - b * b <= 0.0 {
                return Err(Error::Unsupported("blur needs a nonsingular covariance; use the Fourier route".into()));
            }
            let cell = step * step;
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for wi in -2..=2 {
                        for wj in -2..=2 {
                            let q = wrap(i) * step + wi as f64 * period;
                            let p = wrap(j) * step + wj as f64 * period;
                            acc += gaussian_density(gm, q, p);
                        }
                    }
                    kernel[i * n + j] = C64::new(acc * cell, 0.0);
                }
            }
        }
    }
    let mut data = f.values().to_vec();
    fft2(&mut data, n, true);
    fft2(&mut kernel, n, true);
    for (x, k) in data.iter_mut().zip(&kernel) {
        *x *= k;
    }
    fft2(&mut data, n, false);
    let norm = 1.0 / (n * n) as f64;
    data.iter_mut().for_each(|v| *v *= norm);
    PhaseFunction::new(*f.domain(), data)
}

fn gaussian_density(g: &GaussianMeasure, q: f64, p: f64) -> f64 {
    g.density(q, p)
}

/// Something a semigroup can act on.
#[derive(Clone, Debug, PartialEq)]
pub enum Evolvable {
    Operator(Operator),
    Function(PhaseFunction),
}

impl Evolvable {
    pub fn as_operator(&self) -> Option<&Operator> {
        match self {
            Self::Operator(a) => Some(a),
            Self::Function(_) => None,
        }
    }

    pub fn as_function(&self) -> Option<&PhaseFunction> {
        match self {
            Self::Function(f) => Some(f),
            Self::Operator(_) => None,
        }
    }

    /// `alpha self + beta other`.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        let (a, b) = (C64::new(alpha, 0.0), C64::new(beta, 0.0));
        match (self, other) {
            (Self::Operator(x), Self::Operator(y)) => {
                if x.dim() != y.dim() {
                    return Err(Error::DimensionMismatch(x.dim(), y.dim()));
                }
                Ok(Self::Operator(&x.scale(a) + &y.scale(b)))
            }
            (Self::Function(x), Self::Function(y)) => Ok(Self::Function(x.combine(a, y, b)?)),
            _ => invalid("cannot combine an operator with a function"),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Self::Operator(a) => a.max_abs(),
            Self::Function(f) => f.max_abs(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.combine(1.0, other, -1.0)?.max_abs())
    }
}

/// Kind tag of an [`Action`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Twirl,
    TwoSided,
    FwMultiply,
    WignerConvolve,
    LeftTranslate,
    RightTranslate,
}

impl ActionKind {
    pub const ALL: [ActionKind; 6] = [
        Self::Twirl,
        Self::TwoSided,
        Self::FwMultiply,
        Self::WignerConvolve,
        Self::LeftTranslate,
        Self::RightTranslate,
    ];
}

/// The map `g -> S(g)` integrated against the measures.
#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Twirl { rep: Representation, method: TwirlMethod },
    TwoSided { ctx: GroupContext },
    FwMultiply,
    WignerConvolve { route: ConvolveRoute },
    LeftTranslate,
    RightTranslate,
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Self::Twirl { .. } => ActionKind::Twirl,
            Self::TwoSided { .. } => ActionKind::TwoSided,
            Self::FwMultiply => ActionKind::FwMultiply,
            Self::WignerConvolve { .. } => ActionKind::WignerConvolve,
            Self::LeftTranslate => ActionKind::LeftTranslate,
            Self::RightTranslate => ActionKind::RightTranslate,
        }
    }
}

/// A randomly generated semigroup: an action paired with a convolution semigroup.
#[derive(Clone, Debug, PartialEq)]
pub struct SemigroupHandle {
    action: Action,
    semigroup: ConvolutionSemigroup,
}

impl SemigroupHandle {
    pub fn new(action: Action, semigroup: ConvolutionSemigroup) -> Result<Self> {
        semigroup.validate()?;
        let ctx = semigroup.context();
        match &action {
            Action::Twirl { rep, .. } if rep.context() != ctx => return Err(Error::GroupMismatch),
            Action::TwoSided { ctx: c } if *c != ctx => return Err(Error::GroupMismatch),
            Action::FwMultiply | Action::WignerConvolve { .. } if ctx != GroupContext::Plane => {
                return Err(Error::Unsupported("multiplication and Wigner-side forms need the phase plane".into()))
            }
            _ => {}
        }
        Ok(Self { action, semigroup })
    }

    pub fn action(&self) -> &Action {
        &self.action
    }

    pub fn semigroup(&self) -> &ConvolutionSemigroup {
        &self.semigroup
    }

    /// `T_t psi`.
    pub fn apply(&self, psi: &Evolvable, t: f64) -> Result<Evolvable> {
        if !(t >= 0.0) || !t.is_finite() {
            return invalid(format!("time must be finite and non-negative, got {t}"));
        }
        let sg = &self.semigroup;
        let want_fn = || psi.as_function().ok_or_else(|| Error::InvalidInput("this action evolves phase-space functions".into()));
        Ok(match &self.action {
            Action::Twirl { rep, method } => {
                let a = psi.as_operator().ok_or_else(|| Error::InvalidInput("twirling acts on operators".into()))?;
                Evolvable::Operator(twirl_operator(rep, a, &sg.at(t)?, *method)?.state)
            }
            Action::TwoSided { .. } => Evolvable::Function(tomographic_step(want_fn()?, sg, t)?),
            Action::FwMultiply => Evolvable::Function(fw_multiply_step(want_fn()?, sg, t)?),
            Action::WignerConvolve { route } => Evolvable::Function(wigner_convolve_step(want_fn()?, sg, t, *route)?),
            Action::LeftTranslate => Evolvable::Function(translate_step(want_fn()?, sg, t, TranslateSide::Left)?),
            Action::RightTranslate => Evolvable::Function(translate_step(want_fn()?, sg, t, TranslateSide::Right)?),
        })
    }
}

/// Generator estimate with its convergence indicator.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorEstimate {
    pub value: Evolvable,
    /// Difference between the two highest-order extrapolants.
    pub error_indicator: f64,
}

/// Halvings of the base step used by [`estimate_generator`].
pub const RICHARDSON_LEVELS: usize = 4;

/// `lim (T_h psi - psi) / h`, from forward differences at `h, h/2, h/4, h/8`
/// combined in a Richardson table that removes the first three error orders.
pub fn estimate_generator(handle: &SemigroupHandle, psi: &Evolvable, h: f64) -> Result<GeneratorEstimate> {
    if !(h > 0.0) || !h.is_finite() {
        return invalid(format!("step must be positive, got {h}"));
    }
    let mut table: Vec<Vec<Evolvable>> = Vec::with_capacity(RICHARDSON_LEVELS);
    for i in 0..RICHARDSON_LEVELS {
        let hi = h / (1u32 << i) as f64;
        let moved = handle.apply(psi, hi)?;
        let mut row = vec![moved.combine(1.0 / hi, psi, -1.0 / hi)?];
        for j in 1..=i {
            let p = (1u32 << j) as f64;
            let next = row[j - 1].combine(p / (p - 1.0), &table[i - 1][j - 1], -1.0 / (p - 1.0))?;
            row.push(next);
        }
        table.push(row);
    }
    let last = table.pop().expect("levels > 0");
    let error_indicator = last[last.len() - 1].max_abs_diff(&last[last.len() - 2])?;
    Ok(GeneratorEstimate { value: last.into_iter().last().expect("non-empty row"), error_indicator })
}

/// Linear map on column-stacked `d x d` operators.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    dim: usize,
    matrix: DMatrix<C64>,
}

impl Superoperator {
    pub fn new(dim: usize, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(Error::DimensionMismatch(matrix.nrows(), dim * dim));
        }
        Ok(Self { dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn apply(&self, a: &Operator) -> Result<Operator> {
        if a.dim() != self.dim {
            return Err(Error::DimensionMismatch(a.dim(), self.dim));
        }
        let v = &self.matrix * nalgebra::DVector::from_column_slice(a.matrix().as_slice());
        Ok(Operator::from_matrix_unchecked(DMatrix::from_column_slice(self.dim, self.dim, v.as_slice())))
    }

    /// `exp(t L)`.
    pub fn exp(&self, t: f64) -> Self {
        Self { dim: self.dim, matrix: (&self.matrix * C64::new(t, 0.0)).exp() }
    }

    /// `max |L(A*) - L(A)*|` over matrix units.
    pub fn hermiticity_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for j in 0..self.dim {
            for k in 0..self.dim {
                let e = Operator::matrix_unit(self.dim, j, k)?;
                let lhs = self.apply(&e.adjoint())?;
                let rhs = self.apply(&e)?.adjoint();
                worst = worst.max(lhs.max_abs_diff(&rhs)?);
            }
        }
        Ok(worst)
    }

    /// `max_A |tr L(A)|` over matrix units: zero for trace-preserving dynamics.
    pub fn trace_residual(&self) -> f64 {
        let d = self.dim;
        (0..d * d)
            .map(|col| (0..d).map(|i| self.matrix[(i * d + i, col)]).sum::<C64>().norm())
            .fold(0.0, f64::max)
    }
}

/// `L rho = rate (sum_g nu(g) U(g) rho U(g)* - rho)` for a compound-Poisson twirl.
pub fn analytic_generator(handle: &SemigroupHandle) -> Result<Superoperator> {
    let Action::Twirl { rep, .. } = handle.action() else {
        return invalid("analytic generator needs a twirl action");
    };
    let ConvolutionSemigroup::CompoundPoisson { base, rate, .. } = handle.semigroup() else {
        return Err(Error::Unsupported("analytic generator is available for compound-Poisson semigroups on Z_d^2".into()));
    };
    let d = rep.dim();
    let mut m = DMatrix::<C64>::zeros(d * d, d * d);
    for (g, w) in base.iter() {
        let u = rep.unitary(g)?.into_matrix();
        // vec(U A U*) = (conj(U) kron U) vec(A)
        m += u.conjugate().kronecker(&u) * C64::new(w, 0.0);
    }
    m -= DMatrix::<C64>::identity(d * d, d * d);
    Superoperator::new(d, m * C64::new(*rate, 0.0))
}

/// Both sides of `S_t W_U rho = W_U T_t rho`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntertwiningReport {
    pub max_deviation: f64,
    /// Largest pointwise Monte Carlo standard error, when the twirl was sampled.
    pub std_error: Option<f64>,
}

/// Compares the Fourier-Wigner image of the twirled state with the tomographic
/// step applied to the image of the state.
pub fn check_intertwining(
    rep: &Representation,
    rho: &DensityOperator,
    semigroup: &ConvolutionSemigroup,
    t: f64,
    method: TwirlMethod,
) -> Result<IntertwiningReport> {
    let mu = semigroup.at(t)?;
    let twirled = twirl(rep, rho, &mu, method)?;
    let a = fw_transform(rep, &twirled.state)?;
    let f = fw_transform(rep, rho.operator())?;
    let b = tomographic_step(&f, semigroup, t)?;
    let max_deviation = a.max_abs_diff(&b)?;
    let std_error = match method {
        TwirlMethod::Exact => None,
        TwirlMethod::MonteCarlo { samples, .. } => {
            // each draw contributes mt(g,h) f(h), whose mean is b(h)
            let var = f.values().iter().zip(b.values()).map(|(x, y)| (x.norm_sqr() - y.norm_sqr()).max(0.0));
            Some(var.fold(0.0, f64::max).sqrt() / (samples as f64).sqrt())
        }
    };
    Ok(IntertwiningReport { max_deviation, std_error })
}

/// Complete-positivity witness: the channel applied to half of a maximally
/// entangled state must give a density operator on `C^d (x) C^d`.
pub fn choi_witness<F>(dim: usize, channel: F, tol: f64) -> Result<DensityReport>
where
    F: Fn(&Operator) -> Result<Operator>,
{
    let mut choi = DMatrix::<C64>::zeros(dim * dim, dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let out = channel(&Operator::matrix_unit(dim, i, j)?)?;
            if out.dim() != dim {
                return Err(Error::DimensionMismatch(out.dim(), dim));
            }
            choi.view_mut((i * dim, j * dim), (dim, dim)).copy_from(&(out.matrix() / C64::new(dim as f64, 0.0)));
        }
    }
    Ok(validate_density(&Operator::new(choi)?, tol))
}

/// Mass, mean and covariance of the real part of a grid function, in grid coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mass: f64,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

pub fn moments(f: &PhaseFunction) -> Result<Moments> {
    if f.domain().grid().is_none() {
        return invalid("moments need a grid function");
    }
    let w = f.domain().haar_weight();
    let (mut m0, mut m1, mut m2) = (0.0, [0.0; 2], [[0.0; 2]; 2]);
    for (k, v) in f.values().iter().enumerate() {
        let (q, p) = f.domain().point(k).coords();
        let x = [q, p];
        let r = v.re * w;
        m0 += r;
        for a in 0..2 {
            m1[a] += r * x[a];
            for b in 0..2 {
                m2[a][b] += r * x[a] * x[b];
            }
        }
    }
    if m0 == 0.0 {
        return invalid("function has zero mass");
    }
    let mean = [m1[0] / m0, m1[1] / m0];
    let mut cov = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            cov[a][b] = m2[a][b] / m0 - mean[a] * mean[b];
        }
    }
    Ok(Moments { mass: m0, mean, cov })
}

/// `1/2 div(Sigma grad f)` by central differences; edge points are left at zero.
pub fn diffusion_operator(f: &PhaseFunction, diffusion: [[f64; 2]; 2]) -> Result<PhaseFunction> {
    let (grid, lattice) = f.domain().grid().ok_or_else(|| Error::DomainMismatch("grid function expected".into()))?;
    let n = grid.n();
    let h = grid.step(lattice);
    let mut out = PhaseFunction::zeros(*f.domain());
    let s = diffusion;
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let fqq = (f.at(i + 1, j) - f.at(i, j) * 2.0 + f.at(i - 1, j)) / (h * h);
            let fpp = (f.at(i, j + 1) - f.at(i, j) * 2.0 + f.at(i, j - 1)) / (h * h);
            let fqp = (f.at(i + 1, j + 1) - f.at(i + 1, j - 1) - f.at(i - 1, j + 1) + f.at(i - 1, j - 1)) / (4.0 * h * h);
            out.values_mut()[i * n + j] = (fqq * s[0][0] + fpp * s[1][1] + fqp * (s[0][1] + s[1][0])) * 0.5;
        }
    }
    Ok(out)
}

/// The multiplier symbol `-sigma(q~, p~) / 2` of a centered Gaussian generator on the Fourier-Wigner side.
pub fn gaussian_symbol(diffusion: [[f64; 2]; 2], point: (f64, f64)) -> f64 {
    let k = [-point.1, point.0];
    let quad = k[0] * (diffusion[0][0] * k[0] + diffusion[0][1] * k[1]) + k[1] * (diffusion[1][0] * k[0] + diffusion[1][1] * k[1]);
    -0.5 * quad
}
