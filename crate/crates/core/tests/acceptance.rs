//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints exactly one status line, and exits non-zero if any of them fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use qtomo::group::{is_positive_definite, symplectic_char, temme_value, ConvolutionSemigroup, DiscreteMeasure, GroupContext, GroupElement};
use qtomo::ops::{random_density, random_density_embedded, validate_density, DensityOperator, Operator, C64};
use qtomo::semigroup::{
    analytic_generator, check_intertwining, choi_witness, diffusion_operator, estimate_generator, fw_multiply_step,
    gaussian_symbol, moments, tomographic_step, twirl, twirl_operator, wigner_convolve_step, Action, ConvolveRoute,
    Evolvable, SemigroupHandle, TwirlMethod,
};
use qtomo::star::{finite_twisted, twisted_convolution, twisted_product, ProductRoute, Route};
use qtomo::weyl::{fw_transform, klm_check, wigner_transform, Domain, Lattice, PhaseFunction, PhaseGrid, Representation};
use qtomo::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

type Criterion = fn() -> Result<Outcome>;

fn finite_semigroup(d: usize) -> Result<ConvolutionSemigroup> {
    let ctx = GroupContext::finite(d)?;
    let base = DiscreteMeasure::new(vec![ctx.element(1, 0)?, ctx.element(0, 1)?, ctx.element(2, 1)?], vec![0.5, 0.3, 0.2])?;
    ConvolutionSemigroup::compound_poisson(&ctx, base, 1.2)
}

fn plane_gaussian() -> Result<ConvolutionSemigroup> {
    ConvolutionSemigroup::gaussian([0.0; 2], [[1.0, 0.25], [0.25, 0.6]])
}

fn isometry() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for d in [3, 5, 7] {
        let rep = Representation::discrete_weyl(d)?;
        for seed in 0..50 {
            let rho = random_density(d, seed)?;
            let hs = rho.operator().hs_norm();
            let f = fw_transform(&rep, rho.operator())?;
            worst = worst.max((f.norm() - hs).abs() / hs);
        }
    }
    Ok(Outcome::new(worst <= 1e-10, format!("max relative deviation {worst:.2e} (tol 1e-10)")))
}

fn intertwining() -> Result<Outcome> {
    let rep = Representation::discrete_weyl(3)?;
    let sg = finite_semigroup(3)?;
    let mut finite: f64 = 0.0;
    for seed in 0..5 {
        let rho = random_density(3, seed)?;
        for t in [0.0, 0.3, 0.7, 1.5] {
            finite = finite.max(check_intertwining(&rep, &rho, &sg, t, TwirlMethod::Exact)?.max_deviation);
        }
    }
    let plane = Representation::fock(32, PhaseGrid::standard())?;
    let gauss = ConvolutionSemigroup::gaussian([0.0; 2], [[1.0, 0.0], [0.0, 1.0]])?;
    let vacuum = DensityOperator::basis_state(32, 0)?;
    let mc = check_intertwining(&plane, &vacuum, &gauss, 0.5, TwirlMethod::MonteCarlo { samples: 200_000, seed: 2024 })?;
    let se = mc.std_error.unwrap_or(f64::NAN);
    let pass = finite <= 1e-12 && mc.max_deviation <= 5.0 * se;
    Ok(Outcome::new(
        pass,
        format!("finite {finite:.2e} (tol 1e-12); plane {:.2e} vs 5 x SE {:.2e}", mc.max_deviation, 5.0 * se),
    ))
}

fn semigroup_law() -> Result<Outcome> {
    let grid = [0.2, 0.5, 1.0];
    let mut exact: f64 = 0.0;
    let mut closed: f64 = 0.0;

    let d = 5;
    let rep = Representation::discrete_weyl(d)?;
    let ctx = rep.context();
    let sg = finite_semigroup(d)?;
    let finite_actions = [
        Action::Twirl { rep: rep.clone(), method: TwirlMethod::Exact },
        Action::TwoSided { ctx },
        Action::LeftTranslate,
        Action::RightTranslate,
    ];
    for action in finite_actions {
        let is_twirl = matches!(action, Action::Twirl { .. });
        let h = SemigroupHandle::new(action, sg.clone())?;
        for seed in 0..10 {
            let rho = random_density(d, seed)?.into_operator();
            let psi = if is_twirl { Evolvable::Operator(rho) } else { Evolvable::Function(fw_transform(&rep, &rho)?.into_function()) };
            exact = exact.max(h.apply(&psi, 0.0)?.max_abs_diff(&psi)?);
            for t in grid {
                for s in grid {
                    let two = h.apply(&h.apply(&psi, s)?, t)?;
                    exact = exact.max(two.max_abs_diff(&h.apply(&psi, t + s)?)?);
                }
            }
        }
    }

    let plane = Representation::fock(32, PhaseGrid::standard())?;
    let gauss = plane_gaussian()?;
    let plane_actions = [
        Action::FwMultiply,
        Action::WignerConvolve { route: ConvolveRoute::Fourier },
        Action::TwoSided { ctx: GroupContext::Plane },
        Action::LeftTranslate,
        Action::RightTranslate,
    ];
    for action in plane_actions {
        let wigner_side = matches!(action, Action::WignerConvolve { .. } | Action::LeftTranslate | Action::RightTranslate);
        let h = SemigroupHandle::new(action, gauss.clone())?;
        for seed in 0..2 {
            let rho = random_density_embedded(32, 3, seed)?.into_operator();
            let f = if wigner_side { wigner_transform(&plane, &rho)? } else { fw_transform(&plane, &rho)? };
            let psi = Evolvable::Function(f.into_function());
            closed = closed.max(h.apply(&psi, 0.0)?.max_abs_diff(&psi)?);
            for t in grid {
                for s in grid {
                    let two = h.apply(&h.apply(&psi, s)?, t)?;
                    closed = closed.max(two.max_abs_diff(&h.apply(&psi, t + s)?)?);
                }
            }
        }
    }
    Ok(Outcome::new(
        exact <= 1e-12 && closed <= 1e-8,
        format!("exact paths {exact:.2e} (tol 1e-12); grid paths {closed:.2e} (tol 1e-8)"),
    ))
}

fn fw(rep: &Representation, a: &Operator) -> Result<PhaseFunction> {
    Ok(fw_transform(rep, a)?.into_function())
}

fn wig(rep: &Representation, a: &Operator) -> Result<PhaseFunction> {
    Ok(wigner_transform(rep, a)?.into_function())
}

fn star_homomorphism() -> Result<Outcome> {
    let rep = Representation::discrete_weyl(3)?;
    let mut finite: f64 = 0.0;
    for seed in 0..20 {
        let a = random_density(3, 2 * seed)?.into_operator();
        let b = random_density(3, 2 * seed + 1)?.into_operator();
        let lhs = finite_twisted(&fw(&rep, &a)?, &fw(&rep, &b)?)?;
        finite = finite.max(lhs.max_abs_diff(&fw(&rep, &a.checked_mul(&b)?)?)?);
    }

    let plane = Representation::fock(32, PhaseGrid::standard())?;
    let a = random_density_embedded(32, 3, 1)?.into_operator();
    let b = random_density_embedded(32, 3, 2)?.into_operator();
    let ab = a.checked_mul(&b)?;
    let conv = twisted_convolution(&fw(&plane, &a)?, &fw(&plane, &b)?, Route::Fast)?
        .max_abs_diff(&fw(&plane, &ab)?)?;
    let prod = twisted_product(&wig(&plane, &a)?, &wig(&plane, &b)?, ProductRoute::Fourier)?
        .max_abs_diff(&wig(&plane, &ab)?)?;

    let dom = Domain::Grid { grid: PhaseGrid::new(32, 4.0)?, lattice: Lattice::Direct };
    let f1 = PhaseFunction::from_fn(dom, |g| {
        let (q, p) = g.coords();
        C64::new(2.0 * (-((q - 0.5).powi(2) + p * p)).exp(), 0.0)
    });
    let f2 = PhaseFunction::from_fn(dom, |g| {
        let (q, p) = g.coords();
        C64::new((-(q * q + (p + 0.3).powi(2)) / 1.5).exp(), 0.2 * p * (-(q * q + p * p)).exp())
    });
    let routes = twisted_product(&f1, &f2, ProductRoute::Kernel)?.max_abs_diff(&twisted_product(&f1, &f2, ProductRoute::Fourier)?)?;
    Ok(Outcome::new(
        finite <= 1e-12 && conv <= 1e-4 && prod <= 1e-4 && routes <= 1e-3,
        format!("finite {finite:.2e}; convolution {conv:.2e}; product {prod:.2e}; kernel vs Fourier {routes:.2e}"),
    ))
}

fn tomographic_forms() -> Result<Outcome> {
    let plane = Representation::fock(32, PhaseGrid::standard())?;
    let mut pomul: f64 = 0.0;
    let mut conv: f64 = 0.0;
    for seed in 0..3 {
        let rho = random_density_embedded(32, 3, seed)?.into_operator();
        let f = fw_transform(&plane, &rho)?;
        let w = wigner_transform(&plane, &rho)?;
        for sg in [plane_gaussian()?, ConvolutionSemigroup::gaussian([0.3, -0.2], [[0.5, 0.0], [0.0, 0.5]])?] {
            for t in [0.25, 1.0] {
                pomul = pomul.max(tomographic_step(&f, &sg, t)?.max_abs_diff(&fw_multiply_step(&f, &sg, t)?)?);
                let fourier = wigner_convolve_step(&w, &sg, t, ConvolveRoute::Fourier)?;
                conv = conv.max(fourier.max_abs_diff(&wigner_convolve_step(&w, &sg, t, ConvolveRoute::Blur)?)?);
            }
        }
    }
    Ok(Outcome::new(
        pomul <= 1e-10 && conv <= 1e-8,
        format!("two-sided vs multiplication {pomul:.2e} (tol 1e-10); blur vs Fourier {conv:.2e} (tol 1e-8)"),
    ))
}

fn physicality() -> Result<Outcome> {
    let mut failures = Vec::new();
    for d in [3, 5] {
        let rep = Representation::discrete_weyl(d)?;
        let sg = finite_semigroup(d)?;
        for seed in 0..20 {
            let rho = random_density(d, seed)?;
            let out = twirl(&rep, &rho, &sg.at(0.1 * seed as f64)?, TwirlMethod::Exact)?;
            if !validate_density(&out.state, 1e-10).passed() {
                failures.push(format!("twirl d={d} seed={seed}"));
            }
        }
        let mu = sg.at(0.8)?;
        if !choi_witness(d, |a| Ok(twirl_operator(&rep, a, &mu, TwirlMethod::Exact)?.state), 1e-10)?.passed() {
            failures.push(format!("choi d={d}"));
        }
    }

    let plane = Representation::fock(32, PhaseGrid::standard())?;
    let dom = plane.fw_domain();
    let (grid, lattice) = dom.grid().expect("plane domain is a grid");
    let c = grid.n() / 2;
    let points: Vec<GroupElement> = (0..8)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .map(|(i, j)| GroupElement::Plane(grid.coord(lattice, c + 2 * i - 7), grid.coord(lattice, c + 3 * j - 5)))
        .collect();
    let mut klm_min = f64::INFINITY;
    let mut origin: f64 = 0.0;
    let e = GroupElement::Plane(0.0, 0.0);
    for seed in 0..3 {
        let f = fw_transform(&plane, random_density_embedded(32, 3, seed)?.operator())?;
        let evolved = f.with_function(fw_multiply_step(&f, &plane_gaussian()?, 0.7)?)?;
        origin = origin.max((evolved.value_at(&e).unwrap() - f.value_at(&e).unwrap()).norm());
        klm_min = klm_min.min(klm_check(&plane, &f, &points)?).min(klm_check(&plane, &evolved, &points)?);
    }
    let pass = failures.is_empty() && origin <= 1e-12 && klm_min >= -1e-8;
    Ok(Outcome::new(
        pass,
        format!("density/CP failures {:?}; f(e) drift {origin:.1e}; min KLM eigenvalue {klm_min:.2e}", failures),
    ))
}

fn generators() -> Result<Outcome> {
    let rep = Representation::discrete_weyl(3)?;
    let handle = SemigroupHandle::new(Action::Twirl { rep, method: TwirlMethod::Exact }, finite_semigroup(3)?)?;
    let gen = analytic_generator(&handle)?;
    let mut finite: f64 = 0.0;
    for seed in 0..5 {
        let rho = random_density(3, seed)?.into_operator();
        let est = estimate_generator(&handle, &Evolvable::Operator(rho.clone()), 1e-3)?;
        finite = finite.max(est.value.as_operator().unwrap().max_abs_diff(&gen.apply(&rho)?)?);
    }

    let plane = Representation::fock(32, PhaseGrid::standard())?;
    let sigma = [[1.0, 0.25], [0.25, 0.6]];
    let sg = ConvolutionSemigroup::gaussian([0.0; 2], sigma)?;
    let f = fw_transform(&plane, random_density_embedded(32, 3, 4)?.operator())?;
    let h = SemigroupHandle::new(Action::FwMultiply, sg.clone())?;
    let est = estimate_generator(&h, &Evolvable::Function(f.function().clone()), 1e-3)?;
    let symbol = f.multiplied(|g| C64::new(gaussian_symbol(sigma, g.coords()), 0.0));
    let plane_err = est.value.as_function().unwrap().max_abs_diff(&symbol)?;

    // heat equation d/dt rho_t = 1/2 div(Sigma grad rho_t) at t = 1
    let heat_sg = ConvolutionSemigroup::gaussian([0.0; 2], [[1.0, 0.0], [0.0, 1.0]])?;
    let w = wigner_transform(&plane, random_density_embedded(32, 3, 6)?.operator())?;
    let (t, dt) = (1.0, 1e-3);
    let at = |s: f64| wigner_convolve_step(&w, &heat_sg, s, ConvolveRoute::Fourier);
    let ddt = at(t + dt)?.combine(C64::new(0.5 / dt, 0.0), &at(t - dt)?, C64::new(-0.5 / dt, 0.0))?;
    let lap = diffusion_operator(&at(t)?, [[1.0, 0.0], [0.0, 1.0]])?;
    let heat = interior_diff(&ddt, &lap);
    Ok(Outcome::new(
        finite <= 1e-8 && plane_err <= 1e-6 && heat <= 2e-3,
        format!("finite {finite:.2e} (tol 1e-8); plane symbol {plane_err:.2e} (tol 1e-6); heat residual {heat:.2e} (tol 2e-3)"),
    ))
}

fn interior_diff(a: &PhaseFunction, b: &PhaseFunction) -> f64 {
    let n = a.domain().side_len();
    let mut worst: f64 = 0.0;
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            worst = worst.max((a.at(i, j) - b.at(i, j)).norm());
        }
    }
    worst
}

fn vacuum_diffusion() -> Result<Outcome> {
    let plane = Representation::fock(32, PhaseGrid::standard())?;
    let w = wigner_transform(&plane, DensityOperator::basis_state(32, 0)?.operator())?;
    let sigma = [[1.0, 0.0], [0.0, 1.0]];
    let sg = ConvolutionSemigroup::gaussian([0.0; 2], sigma)?;
    let times: Vec<f64> = (0..=8).map(|k| 0.25 * k as f64).collect();
    let mut covs = Vec::new();
    for &t in &times {
        covs.push(moments(&wigner_convolve_step(&w, &sg, t, ConvolveRoute::Fourier)?)?.cov);
    }
    let tbar = times.iter().sum::<f64>() / times.len() as f64;
    let sxx: f64 = times.iter().map(|t| (t - tbar).powi(2)).sum();
    let mut worst: f64 = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let ybar = covs.iter().map(|c| c[a][b]).sum::<f64>() / covs.len() as f64;
            let sxy: f64 = times.iter().zip(&covs).map(|(t, c)| (t - tbar) * (c[a][b] - ybar)).sum();
            let slope = sxy / sxx;
            let err = if sigma[a][b] == 0.0 { slope.abs() } else { (slope - sigma[a][b]).abs() / sigma[a][b] };
            worst = worst.max(err);
        }
    }
    Ok(Outcome::new(worst <= 1e-3, format!("max relative slope error {worst:.2e} (tol 1e-3)")))
}

fn bochner() -> Result<Outcome> {
    let gauss = ConvolutionSemigroup::gaussian([0.2, -0.1], [[1.0, 0.3], [0.3, 0.7]])?;
    let grid = PhaseGrid::new(64, 8.0)?;
    let lattice = Lattice::Dual;
    let mut origin: f64 = 0.0;
    let mut bound: f64 = 0.0;
    let mut gram = f64::INFINITY;
    for t in [0.1, 0.5, 1.0, 2.0] {
        let mu = gauss.at(t)?;
        origin = origin.max((symplectic_char(&mu, (0.0, 0.0))? - C64::new(1.0, 0.0)).norm());
        for i in 0..grid.n() {
            for j in 0..grid.n() {
                bound = bound.max(symplectic_char(&mu, (grid.coord(lattice, i), grid.coord(lattice, j)))?.norm());
            }
        }
        let points: Vec<GroupElement> = (0..48)
            .map(|k| GroupElement::Plane(0.37 * (k % 7) as f64 - 1.1, 0.29 * (k / 7) as f64 - 0.9))
            .collect();
        gram = gram.min(is_positive_definite(&GroupContext::Plane, &points, |g| symplectic_char(&mu, g.coords()).ok())?);
    }
    // finite analogue: the average of the two-sided phases over mu_t
    let ctx = GroupContext::finite(5)?;
    let mu = finite_semigroup(5)?.at(0.9)?;
    let m = mu.as_discrete().expect("compound Poisson measures are discrete");
    let avg = |h: &GroupElement| -> Option<C64> { m.iter().map(|(g, w)| temme_value(&ctx, g, h).ok().map(|z| z * w)).sum() };
    origin = origin.max((avg(&ctx.identity()).unwrap() - C64::new(1.0, 0.0)).norm());
    let all = ctx.elements()?;
    gram = gram.min(is_positive_definite(&ctx, &all, avg)?);
    Ok(Outcome::new(
        origin == 0.0 && bound <= 1.0 + 1e-15 && gram >= -1e-10,
        format!("|char(0) - 1| = {origin:e}; sup |char| = {bound:.6}; min Gram eigenvalue {gram:.2e}"),
    ))
}

fn matrix_unit_rank() -> Result<Outcome> {
    let mut ranks = Vec::new();
    for d in [3, 5, 7] {
        let rep = Representation::discrete_weyl(d)?;
        let mut m = DMatrix::<C64>::zeros(d * d, d * d);
        for j in 0..d {
            for k in 0..d {
                let f = fw_transform(&rep, &Operator::matrix_unit(d, j, k)?)?;
                for (r, v) in f.values().iter().enumerate() {
                    m[(r, j * d + k)] = *v;
                }
            }
        }
        let sv = m.singular_values();
        let top = sv.max();
        ranks.push((d, sv.iter().filter(|s| **s > 1e-10 * top).count()));
    }
    let pass = ranks.iter().all(|(d, r)| *r == d * d);
    Ok(Outcome::new(pass, format!("ranks {ranks:?}")))
}

const CRITERIA: [(&str, Criterion, f64); 10] = [
    ("Fourier-Wigner isometry", isometry, 1.0),
    ("intertwining of twirl and tomographic semigroup", intertwining, 30.0),
    ("semigroup law for all action kinds", semigroup_law, 10.0),
    ("star-product homomorphism", star_homomorphism, 60.0),
    ("tomographic semigroup forms agree", tomographic_forms, 10.0),
    ("physicality preservation", physicality, 20.0),
    ("generator checks", generators, 20.0),
    ("Gaussian diffusion of the vacuum", vacuum_diffusion, 30.0),
    ("Bochner and normalization", bochner, 5.0),
    ("matrix-unit tomograms span", matrix_unit_rank, 1.0),
];

fn main() -> ExitCode {
    let mut failed = 0;
    for (k, (name, run, budget)) in CRITERIA.iter().enumerate() {
        let start = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs_f64(*budget);
        let pass = outcome.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} [{:.2}s of {budget}s]",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
