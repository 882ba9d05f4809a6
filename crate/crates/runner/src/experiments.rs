//! The experiment kinds. Each one composes library operations, measures the
//! deviation from an identity that must hold, and writes its data as CSV.

use std::path::Path;
use std::time::Instant;

use qtomo::group::{
    is_positive_definite, symplectic_char, temme_value, ConvolutionSemigroup, GroupContext, GroupElement,
    ProbabilityMeasure,
};
use qtomo::ops::{hermitian_eigen, random_density, random_density_embedded, validate_density, DensityOperator, Operator, C64};
use qtomo::semigroup::{
    analytic_generator, check_intertwining, diffusion_operator, estimate_generator, gaussian_symbol, moments, twirl,
    twirl_operator, wigner_convolve_step, Action, ConvolveRoute, Evolvable, SemigroupHandle, TwirlMethod,
};
use qtomo::star::{finite_twisted, twisted_convolution, twisted_product, ProductRoute, Route};
use qtomo::weyl::{fw_inverse, fw_transform, symplectic_fourier, wigner_transform, Lattice, PhaseFunction, PhaseGrid, Representation};

use crate::config::{ExperimentKind, RunConfig, StateSpec};
use crate::error::RunnerError;
use crate::report::{CheckRecord, RunReport, Timing};

/// A CSV payload waiting to be written.
struct Table {
    file: String,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(file: &str, header: &[&'static str]) -> Self {
        Self { file: file.into(), header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn write(&self, dir: &Path) -> Result<(), RunnerError> {
        let mut w = csv::Writer::from_path(dir.join(&self.file))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything an experiment produces.
#[derive(Default)]
struct Output {
    records: Vec<CheckRecord>,
    tables: Vec<Table>,
    /// Files written directly by the experiment.
    files: Vec<String>,
}

impl Output {
    fn check(&mut self, name: impl Into<String>, tolerance: f64, value: qtomo::Result<f64>) {
        let name = name.into();
        self.records.push(match value {
            Ok(v) => CheckRecord::measured(name, v, tolerance),
            Err(e) => CheckRecord::failed(name, tolerance, e),
        });
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

/// Runs `config` and writes `report.json` plus data files into `out_dir`.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunReport, RunnerError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut timings = Vec::new();

    let start = Instant::now();
    let rep = Representation::new(config.representation.clone())
        .map_err(|e| RunnerError::Config { field: "representation".into(), message: e.to_string() })?;
    let rho = config.build_state()?;
    timings.push(Timing { phase: "setup".into(), seconds: start.elapsed().as_secs_f64() });

    let start = Instant::now();
    let mut out = Output::default();
    match config.experiment {
        ExperimentKind::Dequantize => dequantize(config, &rep, &rho, out_dir, &mut out)?,
        ExperimentKind::Evolve => evolve(config, &rep, &rho, &mut out),
        ExperimentKind::IntertwineCheck => intertwine(config, &rep, &rho, &mut out),
        ExperimentKind::StarCheck => star(config, &rep, &rho, &mut out),
        ExperimentKind::GeneratorCheck => generator(config, &rep, &rho, &mut out),
        ExperimentKind::BochnerCheck => bochner(config, &rep, &mut out),
    }
    timings.push(Timing { phase: "experiment".into(), seconds: start.elapsed().as_secs_f64() });

    let start = Instant::now();
    let mut outputs = out.files;
    for t in &out.tables {
        t.write(out_dir)?;
        outputs.push(t.file.clone());
    }
    timings.push(Timing { phase: "write".into(), seconds: start.elapsed().as_secs_f64() });
    let report = RunReport::new(config.clone(), out.records, timings, outputs);
    report.save(&out_dir.join("report.json"))?;
    Ok(report)
}

fn semigroup(config: &RunConfig) -> &ConvolutionSemigroup {
    config.semigroup.as_ref().expect("validated: experiment has a semigroup")
}

fn is_plane(rep: &Representation) -> bool {
    rep.context() == GroupContext::Plane
}

fn dequantize(config: &RunConfig, rep: &Representation, rho: &DensityOperator, dir: &Path, out: &mut Output) -> Result<(), RunnerError> {
    let tol = &config.tolerances;
    let plane = is_plane(rep);
    let f = fw_transform(rep, rho.operator())?;
    let hs = rho.operator().hs_norm();
    out.check("isometry", if plane { tol.closed_form } else { tol.exact }, Ok((f.norm() - hs).abs() / hs));
    out.check(
        "inverse_round_trip",
        if plane { tol.star } else { tol.exact },
        fw_inverse(rep, f.function()).and_then(|back| back.max_abs_diff(rho.operator())),
    );
    let e = rep.context().identity();
    out.check("identity_value", tol.exact, Ok((f.value_at(&e).unwrap_or_default() - C64::new(1.0 / rep.duflo_moore(), 0.0)).norm()));
    let (csv, json) = f.export(dir, "fourier_wigner")?;
    for p in [csv, json] {
        out.files.push(p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    }
    if plane {
        let w = wigner_transform(rep, rho.operator())?;
        out.check("wigner_is_symplectic_fourier", tol.closed_form, symplectic_fourier(f.function()).and_then(|g| g.max_abs_diff(&w)));
        let (csv, json) = w.export(dir, "wigner")?;
        for p in [csv, json] {
            out.files.push(p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
        }
    }
    Ok(())
}

/// Least-squares slope of `ys` against `ts`.
fn slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let (tb, yb) = (ts.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = ts.iter().zip(ys).map(|(t, y)| (t - tb) * (y - yb)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - tb).powi(2)).sum();
    sxy / sxx
}

fn slope_error(fitted: f64, expected: f64) -> f64 {
    if expected == 0.0 {
        fitted.abs()
    } else {
        (fitted - expected).abs() / expected.abs()
    }
}

fn evolve(config: &RunConfig, rep: &Representation, rho: &DensityOperator, out: &mut Output) {
    let tol = &config.tolerances;
    let sg = semigroup(config);
    let mut table = Table::new("evolution.csv", &["t", "observable_name", "value", "error_estimate"]);
    let times = &config.time_grid;
    match sg {
        ConvolutionSemigroup::Gaussian { drift, diffusion } => {
            let w = match wigner_transform(rep, rho.operator()) {
                Ok(w) => w,
                Err(e) => return out.records.push(CheckRecord::failed("wigner_transform", 0.0, e)),
            };
            let mut series: Vec<[f64; 6]> = Vec::new();
            for &t in times {
                match wigner_convolve_step(&w, sg, t, ConvolveRoute::Fourier).and_then(|wt| moments(&wt)) {
                    Ok(m) => {
                        let row = [m.mass, m.mean[0], m.mean[1], m.cov[0][0], m.cov[0][1], m.cov[1][1]];
                        for (name, v) in ["mass", "mean_q", "mean_p", "cov_qq", "cov_qp", "cov_pp"].iter().zip(row) {
                            table.push(vec![num(t), name.to_string(), num(v), num(0.0)]);
                        }
                        series.push(row);
                    }
                    Err(e) => return out.records.push(CheckRecord::failed(format!("evolve_t={t}"), 0.0, e)),
                }
            }
            let mass0 = series[0][0];
            out.check("mass_drift", tol.closed_form, Ok(series.iter().map(|r| (r[0] - mass0).abs()).fold(0.0, f64::max)));
            if times.len() >= 2 {
                let col = |k: usize| series.iter().map(|r| r[k]).collect::<Vec<_>>();
                let expected = [drift[0], drift[1], diffusion[0][0], diffusion[0][1], diffusion[1][1]];
                let names = ["drift_q", "drift_p", "slope_qq", "slope_qp", "slope_pp"];
                for (k, (name, want)) in names.iter().zip(expected).enumerate() {
                    out.check(*name, tol.slope, Ok(slope_error(slope(times, &col(k + 1)), want)));
                }
            }
        }
        ConvolutionSemigroup::CompoundPoisson { .. } => {
            let method = config.twirl_method();
            let (mut drift, mut negativity, mut invalid) = (0.0f64, 0.0f64, 0.0);
            for &t in times {
                let step = sg.at(t).and_then(|mu| twirl(rep, rho, &mu, method));
                let outcome = match step {
                    Ok(o) => o,
                    Err(e) => return out.records.push(CheckRecord::failed(format!("twirl_t={t}"), 0.0, e)),
                };
                let raw = twirl_operator(rep, rho.operator(), &sg.at(t).expect("evaluated above"), method);
                let trace = raw.map(|r| r.state.trace().re).unwrap_or(f64::NAN);
                let (eigs, _) = hermitian_eigen(outcome.state.matrix());
                let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
                let purity = outcome.state.hs_norm().powi(2);
                drift = drift.max((trace - 1.0).abs());
                negativity = negativity.max(-min_eig);
                if !validate_density(&outcome.state, tol.density).passed() {
                    invalid += 1.0;
                }
                let err = num(outcome.error_estimate);
                for (name, v) in [("trace_before_normalization", trace), ("purity", purity), ("min_eigenvalue", min_eig)] {
                    table.push(vec![num(t), name.into(), num(v), err.clone()]);
                }
            }
            let drift_tol = if method == TwirlMethod::Exact { tol.exact } else { f64::INFINITY };
            out.check("trace_drift", drift_tol, Ok(drift));
            out.check("negativity", tol.density, Ok(negativity.max(0.0)));
            out.records.push(CheckRecord { pass: invalid == 0.0, ..CheckRecord::measured("invalid_states", invalid, 0.0) });
        }
    }
    out.tables.push(table);
}

fn intertwine(config: &RunConfig, rep: &Representation, rho: &DensityOperator, out: &mut Output) {
    let tol = &config.tolerances;
    let method = config.twirl_method();
    let mut table = Table::new("intertwining.csv", &["t", "deviation", "std_error"]);
    for &t in &config.time_grid {
        let name = format!("intertwining_t={t}");
        match check_intertwining(rep, rho, semigroup(config), t, method) {
            Ok(r) => {
                table.push(vec![num(t), num(r.max_deviation), num(r.std_error.unwrap_or(0.0))]);
                out.records.push(match r.std_error {
                    Some(se) => CheckRecord::sampled(name, r.max_deviation, tol.sigmas * se, se),
                    None => CheckRecord::measured(name, r.max_deviation, tol.exact),
                });
            }
            Err(e) => out.records.push(CheckRecord::failed(name, tol.exact, e)),
        }
    }
    out.tables.push(table);
}

/// A second state, deterministic in the first one's seed.
fn partner(config: &RunConfig, rep: &Representation) -> qtomo::Result<DensityOperator> {
    let seed = match config.state {
        StateSpec::Random { seed, .. } => seed.wrapping_add(1),
        _ => 1,
    };
    if is_plane(rep) {
        random_density_embedded(rep.dim(), 3.min(rep.dim()), seed)
    } else {
        random_density(rep.dim(), seed)
    }
}

fn star(config: &RunConfig, rep: &Representation, rho: &DensityOperator, out: &mut Output) {
    let tol = &config.tolerances;
    let mut table = Table::new("star.csv", &["check", "value"]);
    let b = match partner(config, rep) {
        Ok(b) => b.into_operator(),
        Err(e) => return out.records.push(CheckRecord::failed("partner_state", 0.0, e)),
    };
    let a = rho.operator();
    let ab = a * &b;
    let fw = |x: &Operator| fw_transform(rep, x).map(|t| t.into_function());
    let checks: Vec<(&str, f64, qtomo::Result<f64>)> = if is_plane(rep) {
        let wig = |x: &Operator| wigner_transform(rep, x).map(|t| t.into_function());
        vec![
            (
                "twisted_convolution_homomorphism",
                tol.star,
                (|| twisted_convolution(&fw(a)?, &fw(&b)?, Route::Fast)?.max_abs_diff(&fw(&ab)?))(),
            ),
            (
                "twisted_product_homomorphism",
                tol.star,
                (|| twisted_product(&wig(a)?, &wig(&b)?, ProductRoute::Fourier)?.max_abs_diff(&wig(&ab)?))(),
            ),
        ]
    } else {
        vec![("finite_twisted_homomorphism", tol.exact, (|| finite_twisted(&fw(a)?, &fw(&b)?)?.max_abs_diff(&fw(&ab)?))())]
    };
    for (name, t, v) in checks {
        if let Ok(x) = &v {
            table.push(vec![name.into(), num(*x)]);
        }
        out.check(name, t, v);
    }
    out.tables.push(table);
}

fn generator(config: &RunConfig, rep: &Representation, rho: &DensityOperator, out: &mut Output) {
    let tol = &config.tolerances;
    let sg = semigroup(config).clone();
    let h = config.generator_step;
    let mut table = Table::new("generator.csv", &["check", "value"]);
    let mut record = |out: &mut Output, name: &str, t: f64, v: qtomo::Result<f64>| {
        if let Ok(x) = &v {
            table.push(vec![name.into(), num(*x)]);
        }
        out.check(name, t, v);
    };
    match &sg {
        ConvolutionSemigroup::CompoundPoisson { .. } => {
            let handle = match SemigroupHandle::new(Action::Twirl { rep: rep.clone(), method: TwirlMethod::Exact }, sg.clone()) {
                Ok(hd) => hd,
                Err(e) => return out.records.push(CheckRecord::failed("handle", 0.0, e)),
            };
            let gen = match analytic_generator(&handle) {
                Ok(g) => g,
                Err(e) => return out.records.push(CheckRecord::failed("analytic_generator", 0.0, e)),
            };
            record(out, "generator_trace_residual", tol.exact, Ok(gen.trace_residual()));
            record(out, "generator_hermiticity", tol.exact, gen.hermiticity_residual());
            let psi = Evolvable::Operator(rho.operator().clone());
            let est = estimate_generator(&handle, &psi, h)
                .and_then(|e| e.value.as_operator().expect("operator in, operator out").max_abs_diff(&gen.apply(rho.operator())?));
            record(out, "estimate_vs_analytic", tol.generator_finite, est);
            for &t in config.time_grid.iter().filter(|t| **t > 0.0) {
                let v = (|| {
                    let direct = twirl_operator(rep, rho.operator(), &sg.at(t)?, TwirlMethod::Exact)?.state;
                    gen.exp(t).apply(rho.operator())?.max_abs_diff(&direct)
                })();
                record(out, &format!("exp_vs_twirl_t={t}"), tol.matrix_exp, v);
            }
        }
        ConvolutionSemigroup::Gaussian { diffusion, .. } => {
            let sigma = *diffusion;
            let centered = ConvolutionSemigroup::Gaussian { drift: [0.0; 2], diffusion: sigma };
            let symbol = (|| {
                let f = fw_transform(rep, rho.operator())?;
                let handle = SemigroupHandle::new(Action::FwMultiply, centered.clone())?;
                let est = estimate_generator(&handle, &Evolvable::Function(f.function().clone()), h)?;
                let exact = f.multiplied(|g| C64::new(gaussian_symbol(sigma, g.coords()), 0.0));
                est.value.as_function().expect("function in, function out").max_abs_diff(&exact)
            })();
            record(out, "estimate_vs_symbol", tol.generator_plane, symbol);
            let t = config.time_grid.last().copied().filter(|t| *t > 0.0).unwrap_or(1.0);
            let heat = (|| {
                let w = wigner_transform(rep, rho.operator())?;
                let dt = 1e-3 * t;
                let at = |s: f64| wigner_convolve_step(&w, &centered, s, ConvolveRoute::Fourier);
                let ddt = at(t + dt)?.combine(C64::new(0.5 / dt, 0.0), &at(t - dt)?, C64::new(-0.5 / dt, 0.0))?;
                let rhs = diffusion_operator(&at(t)?, sigma)?;
                Ok(interior_max_diff(&ddt, &rhs))
            })();
            record(out, &format!("heat_residual_t={t}"), tol.heat, heat);
        }
    }
    out.tables.push(table);
}

fn interior_max_diff(a: &PhaseFunction, b: &PhaseFunction) -> f64 {
    let n = a.domain().side_len();
    let mut worst: f64 = 0.0;
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            worst = worst.max((a.at(i, j) - b.at(i, j)).norm());
        }
    }
    worst
}

/// Characteristic function of `mu` at `h`; on `Z_d^2` the average of the two-sided phases.
fn characteristic(ctx: &GroupContext, mu: &ProbabilityMeasure, h: &GroupElement) -> qtomo::Result<C64> {
    match mu {
        ProbabilityMeasure::Discrete(m) if *ctx != GroupContext::Plane => {
            m.iter().map(|(g, w)| temme_value(ctx, g, h).map(|z| z * w)).sum()
        }
        _ => symplectic_char(mu, h.coords()),
    }
}

/// Points of the 64 x 64 dual lattice at the representation's grid width, or the whole finite group.
fn probe_points(rep: &Representation) -> qtomo::Result<Vec<GroupElement>> {
    match rep.grid() {
        Some(grid) => {
            let coarse = PhaseGrid::new(64, grid.half_width())?;
            let xs = coarse.coords(Lattice::Dual);
            Ok(xs.iter().flat_map(|q| xs.iter().map(move |p| GroupElement::Plane(*q, *p))).collect())
        }
        None => rep.context().elements(),
    }
}

fn gram_points(rep: &Representation) -> qtomo::Result<Vec<GroupElement>> {
    if is_plane(rep) {
        Ok((0..48).map(|k| GroupElement::Plane(0.37 * (k % 7) as f64 - 1.1, 0.29 * (k / 7) as f64 - 0.9)).collect())
    } else {
        rep.context().elements()
    }
}

fn bochner(config: &RunConfig, rep: &Representation, out: &mut Output) {
    let tol = &config.tolerances;
    let ctx = rep.context();
    let sg = semigroup(config);
    let mut table = Table::new("bochner.csv", &["t", "check", "value"]);
    let (probes, grams) = match probe_points(rep).and_then(|p| Ok((p, gram_points(rep)?))) {
        Ok(x) => x,
        Err(e) => return out.records.push(CheckRecord::failed("probe_points", 0.0, e)),
    };
    for &t in &config.time_grid {
        let mu = match sg.at(t) {
            Ok(mu) => mu,
            Err(e) => {
                out.records.push(CheckRecord::failed(format!("measure_t={t}"), 0.0, e));
                continue;
            }
        };
        let origin = characteristic(&ctx, &mu, &ctx.identity()).map(|z| (z - C64::new(1.0, 0.0)).norm());
        let sup = probes
            .iter()
            .map(|h| characteristic(&ctx, &mu, h).map(|z| z.norm()))
            .try_fold(0.0f64, |acc, v| v.map(|x| acc.max(x)));
        let gram = is_positive_definite(&ctx, &grams, |h| characteristic(&ctx, &mu, h).ok()).map(|m| (-m).max(0.0));
        for (name, tolerance, v) in [
            ("normalization", 0.0, origin),
            ("excess_modulus", tol.exact, sup.map(|s| (s - 1.0).max(0.0))),
            ("gram_negativity", tol.density, gram),
        ] {
            if let Ok(x) = &v {
                table.push(vec![num(t), name.into(), num(*x)]);
            }
            out.check(format!("{name}_t={t}"), tolerance, v);
        }
    }
    out.tables.push(table);
}
