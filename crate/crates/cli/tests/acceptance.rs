//! Acceptance criteria 1-9. Each criterion is evaluated independently and
//! reported on its own PASS/FAIL line; the test fails if any criterion does.

use std::f64::consts::{LN_2, PI};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ibvp_cli::{run, Command as Cmd, LoadedConfig, Options};
use ibvp_core::certify::{
    self, AsymptoticSampling, CertifyConfig, ConditionEntry, ConditionId, ConditionStatus,
    ExtendedReal,
};
use ibvp_core::exprlang::{self, Bindings};
use ibvp_core::kernel::{GreenKernel, KernelConfig, SlCoefficients, Weight};
use ibvp_core::operator::{self, OperatorConfig};
use ibvp_core::problem::PiecewiseC1Function;
use ibvp_core::quadrature::{integrate_half_line, QuadratureConfig};
use ibvp_core::solver::{picard_solve, SolveConfig};
use ibvp_core::Side;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const SYMMETRY_TOL: f64 = 1e-12;
const DIAGONAL_TOL: f64 = 1e-12;
const DERIVATIVE_TOL: f64 = 1e-10;
const LOWER_BOUND_TOL: f64 = 1e-12;
const JUMP_TOL: f64 = 1e-10;
const KERNEL_POINTS: usize = 200;
const KERNEL_BUDGET: Duration = Duration::from_secs(5);

const CLOSED_FORM_TOL: f64 = 1e-10;
const W_TOL: f64 = 1e-9;

const PSI_TOL: f64 = 1e-8;
const POLE_TOL: f64 = 0.05;

const ODE_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-4;
const BOUNDARY_TOL: f64 = 1e-6;
const JUMP_RESIDUAL_TOL: f64 = 1e-8;
const ROUND_TRIP_BUDGET: Duration = Duration::from_secs(10);

const SOLVER_RESIDUAL: f64 = 1e-6;
const SOLVER_MAX_ITER: usize = 200;
const SOLVER_TOL: f64 = 1e-8;

const IMPULSE_Q_TOL: f64 = 1e-9;
const G_Q_TOL: f64 = 1e-6;

const RECOMPUTE_TOL: f64 = 1e-6;
const DECOMPOSITION_TOL: f64 = 1e-12;

const EXPR_TOL: f64 = 1e-6;

const SUITE_BUDGET: Duration = Duration::from_secs(60);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn load(name: &str) -> LoadedConfig {
    LoadedConfig::load(&configs_dir().join(format!("{name}.json"))).expect("bundled config loads")
}

fn exp_weight() -> Weight {
    Arc::new(|t: f64| t.exp())
}

fn kernel_sets() -> Vec<(&'static str, GreenKernel)> {
    let cfg = KernelConfig::default();
    vec![
        (
            "(1,0,1,1,e^t)",
            GreenKernel::new(SlCoefficients::new(1.0, 0.0, 1.0, 1.0), exp_weight(), &cfg).unwrap(),
        ),
        (
            "(1,1,1,1,e^t)",
            GreenKernel::new(SlCoefficients::new(1.0, 1.0, 1.0, 1.0), exp_weight(), &cfg).unwrap(),
        ),
        (
            "(2,1,3,1,(1+t)^2)",
            GreenKernel::new(
                SlCoefficients::new(2.0, 1.0, 3.0, 1.0),
                Arc::new(|t: f64| (1.0 + t) * (1.0 + t)),
                &cfg,
            )
            .unwrap(),
        ),
    ]
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = [0.0f64; 5];
    for (label, k) in kernel_sets() {
        let e = |r: Result<f64, _>| {
            r.map_err(|e: ibvp_core::kernel::KernelError| format!("{label}: {e}"))
        };
        let c = e(k.constant_c())?;
        let w = e(k.constant_w(1.0, 2.0))?;
        for _ in 0..KERNEL_POINTS {
            let t: f64 = rng.gen_range(0.0..=20.0);
            let s: f64 = rng.gen_range(0.0..=20.0);
            let g = e(k.green(t, s))?;
            let gss = e(k.green(s, s))?;
            let sym = (g - e(k.green(s, t))?).abs();
            ensure(sym <= SYMMETRY_TOL, || {
                format!("{label}: symmetry {sym:e} at ({t}, {s})")
            })?;
            let over = g - gss;
            ensure(over <= DIAGONAL_TOL, || {
                format!("{label}: G(t,s) exceeds G(s,s) by {over:e}")
            })?;
            for side in [Side::Left, Side::Right] {
                let gt = e(k.green_dt(t, s, side))?.abs();
                let excess = gt - c / k.weight(t) * gss;
                ensure(excess <= DERIVATIVE_TOL, || {
                    format!("{label}: |G_t| bound exceeded by {excess:e}")
                })?;
                worst[2] = worst[2].max(excess);
            }
            let tw: f64 = rng.gen_range(1.0..=2.0);
            let deficit = w * gss - e(k.green(tw, s))?;
            ensure(deficit <= LOWER_BOUND_TOL, || {
                format!("{label}: lower bound violated by {deficit:e}")
            })?;
            let jump = e(k.green_dt(s, s, Side::Right))? - e(k.green_dt(s, s, Side::Left))?;
            let dev = (k.weight(s) * jump.abs() - 1.0).abs();
            ensure(dev <= JUMP_TOL, || {
                format!("{label}: p|jump| - 1 = {dev:e} at s = {s}")
            })?;
            worst[0] = worst[0].max(sym);
            worst[1] = worst[1].max(over);
            worst[3] = worst[3].max(deficit);
            worst[4] = worst[4].max(dev);
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < KERNEL_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "3 sets x {KERNEL_POINTS} points; worst symmetry {:.1e}, jump deviation {:.1e}; {elapsed:.2?}",
        worst[0], worst[4]
    ))
}

fn criterion_2() -> Outcome {
    let k = &kernel_sets()[0].1;
    let e = |r: Result<f64, ibvp_core::kernel::KernelError>| r.map_err(|e| e.to_string());
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let t = 10.0 * i as f64 / 49.0;
        let dev = (e(k.theta(t))? - (2.0 - (-t).exp())).abs();
        worst = worst.max(dev);
        ensure(dev <= CLOSED_FORM_TOL, || {
            format!("theta({t}) off by {dev:e}")
        })?;
        let phi = e(k.phi(t))?;
        ensure(phi == 1.0, || format!("phi({t}) = {phi:e}, not exactly 1"))?;
    }
    let d = k.coupling_d();
    ensure((d - 1.0).abs() <= CLOSED_FORM_TOL, || format!("D = {d}"))?;
    let g12 = e(k.green(1.0, 2.0))?;
    let g12_exact = 2.0 - (-1f64).exp();
    ensure((g12 - g12_exact).abs() <= CLOSED_FORM_TOL, || {
        format!("G(1,2) = {g12}")
    })?;
    let c = e(k.constant_c())?;
    ensure((c - 1.0).abs() <= CLOSED_FORM_TOL, || format!("c = {c}"))?;
    let w = e(k.constant_w(1.0, 2.0))?;
    let w_exact = (2.0 - (-1f64).exp()) / 2.0;
    ensure((w - w_exact).abs() <= W_TOL, || {
        format!("w = {w}, expected {w_exact}")
    })?;
    Ok(format!(
        "theta worst {worst:.1e}; D = {d}; c = {c}; w = {w:.10}"
    ))
}

fn criterion_3() -> Outcome {
    let cfg = QuadratureConfig::default();
    let psi = integrate_half_line(|s| 1.0 / (1.0 + s * s), &[], &cfg).map_err(|e| e.to_string())?;
    let dev = (psi.value - PI / 2.0).abs();
    ensure(psi.converged && dev <= PSI_TOL, || {
        format!("psi integral off by {dev:e}")
    })?;

    let pole = integrate_half_line(|s| (2.0 - (-s).exp()) / (s.exp() - 2.0), &[], &cfg)
        .map_err(|e| e.to_string())?;
    ensure(!pole.converged, || {
        format!("pole integrand reported converged ({})", pole.value)
    })?;
    let hint = pole.divergence_hint.ok_or("no divergence hint")?;
    ensure((hint - LN_2).abs() <= POLE_TOL, || {
        format!("divergence hint {hint}, ln 2 = {LN_2}")
    })?;

    let report = run(&load("example_sec4"), Cmd::Validate, &Options::default())
        .map_err(|e| e.to_string())?;
    let json = report.json().ok_or("validate produced no JSON")?;
    let h7 = json["result"]["hypotheses"]
        .as_array()
        .and_then(|a| a.iter().find(|e| e["hypothesis"] == "H7"))
        .ok_or("no H7 entry")?;
    ensure(h7["status"] == "divergent", || {
        format!("H7 status {}", h7["status"])
    })?;
    let check = &json["result"]["reference_checks"][0];
    ensure(
        check["hypothesis"] == "H7" && check["reproduced"] == false,
        || format!("reference check {check}"),
    )?;
    let note = check["note"].as_str().unwrap_or_default();
    ensure(note.contains("not reproduced"), || format!("note: {note}"))?;
    Ok(format!(
        "psi integral error {dev:.1e}; pole hint {hint:.6}; stated H7 = 1 reported as not reproduced"
    ))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let cfg = load("constant_map");
    let spec = cfg.problem().map_err(|e| e.to_string())?;
    let kernel = spec
        .kernel(&KernelConfig::default())
        .map_err(|e| e.to_string())?;
    let scfg = SolveConfig {
        damping: 1.0,
        ..SolveConfig::default()
    };
    let mesh = spec.mesh(&scfg.mesh).map_err(|e| e.to_string())?;
    let r = picard_solve(
        &spec,
        &kernel,
        PiecewiseC1Function::constant(mesh.clone(), 1.0),
        &scfg,
    )
    .map_err(|e| e.to_string())?;
    ensure(r.converged, || {
        format!("not converged, residual {:e}", r.residual)
    })?;
    let x = &r.solution;

    let probes: Vec<f64> = mesh.panels().iter().map(|p| 0.5 * (p.a + p.b)).collect();
    let ode = operator::ode_residual(&spec, x, &probes, FD_STEP).map_err(|e| e.to_string())?;
    let ode_max = ode.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ensure(ode_max <= ODE_TOL, || format!("ODE residual {ode_max:e}"))?;

    let (bl, br) =
        operator::boundary_residuals(&spec, &kernel, x, &OperatorConfig::default().quadrature)
            .map_err(|e| e.to_string())?;
    ensure(bl.abs() <= BOUNDARY_TOL && br.abs() <= BOUNDARY_TOL, || {
        format!("boundary residuals {bl:e}, {br:e}")
    })?;
    let jumps = operator::jump_residuals(&spec, x).map_err(|e| e.to_string())?;
    ensure(!jumps.is_empty(), || "no impulse".into())?;
    for &(dj, ds) in &jumps {
        ensure(dj <= JUMP_RESIDUAL_TOL && ds <= JUMP_RESIDUAL_TOL, || {
            format!("jump residuals {dj:e}, {ds:e}")
        })?;
    }

    // Δ(Tx)' = −Ī_k, read directly off the operator image of the iterate.
    let image = operator::apply_t(&spec, &kernel, x, &OperatorConfig::default())
        .map_err(|e| e.to_string())?
        .tx;
    let mut slope_dev: f64 = 0.0;
    for imp in spec.impulses.iter() {
        let left = image
            .eval(imp.time, Side::Left)
            .map_err(|e| e.to_string())?;
        let right = image
            .eval(imp.time, Side::Right)
            .map_err(|e| e.to_string())?;
        let dev =
            ((right.1 - left.1) + (imp.slope_jump)(x.eval(imp.time, Side::Left).unwrap().0)).abs();
        slope_dev = slope_dev.max(dev);
    }
    ensure(slope_dev <= JUMP_RESIDUAL_TOL, || {
        format!("Δ(Tx)' + Ī = {slope_dev:e}")
    })?;
    let elapsed = start.elapsed();
    ensure(elapsed < ROUND_TRIP_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "ODE {ode_max:.1e}; boundary {:.1e}; jumps {:.1e}; slope jump sign {slope_dev:.1e}; {elapsed:.2?}",
        bl.abs().max(br.abs()),
        jumps.iter().fold(0.0f64, |m, j| m.max(j.0).max(j.1))
    ))
}

fn criterion_5() -> Outcome {
    let cfg = load("contraction_corpus");
    let spec = cfg.problem().map_err(|e| e.to_string())?;
    let kernel = spec
        .kernel(&KernelConfig::default())
        .map_err(|e| e.to_string())?;
    let mut solutions = Vec::new();
    let mut iterations = Vec::new();
    for beta in [0.3, 0.5, 1.0] {
        let scfg = SolveConfig {
            damping: beta,
            tol: SOLVER_TOL,
            max_iter: SOLVER_MAX_ITER,
            ..SolveConfig::default()
        };
        let mesh = spec.mesh(&scfg.mesh).map_err(|e| e.to_string())?;
        let r = picard_solve(
            &spec,
            &kernel,
            PiecewiseC1Function::constant(mesh, 1.0),
            &scfg,
        )
        .map_err(|e| e.to_string())?;
        ensure(r.converged && r.residual <= SOLVER_RESIDUAL, || {
            format!(
                "beta {beta}: converged {} residual {:e}",
                r.converged, r.residual
            )
        })?;
        ensure(r.iterations <= SOLVER_MAX_ITER, || {
            format!("beta {beta}: {} iterations", r.iterations)
        })?;
        ensure(r.positivity_certified, || {
            format!("beta {beta}: positivity not certified")
        })?;
        iterations.push(r.iterations);
        solutions.push(r.solution);
    }
    let mut gap: f64 = 0.0;
    for i in 0..solutions.len() {
        for j in i + 1..solutions.len() {
            let d = solutions[i]
                .linear_combination(1.0, &solutions[j], -1.0)
                .map_err(|e| e.to_string())?
                .bpc1_norm();
            gap = gap.max(d);
        }
    }
    ensure(gap <= 10.0 * SOLVER_TOL, || {
        format!("solutions differ by {gap:e}")
    })?;
    Ok(format!(
        "iterations {iterations:?}; largest pairwise gap {gap:.1e}"
    ))
}

fn worked_example_constants() -> Result<certify::AsymptoticConstants, String> {
    let cfg = load("example_sec4");
    let spec = cfg.problem().map_err(|e| e.to_string())?;
    certify::estimate_asymptotics(
        &spec,
        (1.0, 2.0),
        10.0,
        &AsymptoticSampling::default(),
        &Default::default(),
    )
    .map_err(|e| e.to_string())
}

fn criterion_6() -> Outcome {
    let c = worked_example_constants()?;
    let value = |name: &str| {
        c.by_name(name)
            .and_then(|e| e.value)
            .ok_or_else(|| format!("{name} not estimated"))
    };
    let finite = |name: &str| {
        value(name)?
            .finite()
            .ok_or_else(|| format!("{name} is infinite"))
    };
    let iq = finite("I^q(1)")?;
    ensure((iq - 0.01).abs() <= IMPULSE_Q_TOL, || {
        format!("I^q(1) = {iq}")
    })?;
    let g1q = finite("g1^q")?;
    ensure((g1q - 1.0 / (4.0 * PI)).abs() <= G_Q_TOL, || {
        format!("g1^q = {g1q}")
    })?;
    let g2q = finite("g2^q")?;
    ensure((g2q - 1.0 / (8.0 * PI)).abs() <= G_Q_TOL, || {
        format!("g2^q = {g2q}")
    })?;
    ensure(value("g1_0")? == ExtendedReal::ZERO, || {
        "g1_0 is not 0".into()
    })?;
    ensure(value("g1_inf")?.is_infinite(), || {
        "g1_inf is not +inf".into()
    })?;
    ensure(value("Ibar_0(1)")?.is_infinite(), || {
        "Ibar_0(1) is not +inf".into()
    })?;

    let report =
        run(&load("example_sec4"), Cmd::Certify, &Options::default()).map_err(|e| e.to_string())?;
    let json = report.json().ok_or("certify produced no JSON")?;
    let discrepancies = json["result"]["discrepancies"]
        .as_array()
        .ok_or("no discrepancies")?;
    let flag = |name: &str| {
        discrepancies
            .iter()
            .find(|d| d["name"] == name)
            .map(|d| {
                (
                    d["agrees"] == false && !d["estimate"].is_null(),
                    d["estimate"].clone(),
                )
            })
            .ok_or_else(|| format!("{name} not compared"))
    };
    let (f_flag, f_est) = flag("f_inf")?;
    let (ib_flag, ib_est) = flag("Ibar^q(1)")?;
    ensure(f_flag && ib_flag, || {
        format!("discrepancy flags f_inf {f_flag}, Ibar^q(1) {ib_flag}")
    })?;
    Ok(format!(
        "I^q = {iq}; g1^q = {g1q:.9}; g2^q = {g2q:.9}; f_inf estimate {f_est} and Ibar^q(1) estimate {ib_est} flagged against stated values"
    ))
}

/// `lhs == prefactor · Σ terms` and `term == Π factors`, for finite values.
fn decomposition_error(entry: &ConditionEntry) -> Result<f64, String> {
    let lhs = match entry.lhs {
        Some(ExtendedReal::Finite(v)) => v,
        _ => return Ok(0.0),
    };
    let pre = entry
        .prefactor
        .quantity
        .value()
        .and_then(|v| v.finite())
        .ok_or("prefactor not finite")?;
    let mut sum = 0.0;
    let mut worst: f64 = 0.0;
    for t in &entry.terms {
        let tv = t.value.and_then(|v| v.finite()).ok_or("term not finite")?;
        let mut prod = 1.0;
        for f in &t.factors {
            prod *= f
                .quantity
                .value()
                .and_then(|v| v.finite())
                .ok_or("factor not finite")?;
        }
        worst = worst.max((prod - tv).abs() / tv.abs().max(1.0));
        sum += tv;
    }
    Ok(worst.max((pre * sum - lhs).abs() / lhs.abs().max(1.0)))
}

fn corpus_a2(quad: QuadratureConfig) -> Result<(f64, f64), String> {
    let cfg = load("contraction_corpus");
    let spec = cfg.problem().map_err(|e| e.to_string())?;
    let kcfg = KernelConfig::default();
    let kernel = spec.kernel(&kcfg).map_err(|e| e.to_string())?;
    let ccfg = CertifyConfig {
        quadrature: quad,
        ..CertifyConfig::default()
    };
    let constants = certify::estimate_asymptotics(
        &spec,
        ccfg.window,
        ccfg.q,
        &ccfg.sampling,
        &Default::default(),
    )
    .map_err(|e| e.to_string())?;
    let report = certify::certify(&spec, &kernel, &constants, &ccfg).map_err(|e| e.to_string())?;
    let a2 = report.get(ConditionId::A2);
    let lhs = a2
        .lhs
        .and_then(|v| v.finite())
        .ok_or_else(|| format!("A2 LHS {:?}", a2.lhs))?;
    let mut worst: f64 = 0.0;
    for c in &report.conditions {
        worst = worst.max(decomposition_error(c)?);
    }
    Ok((lhs, worst))
}

fn criterion_7() -> Outcome {
    let cfg = load("example_sec4");
    let spec = cfg.problem().map_err(|e| e.to_string())?;
    let kernel = spec
        .kernel(&KernelConfig::default())
        .map_err(|e| e.to_string())?;
    let constants = worked_example_constants()?;
    let report = certify::certify(&spec, &kernel, &constants, &CertifyConfig::default())
        .map_err(|e| e.to_string())?;
    let a1 = report.get(ConditionId::A1Small);
    ensure(
        a1.passed() && a1.lhs == Some(ExtendedReal::PosInfinity),
        || format!("A1-small {:?} lhs {:?}", a1.status, a1.lhs),
    )?;
    let a2 = report.get(ConditionId::A2);
    let reason = match &a2.status {
        ConditionStatus::Indeterminate { reason } => reason.clone(),
        other => return Err(format!("A2 on the example is {other:?}")),
    };
    ensure(reason.contains("diverges"), || {
        format!("A2 reason: {reason}")
    })?;

    let base = CertifyConfig::default().quadrature;
    let (lhs, decomposition) = corpus_a2(base.clone())?;
    let (fine, _) = corpus_a2(base.tightened(1e-2))?;
    let dev = (lhs - fine).abs();
    ensure(dev <= RECOMPUTE_TOL, || {
        format!("A2 {lhs} vs tighter {fine}")
    })?;
    ensure(decomposition <= DECOMPOSITION_TOL, || {
        format!("decomposition error {decomposition:e}")
    })?;
    Ok(format!(
        "A1-small = +inf; A2 indeterminate ({reason}); corpus A2 = {lhs:.9} (tighter: dev {dev:.1e}); decomposition {decomposition:.1e}"
    ))
}

const EXPRESSIONS: [&str; 20] = [
    "exp(-t)/(exp(t)-2)",
    "x^2/(40*pi)",
    "x^4/(8000*pi)",
    "1/(1+s^2)",
    "x/100",
    "1/((2-exp(-0.5))*x)",
    "0.25*exp(-2*t)*(1+sin(x)^2)",
    "0.01*atan(x)",
    "x/(100*(1+x))",
    "2+3*4",
    "2^3^2",
    "-2^2",
    "(1+t)^2",
    "min(x, y) + max(abs(x), sqrt(t))",
    "pow(e, -t) * cos(t)",
    "log(1 + x*x) - -y",
    "((x))",
    "1.5e-3 * t / (2 * pi)",
    "-(x - y) * -(t + 1)",
    "exp(sin(t)) ^ 2 / 3 - 4 + x",
];

fn criterion_8() -> Outcome {
    let b = Bindings {
        s: Some(0.3),
        ..Bindings::full(1.25, 0.75, -0.5)
    };
    for src in EXPRESSIONS {
        let e = exprlang::parse(src).map_err(|e| format!("{src}: {e}"))?;
        let printed = e.to_string();
        let again = exprlang::parse(&printed).map_err(|e| format!("{printed}: {e}"))?;
        ensure(e.same_structure(&again), || {
            format!("{src} -> {printed} changes structure")
        })?;
        match (e.eval(&b), again.eval(&b)) {
            (Ok(u), Ok(v)) => ensure(u.to_bits() == v.to_bits(), || format!("{src}: {u} vs {v}"))?,
            (Err(_), Err(_)) => {}
            other => return Err(format!("{src}: {other:?}")),
        }
    }
    let eval = |src: &str, b: &Bindings| {
        exprlang::parse(src)
            .unwrap()
            .eval(b)
            .map_err(|e| e.to_string())
    };
    let none = Bindings::default();
    let triple = (
        eval("2+3*4", &none)?,
        eval("2^3^2", &none)?,
        eval("-2^2", &none)?,
    );
    ensure(triple == (14.0, 512.0, -4.0), || {
        format!("precedence {triple:?}")
    })?;
    let v = eval("exp(-t)/(exp(t)-2)", &Bindings::time(1.0))?;
    ensure((v - 0.5121665).abs() <= EXPR_TOL, || format!("k(1) = {v}"))?;
    Ok(format!(
        "{} expressions round-trip; precedence {triple:?}; k(1) = {v:.7}",
        EXPRESSIONS.len()
    ))
}

fn run_binary(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ibvp"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(out.stdout)
}

fn criterion_9() -> Outcome {
    let mut compared = 0;
    for name in [
        "example_sec4",
        "contraction_corpus",
        "constant_map",
        "zero_problem",
    ] {
        let path = configs_dir().join(format!("{name}.json"));
        let path = path.to_str().ok_or("non-UTF-8 path")?;
        for cmd in ["certify", "solve"] {
            let args = [cmd, "--config", path, "--seed", "7"];
            let first = run_binary(&args)?;
            let second = run_binary(&args)?;
            ensure(first == second, || format!("{cmd} {name}: reports differ"))?;
            ensure(!first.is_empty(), || format!("{cmd} {name}: empty report"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} report pairs byte-identical"))
}

#[test]
fn acceptance_criteria() {
    let start = Instant::now();
    let criteria: [Criterion; 9] = [
        ("kernel property suite", criterion_1),
        ("closed forms of the exponential-weight kernel", criterion_2),
        (
            "quadrature and the non-integrable H7 integrand",
            criterion_3,
        ),
        (
            "integral-equation round trip on the constant map",
            criterion_4,
        ),
        ("solver on the contraction corpus", criterion_5),
        ("asymptotic constants of the worked example", criterion_6),
        ("condition checker", criterion_7),
        ("expression language", criterion_8),
        ("end-to-end determinism", criterion_9),
    ];
    let mut failed = Vec::new();
    let mut stderr = std::io::stderr();
    for (i, (label, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        let line = match f() {
            Ok(detail) => format!("criterion {n} PASS {label}: {detail}"),
            Err(why) => {
                failed.push(n);
                format!("criterion {n} FAIL {label}: {why}")
            }
        };
        // written to the raw handle so the lines survive output capture
        let _ = writeln!(stderr, "{line}");
    }
    let elapsed = start.elapsed();
    let _ = writeln!(stderr, "acceptance suite finished in {elapsed:.2?}");
    assert!(elapsed < SUITE_BUDGET, "acceptance suite took {elapsed:?}");
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
