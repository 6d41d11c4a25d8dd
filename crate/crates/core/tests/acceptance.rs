//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::f64::consts::FRAC_PI_2;
use std::process::ExitCode;
use std::time::Instant;

use pmelab_core::barenblatt::{normalize, BarenblattProfile};
use pmelab_core::estimates::{
    barenblatt_lq_integral, caccioppoli_check, cauchy_estimates_report, log_log_fit, oleinik_defect,
};
use pmelab_core::harness::{barenblatt_sweep, fit_rate, run_dirichlet_sweep, NormRequest, ProblemTemplate, SweepSpec};
use pmelab_core::inequalities::{fuzz_monotonicity, fuzz_power_difference, fuzz_power_gap};
use pmelab_core::mollify::{mollify, time_derivative_identity_defect};
use pmelab_core::solver::{
    constant_data, solve_cauchy, solve_dirichlet, CauchyProblem, DiracApproximation, DirichletProblem, SolverConfig,
};
use pmelab_core::trajectory::{constant_boundary, Trajectory};
use pmelab_core::{make_exponent, Field, IntervalGrid, Mesh, RadialGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Cauchy runs shared by several criteria.
struct CauchyRun {
    label: String,
    problem: CauchyProblem,
    traj: Trajectory,
}

fn barenblatt_run(m: f64, n: usize, r_max: f64, cells: usize, dt: f64, t0: f64, t1: f64) -> Result<CauchyRun, String> {
    let e = make_exponent(m, n).map_err(err)?;
    let grid = RadialGrid::new(n, r_max, cells).map_err(err)?;
    let problem =
        CauchyProblem::new(e, grid, 1.0, DiracApproximation::Barenblatt { start_time: t0 }, t1, 1e-10).map_err(err)?;
    let traj = solve_cauchy(&problem, &SolverConfig::with_dt(dt)).map_err(err)?;
    Ok(CauchyRun {
        label: format!("m={m} n={n} cells={cells}"),
        problem,
        traj,
    })
}

fn l1_error(run: &CauchyRun, profile: &BarenblattProfile) -> f64 {
    let mesh = &run.traj.mesh;
    let exact = profile.cell_averages(mesh, run.traj.final_time());
    let diff: Vec<f64> = run.traj.final_field().iter().zip(exact.iter()).map(|(a, b)| (a - b).abs()).collect();
    mesh.integrate(&diff).expect("matching mesh")
}

fn bump_problem(m: f64, cells: usize, final_time: f64) -> DirichletProblem {
    let mesh = Mesh::from(IntervalGrid::new(-1.0, 1.0, cells).unwrap());
    let initial = mesh.sample(|x| (FRAC_PI_2 * x).cos());
    DirichletProblem::new(make_exponent(m, 1).unwrap(), mesh, final_time, constant_data(0.0), initial).unwrap()
}

fn c1() -> Outcome {
    let mut cases: Vec<(f64, usize)> = Vec::new();
    for m in [1.5, 2.0, 3.0] {
        for n in [1, 2, 3] {
            cases.push((m, n));
        }
    }
    cases.push((0.6, 3));
    cases.push((0.8, 3));
    let mut worst = 0.0f64;
    for (m, n) in cases {
        let p = normalize(make_exponent(m, n).map_err(err)?).map_err(err)?;
        for t in [0.5, 1.0, 2.0, 4.0] {
            worst = worst.max((p.mass(t) - 1.0).abs());
        }
    }
    check(worst <= 1e-6, format!("max |mass - 1| = {worst:.3e}"))
}

fn c2(runs: &mut Vec<CauchyRun>) -> Outcome {
    let profile = normalize(make_exponent(2.0, 1).map_err(err)?).map_err(err)?;
    let coarse = barenblatt_run(2.0, 1, 3.0, 1536, 1.0 / 2048.0, 0.5, 1.0)?;
    let fine = barenblatt_run(2.0, 1, 3.0, 2172, 1.0 / 4096.0, 0.5, 1.0)?;
    let (e1, e2) = (l1_error(&coarse, &profile), l1_error(&fine, &profile));
    runs.push(coarse);
    runs.push(fine);
    let ratio = e1 / e2;
    check(
        e1 <= 0.01 && (1.6..=2.6).contains(&ratio),
        format!("L1 error {e1:.3e} (limit 1e-2), refinement ratio {ratio:.3}"),
    )
}

fn c3(runs: &[CauchyRun]) -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for run in runs {
        let masses = run.traj.masses();
        let mu = run.problem.mass;
        let max_ratio = masses.iter().fold(0.0f64, |a, m| a.max(m / mu));
        // allowance for summation roundoff on conserved steps
        let increasing = masses.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-13));
        ok &= max_ratio <= 1.0 + 1e-8 && !increasing;
        detail.push(format!("{}: max mass/|mu| - 1 = {:.1e}", run.label, max_ratio - 1.0));
    }
    check(ok, detail.join("; "))
}

fn c4(runs: &mut Vec<CauchyRun>) -> Outcome {
    let e = make_exponent(2.0, 1).map_err(err)?;
    let profile = normalize(e).map_err(err)?;
    let times: Vec<f64> = (0..=30).map(|k| 0.5 * 8f64.powf(k as f64 / 30.0)).collect();
    let sups: Vec<f64> = times.iter().map(|&t| profile.max_value(t)).collect();
    let (closed, _) = log_log_fit(&times, &sups).map_err(err)?;
    let run = barenblatt_run(2.0, 1, 5.0, 1000, 1.0 / 256.0, 0.5, 4.0)?;
    let reports = cauchy_estimates_report(&run.traj, &run.problem, 4.0, 1.9).map_err(err)?;
    let fitted = reports.smoothing.meta("fitted_slope").unwrap_or(f64::NAN);
    runs.push(run);
    let target = -1.0 / 3.0;
    check(
        (closed - target).abs() <= 1e-12 && (fitted - target).abs() <= 0.02,
        format!("closed-form slope {closed:.15}, solver slope {fitted:.5} (target -1/3)"),
    )
}

fn c5() -> Outcome {
    let e = make_exponent(2.0, 1).map_err(err)?;
    let p = normalize(e).map_err(err)?;
    let limit = pmelab_core::estimates::lq_limit(2.0, 1);
    let q = 0.95 * limit;
    let expected = -(1.0 / 3.0) * (2.0 * q - 1.0) + 1.0;
    let big_t = [1.0, 2.0, 4.0, 8.0];
    let values: Vec<f64> = big_t.iter().map(|&t| barenblatt_lq_integral(&p, q, 10.0, 1e-200, t)).collect();
    let (slope, _) = log_log_fit(&big_t, &values).map_err(err)?;
    let finite = values.iter().all(|v| v.is_finite() && *v > 0.0);
    let q_bad = 1.05 * limit;
    let t_mins = [1e-10, 1e-20, 1e-40, 1e-80];
    let probe: Vec<f64> = t_mins.iter().map(|&t| barenblatt_lq_integral(&p, q_bad, 10.0, t, 1.0)).collect();
    let growing = probe.windows(2).all(|w| w[1] > 1.5 * w[0]);
    check(
        finite && ((slope - expected) / expected).abs() <= 0.05 && growing,
        format!(
            "T-exponent {slope:.5} vs {expected:.5}; q=1.05*limit integrals {:.3e} -> {:.3e} as t_min 1e-10 -> 1e-80",
            probe[0], probe[3]
        ),
    )
}

fn dirichlet_rate_spec() -> SweepSpec {
    let deltas = vec![0.0, 0.2, -0.2, 0.1, -0.1, 0.05, -0.05, 0.025, -0.025];
    SweepSpec {
        target_m: 2.0,
        deltas,
        template: ProblemTemplate::Dirichlet(bump_problem(2.0, 200, 1.0)),
        norms: vec![NormRequest { q: 3.0, s: 2.0 }],
        config: SolverConfig::with_dt(1e-3),
        refine: 2,
        rate_branch: true,
    }
}

fn c6_c7() -> (Outcome, Outcome) {
    let result = match run_dirichlet_sweep(&dirichlet_rate_spec()) {
        Ok(r) => r,
        Err(e) => return (Err(err(&e)), Err(err(e))),
    };
    let err_of = |d: f64| {
        result
            .rows
            .iter()
            .find(|r| r.delta == d)
            .and_then(|r| r.fine.as_ref())
            .map_or(f64::NAN, |f| f.error_lq[0])
    };
    let control = err_of(0.0);
    let mut monotone = true;
    for sign in [1.0, -1.0] {
        let e: Vec<f64> = [0.2, 0.1, 0.05, 0.025].iter().map(|d| err_of(sign * d)).collect();
        monotone &= e.windows(2).all(|w| w[1] < w[0]);
    }
    let all_accepted = result.rows.iter().all(|r| r.accepted);
    let c6 = check(
        monotone && control <= 1e-9 && all_accepted,
        format!(
            "L3 errors {:.3e} (|d|=0.2) .. {:.3e} (|d|=0.025), control {control:.1e}, resolutions agree: {all_accepted}",
            err_of(0.2),
            err_of(0.025)
        ),
    );
    let c7 = match fit_rate(&result, 0.5) {
        Ok(fit) => {
            let spread = fit.constant / fit.constant_min;
            check(
                spread < 3.0 && fit.order >= 0.4,
                format!(
                    "realized e/|d|^(1/2) in [{:.4}, {:.4}] (spread {spread:.3}), fitted order {:.3}",
                    fit.constant_min, fit.constant, fit.order
                ),
            )
        }
        Err(e) => Err(err(e)),
    };
    (c6, c7)
}

fn c8() -> Outcome {
    let e = make_exponent(2.0, 1).map_err(err)?;
    let grid = RadialGrid::new(1, 5.0, 20000).map_err(err)?;
    let mut ok = true;
    let mut detail = Vec::new();
    for sign in [1.0, -1.0] {
        let deltas: Vec<f64> = [0.2, 0.1, 0.05, 0.025].iter().map(|d| sign * d).collect();
        let d = barenblatt_sweep(e, &deltas, 1.0, 1.0, &grid).map_err(err)?;
        for w in d.windows(2) {
            ok &= w[1].1 < w[0].1 && w[1].1 <= 0.55 * w[0].1;
            detail.push(format!("{:.3}", w[1].1 / w[0].1));
        }
    }
    check(ok, format!("successive distance ratios {}", detail.join(", ")))
}

fn c9(runs: &[CauchyRun]) -> Outcome {
    const SAMPLES: usize = 100_000;
    const SEED: u64 = 20240611;
    let reports = [
        fuzz_power_gap(SAMPLES, SEED),
        fuzz_monotonicity(SAMPLES, SEED + 1),
        fuzz_power_difference(SAMPLES, SEED + 2),
    ];
    let violations: usize = reports.iter().map(|r| r.violations).sum();
    let mut worst_cacc = 0.0f64;
    for m in [1.8, 2.0, 2.2] {
        let tr = solve_dirichlet(&bump_problem(m, 200, 1.0), &SolverConfig::with_dt(1e-3)).map_err(err)?;
        worst_cacc = worst_cacc.max(caccioppoli_check(&tr, 0.9, 0.0).map_err(err)?.realized_constant);
    }
    for run in runs {
        let r = 0.9 * run.problem.grid.r_max();
        worst_cacc = worst_cacc.max(caccioppoli_check(&run.traj, r, 0.0).map_err(err)?.realized_constant);
    }
    let worst: Vec<String> = reports.iter().map(|r| format!("{} {:.4}", r.name, r.worst_realized)).collect();
    check(
        violations == 0 && worst_cacc <= 1.0,
        format!(
            "{violations} violations in 3x{SAMPLES} samples ({}); Caccioppoli lhs/rhs <= {worst_cacc:.3e}",
            worst.join(", ")
        ),
    )
}

fn c10() -> Outcome {
    let p = bump_problem(2.0, 100, 1.0);
    let cfg = SolverConfig::with_dt(1e-3);
    let u = solve_dirichlet(&p, &cfg).map_err(err)?;
    let deltas = [0.2, 0.1, 0.05, 0.025];
    let mut lhs = Vec::new();
    let mut within = true;
    for &d in &deltas {
        let r = oleinik_defect(&u, d, &p, &cfg).map_err(err)?;
        within &= r.holds_with(r.meta("stated_constant").unwrap_or(f64::NAN));
        lhs.push(r.lhs);
    }
    let (order, _) = log_log_fit(&deltas, &lhs).map_err(err)?;
    check(order >= 0.9 && within, format!("pairing order {order:.3}, within stated bound: {within}"))
}

fn c11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let cells = rng.gen_range(2..8);
        let steps = rng.gen_range(2..12);
        let mut t = 0.0;
        let mut times = vec![t];
        for _ in 0..steps {
            t += rng.gen_range(0.01..0.5);
            times.push(t);
        }
        let fields = (0..=steps)
            .map(|_| Field::new((0..cells).map(|_| rng.gen_range(0.0..5.0)).collect()))
            .collect();
        let mesh = Mesh::from(IntervalGrid::new(0.0, 1.0, cells).map_err(err)?);
        let tr = Trajectory::from_levels(make_exponent(2.0, 1).map_err(err)?, mesh, times, fields, constant_boundary(0.0))
            .map_err(err)?;
        let mt = mollify(&tr, rng.gen_range(0.01..2.0)).map_err(err)?;
        for p in [1.0, 2.0, f64::INFINITY] {
            let (u, us, _) = mt.norms(p);
            worst = worst.max(us / u);
        }
    }
    let smooth = |steps: usize| {
        let mesh = Mesh::from(IntervalGrid::new(0.0, 1.0, 4).unwrap());
        let centers = mesh.centers();
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
        let fields = times
            .iter()
            .map(|&t| Field::new(centers.iter().map(|&x| 1.0 + x * x + (2.0 * t).sin()).collect()))
            .collect();
        let tr = Trajectory::from_levels(make_exponent(2.0, 1).unwrap(), mesh, times, fields, constant_boundary(0.0))
            .unwrap();
        time_derivative_identity_defect(&mollify(&tr, 0.2).unwrap())
    };
    let order = (smooth(100) / smooth(200)).log2();
    check(
        worst <= 1.0 + 1e-12 && order >= 1.9,
        format!("max ||u*||/||u|| = {worst:.15}, identity defect order {order:.3}"),
    )
}

fn c12() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = f64::NEG_INFINITY;
    let mesh = Mesh::from(IntervalGrid::new(-1.0, 1.0, 60).map_err(err)?);
    let cfg = SolverConfig::with_dt(0.01);
    for pair in 0..50 {
        let m = [0.7, 1.0, 2.0][pair % 3];
        let e = make_exponent(m, 1).map_err(err)?;
        let bumps: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| (rng.gen_range(0.0..2.0), rng.gen_range(-0.8..0.8), rng.gen_range(0.05..0.4)))
            .collect();
        let extra: Vec<(f64, f64, f64)> = (0..2)
            .map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(-0.8..0.8), rng.gen_range(0.05..0.4)))
            .collect();
        let eval = |b: &[(f64, f64, f64)], x: f64| -> f64 {
            b.iter().map(|(a, c, w)| a * (-(x - c).powi(2) / (w * w)).exp()).sum()
        };
        let ua = mesh.sample(|x| eval(&bumps, x));
        let ub = mesh.sample(|x| eval(&bumps, x) + eval(&extra, x));
        let ga = rng.gen_range(0.0..0.5);
        let gb = ga + rng.gen_range(0.0..0.5);
        let pa = DirichletProblem::new(e, mesh.clone(), 0.5, constant_boundary(ga), ua).map_err(err)?;
        let pb = DirichletProblem::new(e, mesh.clone(), 0.5, constant_boundary(gb), ub).map_err(err)?;
        let (a, b) = (solve_dirichlet(&pa, &cfg).map_err(err)?, solve_dirichlet(&pb, &cfg).map_err(err)?);
        for (fa, fb) in a.fields.iter().zip(&b.fields) {
            for (x, y) in fa.iter().zip(fb.iter()) {
                worst = worst.max(x - y);
            }
        }
    }
    check(worst <= 1e-8, format!("max (u_a - u_b) = {worst:.3e} over 50 pairs"))
}

fn main() -> ExitCode {
    let mut cauchy_runs = Vec::new();
    let mut results: Vec<(&str, Outcome, f64)> = Vec::new();
    let mut timed = |name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{tag} {name} ({secs:.1}s): {detail}");
        results.push((name, outcome, secs));
    };
    timed("C1 barenblatt mass invariance", &mut c1);
    timed("C2 barenblatt solution oracle", &mut || c2(&mut cauchy_runs));
    timed("C4 smoothing exponent", &mut || c4(&mut cauchy_runs));
    timed("C3 L1 contraction", &mut || {
        for (m, n, r_max) in [(1.0, 1, 8.0), (1.5, 2, 4.0), (3.0, 3, 4.0)] {
            cauchy_runs.push(barenblatt_run(m, n, r_max, 400, 0.01, 0.5, 2.0)?);
        }
        c3(&cauchy_runs)
    });
    timed("C5 Lq bound up to t = 0", &mut c5);
    let mut pair = None;
    timed("C6 Dirichlet stability", &mut || {
        let (a, b) = c6_c7();
        pair = Some(b);
        a
    });
    timed("C7 quantitative rate", &mut || pair.take().expect("computed with C6"));
    timed("C8 barenblatt m-continuity", &mut c8);
    timed("C9 scalar lemmas and Caccioppoli", &mut || c9(&cauchy_runs));
    timed("C10 Oleinik defect", &mut c10);
    timed("C11 mollification", &mut c11);
    timed("C12 comparison principle", &mut c12);
    let failed = results.iter().filter(|r| r.1.is_err()).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
