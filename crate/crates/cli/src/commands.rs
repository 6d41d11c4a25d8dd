//! Command execution: build the problem, run it, emit CSV and a summary.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use pmelab_core::barenblatt::normalize;
use pmelab_core::estimates::{
    caccioppoli_check, cauchy_estimates_report, energy_estimate_report, local_sup_bound_report, oleinik_defect,
    sobolev_check, EstimateReport,
};
use pmelab_core::harness::{
    fit_rate, run_cauchy_sweep, run_dirichlet_sweep, NormRequest, ProblemTemplate, RowStatus, SweepResult, SweepSpec,
};
use pmelab_core::inequalities::{fuzz_monotonicity, fuzz_power_difference, fuzz_power_gap};
use pmelab_core::solver::{
    constant_data, solve_cauchy, solve_dirichlet, CauchyProblem, DiracApproximation, DirichletProblem, SolverConfig,
};
use pmelab_core::trajectory::Trajectory;
use pmelab_core::{make_exponent, IntervalGrid, Mesh, RadialGrid};

use crate::config::{CauchyParams, Command, DirichletParams, InitialShape, RunConfig, SweepParams};
use crate::output::{emit_csv, float, ESTIMATE_HEADER, LEMMA_HEADER, SWEEP_HEADER};
use crate::CliError;

/// Outcome of a command: summary lines for the terminal and the checks that
/// failed (consulted in `--assert` mode).
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Report {
    pub rows: usize,
    pub summary: Vec<String>,
    pub failures: Vec<String>,
}

/// Run `cfg`, writing its CSV to `output`.
pub fn execute(cfg: &RunConfig, output: &Path) -> Result<Report, CliError> {
    match cfg.command {
        Command::Barenblatt => barenblatt(cfg, output),
        Command::SolveDirichlet => {
            let p = dirichlet_problem(cfg.dirichlet.as_ref().expect("validated"))?;
            let tr = solve_dirichlet(&p, cfg.solver.as_ref().expect("validated"))?;
            trajectory_csv(&tr, output, "x")
        }
        Command::SolveCauchy => {
            let p = cauchy_problem(cfg.cauchy.as_ref().expect("validated"))?;
            let tr = solve_cauchy(&p, cfg.solver.as_ref().expect("validated"))?;
            let mut report = trajectory_csv(&tr, output, "r")?;
            report.summary.push(format!(
                "outermost cell peaked at {:e}{}",
                tr.boundary_cell_max,
                if tr.truncation_warning {
                    " (above the truncation tolerance)"
                } else {
                    ""
                }
            ));
            Ok(report)
        }
        Command::SweepDirichlet => {
            let template = ProblemTemplate::Dirichlet(dirichlet_problem(cfg.dirichlet.as_ref().expect("validated"))?);
            let spec = sweep_spec(cfg, template, cfg.dirichlet.as_ref().expect("validated").m)?;
            sweep(&run_dirichlet_sweep(&spec)?, output)
        }
        Command::SweepCauchy => {
            let params = cfg.cauchy.as_ref().expect("validated");
            let window = cfg.sweep.as_ref().and_then(|s| s.window).expect("validated");
            let template = ProblemTemplate::Cauchy {
                problem: cauchy_problem(params)?,
                window,
            };
            let spec = sweep_spec(cfg, template, params.m)?;
            sweep(&run_cauchy_sweep(&spec)?, output)
        }
        Command::CheckEstimates => estimates(cfg, output),
        Command::CheckLemmas => lemmas(cfg, output),
    }
}

fn barenblatt(cfg: &RunConfig, output: &Path) -> Result<Report, CliError> {
    let p = cfg.barenblatt.as_ref().expect("validated");
    let profile = normalize(make_exponent(p.m, p.n)?)?;
    let r_max = p
        .r_max
        .unwrap_or_else(|| profile.support_radius(p.t).map_or(10.0, |r| 1.5 * r));
    let rows: Vec<Vec<String>> = (0..p.samples)
        .map(|j| {
            let r = r_max * j as f64 / (p.samples - 1) as f64;
            vec![float(r), float(profile.evaluate_radius(r, p.t))]
        })
        .collect();
    emit_csv(output, &["r", "u"], &rows)?;
    Ok(Report {
        rows: rows.len(),
        summary: vec![format!(
            "normalized constant C = {:.16e}, sup = {:.16e}",
            profile.constant(),
            profile.max_value(p.t)
        )],
        failures: Vec::new(),
    })
}

pub fn dirichlet_problem(p: &DirichletParams) -> Result<DirichletProblem, CliError> {
    let mesh = Mesh::from(IntervalGrid::new(p.a, p.b, p.cells)?);
    let (mid, half) = (0.5 * (p.a + p.b), 0.5 * (p.b - p.a));
    let initial = match p.initial {
        InitialShape::Cosine => mesh.sample(|x| p.amplitude * (FRAC_PI_2 * (x - mid) / half).cos()),
        InitialShape::Gaussian => mesh.sample(|x| p.amplitude * (-((x - p.center) / p.width).powi(2)).exp()),
        InitialShape::Constant => mesh.sample(|_| p.amplitude),
    };
    Ok(DirichletProblem::new(
        make_exponent(p.m, 1)?,
        mesh,
        p.final_time,
        constant_data(p.boundary),
        initial,
    )?)
}

pub fn cauchy_problem(p: &CauchyParams) -> Result<CauchyProblem, CliError> {
    let approx = match (p.start_time, p.indicator_cells) {
        (Some(start_time), _) => DiracApproximation::Barenblatt { start_time },
        (None, Some(cells)) => DiracApproximation::CellIndicator { cells },
        (None, None) => unreachable!("validated"),
    };
    Ok(CauchyProblem::new(
        make_exponent(p.m, p.n)?,
        RadialGrid::new(p.n, p.r_max, p.cells)?,
        p.mass,
        approx,
        p.final_time,
        p.truncation_tol,
    )?)
}

fn trajectory_csv(tr: &Trajectory, output: &Path, coordinate: &str) -> Result<Report, CliError> {
    let centers = tr.mesh.centers();
    let mut rows = Vec::with_capacity(tr.len() * centers.len());
    for (t, f) in tr.times.iter().zip(&tr.fields) {
        for (x, u) in centers.iter().zip(f.iter()) {
            rows.push(vec![float(*t), float(*x), float(*u)]);
        }
    }
    emit_csv(output, &["t", coordinate, "u"], &rows)?;
    let masses = tr.masses();
    Ok(Report {
        rows: rows.len(),
        summary: vec![format!(
            "{} levels, mass {:.16e} -> {:.16e}, {} clipped entries, {} Newton iterations",
            tr.len(),
            masses[0],
            masses[masses.len() - 1],
            tr.clip_count,
            tr.newton_iters.iter().sum::<usize>()
        )],
        failures: Vec::new(),
    })
}

fn sweep_spec(cfg: &RunConfig, template: ProblemTemplate, target_m: f64) -> Result<SweepSpec, CliError> {
    let s: &SweepParams = cfg.sweep.as_ref().expect("validated");
    let spec = SweepSpec {
        target_m,
        deltas: s.deltas.clone(),
        template,
        norms: s.q.iter().zip(&s.s).map(|(&q, &s)| NormRequest { q, s }).collect(),
        config: *cfg.solver.as_ref().expect("validated"),
        refine: s.refine,
        rate_branch: s.rate_branch,
    };
    spec.validate().map_err(|e| CliError::ConfigInvalid(vec![format!("sweep: {e}")]))?;
    Ok(spec)
}

fn sweep(result: &SweepResult, output: &Path) -> Result<Report, CliError> {
    let mut rows = Vec::new();
    for row in &result.rows {
        for (j, norm) in result.norms.iter().enumerate() {
            let levels = [("coarse", &row.coarse), ("fine", &row.fine)];
            for (tag, m) in levels {
                let tag = match (&row.status, row.accepted) {
                    (RowStatus::Failed(_), _) => format!("{tag};failed"),
                    (RowStatus::Ok, false) => format!("{tag};rejected"),
                    (RowStatus::Ok, true) => tag.to_string(),
                };
                let (lq, ls, weak) = m
                    .as_ref()
                    .map_or((f64::NAN, f64::NAN, f64::NAN), |m| {
                        (m.error_lq[j], m.error_power_ls[j], m.weak_defect_max())
                    });
                rows.push(vec![
                    float(row.delta),
                    float(row.m_i),
                    float(norm.q),
                    float(lq),
                    float(ls),
                    float(weak),
                    tag,
                ]);
            }
        }
    }
    emit_csv(output, &SWEEP_HEADER, &rows)?;

    let mut failures = Vec::new();
    for row in &result.rows {
        if let RowStatus::Failed(msg) = &row.status {
            failures.push(format!("delta {}: {msg}", row.delta));
        } else if !row.accepted {
            failures.push(format!("delta {}: resolutions disagree", row.delta));
        }
    }
    let fine = |d: f64| {
        result
            .rows
            .iter()
            .find(|r| r.delta == d)
            .and_then(|r| r.fine.as_ref())
            .map(|m| m.error_lq[0])
    };
    if let Some(control) = fine(0.0) {
        if control > 1e-9 {
            failures.push(format!("control run error {control:e} exceeds 1e-9"));
        }
    }
    for sign in [1.0, -1.0] {
        let mut seq: Vec<(f64, f64)> = result
            .rows
            .iter()
            .filter(|r| r.delta * sign > 0.0)
            .filter_map(|r| r.fine.as_ref().map(|m| (r.delta.abs(), m.error_lq[0])))
            .collect();
        seq.sort_by(|a, b| a.0.total_cmp(&b.0));
        if seq.windows(2).any(|w| !(w[0].1 < w[1].1)) {
            failures.push(format!("errors are not monotone in |delta| for sign {sign:+}"));
        }
    }
    let mut summary = vec![format!(
        "fitted order {:.4} (log residual {:.2e}), grid consistent: {}",
        result.fitted_order,
        result.fit_residual,
        result.grid_consistent()
    )];
    if let Ok(fit) = fit_rate(result, 1.0 / result.target_m) {
        summary.push(format!(
            "realized constants e/|delta|^(1/m) in [{:.6e}, {:.6e}]; flagged deltas {:?}",
            fit.constant_min, fit.constant, fit.outliers
        ));
    }
    Ok(Report {
        rows: rows.len(),
        summary,
        failures,
    })
}

fn estimate_row(r: &EstimateReport) -> Vec<String> {
    let params: Vec<String> = r.metadata.iter().map(|(k, v)| format!("{k}={v}")).collect();
    vec![
        r.name.clone(),
        float(r.lhs),
        float(r.rhs_without_constant),
        float(r.realized_constant),
        params.join(";"),
    ]
}

fn estimates(cfg: &RunConfig, output: &Path) -> Result<Report, CliError> {
    let e = cfg.estimates.as_ref().expect("validated");
    let solver: &SolverConfig = cfg.solver.as_ref().expect("validated");
    let dp = cfg.dirichlet.as_ref().expect("validated");
    let dirichlet = dirichlet_problem(dp)?;
    let cauchy = cauchy_problem(cfg.cauchy.as_ref().expect("validated"))?;
    let du = solve_dirichlet(&dirichlet, solver)?;
    let cu = solve_cauchy(&cauchy, solver)?;
    let mid = 0.5 * (dp.a + dp.b);

    let mut reports = vec![
        energy_estimate_report(&du, &dirichlet)?,
        local_sup_bound_report(&du, e.rho, e.t0, mid)?,
    ];
    if dp.boundary == 0.0 {
        reports.push(sobolev_check(&du)?);
    }
    let mut failures = Vec::new();
    let mut cacc = caccioppoli_check(&du, e.cutoff_radius, mid)?;
    cacc.name = "caccioppoli_dirichlet".into();
    let mut cacc_cauchy = caccioppoli_check(&cu, e.cutoff_radius.min(0.9 * cauchy.grid.r_max()), 0.0)?;
    cacc_cauchy.name = "caccioppoli_cauchy".into();
    for r in [&cacc, &cacc_cauchy] {
        if !r.holds_with(1.0) {
            failures.push(format!("{} exceeds its stated right side", r.name));
        }
    }
    reports.push(cacc);
    reports.push(cacc_cauchy);
    for &delta in &e.oleinik_deltas {
        let r = oleinik_defect(&du, delta, &dirichlet, solver)?;
        if !r.holds_with(r.meta("stated_constant").unwrap_or(f64::NAN)) {
            failures.push(format!("oleinik pairing at delta {delta} exceeds the stated bound"));
        }
        reports.push(r);
    }
    let c = cauchy_estimates_report(&cu, &cauchy, e.window, e.q)?;
    if !c.l1.holds_with(1.0 + 1e-8) {
        failures.push("Cauchy mass exceeds the initial mass".into());
    }
    reports.extend([c.l1, c.smoothing, c.lq]);

    let rows: Vec<Vec<String>> = reports.iter().map(estimate_row).collect();
    emit_csv(output, &ESTIMATE_HEADER, &rows)?;
    let summary = reports
        .iter()
        .map(|r| format!("{:<22} realized constant {:.6e}", r.name, r.realized_constant))
        .collect();
    Ok(Report {
        rows: rows.len(),
        summary,
        failures,
    })
}

fn lemmas(cfg: &RunConfig, output: &Path) -> Result<Report, CliError> {
    let samples = cfg.lemmas.as_ref().expect("validated").samples;
    let reports = [
        fuzz_power_gap(samples, cfg.seed),
        fuzz_monotonicity(samples, cfg.seed.wrapping_add(1)),
        fuzz_power_difference(samples, cfg.seed.wrapping_add(2)),
    ];
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                r.samples.to_string(),
                r.violations.to_string(),
                float(r.worst_realized),
                float(r.constant),
            ]
        })
        .collect();
    emit_csv(output, &LEMMA_HEADER, &rows)?;
    Ok(Report {
        rows: rows.len(),
        summary: reports
            .iter()
            .map(|r| {
                format!(
                    "{:<18} {} samples, {} violations, worst realized {:.6} (constant {})",
                    r.name, r.samples, r.violations, r.worst_realized, r.constant
                )
            })
            .collect(),
        failures: reports
            .iter()
            .filter(|r| r.violations > 0)
            .map(|r| format!("{}: {} violations", r.name, r.violations))
            .collect(),
    })
}
