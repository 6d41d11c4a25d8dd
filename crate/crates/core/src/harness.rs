//! Stability sweeps `m_i = m + δ_i → m` with fixed data, and rate fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barenblatt::{lp_distance, normalize};
use crate::error::{Error, Result};
use crate::estimates::log_log_fit;
use crate::grid::{FaceKind, Field, Mesh, RadialGrid};
use crate::params::Exponent;
use crate::solver::{solve_cauchy, solve_dirichlet, CauchyProblem, DirichletProblem, SolverConfig};
use crate::trajectory::Trajectory;

/// Number of test fields used for the weak gradient pairing.
pub const WEAK_DICTIONARY: usize = 5;

/// Two resolutions are accepted when they agree to this relative tolerance.
pub const RESOLUTION_AGREEMENT: f64 = 0.2;

/// Fixed data for a sweep; only the exponent varies between runs.
#[derive(Debug, Clone)]
pub enum ProblemTemplate {
    Dirichlet(DirichletProblem),
    /// Errors are measured over the ball of radius `window`.
    Cauchy { problem: CauchyProblem, window: f64 },
}

impl ProblemTemplate {
    fn exponent(&self) -> Exponent {
        match self {
            ProblemTemplate::Dirichlet(p) => p.exponent,
            ProblemTemplate::Cauchy { problem, .. } => problem.exponent,
        }
    }

    /// The same data on a mesh refined by `factor` (piecewise-constant
    /// prolongation of the initial values, so the data do not change).
    fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 1 {
            return Ok(self.clone());
        }
        Ok(match self {
            ProblemTemplate::Dirichlet(p) => ProblemTemplate::Dirichlet(DirichletProblem::new(
                p.exponent,
                p.mesh.refined(factor)?,
                p.final_time,
                p.boundary.clone(),
                prolong(&p.initial, factor),
            )?),
            ProblemTemplate::Cauchy { problem, window } => ProblemTemplate::Cauchy {
                problem: CauchyProblem::from_initial(
                    problem.exponent,
                    problem.grid.refined(factor)?,
                    prolong(&problem.initial, factor),
                    problem.start_time,
                    problem.final_time,
                    problem.truncation_tol,
                )?,
                window: *window,
            },
        })
    }

    fn solve(&self, m: f64, config: &SolverConfig) -> Result<Trajectory> {
        let e = self.exponent().with_m(m)?;
        match self {
            ProblemTemplate::Dirichlet(p) => solve_dirichlet(&p.with_exponent(e), config),
            ProblemTemplate::Cauchy { problem, .. } => solve_cauchy(&problem.with_exponent(e), config),
        }
    }

    fn mask(&self) -> Vec<bool> {
        match self {
            ProblemTemplate::Dirichlet(p) => vec![true; p.mesh.cells()],
            ProblemTemplate::Cauchy { problem, window } => {
                problem.grid.cell_centers().iter().map(|&r| r < *window).collect()
            }
        }
    }
}

fn prolong(f: &Field, factor: usize) -> Field {
    Field::new(f.iter().flat_map(|&v| std::iter::repeat_n(v, factor)).collect())
}

/// Requested error norms: `‖u_i - u‖_{L^q}` and `‖u_i^{m_i} - u^m‖_{L^s}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRequest {
    pub q: f64,
    pub s: f64,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub target_m: f64,
    /// `m_i = target_m + δ_i`; zero is the control run.
    pub deltas: Vec<f64>,
    pub template: ProblemTemplate,
    pub norms: Vec<NormRequest>,
    pub config: SolverConfig,
    /// Refinement factor of the second resolution (`h / factor`, `dt / factor`).
    pub refine: usize,
    /// Rate experiment: every `m_i ≥ 1`, which admits `q = 1 + m` for
    /// Dirichlet sweeps.
    pub rate_branch: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let e = self.template.exponent().with_m(self.target_m)?;
        let (m, n) = (e.m(), e.n() as f64);
        if self.deltas.is_empty() || self.norms.is_empty() {
            return Err(Error::InvalidArgument("sweep needs deltas and norms".into()));
        }
        if self.refine == 0 {
            return Err(Error::InvalidArgument("refinement factor must be positive".into()));
        }
        for &d in &self.deltas {
            let mi = e.with_m(m + d)?;
            if self.rate_branch && mi.m() < 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "rate sweeps need m_i >= 1, got {}",
                    mi.m()
                )));
            }
        }
        let c = e.constants();
        for r in &self.norms {
            let (q_limit, s_limit, q_closed) = match self.template {
                ProblemTemplate::Dirichlet(_) => (1.0 + m, 2.0 * c.kappa_min(), self.rate_branch),
                ProblemTemplate::Cauchy { .. } => (m + 2.0 / n, 1.0 + 2.0 / (m * n), false),
            };
            let q_ok = r.q >= 1.0 && (r.q < q_limit || (q_closed && r.q <= q_limit));
            if !q_ok {
                return Err(Error::ExponentOutOfRange { q: r.q, limit: q_limit });
            }
            if !(r.s >= 1.0 && r.s < s_limit) {
                return Err(Error::ExponentOutOfRange { q: r.s, limit: s_limit });
            }
        }
        if let ProblemTemplate::Cauchy { problem, window } = &self.template {
            if !(*window > 0.0 && *window < problem.grid.r_max()) {
                return Err(Error::CylinderOutOfRange(format!(
                    "window {window} must lie inside the truncation radius {}",
                    problem.grid.r_max()
                )));
            }
        }
        Ok(())
    }
}

/// Errors of one run against the reference at the same resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// One entry per norm request.
    pub error_lq: Vec<f64>,
    pub error_power_ls: Vec<f64>,
    pub weak_defects: [f64; WEAK_DICTIONARY],
    pub sup: f64,
    pub cells: usize,
    pub dt: f64,
}

impl Measurement {
    pub fn weak_defect_max(&self) -> f64 {
        self.weak_defects.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub m_i: f64,
    pub coarse: Option<Measurement>,
    pub fine: Option<Measurement>,
    pub status: RowStatus,
    /// Both resolutions agree within `RESOLUTION_AGREEMENT` on every error.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub target_m: f64,
    pub norms: Vec<NormRequest>,
    /// Sorted by `|δ|` (ties: negative first).
    pub rows: Vec<SweepRow>,
    /// Fit of the first `L^q` error over accepted nonzero deltas (NaN when
    /// there are too few).
    pub fitted_order: f64,
    /// Root-mean-square residual of that fit in log space.
    pub fit_residual: f64,
}

fn windowed_distance(
    a: &Trajectory,
    b: &Trajectory,
    p: f64,
    fa: impl Fn(f64) -> f64,
    fb: impl Fn(f64) -> f64,
    mask: &[bool],
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let vol = a.mesh.volumes();
    let weights = a.time_weights();
    let mut sum = 0.0;
    for k in 1..a.len() {
        let level: f64 = (0..vol.len())
            .filter(|&i| mask[i])
            .map(|i| (fa(a.fields[k][i]) - fb(b.fields[k][i])).abs().powf(p) * vol[i])
            .sum();
        sum += weights[k] * level;
    }
    Ok(sum.powf(1.0 / p))
}

/// Test field `φ_k(ξ) e^{-t}` of the weak pairing, with `ξ ∈ [0, 1]` the
/// normalized coordinate; it vanishes on the Dirichlet boundary.
pub fn test_field(mesh: &Mesh, k: usize, x: f64) -> f64 {
    use std::f64::consts::PI;
    match mesh {
        Mesh::Interval(g) => ((k as f64) * PI * (x - g.a()) / (g.b() - g.a())).sin(),
        Mesh::Radial(g) => ((k as f64 - 0.5) * PI * x / g.r_max()).cos(),
    }
}

/// `|∫∫(∇u_i^{m_i} - ∇u^m)·∇φ_k|` for each dictionary field, by face differences.
pub fn weak_pairing_defects(a: &Trajectory, b: &Trajectory) -> Result<[f64; WEAK_DICTIONARY]> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mesh = &a.mesh;
    let faces = mesh.faces();
    let centers = mesh.centers();
    let weights = a.time_weights();
    let mut out = [0.0; WEAK_DICTIONARY];
    for (k, slot) in out.iter_mut().enumerate() {
        let phi: Vec<f64> = centers.iter().map(|&x| test_field(mesh, k + 1, x)).collect();
        let mut total = 0.0;
        for j in 1..a.len() {
            let t = a.times[j];
            let (wa, wb) = (a.power_field(j), b.power_field(j));
            let level: f64 = faces
                .iter()
                .map(|f| match f.kind {
                    FaceKind::Interior { left } => {
                        let dw = (wa[left + 1] - wa[left]) - (wb[left + 1] - wb[left]);
                        f.transmissibility * dw * (phi[left + 1] - phi[left])
                    }
                    FaceKind::Dirichlet { cell } => {
                        // both runs carry the same boundary values
                        let dw = wb[cell] - wa[cell];
                        let dphi = test_field(mesh, k + 1, f.position) - phi[cell];
                        f.transmissibility * dw * dphi
                    }
                })
                .sum();
            total += weights[j] * (-t).exp() * level;
        }
        *slot = total.abs();
    }
    Ok(out)
}

fn measure(
    template: &ProblemTemplate,
    run: &Trajectory,
    reference: &Trajectory,
    m_i: f64,
    norms: &[NormRequest],
    dt: f64,
) -> Result<Measurement> {
    let m = reference.exponent.m();
    let mask = template.mask();
    let pow = |e: f64| move |v: f64| v.signum() * v.abs().powf(e);
    let mut error_lq = Vec::with_capacity(norms.len());
    let mut error_power_ls = Vec::with_capacity(norms.len());
    for r in norms {
        error_lq.push(windowed_distance(run, reference, r.q, |v| v, |v| v, &mask)?);
        error_power_ls.push(windowed_distance(run, reference, r.s, pow(m_i), pow(m), &mask)?);
    }
    Ok(Measurement {
        error_lq,
        error_power_ls,
        weak_defects: weak_pairing_defects(run, reference)?,
        sup: run.max_value(),
        cells: run.mesh.cells(),
        dt,
    })
}

fn agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= RESOLUTION_AGREEMENT * a.abs().max(b.abs())
}

fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let coarse_template = spec.template.clone();
    let fine_template = spec.template.refined(spec.refine)?;
    let coarse_cfg = spec.config;
    let fine_cfg = SolverConfig {
        dt: spec.config.dt / spec.refine as f64,
        ..spec.config
    };
    let levels = [(&coarse_template, coarse_cfg), (&fine_template, fine_cfg)];
    let references: Vec<Trajectory> = levels
        .par_iter()
        .map(|(t, cfg)| t.solve(spec.target_m, cfg))
        .collect::<Result<_>>()?;

    let mut deltas = spec.deltas.clone();
    deltas.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
    let rows: Vec<SweepRow> = deltas
        .par_iter()
        .map(|&delta| {
            let m_i = spec.target_m + delta;
            let mut out = [None, None];
            for (slot, ((template, cfg), reference)) in out.iter_mut().zip(levels.iter().zip(&references)) {
                let measured = template
                    .solve(m_i, cfg)
                    .and_then(|run| measure(template, &run, reference, m_i, &spec.norms, cfg.dt));
                match measured {
                    Ok(v) => *slot = Some(v),
                    Err(e) => {
                        return SweepRow {
                            delta,
                            m_i,
                            coarse: out[0].take(),
                            fine: None,
                            status: RowStatus::Failed(e.to_string()),
                            accepted: false,
                        }
                    }
                }
            }
            let [coarse, fine] = out;
            let (c, f) = (coarse.as_ref().unwrap(), fine.as_ref().unwrap());
            let accepted = c.error_lq.iter().zip(&f.error_lq).all(|(a, b)| agree(*a, *b))
                && c.error_power_ls.iter().zip(&f.error_power_ls).all(|(a, b)| agree(*a, *b));
            SweepRow {
                delta,
                m_i,
                coarse,
                fine,
                status: RowStatus::Ok,
                accepted,
            }
        })
        .collect();

    let mut result = SweepResult {
        target_m: spec.target_m,
        norms: spec.norms.clone(),
        rows,
        fitted_order: f64::NAN,
        fit_residual: f64::NAN,
    };
    if let Ok(fit) = fit_rate(&result, 1.0 / spec.target_m) {
        result.fitted_order = fit.order;
        result.fit_residual = fit.residual;
    }
    Ok(result)
}

/// Dirichlet sweep; a failing `m_i` marks its row and does not abort the sweep.
pub fn run_dirichlet_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    if !matches!(spec.template, ProblemTemplate::Dirichlet(_)) {
        return Err(Error::InvalidArgument("Dirichlet sweep needs a Dirichlet template".into()));
    }
    run_sweep(spec)
}

/// Cauchy sweep with errors over the window `S × (t_start, T]`.
pub fn run_cauchy_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    if !matches!(spec.template, ProblemTemplate::Cauchy { .. }) {
        return Err(Error::InvalidArgument("Cauchy sweep needs a Cauchy template".into()));
    }
    run_sweep(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Least-squares slope of `ln e` against `ln |δ|`.
    pub order: f64,
    /// `max_δ e / |δ|^{reference_exponent}`.
    pub constant: f64,
    /// `min_δ e / |δ|^{reference_exponent}`.
    pub constant_min: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    /// Deltas whose realized constant is more than three times away from
    /// the geometric mean of all realized constants.
    pub outliers: Vec<f64>,
}

/// Fit `e ≈ c |δ|^order` to `(δ, e)` pairs with `δ ≠ 0`.
pub fn fit_rate_points(points: &[(f64, f64)], reference_exponent: f64) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = points.iter().copied().filter(|(d, _)| *d != 0.0).collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            available: pts.len(),
        });
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0.abs()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (order, intercept) = log_log_fit(&x, &y)?;
    let residual = (x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b.ln() - order * a.ln() - intercept).powi(2))
        .sum::<f64>()
        / x.len() as f64)
        .sqrt();
    let realized: Vec<f64> = x.iter().zip(&y).map(|(d, e)| e / d.powf(reference_exponent)).collect();
    let geo = (realized.iter().map(|c| c.ln()).sum::<f64>() / realized.len() as f64).exp();
    let outliers = pts
        .iter()
        .zip(&realized)
        .filter(|(_, c)| **c > 3.0 * geo || **c < geo / 3.0)
        .map(|(p, _)| p.0)
        .collect();
    Ok(RateFit {
        order,
        constant: realized.iter().copied().fold(0.0, f64::max),
        constant_min: realized.iter().copied().fold(f64::INFINITY, f64::min),
        residual,
        outliers,
    })
}

/// Rate fit of the first `L^q` error (finer resolution) over accepted,
/// nonzero deltas.
pub fn fit_rate(result: &SweepResult, reference_exponent: f64) -> Result<RateFit> {
    let points: Vec<(f64, f64)> = result
        .rows
        .iter()
        .filter(|r| r.accepted && r.delta != 0.0)
        .filter_map(|r| r.fine.as_ref().map(|f| (r.delta, f.error_lq[0])))
        .collect();
    fit_rate_points(&points, reference_exponent)
}

impl SweepResult {
    /// Discretization error is subdominant to the perturbation: for every
    /// pair of successive `|δ|` of the same sign, the change between
    /// resolutions is smaller than the change between the two deltas.
    pub fn grid_consistent(&self) -> bool {
        let ok: Vec<&SweepRow> = self
            .rows
            .iter()
            .filter(|r| r.delta != 0.0 && r.status == RowStatus::Ok)
            .collect();
        ok.iter().all(|a| {
            let next = ok
                .iter()
                .filter(|b| b.delta.signum() == a.delta.signum() && b.delta.abs() < a.delta.abs())
                .max_by(|x, y| x.delta.abs().total_cmp(&y.delta.abs()));
            let Some(b) = next else { return true };
            let (ac, af) = (a.coarse.as_ref().unwrap(), a.fine.as_ref().unwrap());
            let bf = b.fine.as_ref().unwrap();
            (0..self.norms.len()).all(|j| (ac.error_lq[j] - af.error_lq[j]).abs() < af.error_lq[j] - bf.error_lq[j])
        })
    }
}

/// Closed-form `‖B_{m+δ}(t) - B_m(t)‖_{L^p}` for normalized profiles, one
/// entry per delta in the given order.
pub fn barenblatt_sweep(e: Exponent, deltas: &[f64], t: f64, p: f64, grid: &RadialGrid) -> Result<Vec<(f64, f64)>> {
    let reference = normalize(e)?;
    deltas
        .iter()
        .map(|&d| {
            let other = normalize(e.with_m(e.m() + d)?)?;
            Ok((d, lp_distance(&other, &reference, t, p, grid)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::IntervalGrid;
    use crate::params::make_exponent;
    use crate::solver::{constant_data, DiracApproximation};
    use std::f64::consts::FRAC_PI_2;

    fn dirichlet_spec(deltas: Vec<f64>) -> SweepSpec {
        let mesh = Mesh::from(IntervalGrid::new(-1.0, 1.0, 40).unwrap());
        let initial = mesh.sample(|x| (FRAC_PI_2 * x).cos());
        let p = DirichletProblem::new(make_exponent(2.0, 1).unwrap(), mesh, 0.25, constant_data(0.0), initial).unwrap();
        SweepSpec {
            target_m: 2.0,
            deltas,
            template: ProblemTemplate::Dirichlet(p),
            norms: vec![NormRequest { q: 2.0, s: 2.0 }],
            config: SolverConfig::with_dt(0.01),
            refine: 2,
            rate_branch: false,
        }
    }

    #[test]
    fn synthetic_rate_is_exact() {
        let pts: Vec<(f64, f64)> = [0.2, -0.1, 0.05, 0.025].iter().map(|d: &f64| (*d, 2.0 * d.abs().sqrt())).collect();
        let fit = fit_rate_points(&pts, 0.5).unwrap();
        assert!((fit.order - 0.5).abs() < 1e-13 && (fit.constant - 2.0).abs() < 1e-13);
        assert!(fit.outliers.is_empty());
        assert!(matches!(fit_rate_points(&pts[..1], 0.5), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn control_run_is_exact_and_sweep_deterministic() {
        let spec = dirichlet_spec(vec![0.1, 0.0, -0.1, 0.05]);
        let a = run_dirichlet_sweep(&spec).unwrap();
        let b = run_dirichlet_sweep(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows[0].delta, 0.0);
        let control = a.rows[0].fine.as_ref().unwrap();
        assert_eq!(control.error_lq[0], 0.0);
        assert_eq!(control.weak_defect_max(), 0.0);
        let deltas: Vec<f64> = a.rows.iter().map(|r| r.delta).collect();
        assert_eq!(deltas, vec![0.0, 0.05, -0.1, 0.1]);
        let e: Vec<f64> = a.rows.iter().map(|r| r.fine.as_ref().unwrap().error_lq[0]).collect();
        assert!(e[1] < e[3], "{e:?}");
    }

    #[test]
    fn invalid_sweeps_are_rejected() {
        let mut spec = dirichlet_spec(vec![0.1]);
        spec.norms[0].q = 3.0;
        assert!(matches!(spec.validate(), Err(Error::ExponentOutOfRange { .. })));
        spec.rate_branch = true;
        assert!(spec.validate().is_ok());
        spec.deltas = vec![-1.5];
        assert!(spec.validate().is_err());
        let spec = dirichlet_spec(vec![-2.0]);
        assert!(matches!(spec.validate(), Err(Error::SubcriticalExponent { .. }) | Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn failing_reference_is_fatal() {
        let mut spec = dirichlet_spec(vec![0.1, 0.05]);
        spec.config.newton_max_iters = 1;
        spec.config.max_halvings = 0;
        assert!(run_dirichlet_sweep(&spec).is_err());
    }

    #[test]
    fn cauchy_sweep_runs_in_window() {
        let e = make_exponent(2.0, 1).unwrap();
        let grid = RadialGrid::new(1, 3.0, 60).unwrap();
        let p = CauchyProblem::new(e, grid, 1.0, DiracApproximation::Barenblatt { start_time: 0.5 }, 1.0, 1e-10).unwrap();
        let spec = SweepSpec {
            target_m: 2.0,
            // m_i = 0.8 is fast diffusion: its tail reaches the truncation
            // boundary, so that row fails while the others complete
            deltas: vec![0.0, 0.1, 0.2, -1.2],
            template: ProblemTemplate::Cauchy { problem: p, window: 2.0 },
            norms: vec![NormRequest { q: 2.0, s: 1.5 }],
            config: SolverConfig::with_dt(0.02),
            refine: 2,
            rate_branch: false,
        };
        let r = run_cauchy_sweep(&spec).unwrap();
        assert!(r.rows[..3].iter().all(|row| row.status == RowStatus::Ok));
        assert!(matches!(r.rows[3].status, RowStatus::Failed(_)) && !r.rows[3].accepted);
        let e: Vec<f64> = r.rows[..3].iter().map(|row| row.fine.as_ref().unwrap().error_lq[0]).collect();
        assert!(e[0] == 0.0 && e[1] < e[2], "{e:?}");
    }

    #[test]
    fn closed_form_sweep_decreases() {
        let e = make_exponent(2.0, 1).unwrap();
        let grid = RadialGrid::new(1, 4.0, 4000).unwrap();
        let d = barenblatt_sweep(e, &[0.2, 0.1, 0.05], 1.0, 1.0, &grid).unwrap();
        assert!(d[0].1 > d[1].1 && d[1].1 > d[2].1);
    }
}
