//! Backward-Euler finite-volume solver for `∂_t u = Δ u^m`.
//!
//! Each step solves
//! `F_i(u) = |K_i| (u_i - u_i^old) - Δt Σ_faces T_f (w_nbr - w_i) = 0`,
//! `w = sign(u) |u|^m`, by damped Newton iteration with a tridiagonal
//! Jacobian. The odd extension of `u ↦ u^m` keeps the map monotone on all of
//! `R`, so the discrete problem satisfies a comparison principle and its
//! solution is nonnegative for nonnegative data; Newton iterates are allowed
//! to dip below zero on the way. On a Dirichlet face `w` is replaced by the
//! prescribed value of `u^m`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::barenblatt::normalize_to_mass;
use crate::error::{Error, Result};
use crate::grid::{sphere_area, Face, FaceKind, Field, Mesh, RadialGrid};
use crate::params::Exponent;
use crate::quadrature::integrate;
use crate::trajectory::{constant_boundary, BoundaryData, Trajectory};

/// Numerical parameters shared by all runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    /// Bound on the scaled residual `sqrt(Σ|K_i| (F_i/|K_i|)^2 / |Ω|) / max(1, sup u^old)`.
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    /// Lower cap on `|u|` inside the Jacobian entry `m |u|^{m-1}`.
    pub jacobian_floor: f64,
    pub positivity_clip_tol: f64,
    /// How often a failed step may be split in half before giving up.
    pub max_halvings: usize,
    /// Store every `store_every`-th level (the final level is always stored).
    pub store_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            newton_tol: 1e-10,
            newton_max_iters: 50,
            jacobian_floor: 1e-12,
            positivity_clip_tol: 1e-9,
            max_halvings: 4,
            store_every: 1,
        }
    }
}

impl SolverConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.dt > 0.0
            && self.dt.is_finite()
            && self.newton_tol > 0.0
            && self.newton_max_iters > 0
            && self.jacobian_floor >= 0.0
            && self.positivity_clip_tol >= 0.0
            && self.store_every > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid solver configuration {self:?}")))
        }
    }
}

/// Anything the stepper can advance: an exponent, a mesh and Dirichlet data.
pub trait Evolution {
    fn exponent(&self) -> Exponent;
    fn mesh(&self) -> &Mesh;
    fn boundary(&self) -> &BoundaryData;
}

/// Initial-boundary value problem on a bounded domain with `u^m = g` on the
/// boundary.
#[derive(Clone)]
pub struct DirichletProblem {
    pub exponent: Exponent,
    pub mesh: Mesh,
    pub final_time: f64,
    pub boundary: BoundaryData,
    pub initial: Field,
}

impl std::fmt::Debug for DirichletProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletProblem")
            .field("exponent", &self.exponent)
            .field("mesh", &self.mesh)
            .field("final_time", &self.final_time)
            .finish()
    }
}

impl DirichletProblem {
    pub fn new(
        exponent: Exponent,
        mesh: Mesh,
        final_time: f64,
        boundary: BoundaryData,
        initial: Field,
    ) -> Result<Self> {
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "final time must be positive, got {final_time}"
            )));
        }
        check_initial(&mesh, &initial)?;
        Ok(Self {
            exponent,
            mesh,
            final_time,
            boundary,
            initial,
        })
    }

    /// Same data with a different exponent.
    pub fn with_exponent(&self, exponent: Exponent) -> Self {
        Self {
            exponent,
            ..self.clone()
        }
    }
}

impl Evolution for DirichletProblem {
    fn exponent(&self) -> Exponent {
        self.exponent
    }
    fn mesh(&self) -> &Mesh {
        &self.mesh
    }
    fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }
}

fn check_initial(mesh: &Mesh, initial: &Field) -> Result<()> {
    if initial.len() != mesh.cells() {
        return Err(Error::DimensionMismatch {
            expected: mesh.cells(),
            found: initial.len(),
        });
    }
    if initial.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("initial data must be finite and nonnegative".into()));
    }
    Ok(())
}

/// How the initial measure is approximated on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DiracApproximation {
    /// Cell averages of the source solution of the given mass at `start_time`
    /// (the heat kernel for `m = 1`); the clock starts at `start_time`.
    Barenblatt { start_time: f64 },
    /// Constant on the innermost `cells` cells; the clock starts at zero.
    CellIndicator { cells: usize },
}

/// Cauchy problem in `R^n` with radial finite-mass data, truncated to the
/// ball of the grid with `u = 0` on its boundary.
#[derive(Clone)]
pub struct CauchyProblem {
    pub exponent: Exponent,
    pub grid: RadialGrid,
    pub mass: f64,
    pub initial: Field,
    pub start_time: f64,
    pub final_time: f64,
    pub truncation_tol: f64,
    mesh: Mesh,
    boundary: BoundaryData,
}

impl std::fmt::Debug for CauchyProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CauchyProblem")
            .field("exponent", &self.exponent)
            .field("grid", &self.grid)
            .field("mass", &self.mass)
            .field("start_time", &self.start_time)
            .field("final_time", &self.final_time)
            .field("truncation_tol", &self.truncation_tol)
            .finish()
    }
}

impl CauchyProblem {
    pub fn new(
        exponent: Exponent,
        grid: RadialGrid,
        mass: f64,
        approx: DiracApproximation,
        final_time: f64,
        truncation_tol: f64,
    ) -> Result<Self> {
        if grid.dimension() != exponent.n() {
            return Err(Error::DimensionMismatch {
                expected: exponent.n(),
                found: grid.dimension(),
            });
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidArgument(format!("mass must be positive, got {mass}")));
        }
        let mesh = Mesh::Radial(grid.clone());
        let (initial, start_time) = match approx {
            DiracApproximation::Barenblatt { start_time } => {
                if !(start_time > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "Barenblatt start time must be positive, got {start_time}"
                    )));
                }
                let raw = if exponent.m() == 1.0 {
                    heat_kernel_cell_averages(&grid, mass, start_time)
                } else {
                    normalize_to_mass(exponent, mass)?.cell_averages(&mesh, start_time)
                };
                let held = mesh.integrate(&raw)?;
                (raw.map(|v| v * mass / held), start_time)
            }
            DiracApproximation::CellIndicator { cells } => {
                if cells == 0 || cells > grid.cells() {
                    return Err(Error::InvalidArgument(format!(
                        "indicator width {cells} outside 1..={}",
                        grid.cells()
                    )));
                }
                let vol: f64 = grid.cell_volumes()[..cells].iter().sum();
                let values = (0..grid.cells())
                    .map(|i| if i < cells { mass / vol } else { 0.0 })
                    .collect();
                (Field::new(values), 0.0)
            }
        };
        Self::from_initial(exponent, grid, initial, start_time, final_time, truncation_tol)
    }

    /// Cauchy problem with explicit initial values; the mass is their integral.
    pub fn from_initial(
        exponent: Exponent,
        grid: RadialGrid,
        initial: Field,
        start_time: f64,
        final_time: f64,
        truncation_tol: f64,
    ) -> Result<Self> {
        if grid.dimension() != exponent.n() {
            return Err(Error::DimensionMismatch {
                expected: exponent.n(),
                found: grid.dimension(),
            });
        }
        let mesh = Mesh::Radial(grid.clone());
        check_initial(&mesh, &initial)?;
        if !(final_time > start_time) {
            return Err(Error::InvalidArgument(format!(
                "final time {final_time} must exceed start time {start_time}"
            )));
        }
        if !(truncation_tol > 0.0) {
            return Err(Error::InvalidArgument("truncation tolerance must be positive".into()));
        }
        let mass = mesh.integrate(&initial)?;
        Ok(Self {
            exponent,
            grid,
            mass,
            initial,
            start_time,
            final_time,
            truncation_tol,
            mesh,
            boundary: constant_boundary(0.0),
        })
    }

    /// Same data with a different exponent.
    pub fn with_exponent(&self, exponent: Exponent) -> Self {
        Self {
            exponent,
            ..self.clone()
        }
    }
}

impl Evolution for CauchyProblem {
    fn exponent(&self) -> Exponent {
        self.exponent
    }
    fn mesh(&self) -> &Mesh {
        &self.mesh
    }
    fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }
}

/// Heat kernel `M (4πt)^{-n/2} e^{-r^2/(4t)}`.
pub fn heat_kernel(n: usize, mass: f64, r: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    mass * (4.0 * std::f64::consts::PI * t).powf(-(n as f64) / 2.0) * (-r * r / (4.0 * t)).exp()
}

fn heat_kernel_cell_averages(grid: &RadialGrid, mass: f64, t: f64) -> Field {
    let n = grid.dimension();
    let h = grid.spacing();
    let peak = heat_kernel(n, mass, 0.0, t);
    let values = grid
        .cell_centers()
        .iter()
        .zip(grid.cell_volumes())
        .map(|(&c, &v)| {
            let f = |r: f64| heat_kernel(n, mass, r, t) * sphere_area(n, r);
            integrate(&f, c - 0.5 * h, c + 0.5 * h, 1e-14 * peak * v) / v
        })
        .collect();
    Field::new(values)
}

/// Per-step bookkeeping returned alongside the new field.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub iterations: usize,
    pub residual: f64,
    /// Residual norms of every Newton iterate, starting from the initial guess.
    pub history: Vec<f64>,
    pub clipped: usize,
    /// `Δt Σ_boundary T_f (w_i - g)`: mass leaving through Dirichlet faces.
    pub outflow: f64,
}

struct Stepper<'a> {
    m: f64,
    faces: Vec<Face>,
    volumes: Vec<f64>,
    measure: f64,
    boundary: &'a BoundaryData,
    config: &'a SolverConfig,
}

fn odd_power(u: f64, m: f64) -> f64 {
    if m == 1.0 {
        u
    } else {
        u.signum() * u.abs().powf(m)
    }
}

impl<'a> Stepper<'a> {
    fn new<P: Evolution + ?Sized>(problem: &'a P, config: &'a SolverConfig) -> Self {
        let mesh = problem.mesh();
        Self {
            m: problem.exponent().m(),
            faces: mesh.faces(),
            volumes: mesh.volumes(),
            measure: mesh.measure(),
            boundary: problem.boundary(),
            config,
        }
    }

    fn derivative(&self, u: f64) -> f64 {
        if self.m == 1.0 {
            1.0
        } else {
            self.m * u.abs().max(self.config.jacobian_floor).powf(self.m - 1.0)
        }
    }

    /// Residual `F` and boundary values of `u^m` at the new time.
    fn residual(&self, u: &[f64], u_old: &[f64], dt: f64, g: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = u.iter().map(|&v| odd_power(v, self.m)).collect();
        let mut f: Vec<f64> = (0..u.len()).map(|i| self.volumes[i] * (u[i] - u_old[i])).collect();
        let mut bc = 0;
        for face in &self.faces {
            match face.kind {
                FaceKind::Interior { left } => {
                    let flux = dt * face.transmissibility * (w[left + 1] - w[left]);
                    f[left] -= flux;
                    f[left + 1] += flux;
                }
                FaceKind::Dirichlet { cell } => {
                    f[cell] -= dt * face.transmissibility * (g[bc] - w[cell]);
                    bc += 1;
                }
            }
        }
        f
    }

    fn norm(&self, f: &[f64]) -> f64 {
        let s: f64 = f.iter().zip(&self.volumes).map(|(fi, v)| fi * fi / v).sum();
        (s / self.measure).sqrt()
    }

    fn solve(&self, u_old: &Field, t_new: f64, dt: f64) -> std::result::Result<(Field, StepReport), StepFailure> {
        let cells = u_old.len();
        let g: Vec<f64> = self
            .faces
            .iter()
            .filter(|f| matches!(f.kind, FaceKind::Dirichlet { .. }))
            .map(|f| (self.boundary)(f.position, t_new))
            .collect();
        let scale = u_old.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
        let tol = self.config.newton_tol * scale;
        let mut u: Vec<f64> = u_old.to_vec();
        let mut f = self.residual(&u, u_old, dt, &g);
        let mut res = self.norm(&f);
        let mut history = vec![res / scale];
        let mut iterations = 0;
        let mut polished = false;
        loop {
            if !res.is_finite() {
                return Err(StepFailure::Diverged { iterations, residual: res });
            }
            if res <= tol {
                if polished {
                    break;
                }
                polished = true;
            }
            if iterations >= self.config.newton_max_iters {
                return Err(StepFailure::Diverged { iterations, residual: res / scale });
            }
            let delta = self.newton_direction(&u, &f, dt);
            // backtracking on the residual norm
            let mut theta = 1.0;
            let mut accepted = None;
            for _ in 0..10 {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a - theta * d).collect();
                let ft = self.residual(&trial, u_old, dt, &g);
                let rt = self.norm(&ft);
                if rt < res || (polished && rt <= res) {
                    accepted = Some((trial, ft, rt));
                    break;
                }
                theta *= 0.5;
            }
            iterations += 1;
            match accepted {
                Some((trial, ft, rt)) => {
                    u = trial;
                    f = ft;
                    res = rt;
                    history.push(res / scale);
                }
                None if polished => break,
                None => {
                    let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a - d).collect();
                    f = self.residual(&trial, u_old, dt, &g);
                    u = trial;
                    res = self.norm(&f);
                    history.push(res / scale);
                }
            }
        }
        let mut clipped = 0;
        let mut most_negative = 0.0f64;
        for v in u.iter_mut() {
            if *v < 0.0 {
                most_negative = most_negative.min(*v);
                clipped += 1;
                *v = 0.0;
            }
        }
        if most_negative < -self.config.positivity_clip_tol * scale {
            return Err(StepFailure::Negative { min: most_negative });
        }
        let w_last: Vec<f64> = u.iter().map(|&v| odd_power(v, self.m)).collect();
        let mut outflow = 0.0;
        let mut bc = 0;
        for face in &self.faces {
            if let FaceKind::Dirichlet { cell } = face.kind {
                outflow += dt * face.transmissibility * (w_last[cell] - g[bc]);
                bc += 1;
            }
        }
        debug_assert_eq!(u.len(), cells);
        Ok((
            Field::new(u),
            StepReport {
                iterations,
                residual: res / scale,
                history,
                clipped,
                outflow,
            },
        ))
    }

    /// Solve `J δ = F` with the tridiagonal Jacobian.
    fn newton_direction(&self, u: &[f64], f: &[f64], dt: f64) -> Vec<f64> {
        let n = u.len();
        let d: Vec<f64> = u.iter().map(|&v| self.derivative(v)).collect();
        let mut diag = self.volumes.clone();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for face in &self.faces {
            let c = dt * face.transmissibility;
            match face.kind {
                FaceKind::Interior { left } => {
                    diag[left] += c * d[left];
                    diag[left + 1] += c * d[left + 1];
                    upper[left] -= c * d[left + 1];
                    lower[left + 1] -= c * d[left];
                }
                FaceKind::Dirichlet { cell } => diag[cell] += c * d[cell],
            }
        }
        solve_tridiagonal(&lower, &diag, &upper, f)
    }
}

/// Thomas algorithm for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

enum StepFailure {
    Diverged { iterations: usize, residual: f64 },
    Negative { min: f64 },
}

impl StepFailure {
    fn at(self, time: f64) -> Error {
        match self {
            StepFailure::Diverged {
                iterations,
                residual,
            } => Error::NewtonDiverged {
                time,
                iterations,
                residual,
            },
            StepFailure::Negative { min } => Error::NegativeOvershoot { time, min },
        }
    }
}

/// One backward-Euler step of length `config.dt` from `t_old`, with the
/// step-halving fallback. Returns the new field and aggregated statistics.
pub fn step_with_report<P: Evolution + ?Sized>(
    problem: &P,
    u_old: &Field,
    t_old: f64,
    config: &SolverConfig,
) -> Result<(Field, StepReport)> {
    config.validate()?;
    let stepper = Stepper::new(problem, config);
    advance(&stepper, u_old, t_old, config.dt, 0)
}

/// One backward-Euler step of length `config.dt` from `t_old`.
pub fn step<P: Evolution + ?Sized>(
    problem: &P,
    u_old: &Field,
    t_old: f64,
    config: &SolverConfig,
) -> Result<Field> {
    step_with_report(problem, u_old, t_old, config).map(|(u, _)| u)
}

fn advance(
    stepper: &Stepper<'_>,
    u_old: &Field,
    t_old: f64,
    dt: f64,
    depth: usize,
) -> Result<(Field, StepReport)> {
    match stepper.solve(u_old, t_old + dt, dt) {
        Ok(out) => Ok(out),
        Err(failure) => {
            if depth >= stepper.config.max_halvings {
                return Err(failure.at(t_old + dt));
            }
            let half = 0.5 * dt;
            let (mid, a) = advance(stepper, u_old, t_old, half, depth + 1)?;
            let (end, b) = advance(stepper, &mid, t_old + half, half, depth + 1)?;
            let mut history = a.history;
            history.extend(b.history);
            Ok((
                end,
                StepReport {
                    iterations: a.iterations + b.iterations,
                    residual: a.residual.max(b.residual),
                    history,
                    clipped: a.clipped + b.clipped,
                    outflow: a.outflow + b.outflow,
                },
            ))
        }
    }
}

/// Number of uniform steps and the adjusted step covering `span`.
pub fn uniform_steps(span: f64, dt: f64) -> (usize, f64) {
    let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    (steps, span / steps as f64)
}

fn run<P: Evolution + ?Sized>(
    problem: &P,
    initial: &Field,
    t0: f64,
    t1: f64,
    config: &SolverConfig,
    mut watch: impl FnMut(f64, &Field) -> Result<()>,
) -> Result<Trajectory> {
    config.validate()?;
    let (steps, dt) = uniform_steps(t1 - t0, config.dt);
    let cfg = SolverConfig { dt, ..*config };
    let stepper = Stepper::new(problem, &cfg);
    let mut traj = Trajectory::new(
        problem.exponent(),
        problem.mesh().clone(),
        t0,
        initial.clone(),
        problem.boundary().clone(),
    );
    let mut u = initial.clone();
    let mut outflow = 0.0;
    let mut iters = 0;
    let mut worst_residual = 0.0f64;
    for k in 1..=steps {
        let t_old = t0 + (k - 1) as f64 * dt;
        let t_new = if k == steps { t1 } else { t0 + k as f64 * dt };
        let (next, report) = advance(&stepper, &u, t_old, t_new - t_old, 0)?;
        u = next;
        outflow += report.outflow;
        iters += report.iterations;
        worst_residual = worst_residual.max(report.residual);
        traj.clip_count += report.clipped;
        watch(t_new, &u)?;
        if k % cfg.store_every == 0 || k == steps {
            traj.times.push(t_new);
            traj.fields.push(u.clone());
            traj.newton_iters.push(iters);
            traj.residual_norms.push(worst_residual);
            traj.outflow.push(outflow);
            iters = 0;
            worst_residual = 0.0;
        }
    }
    Ok(traj)
}

/// Solve the Dirichlet problem on `[0, T]`.
pub fn solve_dirichlet(problem: &DirichletProblem, config: &SolverConfig) -> Result<Trajectory> {
    run(problem, &problem.initial, 0.0, problem.final_time, config, |_, _| Ok(()))
}

/// Solve the truncated Cauchy problem on `[start_time, T]`.
///
/// The outermost cell is audited after every step. Exceeding the truncation
/// tolerance is an error for fast diffusion (whose tail always reaches the
/// artificial boundary) and raises the warning flag otherwise.
pub fn solve_cauchy(problem: &CauchyProblem, config: &SolverConfig) -> Result<Trajectory> {
    let fast = problem.exponent.m() < 1.0;
    let tol = problem.truncation_tol;
    let mut edge_max = *problem.initial.last().expect("grid has cells");
    if fast && edge_max > tol {
        return Err(Error::TruncationViolation {
            time: problem.start_time,
            value: edge_max,
            tolerance: tol,
        });
    }
    let mut traj = run(
        problem,
        &problem.initial,
        problem.start_time,
        problem.final_time,
        config,
        |t, u| {
            let edge = *u.last().expect("grid has cells");
            edge_max = edge_max.max(edge);
            if fast && edge > tol {
                return Err(Error::TruncationViolation {
                    time: t,
                    value: edge,
                    tolerance: tol,
                });
            }
            Ok(())
        },
    )?;
    traj.boundary_cell_max = edge_max;
    traj.truncation_warning = edge_max > tol;
    Ok(traj)
}

/// Convenience for tests and drivers: `g ≡ value`.
pub fn constant_data(value: f64) -> BoundaryData {
    Arc::new(move |_, _| value)
}
