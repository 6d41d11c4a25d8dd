//! Both sides of the a-priori estimates, evaluated on discrete solutions.
//!
//! Integrals are cell sums, gradients are face differences (the solver's own
//! discrete energy) and time integrals use the right-endpoint rule over the
//! stored levels, so estimate runs should store every step.

use serde::{Deserialize, Serialize};

use crate::barenblatt::BarenblattProfile;
use crate::error::{Error, Result};
use crate::grid::{FaceKind, Field, Mesh};
use crate::quadrature::integrate;
use crate::solver::{solve_dirichlet, CauchyProblem, DirichletProblem, SolverConfig};
use crate::trajectory::Trajectory;

/// Evaluated sides of one inequality `lhs ≤ c · rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub lhs: f64,
    pub rhs_without_constant: f64,
    /// `lhs / rhs_without_constant` (zero when both vanish).
    pub realized_constant: f64,
    /// Smallest floating-point constant with `lhs ≤ c · rhs`.
    pub satisfied_with: f64,
    pub metadata: Vec<(String, f64)>,
}

impl EstimateReport {
    pub fn new(name: &str, lhs: f64, rhs: f64, metadata: Vec<(String, f64)>) -> Result<Self> {
        if rhs == 0.0 && lhs > 0.0 {
            return Err(Error::ZeroData { lhs });
        }
        let realized = if lhs == 0.0 { 0.0 } else { lhs / rhs };
        let mut satisfied = realized;
        while satisfied * rhs < lhs {
            satisfied = satisfied.next_up();
        }
        Ok(Self {
            name: name.to_string(),
            lhs,
            rhs_without_constant: rhs,
            realized_constant: realized,
            satisfied_with: satisfied,
            metadata,
        })
    }

    /// Whether `lhs ≤ c · rhs`.
    pub fn holds_with(&self, c: f64) -> bool {
        self.lhs <= c * self.rhs_without_constant
    }

    pub fn meta(&self, key: &str) -> Option<f64> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

fn meta(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Least-squares fit `ln y = slope ln x + intercept`; returns `(slope, intercept)`.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            available: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// `∫_{t_0}^T |∇ w|^2` with `w = u^m` and the boundary data on Dirichlet faces.
fn space_time_energy(traj: &Trajectory) -> f64 {
    let weights = traj.time_weights();
    (1..traj.len())
        .map(|k| {
            let t = traj.times[k];
            let w = traj.power_field(k);
            let g = |x: f64| (traj.boundary)(x, t);
            weights[k] * traj.mesh.dirichlet_energy(&w, Some(&g))
        })
        .sum()
}

/// Energy estimate: `sup_t ∫u^{m+1} + ∫∫|∇u^m|^2` against
/// `∫∫|∇g|^2 + ∫∫|∂_t g|^{1+1/m} + ∫u_0^{m+1}`, with `g` evaluated at cell
/// centres as its extension into the domain.
pub fn energy_estimate_report(traj: &Trajectory, problem: &DirichletProblem) -> Result<EstimateReport> {
    let m = problem.exponent.m();
    let mesh = &traj.mesh;
    let centers = mesh.centers();
    let g = &problem.boundary;
    let sup_term = traj
        .fields
        .iter()
        .map(|u| mesh.integrate(&u.map(|v| v.powf(m + 1.0))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let gradient_term = space_time_energy(traj);
    let lhs = sup_term + gradient_term;

    let weights = traj.time_weights();
    let g_at = |k: usize| Field::new(centers.iter().map(|&x| g(x, traj.times[k])).collect());
    let mut g_gradient = 0.0;
    let mut g_time = 0.0;
    let last = traj.len() - 1;
    for k in 1..traj.len() {
        let t = traj.times[k];
        let gk = g_at(k);
        let boundary = |x: f64| g(x, t);
        g_gradient += weights[k] * mesh.dirichlet_energy(&gk, Some(&boundary));
        let (a, b) = (k - 1, (k + 1).min(last));
        let (ga, gb) = (g_at(a), g_at(b));
        let span = traj.times[b] - traj.times[a];
        let dg: Vec<f64> = ga
            .iter()
            .zip(gb.iter())
            .map(|(x, y)| ((y - x) / span).abs().powf(1.0 + 1.0 / m))
            .collect();
        g_time += weights[k] * mesh.integrate(&dg)?;
    }
    let initial = mesh.integrate(&problem.initial.map(|v| v.powf(m + 1.0)))?;
    let rhs = g_gradient + g_time + initial;
    EstimateReport::new(
        "energy",
        lhs,
        rhs,
        meta(&[
            ("m", m),
            ("sup_u_m_plus_1", sup_term),
            ("gradient", gradient_term),
            ("g_gradient", g_gradient),
            ("g_time", g_time),
            ("initial", initial),
        ]),
    )
}

/// Local bound `sup_{B_{ρ/2} × [t_0 - ρ^2/2, t_0]} u` against
/// `(mean of u over B_ρ × (t_0 - ρ^2, t_0))^{2/λ} + 1`, `λ = n(m-1) + 2`.
/// `center` is the spatial centre (zero for radial meshes).
pub fn local_sup_bound_report(traj: &Trajectory, rho: f64, t0: f64, center: f64) -> Result<EstimateReport> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    let mesh = &traj.mesh;
    let tol = 1e-12 * (1.0 + t0.abs());
    if t0 - rho * rho < traj.times[0] - tol || t0 > traj.final_time() + tol {
        return Err(Error::CylinderOutOfRange(format!(
            "[{}, {t0}] not within [{}, {}]",
            t0 - rho * rho,
            traj.times[0],
            traj.final_time()
        )));
    }
    let (lo, hi) = match mesh {
        Mesh::Interval(g) => (g.a(), g.b()),
        Mesh::Radial(g) => {
            if center != 0.0 {
                return Err(Error::CylinderOutOfRange("radial meshes are centred at the origin".into()));
            }
            (-g.r_max(), g.r_max())
        }
    };
    if center - rho < lo - tol || center + rho > hi + tol {
        return Err(Error::CylinderOutOfRange(format!(
            "ball of radius {rho} around {center} leaves [{lo}, {hi}]"
        )));
    }
    let centers = mesh.centers();
    let volumes = mesh.volumes();
    let dist = |x: f64| match mesh {
        Mesh::Interval(_) => (x - center).abs(),
        Mesh::Radial(_) => x,
    };
    let full: Vec<usize> = (0..centers.len()).filter(|&i| dist(centers[i]) < rho).collect();
    let half: Vec<usize> = full.iter().copied().filter(|&i| dist(centers[i]) < 0.5 * rho).collect();
    if half.is_empty() {
        return Err(Error::CylinderOutOfRange("cylinder smaller than one cell".into()));
    }
    let weights = traj.time_weights();
    let mut lhs = 0.0f64;
    let mut integral = 0.0;
    let mut duration = 0.0;
    for k in 0..traj.len() {
        let t = traj.times[k];
        if t > t0 + tol {
            break;
        }
        if t >= t0 - 0.5 * rho * rho - tol {
            lhs = half.iter().fold(lhs, |a, &i| a.max(traj.fields[k][i]));
        }
        if k > 0 && t > t0 - rho * rho + tol {
            integral += weights[k] * full.iter().map(|&i| traj.fields[k][i] * volumes[i]).sum::<f64>();
            duration += weights[k];
        }
    }
    let ball: f64 = full.iter().map(|&i| volumes[i]).sum();
    let mean = if duration > 0.0 { integral / (ball * duration) } else { 0.0 };
    let lambda = traj.exponent.constants().smoothing_lambda;
    let rhs = mean.powf(2.0 / lambda) + 1.0;
    EstimateReport::new(
        "local_sup",
        lhs,
        rhs,
        meta(&[("m", traj.exponent.m()), ("rho", rho), ("t0", t0), ("mean", mean)]),
    )
}

/// The three Cauchy estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyReports {
    /// `sup_t ‖u(t)‖_1` against `‖μ‖`.
    pub l1: EstimateReport,
    /// `u(t) ≤ c ‖μ‖^{2/λ} t^{-n/λ}` at the worst level; carries the fitted
    /// and expected log-log slopes as metadata.
    pub smoothing: EstimateReport,
    /// `∫_{S_T} u^{mq}` against `‖μ‖^{(2/λ)(mq-1)+1} T^{-(n/λ)(mq-1)+1}`.
    pub lq: EstimateReport,
}

/// Largest admissible `q` in the `L^{mq}` bound: `1 + 2/(mn)`.
pub fn lq_limit(m: f64, n: usize) -> f64 {
    1.0 + 2.0 / (m * n as f64)
}

/// Slope of `ln sup_x u(t)` against `ln t` over levels with `t ∈ [t_lo, t_hi]`.
pub fn smoothing_slope(traj: &Trajectory, t_lo: f64, t_hi: f64) -> Result<f64> {
    let (t, s): (Vec<f64>, Vec<f64>) = traj
        .times
        .iter()
        .zip(traj.sups())
        .filter(|(t, _)| **t >= t_lo && **t <= t_hi)
        .map(|(t, s)| (*t, s))
        .unzip();
    log_log_fit(&t, &s).map(|(slope, _)| slope)
}

pub fn cauchy_estimates_report(
    traj: &Trajectory,
    problem: &CauchyProblem,
    s_radius: f64,
    q: f64,
) -> Result<CauchyReports> {
    let e = problem.exponent;
    let (m, n) = (e.m(), e.n());
    let limit = lq_limit(m, n);
    if !(q >= 1.0 && q < limit) {
        return Err(Error::ExponentOutOfRange { q, limit });
    }
    if !(s_radius > 0.0 && s_radius <= problem.grid.r_max()) {
        return Err(Error::CylinderOutOfRange(format!(
            "window radius {s_radius} outside (0, {}]",
            problem.grid.r_max()
        )));
    }
    let mu = problem.mass;
    let lambda = e.constants().smoothing_lambda;
    let nf = n as f64;

    let max_mass = traj.masses().into_iter().fold(0.0, f64::max);
    let l1 = EstimateReport::new("cauchy_l1", max_mass, mu, meta(&[("m", m), ("mass", mu)]))?;

    let mut worst = (0.0, 1.0, traj.times[0]);
    for (k, &t) in traj.times.iter().enumerate().skip(1) {
        let rhs = mu.powf(2.0 / lambda) * t.powf(-nf / lambda);
        let sup = traj.fields[k].max();
        if sup / rhs >= worst.0 / worst.1 {
            worst = (sup, rhs, t);
        }
    }
    let expected = -nf / lambda;
    let fitted = smoothing_slope(traj, traj.times[1], traj.final_time()).unwrap_or(f64::NAN);
    let smoothing = EstimateReport::new(
        "cauchy_smoothing",
        worst.0,
        worst.1,
        meta(&[("m", m), ("t", worst.2), ("fitted_slope", fitted), ("expected_slope", expected)]),
    )?;

    let inside: Vec<bool> = problem.grid.cell_centers().iter().map(|&r| r < s_radius).collect();
    let weights = traj.time_weights();
    let mut integral = 0.0;
    for k in 1..traj.len() {
        let vol = problem.grid.cell_volumes();
        let level: f64 = traj.fields[k]
            .iter()
            .zip(vol)
            .zip(&inside)
            .filter(|(_, inside)| **inside)
            .map(|((u, v), _)| u.powf(m * q) * v)
            .sum();
        integral += weights[k] * level;
    }
    let big_t = traj.final_time();
    let rhs = mu.powf(2.0 / lambda * (m * q - 1.0) + 1.0)
        * big_t.powf(-nf / lambda * (m * q - 1.0) + 1.0);
    let lq = EstimateReport::new(
        "cauchy_lq",
        integral,
        rhs,
        meta(&[("m", m), ("q", q), ("limit", limit), ("S", s_radius), ("T", big_t)]),
    )?;
    Ok(CauchyReports { l1, smoothing, lq })
}

/// `∫_{t_min}^{T} ∫_{|x| < S} B(x,t)^{mq} dx dt` for a Barenblatt profile, by
/// quadrature in `(ln t, r)`; `t_min` may be as small as `1e-200`.
pub fn barenblatt_lq_integral(
    profile: &BarenblattProfile,
    q: f64,
    s_radius: f64,
    t_min: f64,
    t_max: f64,
) -> f64 {
    let e = profile.exponent();
    let (m, n) = (e.m(), e.n());
    let power = m * q;
    let spatial = |t: f64| {
        let upper = profile.support_radius(t).map_or(s_radius, |rf| rf.min(s_radius));
        let f = |r: f64| profile.evaluate_radius(r, t).powf(power) * crate::grid::sphere_area(n, r);
        let scale = profile.max_value(t).powf(power) * upper.powi(n as i32);
        integrate(&f, 0.0, upper, 1e-13 * scale)
    };
    let g = |s: f64| {
        let t = s.exp();
        t * spatial(t)
    };
    // the time integrand is a power of t away from the window edge: split
    // the log range into unit pieces so each is well resolved
    let (a, b) = (t_min.ln(), t_max.ln());
    let pieces = ((b - a).ceil() as usize).max(1);
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|j| {
            let lo = a + j as f64 * h;
            let hi = lo + h;
            let size = g(lo).abs().max(g(hi).abs()) * h;
            integrate(&g, lo, hi, 1e-12 * size)
        })
        .sum()
}

/// Oleinik pairing `∫∫(u_δ - u)(u_δ^m - u^m)` between the solution and the
/// lifted solution (initial data `u_0 + δ`, boundary data `g + δ^m`),
/// against `δ + δ^m`. The stated constant
/// `2^{m+1}(M^m + M + 1)|Ω_T|` with `M = max(1, sup u_δ)` is recorded as
/// metadata `stated_constant`.
pub fn oleinik_defect(
    u: &Trajectory,
    delta: f64,
    problem: &DirichletProblem,
    config: &SolverConfig,
) -> Result<EstimateReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    let m = problem.exponent.m();
    let lift = delta.powf(m);
    let g = problem.boundary.clone();
    let lifted = DirichletProblem::new(
        problem.exponent,
        problem.mesh.clone(),
        problem.final_time,
        std::sync::Arc::new(move |x, t| g(x, t) + lift),
        problem.initial.map(|v| v + delta),
    )?;
    let ud = solve_dirichlet(&lifted, config)?;
    if ud.len() != u.len() {
        return Err(Error::LengthMismatch {
            left: ud.len(),
            right: u.len(),
        });
    }
    let vol = u.mesh.volumes();
    let weights = u.time_weights();
    let mut lhs = 0.0;
    for k in 1..u.len() {
        let level: f64 = ud.fields[k]
            .iter()
            .zip(u.fields[k].iter())
            .zip(&vol)
            .map(|((a, b), v)| (a - b) * (a.powf(m) - b.powf(m)) * v)
            .sum();
        lhs += weights[k] * level;
    }
    let big_m = ud.max_value().max(u.max_value()).max(1.0);
    let cylinder = u.mesh.measure() * (u.final_time() - u.times[0]);
    let stated = 2f64.powf(m + 1.0) * (big_m.powf(m) + big_m + 1.0) * cylinder;
    let rhs = delta + delta.powf(m);
    EstimateReport::new(
        "oleinik",
        lhs,
        rhs,
        meta(&[("m", m), ("delta", delta), ("M", big_m), ("stated_constant", stated)]),
    )
}

/// Parabolic Sobolev inequality for `v = u^m` (zero boundary values):
/// `∫∫|v|^{2κ}` against `∫∫|∇v|^2 (sup_t ∫|v|^{1+1/m})^{2/n}` with
/// `κ = 1 + 1/n + 1/(mn)`.
pub fn sobolev_check(traj: &Trajectory) -> Result<EstimateReport> {
    let c = traj.exponent.constants();
    let (m, n) = (traj.exponent.m(), traj.exponent.n() as f64);
    let kappa = c.kappa_sobolev;
    let mesh = &traj.mesh;
    let weights = traj.time_weights();
    let mut lhs = 0.0;
    let mut gradient = 0.0;
    let mut sup = 0.0f64;
    for k in 0..traj.len() {
        let v = traj.power_field(k);
        sup = sup.max(mesh.integrate(&v.map(|x| x.abs().powf(1.0 + 1.0 / m)))?);
        if k > 0 {
            lhs += weights[k] * mesh.integrate(&v.map(|x| x.abs().powf(2.0 * kappa)))?;
            gradient += weights[k] * mesh.dirichlet_energy(&v, Some(&|_| 0.0));
        }
    }
    let rhs = gradient * sup.powf(2.0 / n);
    EstimateReport::new("sobolev", lhs, rhs, meta(&[("m", m), ("kappa", kappa)]))
}

/// Cutoff `η = ((1 - (|x - x_0|/R)^2)_+)^2` and `|∇η|`.
pub fn cutoff(r: f64, radius: f64) -> (f64, f64) {
    let s = r / radius;
    if s >= 1.0 {
        return (0.0, 0.0);
    }
    let base = 1.0 - s * s;
    (base * base, 4.0 * base * s / radius)
}

/// Caccioppoli inequality with its explicit constants:
/// `∫∫η^2|∇u^m|^2 ≤ 2M^{m+1}∫η^2 + 16M^{2m}∫∫|∇η|^2`, `M = max(1, sup u)`.
/// The report's right side includes the constants, so it holds iff
/// `realized_constant ≤ 1`.
pub fn caccioppoli_check(traj: &Trajectory, radius: f64, center: f64) -> Result<EstimateReport> {
    let mesh = &traj.mesh;
    let (lo, hi) = match mesh {
        Mesh::Interval(g) => (g.a(), g.b()),
        Mesh::Radial(g) => (-g.r_max(), g.r_max()),
    };
    let radial = matches!(mesh, Mesh::Radial(_));
    if (radial && center != 0.0) || center - radius < lo || center + radius > hi {
        return Err(Error::CylinderOutOfRange(format!(
            "cutoff of radius {radius} around {center} leaves the domain"
        )));
    }
    let dist = |x: f64| if radial { x } else { (x - center).abs() };
    let m = traj.exponent.m();
    let faces = mesh.faces();
    let weights = traj.time_weights();
    let mut lhs = 0.0;
    for k in 1..traj.len() {
        let w = traj.power_field(k);
        let level: f64 = faces
            .iter()
            .filter_map(|f| match f.kind {
                FaceKind::Interior { left } => {
                    let eta = cutoff(dist(f.position), radius).0;
                    Some(eta * eta * f.transmissibility * (w[left + 1] - w[left]).powi(2))
                }
                FaceKind::Dirichlet { .. } => None,
            })
            .sum();
        lhs += weights[k] * level;
    }
    let centers = mesh.centers();
    let eta_sq: Vec<f64> = centers.iter().map(|&x| cutoff(dist(x), radius).0.powi(2)).collect();
    let grad_sq: Vec<f64> = centers.iter().map(|&x| cutoff(dist(x), radius).1.powi(2)).collect();
    let duration = traj.final_time() - traj.times[0];
    let big_m = traj.max_value().max(1.0);
    let rhs = 2.0 * big_m.powf(m + 1.0) * mesh.integrate(&eta_sq)?
        + 16.0 * big_m.powf(2.0 * m) * duration * mesh.integrate(&grad_sq)?;
    EstimateReport::new(
        "caccioppoli",
        lhs,
        rhs,
        meta(&[("m", m), ("M", big_m), ("radius", radius), ("center", center)]),
    )
}
