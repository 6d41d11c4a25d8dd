//! Closed-form Barenblatt source-type solutions.
//!
//! For `m > 1`
//! `B(x,t) = t^{-λ} (C - a |x|^2 / t^{2λ/n})_+^{1/(m-1)}`, `a = λ(m-1)/(2mn)`,
//! and for `m_c < m < 1`
//! `B(x,t) = t^{-λ} (C + k |x|^2 / t^{2λ/n})^{-1/(1-m)}`, `k = λ(1-m)/(2mn)`,
//! with `λ = n / (n(m-1) + 2)` and `B = 0` for `t <= 0`. The heat kernel
//! (`m = 1`) is not handled here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sphere_area, Field, Mesh, RadialGrid};
use crate::params::Exponent;
use crate::quadrature::{find_root, integrate, integrate_to_infinity};

const MASS_TOL: f64 = 1e-14;

/// A Barenblatt solution with a fixed profile constant `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarenblattProfile {
    exponent: Exponent,
    constant: f64,
    total_mass: f64,
}

impl BarenblattProfile {
    pub fn with_constant(exponent: Exponent, constant: f64) -> Result<Self> {
        if exponent.m() == 1.0 {
            return Err(Error::InvalidArgument(
                "Barenblatt profiles require m != 1".into(),
            ));
        }
        if !(constant > 0.0 && constant.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "profile constant must be positive, got {constant}"
            )));
        }
        let total_mass = self_similar_mass(&exponent, constant);
        Ok(Self {
            exponent,
            constant,
            total_mass,
        })
    }

    pub fn exponent(&self) -> Exponent {
        self.exponent
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    fn lambda(&self) -> f64 {
        self.exponent.constants().barenblatt_lambda
    }

    /// The coefficient of `|ξ|^2` in the profile: `a` for `m > 1`, `k` for `m < 1`.
    fn quadratic_coefficient(&self) -> f64 {
        quadratic_coefficient(&self.exponent)
    }

    /// Time-independent profile `F(ξ)` with `B(x,t) = t^{-λ} F(|x| / t^{λ/n})`.
    pub fn profile(&self, xi: f64) -> f64 {
        profile_value(&self.exponent, self.constant, xi)
    }

    /// Value at radius `r = |x|` and time `t`.
    pub fn evaluate_radius(&self, r: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let lambda = self.lambda();
        let n = self.exponent.n() as f64;
        t.powf(-lambda) * self.profile(r.abs() / t.powf(lambda / n))
    }

    /// Value at the point `x ∈ R^n` and time `t`.
    pub fn evaluate(&self, x: &[f64], t: f64) -> f64 {
        debug_assert_eq!(x.len(), self.exponent.n());
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.evaluate_radius(r, t)
    }

    /// `sup_x B(x, t) = B(0, t)`.
    pub fn max_value(&self, t: f64) -> f64 {
        self.evaluate_radius(0.0, t)
    }

    /// Radius of the support at time `t` for `m > 1`; `None` for fast diffusion.
    pub fn support_radius(&self, t: f64) -> Option<f64> {
        if self.exponent.m() < 1.0 {
            return None;
        }
        if t <= 0.0 {
            return Some(0.0);
        }
        let n = self.exponent.n() as f64;
        Some((self.constant / self.quadratic_coefficient()).sqrt() * t.powf(self.lambda() / n))
    }

    /// Length scale at time `t`: the support radius (`m > 1`) or the radius at
    /// which the tail takes over (`m < 1`).
    fn length_scale(&self, t: f64) -> f64 {
        let n = self.exponent.n() as f64;
        (self.constant / self.quadratic_coefficient()).sqrt() * t.powf(self.lambda() / n)
    }

    /// `∫_{R^n} B(x,t) dx` by adaptive quadrature in physical variables.
    pub fn mass(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let n = self.exponent.n();
        let f = |r: f64| self.evaluate_radius(r, t) * sphere_area(n, r);
        let tol = MASS_TOL * self.total_mass;
        match self.support_radius(t) {
            Some(front) => integrate(&f, 0.0, front, tol),
            None => integrate_to_infinity(&f, 0.0, self.length_scale(t), tol),
        }
    }

    /// `∫_{|x| < radius} B(x,t) dx` by adaptive quadrature.
    pub fn mass_within(&self, radius: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let n = self.exponent.n();
        let upper = self.support_radius(t).map_or(radius, |f| f.min(radius));
        let f = |r: f64| self.evaluate_radius(r, t) * sphere_area(n, r);
        integrate(&f, 0.0, upper, MASS_TOL * self.total_mass)
    }

    /// Point values at the cell centres.
    pub fn sample(&self, mesh: &Mesh, t: f64) -> Field {
        mesh.sample(|c| self.evaluate_radius(c, t))
    }

    /// Exact cell averages `(1/|K|) ∫_K B(x,t) dx`, so that the discrete mass
    /// equals the exact mass inside the mesh.
    pub fn cell_averages(&self, mesh: &Mesh, t: f64) -> Field {
        let front = self.support_radius(t);
        let peak = self.max_value(t);
        let h = mesh.spacing();
        let volumes = mesh.volumes();
        let values = mesh
            .centers()
            .iter()
            .zip(&volumes)
            .map(|(&c, &vol)| {
                let tol = 1e-14 * peak * vol;
                let integral = match mesh {
                    Mesh::Radial(g) => {
                        let n = g.dimension();
                        let f = |r: f64| self.evaluate_radius(r, t) * sphere_area(n, r);
                        self.integrate_split(&f, c - 0.5 * h, c + 0.5 * h, front, tol)
                    }
                    Mesh::Interval(_) => {
                        let f = |x: f64| self.evaluate_radius(x, t);
                        let (lo, hi) = (c - 0.5 * h, c + 0.5 * h);
                        if lo < 0.0 && hi > 0.0 {
                            self.integrate_split(&f, 0.0, -lo, front, tol)
                                + self.integrate_split(&f, 0.0, hi, front, tol)
                        } else {
                            let (lo, hi) = (lo.abs().min(hi.abs()), lo.abs().max(hi.abs()));
                            self.integrate_split(&f, lo, hi, front, tol)
                        }
                    }
                };
                integral / vol
            })
            .collect();
        Field::new(values)
    }

    /// Integral over `[lo, hi] ⊂ [0, ∞)` that stops at the free boundary.
    fn integrate_split(
        &self,
        f: &impl Fn(f64) -> f64,
        lo: f64,
        hi: f64,
        front: Option<f64>,
        tol: f64,
    ) -> f64 {
        let hi = front.map_or(hi, |rf| hi.min(rf));
        if hi <= lo {
            return 0.0;
        }
        integrate(f, lo, hi, tol)
    }
}

fn quadratic_coefficient(e: &Exponent) -> f64 {
    let c = e.constants();
    let (m, n) = (e.m(), e.n() as f64);
    c.barenblatt_lambda * (m - 1.0).abs() / (2.0 * m * n)
}

fn profile_value(e: &Exponent, constant: f64, xi: f64) -> f64 {
    let m = e.m();
    let coeff = quadratic_coefficient(e);
    if m > 1.0 {
        let base = constant - coeff * xi * xi;
        if base <= 0.0 {
            0.0
        } else {
            base.powf(1.0 / (m - 1.0))
        }
    } else {
        (constant + coeff * xi * xi).powf(-1.0 / (1.0 - m))
    }
}

/// `∫ F(|ξ|) dξ` over `R^n`, which equals the (time-independent) mass.
fn self_similar_mass(e: &Exponent, constant: f64) -> f64 {
    let n = e.n();
    let coeff = quadratic_coefficient(e);
    let scale = (constant / coeff).sqrt();
    let f = |rho: f64| profile_value(e, constant, rho) * sphere_area(n, rho);
    // relative tolerance: the integrand is O(F(0) scale^n)
    let size = profile_value(e, constant, 0.0) * scale.powi(n as i32);
    let tol = MASS_TOL * size.max(f64::MIN_POSITIVE);
    if e.m() > 1.0 {
        integrate(&f, 0.0, scale, tol)
    } else {
        integrate_to_infinity(&f, 0.0, scale, tol)
    }
}

/// Barenblatt profile of unit mass. The constant is found by Brent's method on
/// `log C ↦ mass(C) - 1`; the mass is monotone in `C` (increasing for
/// `m > 1`, decreasing for `m < 1`), so the root is unique.
pub fn normalize(e: Exponent) -> Result<BarenblattProfile> {
    normalize_to_mass(e, 1.0)
}

/// Barenblatt profile with prescribed total mass.
pub fn normalize_to_mass(e: Exponent, mass: f64) -> Result<BarenblattProfile> {
    if e.m() == 1.0 {
        return Err(Error::InvalidArgument(
            "Barenblatt normalization requires m != 1".into(),
        ));
    }
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::InvalidArgument(format!("mass must be positive, got {mass}")));
    }
    let defect = |log_c: f64| self_similar_mass(&e, log_c.exp()) / mass - 1.0;
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut expansions = 0;
    while defect(lo).signum() == defect(hi).signum() {
        lo -= 2.0;
        hi += 2.0;
        expansions += 1;
        if expansions > 200 || !defect(lo).is_finite() || !defect(hi).is_finite() {
            return Err(Error::NormalizationFailed(format!(
                "mass(C) - {mass} does not change sign on C ∈ [e^{lo}, e^{hi}]"
            )));
        }
    }
    let log_c = find_root(defect, lo, hi, 1e-15).ok_or_else(|| {
        Error::NormalizationFailed("Brent iteration did not converge".into())
    })?;
    BarenblattProfile::with_constant(e, log_c.exp())
}

/// `(∫ |B_1 - B_2|^p dx)^{1/p}` at time `t` by the cell-centre rule on `grid`.
pub fn lp_distance(
    p1: &BarenblattProfile,
    p2: &BarenblattProfile,
    t: f64,
    p: f64,
    grid: &RadialGrid,
) -> Result<f64> {
    let n1 = p1.exponent.n();
    if p2.exponent.n() != n1 {
        return Err(Error::DimensionMismatch {
            expected: n1,
            found: p2.exponent.n(),
        });
    }
    if grid.dimension() != n1 {
        return Err(Error::DimensionMismatch {
            expected: n1,
            found: grid.dimension(),
        });
    }
    if !(t > 0.0) || !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need t > 0 and p >= 1, got t = {t}, p = {p}"
        )));
    }
    let sum: f64 = grid
        .cell_centers()
        .iter()
        .zip(grid.cell_volumes())
        .map(|(&r, &v)| (p1.evaluate_radius(r, t) - p2.evaluate_radius(r, t)).abs().powf(p) * v)
        .sum();
    Ok(sum.powf(1.0 / p))
}

/// Pointwise residual `|∂_t u - Δ u^m|` of a radial function, by centred
/// differences (step `tau` in time, grid spacing in space) at the cell
/// centres of `grid`. Cells whose stencil reaches beyond `r_limit` are
/// skipped, as is the outermost cell. Returns the maximum.
pub fn pde_residual(
    u: impl Fn(f64, f64) -> f64,
    m: f64,
    grid: &RadialGrid,
    t: f64,
    tau: f64,
    r_limit: Option<f64>,
) -> f64 {
    let h = grid.spacing();
    let n = grid.dimension() as f64;
    let w = |r: f64| u(r, t).powf(m);
    grid.cell_centers()[..grid.cells() - 1]
        .iter()
        .filter(|&&r| r_limit.is_none_or(|lim| r + h <= lim))
        .map(|&r| {
            let dt = (u(r, t + tau) - u(r, t - tau)) / (2.0 * tau);
            let (wm, w0, wp) = (w((r - h).abs()), w(r), w(r + h));
            let lap = (wp - 2.0 * w0 + wm) / (h * h) + (n - 1.0) / r * (wp - wm) / (2.0 * h);
            (dt - lap).abs()
        })
        .fold(0.0, f64::max)
}

/// Finite-difference PDE residual of the closed form, away from the free
/// boundary: for `m > 1` cells within three cells of the front are excluded.
pub fn residual_check(p: &BarenblattProfile, grid: &RadialGrid, t: f64) -> f64 {
    let h = grid.spacing();
    let tau = h.min(0.25 * t);
    let limit = p.support_radius(t - tau).map(|rf| rf - 3.0 * h);
    pde_residual(|r, s| p.evaluate_radius(r, s), p.exponent.m(), grid, t, tau, limit)
}
