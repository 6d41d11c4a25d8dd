//! Time-indexed solver output.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, Mesh};
use crate::params::Exponent;

/// Prescribed values of `u^m` on the boundary, as a function of `(x, t)`.
///
/// The function is also evaluated inside the domain by the energy estimate,
/// where it plays the role of an extension of the boundary data to `Ω_T`.
pub type BoundaryData = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Boundary data that is identically `value`.
pub fn constant_boundary(value: f64) -> BoundaryData {
    Arc::new(move |_, _| value)
}

/// Discrete solution: fields at strictly increasing times plus step metadata.
#[derive(Clone)]
pub struct Trajectory {
    pub exponent: Exponent,
    pub mesh: Mesh,
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
    /// Newton iterations of each accepted step (one entry per stored level after the first).
    pub newton_iters: Vec<usize>,
    /// Final scaled residual of each accepted step.
    pub residual_norms: Vec<f64>,
    /// Entries in `(-positivity_clip_tol, 0)` that were set to zero.
    pub clip_count: usize,
    /// Time-integrated outward boundary flux of `u^m` up to each stored level.
    pub outflow: Vec<f64>,
    /// Boundary data used by the run.
    pub boundary: BoundaryData,
    /// Largest value seen in the outermost cell (Cauchy runs only).
    pub boundary_cell_max: f64,
    /// Set when `boundary_cell_max` exceeded the truncation tolerance.
    pub truncation_warning: bool,
}

impl fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Trajectory")
            .field("exponent", &self.exponent)
            .field("mesh", &self.mesh)
            .field("levels", &self.times.len())
            .field("clip_count", &self.clip_count)
            .field("truncation_warning", &self.truncation_warning)
            .finish()
    }
}

impl Trajectory {
    /// A trajectory holding only its initial level.
    pub fn new(exponent: Exponent, mesh: Mesh, t0: f64, u0: Field, boundary: BoundaryData) -> Self {
        Self {
            exponent,
            mesh,
            times: vec![t0],
            fields: vec![u0],
            newton_iters: Vec::new(),
            residual_norms: Vec::new(),
            clip_count: 0,
            outflow: vec![0.0],
            boundary,
            boundary_cell_max: 0.0,
            truncation_warning: false,
        }
    }

    /// Trajectory from explicit levels, without solver metadata.
    pub fn from_levels(
        exponent: Exponent,
        mesh: Mesh,
        times: Vec<f64>,
        fields: Vec<Field>,
        boundary: BoundaryData,
    ) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if times.len() != fields.len() {
            return Err(Error::LengthMismatch {
                left: times.len(),
                right: fields.len(),
            });
        }
        if let Some(bad) = fields.iter().find(|f| f.len() != mesh.cells()) {
            return Err(Error::DimensionMismatch {
                expected: mesh.cells(),
                found: bad.len(),
            });
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        let levels = times.len();
        Ok(Self {
            exponent,
            mesh,
            times,
            fields,
            newton_iters: vec![0; levels - 1],
            residual_norms: vec![0.0; levels - 1],
            clip_count: 0,
            outflow: vec![0.0; levels],
            boundary,
            boundary_cell_max: 0.0,
            truncation_warning: false,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has an initial level")
    }

    pub fn final_field(&self) -> &Field {
        self.fields.last().expect("trajectory has an initial level")
    }

    /// Mass `∫ u(t_k) dx` at every level.
    pub fn masses(&self) -> Vec<f64> {
        self.fields
            .iter()
            .map(|f| self.mesh.integrate(f).expect("field matches mesh"))
            .collect()
    }

    /// `sup_x u(t_k)` at every level.
    pub fn sups(&self) -> Vec<f64> {
        self.fields.iter().map(Field::max).collect()
    }

    pub fn min_value(&self) -> f64 {
        self.fields.iter().map(Field::min).fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.fields.iter().map(Field::max).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the level closest to `t`.
    pub fn nearest_level(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, &s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = k;
            }
        }
        best
    }

    /// Piecewise-linear interpolation in time; clamps outside the stored range.
    pub fn field_at(&self, t: f64) -> Field {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.fields[0].clone();
        }
        if k == self.len() {
            return self.final_field().clone();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let theta = (t - t0) / (t1 - t0);
        let (a, b) = (&self.fields[k - 1], &self.fields[k]);
        Field::new(a.iter().zip(b.iter()).map(|(x, y)| (1.0 - theta) * x + theta * y).collect())
    }

    /// Weights of the space-time rule that pairs every stored level after the
    /// first with the preceding time step (right-endpoint rule, consistent
    /// with backward Euler).
    pub fn time_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.len()];
        for k in 1..self.len() {
            w[k] = self.times[k] - self.times[k - 1];
        }
        w
    }

    /// Discrete `∫_{t_0}^{T} ∫ f(u) dx dt` by the right-endpoint rule.
    pub fn space_time_integral(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.time_weights()
            .iter()
            .zip(&self.fields)
            .skip(1)
            .map(|(dt, u)| dt * self.mesh.integrate(&u.map(&f)).expect("field matches mesh"))
            .sum()
    }

    /// `u^m` at level `k`, using the odd extension for robustness.
    pub fn power_field(&self, k: usize) -> Field {
        let m = self.exponent.m();
        self.fields[k].map(|v| v.signum() * v.abs().powf(m))
    }
}

/// Discrete space-time `L^p` distance between two runs on the same mesh and
/// time levels, by the right-endpoint rule. `transform` is applied to each
/// run's values before differencing (identity for `u`, a power for `u^m`).
pub fn space_time_distance(
    a: &Trajectory,
    b: &Trajectory,
    p: f64,
    fa: impl Fn(f64) -> f64,
    fb: impl Fn(f64) -> f64,
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.mesh.cells() != b.mesh.cells() {
        return Err(Error::DimensionMismatch {
            expected: a.mesh.cells(),
            found: b.mesh.cells(),
        });
    }
    let vol = a.mesh.volumes();
    let weights = a.time_weights();
    let mut sum = 0.0;
    for k in 1..a.len() {
        let level: f64 = a.fields[k]
            .iter()
            .zip(b.fields[k].iter())
            .zip(&vol)
            .map(|((x, y), v)| (fa(*x) - fb(*y)).abs().powf(p) * v)
            .sum();
        sum += weights[k] * level;
    }
    Ok(sum.powf(1.0 / p))
}
