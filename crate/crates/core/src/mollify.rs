//! Exponential time mollification
//! `u*(x,t) = (1/σ) ∫_{t_0}^t e^{(s-t)/σ} u(x,s) ds`.
//!
//! The kernel is integrated exactly against the piecewise-linear-in-time
//! interpolant of the stored levels. On a step of length `Δ`, with
//! `a = Δ/σ` and `E = e^{-a}`,
//! `u*_{k+1} = E u*_k + c_0(a) u_k + c_1(a) u_{k+1}`,
//! `c_1 = 1 - (1 - E)/a`, `c_0 = (1 - E) - c_1`.
//! The same formula with `a = τ/σ` gives `u*` inside a step.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::quadrature::integrate;
use crate::trajectory::Trajectory;

/// A trajectory together with its mollification at the stored times.
#[derive(Debug, Clone)]
pub struct MollifiedTrajectory {
    pub source: Trajectory,
    pub sigma: f64,
    pub values: Vec<Field>,
}

/// Weights `(E, c_0, c_1)` for a step with `a = Δ/σ`.
fn step_weights(a: f64) -> (f64, f64, f64) {
    let e = (-a).exp();
    let one_minus_e = -(-a).exp_m1();
    // c_1 = Σ_{j≥1} (-1)^{j+1} a^j / (j+1)!  avoids cancellation for small a
    let c1 = if a < 0.1 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for j in 1..16 {
            term *= -a / (j as f64 + 1.0);
            sum -= term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        1.0 - one_minus_e / a
    };
    (e, one_minus_e - c1, c1)
}

/// Mollify an arbitrary sequence of levels sampled at `times`.
pub fn mollify_levels(times: &[f64], levels: &[Field], sigma: f64) -> Result<Vec<Field>> {
    if levels.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if times.len() != levels.len() {
        return Err(Error::LengthMismatch {
            left: times.len(),
            right: levels.len(),
        });
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let mut out = Vec::with_capacity(levels.len());
    out.push(Field::zeros(levels[0].len()));
    for k in 0..levels.len() - 1 {
        let (e, c0, c1) = step_weights((times[k + 1] - times[k]) / sigma);
        let prev = &out[k];
        let next: Vec<f64> = prev
            .iter()
            .zip(levels[k].iter())
            .zip(levels[k + 1].iter())
            .map(|((s, a), b)| e * s + c0 * a + c1 * b)
            .collect();
        out.push(Field::new(next));
    }
    Ok(out)
}

/// Mollify a trajectory; `u*` vanishes at the first stored time.
pub fn mollify(traj: &Trajectory, sigma: f64) -> Result<MollifiedTrajectory> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let values = mollify_levels(&traj.times, &traj.fields, sigma)?;
    Ok(MollifiedTrajectory {
        source: traj.clone(),
        sigma,
        values,
    })
}

impl MollifiedTrajectory {
    /// `(u(τ), u*(τ))` in cell `i` at offset `tau` into step `k`.
    fn local(&self, k: usize, i: usize, tau: f64) -> (f64, f64) {
        let s = &self.source;
        let dt = s.times[k + 1] - s.times[k];
        let (u0, u1) = (s.fields[k][i], s.fields[k + 1][i]);
        let u = u0 + (u1 - u0) * tau / dt;
        let (e, c0, c1) = step_weights(tau / self.sigma);
        (u, e * self.values[k][i] + c0 * u0 + c1 * u)
    }

    /// `u*` at an arbitrary time within the stored range.
    pub fn evaluate(&self, t: f64) -> Field {
        let s = &self.source;
        let k = s.times.partition_point(|&x| x <= t).clamp(1, s.len().max(2) - 1) - 1;
        if s.len() == 1 {
            return self.values[0].clone();
        }
        let tau = (t - s.times[k]).clamp(0.0, s.times[k + 1] - s.times[k]);
        Field::new((0..s.mesh.cells()).map(|i| self.local(k, i, tau).1).collect())
    }

    /// Continuous-time space-time norms `(‖u‖_{L^p}, ‖u*‖_{L^p}, ‖u* - u‖_{L^p})`
    /// over `Ω × (t_0, T)`. `p = ∞` is supported.
    pub fn norms(&self, p: f64) -> (f64, f64, f64) {
        let s = &self.source;
        let vol = s.mesh.volumes();
        if p.is_infinite() {
            let mut out = (0.0f64, 0.0f64, 0.0f64);
            for k in 0..s.len().saturating_sub(1) {
                let dt = s.times[k + 1] - s.times[k];
                for i in 0..vol.len() {
                    for tau in self.candidate_extrema(k, i, dt) {
                        let (u, us) = self.local(k, i, tau);
                        out.0 = out.0.max(u.abs());
                        out.1 = out.1.max(us.abs());
                        out.2 = out.2.max((us - u).abs());
                    }
                }
            }
            return out;
        }
        let mut sums = (0.0, 0.0, 0.0);
        for k in 0..s.len().saturating_sub(1) {
            let dt = s.times[k + 1] - s.times[k];
            for (i, v) in vol.iter().enumerate() {
                let scale = (s.fields[k][i].abs())
                    .max(s.fields[k + 1][i].abs())
                    .max(self.values[k][i].abs())
                    .powf(p)
                    * dt;
                if scale == 0.0 {
                    continue;
                }
                let tol = 1e-14 * scale;
                let a = integrate(&|tau| self.local(k, i, tau).0.abs().powf(p), 0.0, dt, tol);
                let b = integrate(&|tau| self.local(k, i, tau).1.abs().powf(p), 0.0, dt, tol);
                let c = integrate(
                    &|tau| {
                        let (u, us) = self.local(k, i, tau);
                        (us - u).abs().powf(p)
                    },
                    0.0,
                    dt,
                    tol,
                );
                sums.0 += v * a;
                sums.1 += v * b;
                sums.2 += v * c;
            }
        }
        let root = |x: f64| x.powf(1.0 / p);
        (root(sums.0), root(sums.1), root(sums.2))
    }

    /// Endpoints of step `k` plus interior points where `u*` or `u* - u` can
    /// have a local extremum. On a step `u* = A + Bτ + D e^{-τ/σ}`.
    fn candidate_extrema(&self, k: usize, i: usize, dt: f64) -> Vec<f64> {
        let s = &self.source;
        let sigma = self.sigma;
        let (u0, u1) = (s.fields[k][i], s.fields[k + 1][i]);
        let b = (u1 - u0) / dt;
        let d = self.values[k][i] - u0 + sigma * b;
        let mut pts = vec![0.0, dt];
        if d != 0.0 {
            // (u*)' = B - (D/σ) e^{-τ/σ} = 0
            let ratio = b * sigma / d;
            if ratio > 0.0 {
                let tau = -sigma * ratio.ln();
                if tau > 0.0 && tau < dt {
                    pts.push(tau);
                }
            }
        }
        // u* - u = -σB + D e^{-τ/σ} is monotone: endpoints suffice
        pts
    }
}

/// `max |∂_t u* - (u - u*)/σ|` over interior levels and cells, with `∂_t u*`
/// by centred differences.
pub fn time_derivative_identity_defect(mt: &MollifiedTrajectory) -> f64 {
    let s = &mt.source;
    let mut worst = 0.0f64;
    for k in 1..s.len().saturating_sub(1) {
        let span = s.times[k + 1] - s.times[k - 1];
        for i in 0..s.mesh.cells() {
            let dt = (mt.values[k + 1][i] - mt.values[k - 1][i]) / span;
            let rhs = (s.fields[k][i] - mt.values[k][i]) / mt.sigma;
            worst = worst.max((dt - rhs).abs());
        }
    }
    worst
}

/// `max |u* + e^{-(t - t_0)/σ} u(t_0) - u|` over all levels and cells.
pub fn uniform_limit_defect(mt: &MollifiedTrajectory) -> f64 {
    let s = &mt.source;
    let t0 = s.times[0];
    let mut worst = 0.0f64;
    for (k, &t) in s.times.iter().enumerate() {
        let decay = (-(t - t0) / mt.sigma).exp();
        for i in 0..s.mesh.cells() {
            let v = mt.values[k][i] + decay * s.fields[0][i] - s.fields[k][i];
            worst = worst.max(v.abs());
        }
    }
    worst
}

/// Face differences `(w_{i+1} - w_i)/h` of each level: a discrete spatial
/// gradient used to check that mollification commutes with `∇`.
pub fn difference_levels(levels: &[Field], h: f64) -> Vec<Field> {
    levels
        .iter()
        .map(|f| Field::new(f.windows(2).map(|w| (w[1] - w[0]) / h).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{IntervalGrid, Mesh};
    use crate::params::make_exponent;
    use crate::trajectory::constant_boundary;
    use proptest::prelude::*;

    fn trajectory(times: Vec<f64>, f: impl Fn(f64, f64) -> f64, cells: usize) -> Trajectory {
        let grid = IntervalGrid::new(0.0, 1.0, cells).unwrap();
        let mesh = Mesh::from(grid);
        let centers = mesh.centers();
        let fields = times
            .iter()
            .map(|&t| Field::new(centers.iter().map(|&x| f(x, t)).collect()))
            .collect();
        Trajectory::from_levels(make_exponent(2.0, 1).unwrap(), mesh, times, fields, constant_boundary(0.0))
            .unwrap()
    }

    fn uniform(t: f64, steps: usize) -> Vec<f64> {
        (0..=steps).map(|k| t * k as f64 / steps as f64).collect()
    }

    #[test]
    fn weights_are_consistent() {
        for a in [1e-8, 1e-3, 0.05, 0.1, 0.5, 3.0, 40.0] {
            let (e, c0, c1) = step_weights(a);
            // constants are reproduced: E + c0 + c1 = 1
            assert!((e + c0 + c1 - 1.0).abs() < 1e-15, "a = {a}");
            if a >= 0.05 {
                let exact_c1 = 1.0 - (1.0 - (-a).exp()) / a;
                assert!((c1 - exact_c1).abs() < 1e-13);
            } else {
                assert!((c1 - (a / 2.0 - a * a / 6.0)).abs() <= a.powi(3) / 24.0 * 1.01);
            }
            assert!(c0 >= 0.0 && c1 >= 0.0);
        }
    }

    #[test]
    fn constant_data_has_closed_form() {
        let c = 2.5;
        let sigma = 0.3;
        let tr = trajectory(uniform(1.0, 7), |_, _| c, 3);
        let mt = mollify(&tr, sigma).unwrap();
        for (k, &t) in tr.times.iter().enumerate() {
            let exact = c * (1.0 - (-t / sigma).exp());
            for v in mt.values[k].iter() {
                assert!((v - exact).abs() < 1e-14);
            }
        }
        let mid = mt.evaluate(0.33);
        assert!((mid[0] - c * (1.0 - (-0.33f64 / sigma).exp())).abs() < 1e-14);
    }

    #[test]
    fn zero_data_stays_zero() {
        let mt = mollify(&trajectory(uniform(1.0, 5), |_, _| 0.0, 4), 0.1).unwrap();
        assert!(mt.values.iter().all(|f| f.iter().all(|&v| v == 0.0)));
        assert_eq!(time_derivative_identity_defect(&mt), 0.0);
    }

    #[test]
    fn invalid_input() {
        assert!(matches!(mollify_levels(&[], &[], 0.1), Err(Error::EmptyTrajectory)));
        let tr = trajectory(uniform(1.0, 2), |_, _| 1.0, 2);
        assert!(mollify(&tr, 0.0).is_err());
    }

    #[test]
    fn converges_to_source_as_sigma_vanishes() {
        let tr = trajectory(uniform(1.0, 2000), |x, t| 1.0 + x * t + (3.0 * t).sin(), 4);
        let d: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|&s| mollify(&tr, s).unwrap().norms(2.0).2)
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    }

    #[test]
    fn identity_defect_is_second_order() {
        let f = |x: f64, t: f64| 1.0 + x * x + (2.0 * t).sin();
        let defect = |steps| {
            let mt = mollify(&trajectory(uniform(1.0, steps), f, 3), 0.2).unwrap();
            time_derivative_identity_defect(&mt)
        };
        let order = (defect(100) / defect(200)).log2();
        assert!(order > 1.9, "order {order}");
        let constant = trajectory(uniform(1.0, 50), |_, _| 1.0, 2);
        let d1 = time_derivative_identity_defect(&mollify(&constant, 0.3).unwrap());
        let constant = trajectory(uniform(1.0, 100), |_, _| 1.0, 2);
        let d2 = time_derivative_identity_defect(&mollify(&constant, 0.3).unwrap());
        assert!((3.7..4.3).contains(&(d1 / d2)), "{}", d1 / d2);
    }

    #[test]
    fn gradient_commutes() {
        let tr = trajectory(uniform(1.0, 40), |x, t| (x * 5.0).cos() * (1.0 + t * t), 16);
        let h = tr.mesh.spacing();
        let a = difference_levels(&mollify(&tr, 0.05).unwrap().values, h);
        let b = mollify_levels(&tr.times, &difference_levels(&tr.fields, h), 0.05).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for (p, q) in x.iter().zip(y.iter()) {
                assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()));
            }
        }
    }

    #[test]
    fn uniform_limit() {
        let tr = trajectory(uniform(1.0, 4000), |x, t| 1.0 + x + t * t * x, 3);
        let d1 = uniform_limit_defect(&mollify(&tr, 0.1).unwrap());
        let d2 = uniform_limit_defect(&mollify(&tr, 0.01).unwrap());
        assert!(d2 < 0.2 * d1, "{d1} {d2}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn contraction(
            values in proptest::collection::vec(0.0f64..5.0, 6 * 9),
            sigma in 0.01f64..2.0,
        ) {
            let times = uniform(1.0, 8);
            let mesh = Mesh::from(IntervalGrid::new(0.0, 1.0, 6).unwrap());
            let fields = values.chunks(6).map(|c| Field::new(c.to_vec())).collect();
            let tr = Trajectory::from_levels(make_exponent(2.0, 1).unwrap(), mesh, times, fields, constant_boundary(0.0)).unwrap();
            let mt = mollify(&tr, sigma).unwrap();
            for p in [1.0, 2.0, f64::INFINITY] {
                let (u, us, _) = mt.norms(p);
                prop_assert!(us <= u * (1.0 + 1e-12) + 1e-300, "p={} {} > {}", p, us, u);
            }
        }
    }
}
