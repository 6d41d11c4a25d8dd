//! Adaptive quadrature and bracketed root finding.
//!
//! Integration uses the double-exponential rule from the `quadrature` crate,
//! bisecting the interval until each piece meets its share of the requested
//! absolute tolerance. The rule copes with integrable endpoint singularities,
//! so callers split the range at interior kinks (e.g. a free boundary).

use roots::{find_root_brent, SimpleConvergency};

const MAX_DEPTH: u32 = 16;
const ROUNDING_FLOOR: f64 = 100.0 * f64::EPSILON;

/// `∫_a^b f(x) dx` to an absolute tolerance `tol`.
pub fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -integrate(f, b, a, tol);
    }
    adaptive(f, a, b, tol.max(f64::MIN_POSITIVE), 0)
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let out = quadrature::integrate(f, a, b, tol);
    // the rule's error estimate does not drop below a few ulps of the result
    let floor = ROUNDING_FLOOR * out.integral.abs();
    if out.error_estimate <= tol.max(floor) || depth >= MAX_DEPTH {
        return out.integral;
    }
    let mid = 0.5 * (a + b);
    adaptive(f, a, mid, 0.5 * tol, depth + 1) + adaptive(f, mid, b, 0.5 * tol, depth + 1)
}

/// `∫_a^∞ f(x) dx`: directly on `[a, a + scale]`, then `x = a + scale / u`
/// on the tail, so that points far out are resolved by small `u` at full
/// relative precision. `scale` should be the length over which `f` varies.
pub fn integrate_to_infinity(f: &impl Fn(f64) -> f64, a: f64, scale: f64, tol: f64) -> f64 {
    let mapped = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        f(a + scale / u) * scale / (u * u)
    };
    integrate(f, a, a + scale, 0.5 * tol) + integrate(&mapped, 0.0, 1.0, 0.5 * tol)
}

/// Root of `f` in `[lo, hi]`; `None` if the interval does not bracket a sign
/// change or Brent's method fails to converge.
pub fn find_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64, xtol: f64) -> Option<f64> {
    let mut conv = SimpleConvergency {
        eps: xtol,
        max_iter: 500,
    };
    find_root_brent(lo, hi, f, &mut conv).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_and_singular_integrands() {
        assert_relative_eq!(integrate(&|x| x * x, 0.0, 3.0, 1e-13), 9.0, max_relative = 1e-13);
        // endpoint square-root singularity of the derivative
        let v = integrate(&|x: f64| (1.0 - x * x).max(0.0).sqrt(), -1.0, 1.0, 1e-13);
        assert_relative_eq!(v, std::f64::consts::FRAC_PI_2, max_relative = 1e-12);
        assert_eq!(integrate(&|x| x, 2.0, 2.0, 1e-12), 0.0);
        assert_relative_eq!(integrate(&|x| x, 1.0, 0.0, 1e-13), -0.5, max_relative = 1e-13);
    }

    #[test]
    fn algebraic_tail_to_infinity() {
        // ∫_0^∞ (1 + x^2)^{-2} dx = π/4
        let v = integrate_to_infinity(&|x: f64| (1.0 + x * x).powi(-2), 0.0, 1.0, 1e-13);
        assert_relative_eq!(v, std::f64::consts::FRAC_PI_4, max_relative = 1e-12);
        // ∫_0^∞ (1 + x)^{-2} dx = 1; slower tails turn into endpoint
        // singularities of the mapped integrand and lose a few digits
        let v = integrate_to_infinity(&|x: f64| (1.0 + x).powi(-2), 0.0, 1.0, 1e-13);
        assert_relative_eq!(v, 1.0, max_relative = 1e-12);
        let v = integrate_to_infinity(&|x: f64| (1.0 + x).powf(-1.5), 0.0, 1.0, 1e-12);
        assert_relative_eq!(v, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn brent_root() {
        let r = find_root(|x| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert_relative_eq!(r, 2f64.sqrt(), max_relative = 1e-14);
        assert!(find_root(|x| x * x + 1.0, 0.0, 2.0, 1e-12).is_none());
    }
}
