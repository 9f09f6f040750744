//! Thin wrappers over double-exponential quadrature.

/// Splits `[a, b]` into panels and integrates each with the double-exponential rule.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    integrate_panels(&f, a, b, tol, 8)
}

pub fn integrate_panels(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let per = tol / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            let hi = if k + 1 == panels { b } else { lo + h };
            quadrature::integrate(f, lo, hi, per).integral
        })
        .sum()
}

/// Iterated integral over the rectangle `[a1, b1] x [a2, b2]`; the inner
/// integral runs over the first coordinate.
pub fn integrate_2d(
    f: impl Fn(f64, f64) -> f64,
    (a1, b1): (f64, f64),
    (a2, b2): (f64, f64),
    tol: f64,
) -> f64 {
    let inner_tol = tol / (b2 - a2).max(1.0) * 0.1;
    integrate(
        |y2| integrate(|y1| f(y1, y2), a1, b1, inner_tol),
        a2,
        b2,
        tol,
    )
}

/// As [`integrate_2d`] with inner bounds depending on the outer variable.
pub fn integrate_2d_var(
    f: impl Fn(f64, f64) -> f64,
    inner: impl Fn(f64) -> (f64, f64),
    (a2, b2): (f64, f64),
    tol: f64,
) -> f64 {
    let inner_tol = tol / (b2 - a2).max(1.0) * 0.1;
    integrate(
        |y2| {
            let (a1, b1) = inner(y2);
            integrate(|y1| f(y1, y2), a1, b1, inner_tol)
        },
        a2,
        b2,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_mass() {
        let g = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((integrate(g, -10.0, 10.0, 1e-12) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polynomial_on_square() {
        let v = integrate_2d(|x, y| x * y * y, (0.0, 1.0), (0.0, 2.0), 1e-12);
        assert!((v - 4.0 / 3.0).abs() < 1e-12);
    }
}
