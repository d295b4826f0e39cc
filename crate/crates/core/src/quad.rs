//! Adaptive Gauss-Kronrod quadrature (G7/K15 pair) for complex integrands.

use crate::energy::C64;
use crate::error::{KreinError, Result};

// QUADPACK qk15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Kronrod panel; returns (K15 value, |K15 - G7| error estimate).
fn kronrod_panel<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let fsum = f(c - x) + f(c + x);
        kron += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    kron *= h;
    gauss *= h;
    (kron, (kron - gauss).norm())
}

fn adapt<F: Fn(f64) -> C64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    depth: usize,
    max_depth: usize,
) -> Result<C64> {
    let (val, err) = kronrod_panel(f, a, b);
    if err <= tol || err <= 1e-16 * val.norm() {
        return Ok(val);
    }
    if depth >= max_depth {
        return Err(KreinError::QuadratureFailure { depth });
    }
    let c = 0.5 * (a + b);
    let left = adapt(f, a, c, 0.5 * tol, depth + 1, max_depth)?;
    let right = adapt(f, c, b, 0.5 * tol, depth + 1, max_depth)?;
    Ok(left + right)
}

/// Adaptive integral of a complex-valued function over [a, b].
pub fn integrate<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, tol: f64) -> Result<C64> {
    if a == b {
        return Ok(C64::new(0.0, 0.0));
    }
    adapt(&f, a, b, tol, 0, 30)
}

/// Adaptive integral split at interior breakpoints (kinks, near-singular points).
pub fn integrate_split<F: Fn(f64) -> C64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<C64> {
    let mut pts: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut total = C64::new(0.0, 0.0);
    for w in pts.windows(2) {
        total += integrate(&f, w[0], w[1], tol)?;
    }
    Ok(total)
}

/// Breakpoints geometrically graded toward `s0`, for integrands with a
/// (near-)singularity there; panel widths halve down to `floor`.
pub fn graded_breaks(a: f64, b: f64, s0: f64, floor: f64) -> Vec<f64> {
    let mut breaks = vec![s0];
    let mut w = (b - a).abs();
    while w > floor.max(1e-14) {
        breaks.push(s0 - w);
        breaks.push(s0 + w);
        w *= 0.5;
    }
    breaks.push(s0 - w);
    breaks.push(s0 + w);
    breaks
}

/// Adaptive integral of a real-valued function over [a, b].
pub fn integrate_real<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    integrate(|x| C64::new(f(x), 0.0), a, b, tol).map(|v| v.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_exact() {
        let v = integrate_real(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12).unwrap();
        assert_relative_eq!(v, 4.0 - 4.0 + 2.0, epsilon = 1e-12);
    }

    #[test]
    fn oscillatory_complex() {
        // int_0^1 e^{i 10 x} dx = (e^{10i} - 1)/(10 i)
        let v = integrate(|x| C64::new(0.0, 10.0 * x).exp(), 0.0, 1.0, 1e-13).unwrap();
        let exact = (C64::new(0.0, 10.0).exp() - C64::new(1.0, 0.0)) / C64::new(0.0, 10.0);
        assert!((v - exact).norm() < 1e-12);
    }

    #[test]
    fn near_singular_peak() {
        // int_0^1 rho/(x^2+rho^2) dx = atan(1/rho), rho = 1e-4
        let rho = 1e-4;
        let v = integrate_split(
            |x| C64::new(rho / (x * x + rho * rho), 0.0),
            -1.0,
            1.0,
            &[0.0],
            1e-10,
        )
        .unwrap();
        assert_relative_eq!(v.re, 2.0 * (1.0 / rho).atan(), max_relative = 1e-9);
    }

    #[test]
    fn depth_exhaustion_reported() {
        // a discontinuity at an irrational point never converges
        let err = integrate(
            |x| {
                if x < std::f64::consts::FRAC_1_SQRT_2 {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(1.0, 0.0)
                }
            },
            0.0,
            1.0,
            1e-15,
        );
        assert!(matches!(err, Err(KreinError::QuadratureFailure { .. })));
    }
}
