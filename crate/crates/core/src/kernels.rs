//! Free-Laplacian resolvent kernel in R^3 and the point-set matrices built from it.

use nalgebra::{DMatrix, Vector3};

use crate::energy::{C64, Energy};
use crate::error::{KreinError, Result};
use crate::quad;

pub const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Free resolvent kernel g(z|r) = e^{i sqrt(z) r} / (4 pi r), r > 0.
pub fn free_green(e: &Energy, r: f64) -> Result<C64> {
    if r <= 0.0 {
        return Err(KreinError::ZeroSeparation { r });
    }
    Ok((C64::new(0.0, 1.0) * e.sqrt_z * r).exp() / (FOUR_PI * r))
}

/// A finite set of centers in R^3 with positive minimal pairwise distance.
#[derive(Debug, Clone)]
pub struct PointConfiguration {
    pub centers: Vec<Vector3<f64>>,
    /// Minimal pairwise distance; 1.0 by convention for fewer than two centers.
    pub d: f64,
}

impl PointConfiguration {
    pub fn new(centers: Vec<Vector3<f64>>) -> Result<Self> {
        let mut d = f64::INFINITY;
        for i in 0..centers.len() {
            for j in (i + 1)..centers.len() {
                let dist = (centers[i] - centers[j]).norm();
                if dist <= 1e-12 {
                    return Err(KreinError::CoincidentCenters { a: i, b: j, dist });
                }
                d = d.min(dist);
            }
        }
        if !d.is_finite() {
            d = 1.0;
        }
        Ok(PointConfiguration { centers, d })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Rectangular lattice helper: `dims` points per axis, step `spacing`, corner `origin`.
pub fn cubic_lattice(dims: [usize; 3], spacing: f64, origin: Vector3<f64>) -> Result<PointConfiguration> {
    let mut centers = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                centers.push(
                    origin + Vector3::new(i as f64, j as f64, k as f64) * spacing,
                );
            }
        }
    }
    PointConfiguration::new(centers)
}

/// Q-matrix of a point set: i sqrt(z)/(4 pi) on the diagonal, free kernel values
/// at the pairwise separations off it.
pub fn point_q_matrix(cfg: &PointConfiguration, e: &Energy) -> Result<DMatrix<C64>> {
    let n = cfg.len();
    let diag = C64::new(0.0, 1.0) * e.sqrt_z / FOUR_PI;
    let mut q = DMatrix::zeros(n, n);
    for m in 0..n {
        q[(m, m)] = diag;
        for k in (m + 1)..n {
            let val = free_green(e, (cfg.centers[m] - cfg.centers[k]).norm())?;
            q[(m, k)] = val;
            q[(k, m)] = val;
        }
    }
    Ok(q)
}

/// Both routes to (g_a(z), g_b(conj z0)): the closed-form kernel increment and
/// an adaptive radial quadrature of the 3D integral (the validation oracle).
#[derive(Debug, Clone, Copy)]
pub struct GreenInnerProduct {
    pub closed_form: C64,
    pub quadrature: C64,
}

pub fn green_inner_product(
    e: &Energy,
    e0: &Energy,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
) -> Result<GreenInnerProduct> {
    if e.z == e0.z {
        return Err(KreinError::CoincidentShift);
    }
    let (w, w0) = (e.sqrt_z, e0.sqrt_z);
    let dist = (a - b).norm();
    let closed_form = if dist <= 1e-14 {
        C64::new(0.0, 1.0) / (FOUR_PI * (w + w0))
    } else {
        (free_green(e, dist)? - free_green(e0, dist)?) / (e.z - e0.z)
    };

    // decay rate of the radial integrand; both energies must sit off [0, inf)
    let eta = w.im + w0.im;
    assert!(eta > 0.0, "green_inner_product needs Im sqrt(z) + Im sqrt(z0) > 0");
    let i = C64::new(0.0, 1.0);
    let quadrature = if dist <= 1e-14 {
        let r_max = 40.0 / eta;
        quad::integrate(|r| (i * (w + w0) * r).exp() / FOUR_PI, 0.0, r_max, 1e-13)?
    } else {
        // bipolar reduction: the angular/inner integral is elementary, the
        // radial integral is done adaptively
        let r_max = dist + 40.0 / eta;
        let pref = C64::new(1.0, 0.0) / (C64::new(8.0 * std::f64::consts::PI * dist, 0.0) * i * w0);
        let integrand = move |r: f64| {
            (i * w * r).exp() * ((i * w0 * (dist + r)).exp() - (i * w0 * (dist - r).abs()).exp())
        };
        pref * quad::integrate_split(integrand, 0.0, r_max, &[dist], 1e-13)?
    };
    Ok(GreenInnerProduct {
        closed_form,
        quadrature,
    })
}

/// Gram matrix of the kernels g_n at z = -kappa^2:
/// (1/(8 pi kappa)) (e^{-kappa |x_m - x_n|}).
pub fn gram_neg_energy(cfg: &PointConfiguration, kappa: f64) -> DMatrix<f64> {
    assert!(kappa > 0.0, "gram_neg_energy needs kappa > 0");
    let n = cfg.len();
    let scale = 1.0 / (8.0 * std::f64::consts::PI * kappa);
    DMatrix::from_fn(n, n, |m, k| {
        scale * (-kappa * (cfg.centers[m] - cfg.centers[k]).norm()).exp()
    })
}

/// Off-diagonal row sum of e^{-kappa |x_n - x_m|} next to the spherical-layer
/// counting bound (13/4) e^{-kappa d} + sum_{n>=2} (3n^2 + 1/4) e^{-(n-1/2) kappa d}.
pub fn lattice_tail_bound(cfg: &PointConfiguration, m: usize, kappa: f64) -> (f64, f64) {
    let rowsum: f64 = cfg
        .centers
        .iter()
        .enumerate()
        .filter(|&(n, _)| n != m)
        .map(|(_, x)| (-kappa * (x - cfg.centers[m]).norm()).exp())
        .sum();
    let kd = kappa * cfg.d;
    let mut bound = 3.25 * (-kd).exp();
    let mut n = 2.0;
    loop {
        let term = (3.0 * n * n + 0.25) * (-(n - 0.5) * kd).exp();
        if term < 1e-16 {
            break;
        }
        bound += term;
        n += 1.0;
    }
    (rowsum, bound)
}
