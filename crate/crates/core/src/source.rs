//! Radial Gaussian sources and the 1D radial reduction of the free resolvent.
//!
//! For a source h that is radial about a center c, the 3D convolution with the
//! free kernel collapses to a single radial integral:
//!
//!   (R(z)h)(P) = (1/(2 i sqrt(z) R)) int_0^inf r h(r)
//!                  (e^{i sqrt(z) (R+r)} - e^{i sqrt(z) |R-r|}) dr,   R = |P - c|,
//!
//! which every 3D evaluation in this crate funnels through.

use nalgebra::Vector3;

use crate::energy::{C64, Energy};
use crate::error::Result;
use crate::quad;

/// Radial Gaussian h(x) = amplitude * exp(-|x - center|^2 / (2 sigma^2)).
#[derive(Debug, Clone, Copy)]
pub struct GaussianSource {
    pub center: Vector3<f64>,
    pub sigma: f64,
    pub amplitude: f64,
}

impl GaussianSource {
    pub fn new(center: Vector3<f64>, sigma: f64, amplitude: f64) -> Self {
        assert!(sigma > 0.0, "Gaussian width must be positive");
        GaussianSource {
            center,
            sigma,
            amplitude,
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.amplitude * (-r * r / (2.0 * self.sigma * self.sigma)).exp()
    }

    /// Total mass, amplitude * (2 pi sigma^2)^{3/2}.
    pub fn mass(&self) -> f64 {
        self.amplitude * (2.0 * std::f64::consts::PI * self.sigma * self.sigma).powf(1.5)
    }
}

/// A radial source: either a Gaussian itself, or its Helmholtz image
/// h = (-Laplace - z) phi for a Gaussian phi, for which R(z)h = phi exactly.
#[derive(Debug, Clone, Copy)]
pub enum SourceSpec {
    Gaussian(GaussianSource),
    HelmholtzImage(GaussianSource),
}

impl SourceSpec {
    pub fn center(&self) -> Vector3<f64> {
        match self {
            SourceSpec::Gaussian(g) | SourceSpec::HelmholtzImage(g) => g.center,
        }
    }

    /// Radius beyond which the radial profile is below double-precision noise.
    pub fn support_radius(&self) -> f64 {
        match self {
            SourceSpec::Gaussian(g) | SourceSpec::HelmholtzImage(g) => 14.0 * g.sigma,
        }
    }

    /// Radial profile about the center; depends on z for the Helmholtz image.
    pub fn radial(&self, e: &Energy, r: f64) -> C64 {
        match self {
            SourceSpec::Gaussian(g) => C64::new(g.value(r), 0.0),
            SourceSpec::HelmholtzImage(g) => {
                // (-Laplace - z) A e^{-r^2/(2 s^2)} = (3/s^2 - r^2/s^4 - z) phi(r)
                let s2 = g.sigma * g.sigma;
                (C64::new(3.0 / s2 - r * r / (s2 * s2), 0.0) - e.z) * g.value(r)
            }
        }
    }
}

/// (R(z)h)(p) for a radial source via the 1D radial reduction.
pub fn free_resolvent_at(e: &Energy, source: &SourceSpec, p: &Vector3<f64>) -> Result<C64> {
    let w = e.sqrt_z;
    let i = C64::new(0.0, 1.0);
    let big_r = (p - source.center()).norm();
    let r_max = source.support_radius();
    if big_r < 1e-9 {
        // limit kernel at the center: r e^{i sqrt(z) r}
        return quad::integrate(
            |r| source.radial(e, r) * r * (i * w * r).exp(),
            0.0,
            r_max,
            1e-13,
        );
    }
    let pref = (C64::new(2.0, 0.0) * i * w * big_r).inv();
    let integrand = move |r: f64| {
        source.radial(e, r)
            * r
            * ((i * w * (big_r + r)).exp() - (i * w * (big_r - r).abs()).exp())
    };
    let val = quad::integrate_split(integrand, 0.0, r_max, &[big_r], 1e-13)?;
    Ok(pref * val)
}
