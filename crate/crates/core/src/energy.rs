use nalgebra::Complex;

pub type C64 = Complex<f64>;

/// Square root of `z` on the resolvent sheet: the branch with Im w >= 0,
/// cut along the positive real axis, with the upper-edge limit on the cut
/// itself (w real and nonnegative for z in [0, +inf)).
pub fn sqrt_upper(z: C64) -> C64 {
    if z.re == 0.0 && z.im == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let mut theta = z.im.atan2(z.re);
    if theta < 0.0 {
        theta += 2.0 * std::f64::consts::PI;
    }
    let r = z.norm().sqrt();
    C64::new(r * (theta / 2.0).cos(), r * (theta / 2.0).sin())
}

/// A spectral parameter together with its branch-correct square root.
/// `kappa` is set when z = -kappa^2 lies on the negative half-axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub z: C64,
    pub sqrt_z: C64,
    pub kappa: Option<f64>,
}

impl Energy {
    pub fn new(z: C64) -> Self {
        let sqrt_z = sqrt_upper(z);
        let kappa = if z.im == 0.0 && z.re < 0.0 {
            Some((-z.re).sqrt())
        } else {
            None
        };
        Energy { z, sqrt_z, kappa }
    }

    /// Energy at z = -kappa^2, kappa > 0; sqrt_z = i*kappa exactly.
    pub fn from_kappa(kappa: f64) -> Self {
        assert!(kappa >= 0.0, "kappa must be nonnegative");
        Energy {
            z: C64::new(-kappa * kappa, 0.0),
            sqrt_z: C64::new(0.0, kappa),
            kappa: Some(kappa),
        }
    }

    pub fn conj(&self) -> Self {
        Energy::new(self.z.conj())
    }

    pub fn is_real(&self) -> bool {
        self.z.im == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn negative_real_axis() {
        let w = sqrt_upper(C64::new(-9.0, 0.0));
        assert_relative_eq!(w.re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(w.im, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn first_quadrant() {
        // (2+i)^2 = 3+4i
        let w = sqrt_upper(C64::new(3.0, 4.0));
        assert_relative_eq!(w.re, 2.0, epsilon = 1e-14);
        assert_relative_eq!(w.im, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn branch_continuity_below_negative_axis() {
        let z = C64::new(-4.0, -0.001);
        let w = sqrt_upper(z);
        assert!(w.im > 0.0);
        assert!((w * w - z).norm() <= 1e-14 * (1.0 + z.norm()));
        // continuous across the negative real axis
        let w_above = sqrt_upper(C64::new(-4.0, 0.001));
        assert!((w - w_above).norm() < 1e-3);
    }

    #[test]
    fn positive_axis_upper_edge() {
        let w = sqrt_upper(C64::new(4.0, 0.0));
        assert_relative_eq!(w.re, 2.0, epsilon = 1e-14);
        assert_eq!(w.im, 0.0);
    }

    #[test]
    fn conjugate_branch_identity() {
        // sqrt_upper(conj z) = -conj(sqrt_upper z) off the real axis
        let z = C64::new(1.0, 2.0);
        let w = sqrt_upper(z);
        let wc = sqrt_upper(z.conj());
        assert!((wc + w.conj()).norm() < 1e-14);
    }

    #[test]
    fn kappa_energy() {
        let e = Energy::from_kappa(2.0);
        assert_eq!(e.z, C64::new(-4.0, 0.0));
        assert_eq!(e.sqrt_z, C64::new(0.0, 2.0));
        assert_eq!(e.kappa, Some(2.0));
    }
}
