//! Randomized invariants, mostly structural identities that must hold for
//! every admissible input rather than at hand-picked examples.

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use krein_core::finite::{direct_perturbed, krein_rank_n, spectral_norm, FiniteModel};
use krein_core::kernels::point_q_matrix;
use krein_core::segment::{build_segment_q, SegmentModel};
use krein_core::{free_green, sqrt_upper, C64, Energy, PointConfiguration};

fn annulus() -> impl Strategy<Value = C64> {
    // radius in [1e-6, 1e6], phase anywhere off the positive real axis
    (
        -6.0f64..6.0,
        proptest::num::f64::POSITIVE.prop_map(|t| (t % 1.0).abs()),
    )
        .prop_map(|(log_r, t)| {
            let r = 10f64.powf(log_r);
            let theta = 1e-3 + t * (2.0 * std::f64::consts::PI - 2e-3);
            C64::new(r * theta.cos(), r * theta.sin())
        })
}

proptest! {
    #[test]
    fn sqrt_branch_squares_back(z in annulus()) {
        let w = sqrt_upper(z);
        prop_assert!(w.im >= 0.0, "Im sqrt = {}", w.im);
        prop_assert!((w * w - z).norm() <= 1e-12 * z.norm());
    }

    #[test]
    fn sqrt_branch_conjugation(z in annulus()) {
        // the cut sits on [0, inf): sqrt(conj z) = -conj(sqrt z) elsewhere
        let w = sqrt_upper(z);
        let wc = sqrt_upper(z.conj());
        prop_assert!((wc + w.conj()).norm() <= 1e-12 * w.norm());
    }

    #[test]
    fn green_kernel_conjugates(z in annulus(), r in 1e-3f64..50.0) {
        let e = Energy::new(z);
        let g = free_green(&e, r).unwrap();
        let gc = free_green(&Energy::new(z.conj()), r).unwrap();
        // rounding in the branch choice is amplified by the phase sqrt(z)*r
        let slack = 1e-14 * (1.0 + e.sqrt_z.norm() * r);
        prop_assert!((gc - g.conj()).norm() <= slack * g.norm().max(1e-300));
    }

    #[test]
    fn finite_krein_matches_direct(seed in 0u64..1000, n in 2usize..10, zim in 0.05f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let channels = 1 + (seed as usize % n.min(4));
        let model = FiniteModel::random(n, channels, &mut rng);
        let z = C64::new(seed as f64 / 100.0 - 5.0, zim);
        let lhs = krein_rank_n(&model, z).unwrap();
        let rhs = direct_perturbed(&model, z).unwrap();
        let rel = spectral_norm(&(lhs - &rhs)) / spectral_norm(&rhs);
        prop_assert!(rel < 1e-9, "relative deviation {rel}");
    }

    #[test]
    fn point_q_conjugate_symmetry(
        zre in -4.0f64..4.0,
        zim in 0.05f64..3.0,
        dx in 0.4f64..3.0,
        dy in 0.4f64..3.0,
    ) {
        let cfg = PointConfiguration::new(vec![
            Vector3::zeros(),
            Vector3::new(dx, 0.0, 0.0),
            Vector3::new(0.0, dy, 0.7),
        ]).unwrap();
        let z = C64::new(zre, zim);
        let q = point_q_matrix(&cfg, &Energy::new(z)).unwrap();
        let qc = point_q_matrix(&cfg, &Energy::new(z.conj())).unwrap();
        let dev = (qc - q.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(dev < 1e-13);
    }

    #[test]
    fn point_q_hermitian_at_negative_energy(kappa in 0.1f64..10.0, d in 0.3f64..4.0) {
        let cfg = PointConfiguration::new(vec![
            Vector3::zeros(),
            Vector3::new(d, 0.0, 0.0),
        ]).unwrap();
        let q = point_q_matrix(&cfg, &Energy::from_kappa(kappa)).unwrap();
        let dev = (&q - q.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(dev < 1e-15);
        prop_assert!(q[(0, 0)].re < 0.0);
    }

    #[test]
    fn segment_q_conjugate_symmetry(
        zre in -3.0f64..3.0,
        zim in 0.1f64..2.0,
        n in 16usize..48,
    ) {
        // uniform weights make the discrete adjoint exact
        let model = SegmentModel::uniform(1.0, n, |_| 0.0);
        let z = C64::new(zre, zim);
        let q = build_segment_q(&model, &Energy::new(z));
        let qc = build_segment_q(&model, &Energy::new(z.conj()));
        let dev = (qc - q.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(dev < 1e-13);
    }
}
