//! Property tests for identities that hold exactly (up to rounding) for every
//! input: ball automorphisms, the Kobayashi distance, the box quasi-metric,
//! boundary projection and the sampling maps.

use dyadlab::metrics::{ball_automorphism, ball_kobayashi, boundary_quasidist};
use dyadlab::numeric::{fit_line, kahan_sum};
use dyadlab::qmc::{ball_point, sphere_point};
use dyadlab::{CPoint, Domain, DomainSpec};
use proptest::prelude::*;

fn unit_coords(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, len)
}

/// Dimension and a point strictly inside the unit ball, `|z| <= 0.95`.
fn interior_point() -> impl Strategy<Value = (usize, CPoint)> {
    (1usize..=3).prop_flat_map(|n| unit_coords(2 * n).prop_map(move |u| (n, ball_point(n, &u) * 0.95)))
}

fn interior_pair() -> impl Strategy<Value = (CPoint, CPoint, CPoint)> {
    (1usize..=3).prop_flat_map(|n| {
        (unit_coords(2 * n), unit_coords(2 * n), unit_coords(2 * n))
            .prop_map(move |(a, b, c)| (ball_point(n, &a) * 0.95, ball_point(n, &b) * 0.95, ball_point(n, &c) * 0.95))
    })
}

fn close(a: &CPoint, b: &CPoint, tol: f64) -> bool {
    (*a - *b).norm() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn automorphism_is_an_involution_swapping_z_and_origin((z, w, _) in interior_pair()) {
        prop_assert!(close(&ball_automorphism(&z, &ball_automorphism(&z, &w)), &w, 1e-9));
        prop_assert!(ball_automorphism(&z, &z).norm() <= 1e-12);
        prop_assert!(close(&ball_automorphism(&z, &CPoint::zeros(z.dim())), &z, 1e-12));
        prop_assert!(ball_automorphism(&z, &w).norm() < 1.0);
    }

    #[test]
    fn kobayashi_is_symmetric_and_automorphism_invariant((a, z, w) in interior_pair()) {
        let k = ball_kobayashi(&z, &w);
        prop_assert!(k >= 0.0);
        prop_assert!((k - ball_kobayashi(&w, &z)).abs() <= 1e-10 * (1.0 + k));
        let moved = ball_kobayashi(&ball_automorphism(&a, &z), &ball_automorphism(&a, &w));
        prop_assert!((k - moved).abs() <= 1e-8 * (1.0 + k), "{k} vs {moved}");
        prop_assert_eq!(ball_kobayashi(&z, &z), 0.0);
    }

    #[test]
    fn kobayashi_from_origin_is_arctanh_of_the_norm((_, z) in interior_point()) {
        let k = ball_kobayashi(&CPoint::zeros(z.dim()), &z);
        prop_assert!((k - z.norm().atanh()).abs() <= 1e-10);
    }

    #[test]
    fn kobayashi_triangle_inequality((a, b, c) in interior_pair()) {
        let ab = ball_kobayashi(&a, &b);
        let bc = ball_kobayashi(&b, &c);
        let ac = ball_kobayashi(&a, &c);
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn box_quasidistance_on_the_sphere(n in 1usize..=3, u in unit_coords(5), v in unit_coords(5)) {
        let d = Domain::ball(n);
        let zeta = sphere_point(n, &u);
        let xi = sphere_point(n, &v);
        let dz = boundary_quasidist(&d, &zeta, &xi).unwrap();
        let dx = boundary_quasidist(&d, &xi, &zeta).unwrap();
        prop_assert!((dz - dx).abs() <= 1e-12);
        prop_assert!(dz + 1e-15 >= (zeta - xi).norm());
        prop_assert!(boundary_quasidist(&d, &zeta, &zeta).unwrap() == 0.0);
    }

    #[test]
    fn inner_product_is_conjugate_symmetric((a, b, _) in interior_pair()) {
        prop_assert!((a.inner(&b) - b.inner(&a).conj()).norm() <= 1e-15);
        prop_assert!((a.inner(&a).re - a.norm_sqr()).abs() <= 1e-15);
        prop_assert!((a.dot(&b) - b.dot(&a)).norm() <= 1e-15);
    }

    #[test]
    fn sampling_maps_land_on_sphere_and_in_ball(n in 1usize..=3, u in unit_coords(6)) {
        prop_assert!((sphere_point(n, &u).norm() - 1.0).abs() <= 1e-14);
        prop_assert!(ball_point(n, &u).norm() <= 1.0 + 1e-15);
    }

    #[test]
    fn ellipsoid_projection_is_a_nearest_boundary_point(
        w1 in 0.5..2.0f64, w2 in 0.5..2.0f64, u in unit_coords(4), t in 0.6..0.999f64
    ) {
        let d = Domain::new(DomainSpec::Ellipsoid { n: 2, weights: vec![w1, w2] }).unwrap();
        let dir = sphere_point(2, &u);
        let edge = d.radial_boundary_point(&dir);
        prop_assert!(d.rho(&edge).abs() <= 1e-10);
        let z = edge * t;
        prop_assert!(d.contains(&z));
        let p = d.project(&z);
        prop_assert!(d.rho(&p.point).abs() <= 1e-9);
        prop_assert!(p.delta <= (z - edge).norm() + 1e-12);
        prop_assert!((p.delta - (z - p.point).norm()).abs() <= 1e-12);
    }

    #[test]
    fn ball_delta_is_one_minus_norm((_, z) in interior_point()) {
        let d = Domain::ball(z.dim());
        prop_assert!((d.delta(&z) - (1.0 - z.norm())).abs() <= 1e-15);
    }

    #[test]
    fn line_fit_recovers_exact_lines(a in -5.0..5.0f64, b in -5.0..5.0f64, k in 3usize..20) {
        let x: Vec<f64> = (0..k).map(|i| i as f64 * 0.7 - 2.0).collect();
        let y: Vec<f64> = x.iter().map(|x| a * x + b).collect();
        let fit = fit_line(&x, &y);
        prop_assert!((fit.slope - a).abs() <= 1e-10);
        prop_assert!((fit.intercept - b).abs() <= 1e-10);
    }

    #[test]
    fn compensated_sum_is_order_independent(mut xs in prop::collection::vec(-1e6..1e6f64, 1..200), seed in any::<u64>()) {
        let forward = kahan_sum(xs.iter().copied());
        let mut s = seed;
        for i in (1..xs.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            xs.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = kahan_sum(xs.iter().copied());
        let scale: f64 = xs.iter().map(|x| x.abs()).sum();
        prop_assert!((forward - shuffled).abs() <= 1e-14 * scale.max(1.0));
    }
}
