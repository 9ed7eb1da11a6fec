use approx::assert_relative_eq;
use deltaloop::bracketing::{fit_log_over_beta, tensor_sums, width_schedule, CLAMP_FACTOR};
use deltaloop::coefficients::{StripField, StripGrid};
use deltaloop::geometry::CurveSpec;
use deltaloop::oracle2d::{Mesh, MeshControl};
use deltaloop::spectral1d::effective_spectrum;
use deltaloop::transverse::{est2_check, zeta_minus, zeta_plus};
use proptest::prelude::*;

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensor_sums_are_the_smallest_pairwise_sums(
        xi in prop::collection::vec(-50.0f64..50.0, 2..8),
        mu in prop::collection::vec(-5.0f64..50.0, 2..8),
        n in 1usize..6,
    ) {
        let n = n.min(xi.len() * mu.len());
        let all = sorted(xi.iter().flat_map(|x| mu.iter().map(move |m| x + m)).collect());
        match tensor_sums(&xi, &mu, n) {
            Ok(s) => prop_assert_eq!(s, all[..n].to_vec()),
            Err(_) => {
                // refused only when the truncation cannot certify the n-th sum
                let (xs, ms) = (sorted(xi.clone()), sorted(mu.clone()));
                let bound = (xs[xs.len() - 1] + ms[0]).min(xs[0] + ms[ms.len() - 1]);
                prop_assert!(all[n - 1] > bound);
            }
        }
    }

    #[test]
    fn transverse_levels_straddle_the_free_well(a in 0.05f64..2.0, beta in 5.0f64..300.0, gamma in 0.0f64..3.0) {
        // Robin ends with γa ≥ 1 carry bound states of their own near −γ²
        prop_assume!(beta * a > 8.0 / 3.0 && beta > 8.0 && beta > 8.0 * gamma / 3.0 && gamma * a < 1.0);
        let r = est2_check(a, beta, gamma);
        prop_assert!(r.strict_bounds_hold(), "{:?}", r);
        let zp = zeta_plus(a, beta).unwrap();
        let (zm, count) = zeta_minus(a, beta, gamma).unwrap();
        prop_assert_eq!(count, 1);
        prop_assert!(zm.value <= zp.value);
        prop_assert!(zp.offset > 0.0 && zm.offset < 0.0);
    }

    #[test]
    fn width_schedule_respects_the_cap(beta in 1.5f64..1000.0, max in 0.01f64..2.0) {
        let s = width_schedule(beta, max).unwrap();
        prop_assert!(s.a <= CLAMP_FACTOR * max + 1e-15);
        prop_assert_eq!(s.clamped, s.raw > CLAMP_FACTOR * max);
        if !s.clamped {
            prop_assert!((s.a - 6.0 * beta.ln() / beta).abs() < 1e-15);
        }
    }

    #[test]
    fn log_over_beta_fit_recovers_exact_data(l in -1.0f64..1.0, c in -5.0f64..5.0) {
        let betas = [50.0, 100.0, 200.0, 400.0];
        let y: Vec<f64> = betas.iter().map(|b: &f64| l + c * b.ln() / b).collect();
        let f = fit_log_over_beta(&betas, &y, None).unwrap();
        prop_assert!((f.limit - l).abs() < 1e-10);
        prop_assert!((f.c - c).abs() < 1e-8);
    }

    #[test]
    fn strip_field_binary_round_trip(values in prop::collection::vec(-1e6f64..1e6, 64 * 33), a in 0.01f64..1.0) {
        let field = StripField { name: "V".into(), grid: StripGrid::new(6.0, a, 64, 33).unwrap(), values };
        let mut buf = Vec::new();
        field.write_binary(&mut buf).unwrap();
        let back = StripField::read_binary(&buf).unwrap();
        prop_assert_eq!(back.values, field.values);
        prop_assert_eq!(back.grid, field.grid);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn circle_effective_spectrum_scales_with_radius(r in 0.3f64..4.0) {
        let c = CurveSpec::Circle { radius: r, center: [0.0, 0.0] }.build(256).unwrap();
        let unit = CurveSpec::unit_circle().build(256).unwrap();
        let s = effective_spectrum(&c, 5, 64).unwrap();
        let u = effective_spectrum(&unit, 5, 64).unwrap();
        for (x, y) in s.eigenvalues.iter().zip(&u.eigenvalues) {
            assert_relative_eq!(x * r * r, *y, epsilon = 1e-9);
        }
    }

    #[test]
    fn ray_meshes_survive_text_round_trip(sx in 0.6f64..2.0, sy in 0.6f64..2.0, cx in -0.2f64..0.2) {
        let c = CurveSpec::Ellipse { semi_x: sx, semi_y: sy, center: [cx, 0.0] }.build(512).unwrap();
        let control = MeshControl { n_theta: 12, n_inner: 4, n_outer: 4, ..MeshControl::default() };
        let mesh = Mesh::star_shaped(&c, &control).unwrap();
        let mut buf = Vec::new();
        mesh.write_text(&mut buf).unwrap();
        let back = Mesh::read_text(std::io::Cursor::new(buf)).unwrap();
        prop_assert_eq!(back, mesh);
    }
}
