mod common;

use proptest::prelude::*;
use sbp_core::functional::eval_j;
use sbp_core::grid::{apply_laplacian_dirichlet, apply_laplacian_neumann};
use sbp_core::manifold::{constraint_values, retract, tangent_project, RetractOptions};
use sbp_core::problem::classify_alpha;
use sbp_core::reduction::{apply_l, phi_map};
use sbp_core::{BoundaryData, FeasibilityClass, GridSpec, ScalarField};

use common::{affine_problem, rough_field, rng, smooth_field};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacians_are_self_adjoint_in_the_quadrature_product(seed in any::<u64>(), dim in 1usize..=3) {
        let n = [33, 9, 5][dim - 1];
        let g = GridSpec::cube(dim, 1.0, n).unwrap();
        let mut r = rng(seed);
        let f = rough_field(&g, &mut r);
        let v = rough_field(&g, &mut r);
        let zero = BoundaryData::zeros(g.clone());
        let (nf, nv) = (apply_laplacian_neumann(&f, &zero), apply_laplacian_neumann(&v, &zero));
        let scale = nf.norm_l2() * v.norm_l2();
        prop_assert!((nf.inner(&v) - f.inner(&nv)).abs() <= 1e-12 * scale);
        let (df, dv) = (apply_laplacian_dirichlet(&f).unwrap(), apply_laplacian_dirichlet(&v).unwrap());
        prop_assert!((df.inner(&v) - f.inner(&dv)).abs() <= 1e-12 * scale);
    }

    #[test]
    fn l_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = GridSpec::cube(1, 1.0, 65).unwrap();
        let mut r = rng(seed);
        let f = smooth_field(&g, &mut r, 3);
        let h = rough_field(&g, &mut r);
        let opts = Default::default();
        let lf = apply_l(&f, &opts).unwrap().phi;
        let lh = apply_l(&h, &opts).unwrap().phi;
        let mut combo = f.scale(a);
        combo.axpy(b, &h);
        let lc = apply_l(&combo, &opts).unwrap().phi;
        let mut expect = lf.scale(a);
        expect.axpy(b, &lh);
        prop_assert!(lc.sub(&expect).max_abs() <= 1e-8 * (1.0 + expect.max_abs()));
    }

    #[test]
    fn reduction_and_energy_are_even(seed in any::<u64>()) {
        let pb = affine_problem(1, 33, 1.0, 0.25);
        let u = rough_field(&pb.grid, &mut rng(seed));
        let neg = u.scale(-1.0);
        prop_assert_eq!(phi_map(&u, &pb).unwrap(), phi_map(&neg, &pb).unwrap());
        prop_assert_eq!(eval_j(&u, &pb).unwrap().0.to_bits(), eval_j(&neg, &pb).unwrap().0.to_bits());
        prop_assert_eq!(constraint_values(&u, &pb), constraint_values(&neg, &pb));
    }

    #[test]
    fn retraction_is_idempotent(seed in any::<u64>()) {
        let pb = affine_problem(1, 65, 1.0, 0.25);
        let v = smooth_field(&pb.grid, &mut rng(seed), 4);
        prop_assume!(v.norm_l2() > 1e-3);
        if let Ok(u) = retract(&v, &pb, &RetractOptions::default()) {
            let c = constraint_values(&u, &pb);
            prop_assert!(c.max_abs() <= 1e-10);
            let again = retract(&u, &pb, &RetractOptions::default()).unwrap();
            prop_assert!(again.sub(&u).max_abs() <= 1e-12);
        }
    }

    #[test]
    fn tangent_projection_is_idempotent(seed in any::<u64>(), sobolev in any::<bool>()) {
        let pb = affine_problem(1, 65, 1.0, 0.25);
        let mut r = rng(seed);
        let u = smooth_field(&pb.grid, &mut r, 4);
        let g = rough_field(&pb.grid, &mut r);
        let metric = if sobolev {
            sbp_core::functional::GradientMetric::SobolevH10
        } else {
            sbp_core::functional::GradientMetric::L2
        };
        let once = tangent_project(&u, &g, &pb, metric).unwrap().tangent;
        let twice = tangent_project(&u, &once, &pb, metric).unwrap().tangent;
        prop_assert!(twice.sub(&once).max_abs() <= 1e-9 * (1.0 + once.max_abs()));
        let qu = pb.q.mul(&u);
        prop_assert!(once.inner(&u).abs() <= 1e-9 * once.norm_l2() * u.norm_l2());
        prop_assert!(once.inner(&qu).abs() <= 1e-9 * once.norm_l2() * qu.norm_l2());
    }

    #[test]
    fn interior_class_is_monotone_in_the_range_of_q(lo in -2.0f64..0.0, width in 0.1f64..3.0, t in 0.01f64..0.99) {
        let g = GridSpec::cube(1, 1.0, 33).unwrap();
        let q = ScalarField::from_fn(g, |x| lo + width * x[0]);
        let alpha = lo + t * width;
        prop_assert_eq!(classify_alpha(&q, alpha, None).class, FeasibilityClass::Interior);
        prop_assert_eq!(classify_alpha(&q, lo - 0.1, None).class, FeasibilityClass::Infeasible);
        prop_assert_eq!(classify_alpha(&q, lo + width + 0.1, None).class, FeasibilityClass::Infeasible);
    }

    #[test]
    fn gn_ratio_is_scale_invariant(seed in any::<u64>(), c in 0.1f64..10.0) {
        let pb = affine_problem(1, 65, 1.0, 0.25);
        let u = smooth_field(&pb.grid, &mut rng(seed), 3);
        prop_assume!(u.norm_l2() > 1e-3);
        let a = sbp_core::functional::gn_ratio(&u, &pb, 1.2).unwrap();
        let b = sbp_core::functional::gn_ratio(&u.scale(c), &pb, 1.2).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
    }
}
