use elliptica_core::elliptic::{EllipticCurve, Tau};
use elliptica_core::identities::{find_check, run_check, SamplePlan};
use elliptica_core::matrixalg::{kappa_int, relative_defect, t_basis_int, CMatrix};
use elliptica_core::rmatrix::BelavinR;
use num_complex::Complex64 as C;
use proptest::prelude::*;

const TWO_PI_I: C = C::new(0.0, std::f64::consts::TAU);

fn cell() -> impl Strategy<Value = (f64, f64)> {
    (0.0..1.0f64, 0.0..1.0f64)
}

fn modulus() -> impl Strategy<Value = Tau> {
    (-0.5..0.5f64, 0.5..1.2f64).prop_map(|(re, im)| Tau::new(C::new(re, im)).unwrap())
}

fn matrix(dim: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dim * dim).prop_map(move |v| {
        CMatrix::from_row_major(dim, v.into_iter().map(|(a, b)| C::new(a, b)).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn t_basis_product_rule(n in 1usize..5, a1 in -7i64..7, a2 in -7i64..7, b1 in -7i64..7, b2 in -7i64..7) {
        let lhs = &t_basis_int(a1, a2, n) * &t_basis_int(b1, b2, n);
        let rhs = t_basis_int(a1 + b1, a2 + b2, n).scale(kappa_int((a1, a2), (b1, b2), n));
        prop_assert!(lhs.dist(&rhs) < 1e-12);
    }

    #[test]
    fn kron_mixed_product(a in matrix(2), b in matrix(3), c in matrix(2), d in matrix(3)) {
        let lhs = &a.kron(&b) * &c.kron(&d);
        let rhs = (&a * &c).kron(&(&b * &d));
        prop_assert!(relative_defect(&lhs, &rhs) < 1e-13);
    }

    #[test]
    fn kronecker_lattice_shifts(tau in modulus(), z in cell(), u in cell(), m in -3i64..3, k in -2i64..2) {
        let cv = EllipticCurve::new(tau).unwrap();
        let t = tau.value();
        let z = C::new(z.0, z.1 * t.im);
        let u = C::new(u.0, u.1 * t.im);
        prop_assume!(tau.lattice_distance(z) > 0.05 && tau.lattice_distance(u) > 0.05);
        let shifted = cv.phi(z + m as f64 + t * k as f64, u).unwrap();
        let want = (-TWO_PI_I * u * k as f64).exp() * cv.phi(z, u).unwrap();
        prop_assert!((shifted - want).norm() / want.norm().max(1.0) < 1e-11);
        prop_assert!((cv.phi(u, z).unwrap() - cv.phi(z, u).unwrap()).norm() / want.norm().max(1.0) < 1e-12);
    }

    #[test]
    fn r_matrix_unitarity(n in 1usize..5, tau in modulus(), z in cell(), h in cell()) {
        let t = tau.value();
        let z = C::new(z.0, z.1 * t.im);
        let h = C::new(h.0, h.1 * t.im);
        let nf = n as f64;
        prop_assume!(tau.lattice_distance(z) > 0.05);
        prop_assume!(tau.lattice_distance(h * nf) / nf > 0.05);
        let fam = BelavinR::new(n, tau).unwrap().with_hbar_guard(0.0);
        let lhs = &fam.r12(h, z).unwrap() * &fam.r21(h, -z).unwrap();
        let cv = fam.curve();
        let rhs = CMatrix::scalar(n * n, nf * nf * (cv.wp(nf * h).unwrap() - cv.wp(z).unwrap()));
        prop_assert!(relative_defect(&lhs, &rhs) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sample_streams_are_reproducible(seed in any::<u64>()) {
        let plan = SamplePlan { seed, count: 4, ..SamplePlan::default() };
        let check = find_check("aybe").unwrap();
        let a = run_check(&check, &plan).unwrap();
        let b = run_check(&check, &plan).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.pass);
    }
}
