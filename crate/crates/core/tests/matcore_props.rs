use nhmetro_core::matcore::{eig_decompose, herm_funct, mat_exp, mat_inverse, ComplexMatrix, SpectralFunction, C64, I};
use proptest::prelude::*;

fn entry(bound: f64) -> impl Strategy<Value = C64> {
    (-bound..bound, -bound..bound).prop_map(|(a, b)| C64::new(a, b))
}

fn matrix(dim: usize, bound: f64) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(entry(bound), dim * dim).prop_map(move |v| ComplexMatrix::from_vec(dim, v).unwrap())
}

fn hermitian(dim: usize, bound: f64) -> impl Strategy<Value = ComplexMatrix> {
    matrix(dim, bound).prop_map(|m| m.hermitian_part())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exp_inverse_pair(a in matrix(2, 5.0)) {
        // entries in ±5 keep the Frobenius norm at or below 10
        let a = if a.frobenius_norm() > 10.0 { a.scale_re(10.0 / a.frobenius_norm()) } else { a };
        let p = &mat_exp(&a).unwrap() * &mat_exp(&a.scale_re(-1.0)).unwrap();
        let err = p.distance(&ComplexMatrix::identity(2));
        // e^{±A} can reach ~e^{10} in norm, so compare relative to that scale
        let scale = mat_exp(&a).unwrap().frobenius_norm() * mat_exp(&a.scale_re(-1.0)).unwrap().frobenius_norm();
        prop_assert!(err < 1e-10 * scale.max(1.0), "err {err} scale {scale}");
    }

    #[test]
    fn hermitian_exponential_is_unitary(a in hermitian(2, 10.0), b in hermitian(4, 3.0)) {
        for m in [a, b] {
            let u = mat_exp(&m.scale(-I)).unwrap();
            let d = (&u.adjoint() * &u).distance(&ComplexMatrix::identity(m.dim()));
            prop_assert!(d < 1e-10);
        }
    }

    #[test]
    fn eigen_reconstruction(a in matrix(2, 3.0), b in matrix(4, 3.0)) {
        for m in [a, b] {
            let ed = eig_decompose(&m).unwrap();
            if ed.defective { continue; }
            let norm = m.frobenius_norm();
            prop_assert!(ed.reconstruct().unwrap().distance(&m) < 1e-9 * norm);
            for k in 0..m.dim() {
                let v = ed.eigenvector(k);
                let r = &m.mul_vec(&v) - &v.scale(ed.eigenvalues[k]);
                prop_assert!(r.norm() < 1e-10 * norm);
            }
        }
    }

    #[test]
    fn sqrt_squares_back(m in matrix(2, 2.0), n in matrix(4, 1.0)) {
        for x in [m, n] {
            let id = ComplexMatrix::identity(x.dim());
            let pd = &(&x.adjoint() * &x) + &id.scale_re(0.1);
            let s = herm_funct(&pd, SpectralFunction::Sqrt).unwrap();
            prop_assert!((&s * &s).distance(&pd) < 1e-9 * pd.frobenius_norm());
            prop_assert!(s.hermitian_deviation() < 1e-10);
            let inv = herm_funct(&pd, SpectralFunction::Inverse).unwrap();
            prop_assert!((&inv * &pd).distance(&id) < 1e-9);
        }
    }

    #[test]
    fn inverse_round_trip(a in matrix(2, 3.0)) {
        if let Ok(inv) = mat_inverse(&a) {
            let d = (&a * &inv).distance(&ComplexMatrix::identity(2));
            let cond = a.frobenius_norm() * inv.frobenius_norm();
            prop_assert!(d < 1e-14 * cond.max(1.0) * 100.0);
        }
    }
}

#[test]
fn exp_matches_taylor_for_large_norm() {
    // e^{−iθσ_x} stays exact even after many squarings
    let theta = 37.3;
    let u = mat_exp(&ComplexMatrix::pauli_x().scale(-I * theta)).unwrap();
    let expected = &ComplexMatrix::identity(2).scale_re(theta.cos()) - &ComplexMatrix::pauli_x().scale(I * theta.sin());
    assert!(u.distance(&expected) < 1e-12);
}
