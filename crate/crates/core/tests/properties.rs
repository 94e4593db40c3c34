use proptest::prelude::*;
use spinlab::bounds::*;
use spinlab::clifford::SplitRep;
use spinlab::linalg::{hermitian_residual, max_abs, norm_sq, re_inner};
use spinlab::models::ModelGeometry;
use spinlab::operators::*;
use spinlab::spectral::{analyze, synthesize, FourierSpinorField};
use spinlab::{CMatrix, CVector, C64};

fn split_strategy() -> impl Strategy<Value = SplitRep> {
    (1usize..5, 1usize..5, 0u8..2, 0u8..2).prop_map(|(m, n, a, b)| {
        SplitRep::new(m, n, if m % 2 == 1 { a } else { 0 }, if n % 2 == 1 { b } else { 0 }).unwrap()
    })
}

fn spinor(dim: usize, seed: &[f64]) -> CVector {
    CVector::from_iterator(dim, (0..dim).map(|k| C64::new(seed[(2 * k) % seed.len()], seed[(2 * k + 1) % seed.len()])))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn clifford_relation_on_split_vectors(split in split_strategy(), raw in prop::collection::vec(-1.0f64..1.0, 8)) {
        let (m, n) = (split.m(), split.n());
        let v = &raw[..m];
        let w = &raw[4..4 + n];
        let g = split.tangent_vector(v) + split.normal_vector(w);
        let len: f64 = v.iter().chain(w).map(|x| x * x).sum();
        let res = &g * &g + CMatrix::identity(split.fiber_dim(), split.fiber_dim()) * C64::new(len, 0.0);
        prop_assert!(max_abs(&res) < 1e-12);
    }

    #[test]
    fn omega_perp_moves_across_normal_vectors(split in split_strategy(), raw in prop::collection::vec(-1.0f64..1.0, 4)) {
        let h = split.normal_vector(&raw[..split.n()]);
        let w = split.omega_perp();
        let sign = if split.n() % 2 == 1 { 1.0 } else { -1.0 };
        prop_assert!(max_abs(&(&h * w - w * &h * C64::new(sign, 0.0))) < 1e-12);
    }

    #[test]
    fn tangent_action_is_a_clifford_module(split in split_strategy()) {
        let t = split.tangent_action();
        let eye = CMatrix::identity(split.fiber_dim(), split.fiber_dim());
        for a in 0..t.len() {
            for b in 0..t.len() {
                let anti = &t[a] * &t[b] + &t[b] * &t[a];
                let expect = if a == b { &eye * C64::new(-2.0, 0.0) } else { eye.clone() * C64::new(0.0, 0.0) };
                prop_assert!(max_abs(&(anti - expect)) < 1e-12);
            }
        }
    }

    #[test]
    fn synthesis_inverts_analysis(seed in 0u64..1000, k in 1usize..5) {
        let model = ModelGeometry::product_of_circles(vec![1.0, 0.7]).unwrap();
        let lattice = model.lattice(k).unwrap();
        let field = FourierSpinorField::random(&lattice, 4, k, seed);
        let n = lattice.min_grid() + 2;
        let values = synthesize(&lattice, field.coeffs(), 4, n).unwrap();
        let back = analyze(&lattice, &values, 4, n).unwrap();
        let err: f64 = back.iter().zip(field.coeffs()).map(|(a, b)| norm_sq(&(a - b))).sum();
        prop_assert!(err < 1e-24 * (1.0 + field.norm_sq()));
        let grid = field.norm_sq_on_grid(n).unwrap();
        prop_assert!((grid - field.norm_sq()).abs() < 1e-12 * field.norm_sq());
    }

    #[test]
    fn dh_blocks_are_hermitian(r1 in 0.3f64..3.0, r2 in 0.3f64..3.0) {
        let model = ModelGeometry::product_of_circles(vec![r1, r2]).unwrap();
        let split = SplitRep::new(2, 2, 0, 0).unwrap();
        let ops = TorusOperators::new(&model, &split, 2).unwrap();
        let dh = ops.blocks(OperatorTag::SubmanifoldDirac).unwrap();
        let dt = ops.blocks(OperatorTag::AmbientDirac).unwrap();
        prop_assert!(dh.iter().all(|b| hermitian_residual(&b.matrix) < 1e-12));
        prop_assert!(square_identity_residual(&dh, &dt) < 1e-10);
    }

    #[test]
    fn energy_momentum_is_symmetric(seed in 0u64..1000) {
        let model = ModelGeometry::product_of_circles(vec![1.0, 1.3]).unwrap();
        let split = SplitRep::new(2, 2, 0, 0).unwrap();
        let ops = TorusOperators::new(&model, &split, 2).unwrap();
        let field = FourierSpinorField::random(&ops.lattice, 4, 2, seed);
        let jet = torus_jet(&ops, &field, 6).unwrap();
        for q in energy_momentum(&split, &jet).unwrap().q.iter().flatten() {
            prop_assert!((q - q.transpose()).amax() < 1e-12 * (1.0 + q.amax()));
        }
    }

    #[test]
    fn kappa_is_positively_homogeneous(seed in 0u64..1000, t in 0.1f64..5.0) {
        let split = SplitRep::new(3, 2, 0, 0).unwrap();
        let rn = NormalCurvature::random(3, 2, 1.0, seed);
        let k = kappa1(&split, std::slice::from_ref(&rn)).unwrap();
        let kt = kappa1(&split, &[rn.scaled(t)]).unwrap();
        prop_assert!((kt - t * k).abs() < 1e-11 * (1.0 + t * k.abs()));
    }

    #[test]
    fn kappa_bounds_the_curvature_term(seed in 0u64..1000, raw in prop::collection::vec(-1.0f64..1.0, 16)) {
        let split = SplitRep::new(2, 2, 0, 0).unwrap();
        let rn = NormalCurvature::random(2, 2, 2.0, seed);
        let op = curvature_operator(&split, &rn).unwrap();
        let psi = spinor(split.fiber_dim(), &raw);
        prop_assume!(norm_sq(&psi) > 1e-6);
        let k = kappa1(&split, &[rn]).unwrap();
        prop_assert!(re_inner(&(&op * &psi), &psi) / norm_sq(&psi) >= k - 1e-10);
    }

    #[test]
    fn cauchy_schwarz_deficit_is_nonnegative(split in split_strategy(), raw in prop::collection::vec(-1.0f64..1.0, 20)) {
        let h = &raw[..split.n()];
        let psi = spinor(split.fiber_dim(), &raw[4..]);
        prop_assume!(norm_sq(&psi) > 1e-6);
        prop_assert!(cauchy_schwarz_deficit(&split, h, &psi) >= -1e-12);
    }

    #[test]
    fn q_choices_solve_their_defining_equations(m in 2usize..6, b in 0.01f64..3.0, gap in 0.01f64..5.0) {
        let a = (b + gap).powi(2);
        for form in [QForm::Presq, QForm::Qpres] {
            let q = q_choice(form, m, a, b).unwrap();
            prop_assert!(q_choice_residual(form, m, a, b, q) < 1e-10);
        }
    }

    #[test]
    fn twelve_digit_rendering_round_trips(x in -1e15f64..1e15, e in -20i32..20) {
        let y = x * 10f64.powi(e);
        let back: f64 = format_sig12(y).parse().unwrap();
        prop_assert!((back - y).abs() <= 1e-11 * y.abs());
    }
}
