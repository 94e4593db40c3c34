mod common;

use std::f64::consts::PI;

use common::*;
use spinlab::bounds::*;
use spinlab::clifford::{base_rep, volume_element, SplitRep};
use spinlab::linalg::{max_abs, max_abs_vec, norm_sq};
use spinlab::models::{gauss_formula_residual, ConformalData, ModelGeometry};
use spinlab::operators::*;
use spinlab::spectral::{BandLimited, FourierSpinorField};
use spinlab::{CMatrix, CVector, RMatrix, C64};

const Q_PRESQ_M2_A9_B1: f64 = 0.146_446_609_406_726_24;
const Q_QPRES_M2_A9_B1: f64 = 0.5;
const SPHERE_MEAN_CURVATURE_NORM: f64 = 2.0;
const CIRCLES_SPIN_SHIFT: [f64; 2] = [0.5, 0.5];
const AUX_HALF_HOLONOMY_GAP: f64 = 0.5;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn aux(holonomy: [f64; 2], f: BandLimited) -> ModelGeometry {
    let tau = 2.0 * PI;
    ModelGeometry::auxiliary_torus(2, 2, vec![tau, tau], vec![0.0, 0.0], vec![vec![holonomy[0]], vec![holonomy[1]]], f)
        .unwrap()
}

#[test]
fn base_generators() {
    let r0 = base_rep(1, 0).unwrap();
    assert_eq!(r0.generator(0)[(0, 0)], C64::new(0.0, -1.0));
    assert!((volume_element(&r0)[(0, 0)] - c(1.0)).norm() < 1e-15);
    let r1 = base_rep(1, 1).unwrap();
    assert_eq!(r1.generator(0)[(0, 0)], C64::new(0.0, 1.0));
    assert!((volume_element(&r1)[(0, 0)] - c(-1.0)).norm() < 1e-15);
    let r2 = base_rep(2, 0).unwrap();
    let w = r2.generator(0) * r2.generator(1) * C64::new(0.0, 1.0);
    let expect = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0), c(-1.0)]));
    assert!(max_abs(&(w - expect)) < 1e-15);
    assert!(base_rep(3, 0).is_err());
}

#[test]
fn q_choices_for_constant_data() {
    let q = q_choice(QForm::Presq, 2, 9.0, 1.0).unwrap();
    assert!((q - Q_PRESQ_M2_A9_B1).abs() < 1e-15);
    assert!(((1.0 - 2.0 * q).powi(2) - 0.5).abs() < 1e-14);
    let q = q_choice(QForm::Qpres, 2, 9.0, 1.0).unwrap();
    assert!((q - Q_QPRES_M2_A9_B1).abs() < 1e-15);
}

#[test]
fn qpres_bracket_equalizes_on_circles() {
    let model = ModelGeometry::product_of_circles(vec![1.0, 1.0]).unwrap();
    let split = SplitRep::new(2, 2, 0, 0).unwrap();
    let ops = TorusOperators::new(&model, &split, 3).unwrap();
    let spec = spectrum(&ops.blocks(OperatorTag::SubmanifoldDirac).unwrap(), &ops.lattice, HERMITIAN_TOL).unwrap();
    let h2 = 2.0f64;
    for k in 0..spec.pairs.len() {
        let jet = torus_jet(&ops, &spec.field(k), ops.lattice.min_grid()).unwrap();
        let em = energy_momentum(&split, &jet).unwrap();
        let a = 4.0 * em.norm_sq.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
        if a - h2 <= 1e-6 {
            continue;
        }
        let q = q_choice(QForm::Qpres, 2, a, h2.sqrt()).unwrap();
        let gap = (a.sqrt() - h2.sqrt()).powi(2);
        assert!((bracket_curvature_term(QForm::Qpres, 2, a, h2.sqrt(), q) - gap).abs() < 1e-12 * (1.0 + gap));
    }
}

#[test]
fn sphere_scalars() {
    for r in [1.0, 0.5, 2.0] {
        let s = ModelGeometry::sphere(2, r).unwrap();
        assert!((s.mean_curvature_norm() - SPHERE_MEAN_CURVATURE_NORM / r).abs() < 1e-14);
        assert!((s.scalar_curvature() - 2.0 / (r * r)).abs() < 1e-14);
        let area: f64 = s.quadrature(16).unwrap().iter().map(|p| p.1).sum();
        assert!((area - 4.0 * PI * r * r).abs() < 1e-12);
    }
}

#[test]
fn mean_curvature_is_the_trace() {
    let models = [
        ModelGeometry::sphere(2, 1.3).unwrap(),
        ModelGeometry::product_of_circles(vec![1.0, 0.4, 2.0]).unwrap(),
        ModelGeometry::flat_torus(2, 3, vec![1.0, 2.0], vec![0.0, 0.0]).unwrap(),
    ];
    for model in &models {
        for x in model.sample_points(10, 1) {
            let h = model.second_fundamental_form(&x).unwrap();
            let trace: Vec<f64> = (0..model.n()).map(|a| (0..model.m()).map(|i| h[i][i][a]).sum()).collect();
            let hv = model.mean_curvature(&x).unwrap();
            assert!(trace.iter().zip(&hv).all(|(a, b)| (a - b).abs() < 1e-12));
        }
        assert!(gauss_formula_residual(model, &model.sample_points(10, 2)).unwrap() < 1e-9);
    }
}

#[test]
fn circle_loops_bound_spin_structures() {
    let model = ModelGeometry::product_of_circles(vec![1.0, 0.7]).unwrap();
    let split = SplitRep::new(2, 2, 0, 0).unwrap();
    assert_eq!(model.measure_spin_shift(&split).unwrap(), CIRCLES_SPIN_SHIFT.to_vec());
    let full = ambient_spin_connection_direct(&model, &split, &[0.0, 0.0]).unwrap();
    let psi = CVector::from_vec(vec![c(1.0), c(0.5), C64::new(0.0, 0.3), c(-0.2)]);
    for (i, r) in [1.0, 0.7].iter().enumerate() {
        let end = rk4_transport(&full[i], &psi, 2.0 * PI * r, 4000);
        assert!(max_abs_vec(&(end + &psi)) < 1e-10);
    }
}

#[test]
fn auxiliary_holonomy_by_transport() {
    for h in [0.0, 0.5] {
        let model = aux([h, 0.0], BandLimited::zero(vec![2.0 * PI; 2]));
        let split = SplitRep::new(2, 2, 0, 0).unwrap();
        let conn = connection_matrices(&model, &split, &[0.0, 0.0], ConnectionKind::Intrinsic).unwrap();
        let psi = CVector::from_vec(vec![c(0.3), c(1.0), C64::new(0.0, -0.4), c(0.1)]);
        let end = rk4_transport(&conn[0], &psi, 2.0 * PI, 4000);
        let sign = if h == 0.0 { 1.0 } else { -1.0 };
        assert!(max_abs_vec(&(end - &psi * c(sign))) < 1e-10);
        let frame = model.auxiliary_bundle_data().unwrap().normal_connection[0].clone();
        let step = expm_series(&(frame * (-2.0 * PI)));
        assert!((step - RMatrix::identity(2, 2)).amax() < 1e-10);
    }
}

fn expm_series(a: &RMatrix) -> RMatrix {
    let mut term = RMatrix::identity(a.nrows(), a.ncols());
    let mut sum = term.clone();
    for k in 1..60 {
        term = &term * a / k as f64;
        sum += &term;
    }
    sum
}

#[test]
fn auxiliary_spectral_gap() {
    let split = SplitRep::new(2, 2, 0, 0).unwrap();
    let zero = BandLimited::zero(vec![2.0 * PI; 2]);
    let gap = |h: [f64; 2]| {
        let op = assemble_df(&aux(h, zero.clone()), &split, 3, TwistSign::Standard).unwrap();
        op.spectrum(1e-12).unwrap().values().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
    };
    assert!(gap([0.0, 0.0]) < 1e-12);
    assert!((gap([0.5, 0.0]) - AUX_HALF_HOLONOMY_GAP).abs() < 1e-12);
    assert!((gap([0.5, 0.5]) - AUX_HALF_HOLONOMY_GAP * 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn flat_torus_dirac_spectrum() {
    let model = ModelGeometry::flat_torus(2, 2, vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
    let split = SplitRep::new(2, 2, 0, 0).unwrap();
    let ops = TorusOperators::new(&model, &split, 3).unwrap();
    let spec = spectrum(&ops.blocks(OperatorTag::Dirac).unwrap(), &ops.lattice, 1e-12).unwrap();
    let mut expect = Vec::new();
    for k in ops.lattice.modes() {
        let norm = 2.0 * PI * ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
        for s in [-1.0, -1.0, 1.0, 1.0] {
            expect.push(s * norm);
        }
    }
    expect.sort_by(f64::total_cmp);
    assert!(max_diff(&spec.values(), &expect) < 1e-12);
}

#[test]
fn dense_oracle_matches_mode_coupled_df() {
    let f = BandLimited::cosine(vec![2.0 * PI; 2], vec![1, 1], 0.8).unwrap();
    let model = aux([0.5, 0.0], f.clone());
    let split = SplitRep::new(2, 2, 0, 0).unwrap();
    let op = assemble_df(&model, &split, 3, TwistSign::Standard).unwrap();
    let dense = dense_eigenvalues(&dense_df(&model, &split, &op.lattice, &f));
    assert!(max_diff(&op.spectrum(1e-12).unwrap().values(), &dense) < 1e-10);
}

#[test]
fn opposite_twist_sign_mirrors_constant_f_spectrum() {
    let split = SplitRep::new(2, 2, 0, 0).unwrap();
    let model = aux([0.5, 0.0], BandLimited::constant(vec![2.0 * PI; 2], 0.7));
    let plus = assemble_df(&model, &split, 3, TwistSign::Standard).unwrap().spectrum(1e-12).unwrap().values();
    let minus = assemble_df(&model, &split, 3, TwistSign::Opposite).unwrap().spectrum(1e-12).unwrap().values();
    assert!(max_diff(&plus, &minus) < 1e-12);
}

#[test]
fn zero_conformal_factor_is_the_identity() {
    let model = ModelGeometry::flat_torus(2, 1, vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
    let lattice = model.lattice(6).unwrap();
    let field = FourierSpinorField::random(&lattice, 2, 3, 5);
    let conf = ConformalData::constant(&model, 0.0).unwrap();
    let moved = conformal_transport(&field, &conf, -0.5, 1e-12).unwrap();
    assert!(moved.sub(&field).norm_sq() < 1e-28 * field.norm_sq());
}

#[test]
fn parseval() {
    let model = ModelGeometry::product_of_circles(vec![1.0, 0.5]).unwrap();
    let lattice = model.lattice(5).unwrap();
    let field = FourierSpinorField::random(&lattice, 4, 5, 8);
    let grid = field.norm_sq_on_grid(lattice.min_grid()).unwrap();
    assert!((grid - field.norm_sq()).abs() < 1e-12 * field.norm_sq());
}

#[test]
fn literal_q_connection_breaks_the_identity_in_even_codimension() {
    let model = ModelGeometry::product_of_circles(vec![1.0, 1.0]).unwrap();
    let split = SplitRep::new(2, 2, 0, 0).unwrap();
    let ops = TorusOperators::new(&model, &split, 3).unwrap();
    let spec = spectrum(&ops.blocks(OperatorTag::SubmanifoldDirac).unwrap(), &ops.lattice, HERMITIAN_TOL).unwrap();
    let ctx = BoundContext::new(&model, &split);
    let k = spec.pairs.iter().position(|p| p.value.abs() > 0.5).unwrap();
    let jet = torus_jet(&ops, &spec.field(k), 2 * ops.lattice.min_grid()).unwrap();
    let lam = spec.pairs[k].value;
    let good = integral_identity_check(IdentityKind::Qpres, &ctx, lam, &jet, &[0.3], QConnectionSign::Consistent).unwrap();
    let bad = integral_identity_check(IdentityKind::Qpres, &ctx, lam, &jet, &[0.3], QConnectionSign::Literal).unwrap();
    assert!(good.residual < 1e-12);
    assert!(bad.residual > 1e-2);

    let sphere = ModelGeometry::sphere(2, 1.0).unwrap();
    let split = SplitRep::new(2, 1, 0, 0).unwrap();
    let psi0 = CVector::from_vec(vec![c(1.0), c(0.0)]);
    let jet = restricted_parallel_jet(&sphere, &split, &psi0, &sphere.quadrature(12).unwrap()).unwrap();
    let ctx = BoundContext::new(&sphere, &split);
    let lit = integral_identity_check(IdentityKind::Qpres, &ctx, 0.0, &jet, &[0.4], QConnectionSign::Literal).unwrap();
    assert!(lit.residual < 1e-12);
}

#[test]
fn sphere_bounds_sit_at_equality() {
    let model = ModelGeometry::sphere(2, 1.0).unwrap();
    let split = SplitRep::new(2, 1, 0, 0).unwrap();
    let psi0 = CVector::from_vec(vec![c(0.6), C64::new(0.0, 0.8)]);
    let jet = restricted_parallel_jet(&model, &split, &psi0, &model.quadrature(12).unwrap()).unwrap();
    let ctx = BoundContext::new(&model, &split);
    for kind in [BoundKind::Basic, BoundKind::Kappa, BoundKind::EnergyMomentum, BoundKind::GenusZero] {
        let rep = evaluate_bound(kind, &ctx, 0.0, &jet).unwrap();
        assert!(rep.rhs.abs() < 1e-12, "{kind}");
        assert!(!rep.hypothesis_ok);
        assert!(rep.violated_clause.is_some());
    }
    let min_sq = jet.samples.iter().map(|s| norm_sq(&s.psi)).fold(f64::INFINITY, f64::min);
    assert!((min_sq - 1.0).abs() < 1e-12);
}

#[test]
fn restricted_parallel_spinors_obey_the_gauss_formula() {
    let model = ModelGeometry::sphere(2, 0.8).unwrap();
    let split = SplitRep::new(2, 1, 0, 0).unwrap();
    let psi0 = CVector::from_vec(vec![c(0.2), c(1.0)]);
    let pts: Vec<(Vec<f64>, f64)> = model.sample_points(5, 3).into_iter().map(|x| (x, 1.0)).collect();
    let jet = restricted_parallel_jet(&model, &split, &psi0, &pts).unwrap();
    for s in &jet.samples {
        let psi_at = |y: &[f64]| restricted_parallel_jet(&model, &split, &psi0, &[(y.to_vec(), 1.0)]).unwrap().samples[0].psi.clone();
        let scales = model.coordinate_scales(&s.point);
        for i in 0..2 {
            let d = fd_spinor_derivative(&psi_at, &s.point, i, TRANSPORT_STEP) / c(scales[i]);
            let direct = ambient_spin_connection_direct(&model, &split, &s.point).unwrap();
            assert!(max_abs_vec(&(d + &direct[i] * &s.psi)) < 1e-10);
        }
    }
}
