//! Preset experiments reproducing the verification suites.

use std::f64::consts::PI;

use spinlab::bounds::BoundKind;

use crate::config::{
    AuxTorusSpec, CirclesSpec, ConstantSpec, ExperimentConfig, FlatTorusSpec, FunctionSpec, ModelSpec, OutputSpec, SphereSpec,
    Tolerances, WaveSpec,
};

fn base(name: &str, model: ModelSpec, truncation: usize, bounds: Vec<BoundKind>) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        model,
        split: None,
        truncation,
        bounds,
        eigenpairs: None,
        conformal: None,
        normal_curvature: None,
        quadrature_nodes: 24,
        seed: 0,
        output: OutputSpec::default(),
        tolerances: Tolerances::default(),
    }
}

pub fn sphere_equality(radius: f64) -> ExperimentConfig {
    base(
        "sphere-equality",
        ModelSpec::Sphere(SphereSpec { m: 2, radius }),
        1,
        vec![BoundKind::Basic, BoundKind::Kappa, BoundKind::EnergyMomentum, BoundKind::GenusZero],
    )
}

pub fn torus(r1: f64, r2: f64, bounds: Vec<BoundKind>, truncation: usize) -> ExperimentConfig {
    base("torus", ModelSpec::ProductOfCircles(CirclesSpec { radii: vec![r1, r2] }), truncation, bounds)
}

pub fn torus_bounds() -> ExperimentConfig {
    let mut cfg = torus(1.0, 1.0, vec![BoundKind::EnergyMomentum], 8);
    cfg.name = "torus-bounds".into();
    cfg
}

pub fn conformal_covariance() -> ExperimentConfig {
    let tau = 2.0 * PI;
    let mut cfg = base(
        "conformal-covariance",
        ModelSpec::FlatTorus(FlatTorusSpec { m: 2, n: 1, periods: vec![tau, tau], shift: None }),
        16,
        vec![BoundKind::Conformal],
    );
    cfg.conformal = Some(FunctionSpec::Cosine(WaveSpec { mode: vec![1, 0], amplitude: 0.1 }));
    cfg.eigenpairs = Some(8);
    cfg.seed = 31;
    cfg
}

/// Holonomies in `{0, ½}²` crossed with `f ∈ {0, 0.7, cos θ₁}`.
pub fn aux_bundle(truncation: usize) -> Vec<ExperimentConfig> {
    let tau = 2.0 * PI;
    let fs = [
        ("f0", FunctionSpec::Zero),
        ("fconst", FunctionSpec::Constant(ConstantSpec { value: 0.7 })),
        ("fcos", FunctionSpec::Cosine(WaveSpec { mode: vec![1, 0], amplitude: 1.0 })),
    ];
    let mut out = Vec::new();
    for h1 in [0.0, 0.5] {
        for h2 in [0.0, 0.5] {
            for (tag, f) in &fs {
                out.push(base(
                    &format!("aux-bundle-h{h1}-{h2}-{tag}"),
                    ModelSpec::AuxiliaryTorus(AuxTorusSpec {
                        m: 2,
                        n: 2,
                        periods: vec![tau, tau],
                        shift: None,
                        holonomy: vec![vec![h1], vec![h2]],
                        f: f.clone(),
                    }),
                    truncation,
                    vec![BoundKind::TwistedBasic, BoundKind::TwistedEnergyMomentum],
                ));
            }
        }
    }
    out
}
