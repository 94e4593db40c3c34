//! Builds models and operators from a config, solves for eigenpairs and
//! evaluates bounds together with the invariants that must hold.

use std::fmt::Write as _;

use anyhow::{Context, Result};
use serde::Serialize;
use spinlab::bounds::{em_at, evaluate_bound, BoundContext, BoundKind, BoundReport, NormalCurvature};
use spinlab::clifford::{verify_identities, SplitRep};
use spinlab::linalg::{max_abs, norm_sq};
use spinlab::models::{conformal_scalar_curvature, yamabe_first_eigenvalue, ConformalData, ModelGeometry};
use spinlab::operators::{
    assemble_df, barred_dh, barred_dirac, barred_jet, conformal_transport, dh_at, relative_grid_residual,
    restricted_parallel_jet, spectrum, square_identity_residual, torus_jet, weighted_grid, OperatorTag, Spectrum,
    SpinorJet, TorusOperators, TwistSign, HERMITIAN_TOL,
};
use spinlab::spectral::FourierSpinorField;
use spinlab::{CVector, C64};

use crate::config::ExperimentConfig;

/// One asserted invariant: passes when `value ≤ tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Invariant {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Invariant {
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebraRow {
    pub m: usize,
    pub n: usize,
    pub parity_m: u8,
    pub parity_n: u8,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub experiment: String,
    pub invariants: Vec<Invariant>,
    pub reports: Vec<BoundReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub algebra: Vec<AlgebraRow>,
    #[serde(skip)]
    pub spectrum_csv: Option<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|i| i.passed)
    }

    /// Whether a report breaks its bound: hypothesis satisfied but `λ² < rhs − tol`.
    pub fn report_fails(report: &BoundReport, tol: f64) -> bool {
        report.hypothesis_ok && report.margin < -tol
    }
}

pub fn sort_reports(reports: &mut [BoundReport]) {
    reports.sort_by(|a, b| {
        a.bound_kind
            .cmp(&b.bound_kind)
            .then_with(|| a.model.cmp(&b.model))
            .then_with(|| a.lambda.total_cmp(&b.lambda))
    });
}

pub fn verify_algebra(max_dim: usize, tol: f64) -> Result<Outcome> {
    let mut rows = Vec::new();
    for m in 1..max_dim {
        for n in 1..=(max_dim - m) {
            for pm in if m % 2 == 1 { 0..2u8 } else { 0..1 } {
                for pn in if n % 2 == 1 { 0..2u8 } else { 0..1 } {
                    let split = SplitRep::new(m, n, pm, pn).with_context(|| format!("split ({m}, {n})"))?;
                    rows.push(AlgebraRow {
                        m,
                        n,
                        parity_m: pm,
                        parity_n: pn,
                        max_residual: verify_identities(&split).max_residual(),
                    });
                }
            }
        }
    }
    let worst = rows.iter().map(|r| r.max_residual).fold(0.0, f64::max);
    Ok(Outcome {
        experiment: format!("verify-algebra-{max_dim}"),
        invariants: vec![Invariant::at_most("clifford identities", worst, tol)],
        reports: Vec::new(),
        algebra: rows,
        spectrum_csv: None,
    })
}

struct Eigen {
    value: f64,
    jet: SpinorJet,
}

fn bound_context(cfg: &ExperimentConfig, model: &ModelGeometry, split: &SplitRep) -> Result<BoundContext> {
    let mut ctx = BoundContext::new(model, split);
    if let Some(rn) = &cfg.normal_curvature {
        ctx = ctx.with_normal_curvature(NormalCurvature::random(model.m(), model.n(), rn.scale, rn.seed));
    }
    if let Some(u) = &cfg.conformal {
        let periods = model.periods().unwrap_or_else(|| vec![2.0 * std::f64::consts::PI; model.m()]);
        let conf = ConformalData::new(model, u.build(&periods)?)?;
        ctx = ctx.with_conformal(conformal_scalar_curvature(model, &conf)?);
    }
    if cfg.bounds.contains(&BoundKind::Yamabe) && model.m() >= 3 {
        ctx = ctx.with_yamabe(yamabe_first_eigenvalue(model, cfg.truncation)?.mu1);
    }
    Ok(ctx)
}

fn select(spec: &Spectrum, count: Option<usize>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..spec.pairs.len()).collect();
    if let Some(c) = count {
        idx.sort_by(|&a, &b| spec.pairs[a].value.abs().total_cmp(&spec.pairs[b].value.abs()).then(a.cmp(&b)));
        idx.truncate(c);
        idx.sort_unstable();
    }
    idx
}

fn torus_eigen(ops: &TorusOperators, spec: &Spectrum, count: Option<usize>) -> Result<Vec<Eigen>> {
    let n = 2 * ops.lattice.min_grid();
    select(spec, count)
        .into_iter()
        .map(|k| Ok(Eigen { value: spec.pairs[k].value, jet: torus_jet(ops, &spec.field(k), n)? }))
        .collect()
}

fn conformal_invariants(
    cfg: &ExperimentConfig,
    model: &ModelGeometry,
    split: &SplitRep,
    ops: &TorusOperators,
    out: &mut Vec<Invariant>,
) -> Result<()> {
    let Some(u) = &cfg.conformal else { return Ok(()) };
    let conf = ConformalData::new(model, u.build(&model.periods().unwrap())?)?;
    let mf = model.m() as f64;
    let phi = FourierSpinorField::random(&ops.lattice, ops.fiber(), (cfg.truncation / 4).max(1), cfg.seed);
    let phi_bar = conformal_transport(&phi, &conf, -(mf - 1.0) / 2.0, cfg.tolerances.covariance * 1e-3)?;
    let n = ops.lattice.min_grid();
    let w = -(mf + 1.0) / 2.0;
    let tol = cfg.tolerances.covariance;
    out.push(Invariant::at_most(
        "dirac conformal covariance",
        relative_grid_residual(
            &barred_dirac(ops, &conf, &phi_bar, n)?,
            &weighted_grid(&ops.apply(OperatorTag::Dirac, &phi)?, &conf, w, n)?,
        ),
        tol,
    ));
    out.push(Invariant::at_most(
        "submanifold dirac conformal covariance",
        relative_grid_residual(
            &barred_dh(ops, &conf, &phi_bar, n)?,
            &weighted_grid(&ops.apply(OperatorTag::SubmanifoldDirac, &phi)?, &conf, w, n)?,
        ),
        tol,
    ));
    let flat = torus_jet(ops, &phi, n)?;
    let barred = barred_jet(ops, &conf, &phi_bar, n)?;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (a, b) in flat.samples.iter().zip(&barred.samples) {
        let q = em_at(split, a) * (-conf.u.eval(&a.point)).exp();
        num = num.max((em_at(split, b) - &q).amax());
        den = den.max(q.amax());
    }
    out.push(Invariant::at_most("energy-momentum conformal scaling", num / den.max(1e-300), tol));
    Ok(())
}

fn sphere_eigen(cfg: &ExperimentConfig, model: &ModelGeometry, split: &SplitRep, out: &mut Vec<Invariant>) -> Result<Vec<Eigen>> {
    let points = model.quadrature(cfg.quadrature_nodes)?;
    let fiber = split.fiber_dim();
    let mut worst = 0.0f64;
    let mut eigen = Vec::new();
    for k in 0..fiber {
        let mut psi0 = CVector::zeros(fiber);
        psi0[k] = C64::new(1.0, 0.0);
        let jet = restricted_parallel_jet(model, split, &psi0, &points)?;
        for s in &jet.samples {
            let h = model.mean_curvature(&s.point)?;
            worst = worst.max((norm_sq(&dh_at(split, &h, s)) / norm_sq(&s.psi)).sqrt());
        }
        eigen.push(Eigen { value: 0.0, jet });
    }
    out.push(Invariant::at_most("restricted parallel spinors in kernel of D_H", worst, cfg.tolerances.residual));
    Ok(eigen)
}

fn sphere_csv(count: usize) -> String {
    let mut s = String::from("index,mode,eigenvalue,weight\n");
    for k in 0..count {
        let _ = writeln!(s, "{k},parallel,{:.12e},{:.12e}", 0.0, 1.0);
    }
    s
}

fn evaluate(
    kinds: &[BoundKind],
    ctx: &BoundContext,
    eigen: &[Eigen],
) -> Result<Vec<BoundReport>> {
    let mut out = Vec::new();
    for &kind in kinds {
        for e in eigen {
            out.push(evaluate_bound(kind, ctx, e.value, &e.jet).with_context(|| format!("bound {kind}"))?);
        }
    }
    Ok(out)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let tol = cfg.tolerances;
    let model = cfg.model.build().context("building model")?;
    let split = cfg.build_split(&model).context("building Clifford representation")?;
    let ctx = bound_context(cfg, &model, &split)?;
    let mut invariants = Vec::new();
    let (twisted, plain): (Vec<BoundKind>, Vec<BoundKind>) = cfg.bounds.iter().partition(|k| k.is_twisted());
    let mut reports = Vec::new();
    let spectrum_csv;

    if model.is_sphere() {
        let eigen = sphere_eigen(cfg, &model, &split, &mut invariants)?;
        spectrum_csv = sphere_csv(eigen.len());
        reports.extend(evaluate(&plain, &ctx, &eigen)?);
        reports.extend(evaluate(&twisted, &ctx, &eigen)?);
    } else {
        let ops = TorusOperators::new(&model, &split, cfg.truncation).context("assembling torus operators")?;
        let dh = ops.blocks(OperatorTag::SubmanifoldDirac)?;
        let dt = ops.blocks(OperatorTag::AmbientDirac)?;
        let herm = dh.iter().map(|b| max_abs(&(&b.matrix - b.matrix.adjoint()))).fold(0.0, f64::max);
        invariants.push(Invariant::at_most("D_H hermitian", herm, tol.hermitian));
        invariants.push(Invariant::at_most("D_H^2 = D~* D~", square_identity_residual(&dh, &dt), tol.square));
        let relation = (0..ops.lattice.len())
            .map(|idx| {
                max_abs(&(ops.dh_block(idx) - ops.twisted_block(idx) - ops.gamma_h() * split.omega_perp() * C64::new(0.5, 0.0)))
            })
            .fold(0.0, f64::max);
        invariants.push(Invariant::at_most("D_H = D_M + H.w/2", relation, tol.relation));
        conformal_invariants(cfg, &model, &split, &ops, &mut invariants)?;

        let dh_spec = spectrum(&dh, &ops.lattice, HERMITIAN_TOL)?;
        let aux = model.auxiliary_bundle_data().is_ok();
        let df_spec = if aux {
            let op = assemble_df(&model, &split, cfg.truncation, TwistSign::Standard)?;
            invariants.push(Invariant::at_most("D_f hermitian", op.hermitian_residual(), tol.hermitian));
            Some(op.spectrum(HERMITIAN_TOL)?)
        } else {
            None
        };
        spectrum_csv = df_spec.as_ref().unwrap_or(&dh_spec).to_csv();
        if !plain.is_empty() {
            reports.extend(evaluate(&plain, &ctx, &torus_eigen(&ops, &dh_spec, cfg.eigenpairs)?)?);
        }
        if !twisted.is_empty() {
            let spec = df_spec.as_ref().context("twisted bounds need an auxiliary-torus model")?;
            reports.extend(evaluate(&twisted, &ctx, &torus_eigen(&ops, spec, cfg.eigenpairs)?)?);
        }
    }

    sort_reports(&mut reports);
    let violation = reports.iter().filter(|r| r.hypothesis_ok).map(|r| -r.margin).fold(0.0, f64::max);
    invariants.push(Invariant::at_most("bound margin violation", violation, tol.margin));
    let inconsistent = reports.iter().filter(|r| r.equality_consistent() == Some(false)).count();
    invariants.push(Invariant::at_most("equality cases without limiting equations", inconsistent as f64, 0.0));
    Ok(Outcome { experiment: cfg.name.clone(), invariants, reports, algebra: Vec::new(), spectrum_csv: Some(spectrum_csv) })
}
