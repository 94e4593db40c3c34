//! Spinor functionals, eigenvalue lower bounds and their equality cases.
//!
//! Every bound has the shape `λ² ≥ ¼ inf (√A − B)²` under the strict
//! hypothesis `A > B² > 0` on the support of `ψ`, with
//!
//! | kind | `A` | `B` |
//! |---|---|---|
//! | `Basic` | `m/(m−1)(R + R^N_ψ)` | `‖H‖` |
//! | `Kappa` | `m/(m−1)(R + κ₁)` | `‖H‖` |
//! | `EnergyMomentum` | `R + κ₁ + 4|Q^ψ|²` | `‖H‖` |
//! | `Conformal` | `R̄e^{2u} + κ₁ + 4|Q^ψ|²` | `‖H‖` |
//! | `Yamabe` | `μ₁ + κ₁ + 4|Q^ψ|²` | `‖H‖` |
//! | `GenusZero` | `8π/Area + κ₁ + 4|Q^ψ|²` | `‖H‖` |
//! | `TwistedBasic` | `m/(m−1)(R + κ₁)` | `|f|` |
//! | `TwistedConformal` | `m/(m−1)(R̄e^{2u} + κ₁)` | `|f|` |
//! | `TwistedEnergyMomentum` | `R + κ₁ + 4|Q^ψ|²` | `|f|` |
//! | `TwistedConformalEnergyMomentum` | `R̄e^{2u} + κ₁ + 4|Q^ψ|²` | `|f|` |
//!
//! The twisted kinds concern eigenspinors of `D_f` on an auxiliary bundle,
//! the others eigenspinors of `D_H`.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clifford::SplitRep;
use crate::linalg::{c, eigvalsh, hermitian_residual, norm_sq, re_inner, zeros};
use crate::models::{ConformalCurvature, ModelGeometry, ModelKind};
use crate::operators::{JetSample, SpinorJet};
use crate::spectral::BandLimited;
use crate::{CMatrix, CVector, Error, RMatrix, Result};

pub const SCHEMA_VERSION: u32 = 1;
/// Points with `|ψ|² < SUPPORT_THRESHOLD · max|ψ|²` are outside `M_ψ`.
pub const SUPPORT_THRESHOLD: f64 = 1e-10;
/// Slack below which a strict hypothesis counts as violated.
pub const HYPOTHESIS_TOL: f64 = 1e-10;
pub const RESIDUAL_EPS: f64 = 1e-300;
pub const CURVATURE_HERMITIAN_TOL: f64 = 1e-12;

/// Constant normal curvature `R^N_{eᵢ,eⱼ}`, stored as antisymmetric `n×n`
/// matrices `F_ij = −F_ji` acting on the normal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalCurvature {
    m: usize,
    n: usize,
    f: Vec<Vec<RMatrix>>,
}

impl NormalCurvature {
    pub fn zero(m: usize, n: usize) -> Self {
        Self { m, n, f: vec![vec![RMatrix::zeros(n, n); m]; m] }
    }

    pub fn from_components(f: Vec<Vec<RMatrix>>) -> Result<Self> {
        let m = f.len();
        let n = f.first().and_then(|r| r.first()).map_or(0, |x| x.nrows());
        for i in 0..m {
            if f[i].len() != m {
                return Err(Error::InvalidParameter("normal curvature must be m×m".into()));
            }
            for j in 0..m {
                let x = &f[i][j];
                if x.nrows() != n || x.ncols() != n {
                    return Err(Error::InvalidParameter("normal curvature blocks must be n×n".into()));
                }
                if (x + x.transpose()).amax() > 1e-14 || (x + &f[j][i]).amax() > 1e-14 {
                    return Err(Error::InvalidParameter("normal curvature must be antisymmetric".into()));
                }
            }
        }
        Ok(Self { m, n, f })
    }

    /// Uniform random entries in `[−scale, scale]` with both antisymmetries imposed.
    pub fn random(m: usize, n: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Self::zero(m, n);
        for i in 0..m {
            for j in i + 1..m {
                let mut x = RMatrix::zeros(n, n);
                for a in 0..n {
                    for b in a + 1..n {
                        let v = rng.gen_range(-scale..scale);
                        x[(a, b)] = v;
                        x[(b, a)] = -v;
                    }
                }
                out.f[j][i] = -&x;
                out.f[i][j] = x;
            }
        }
        out
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self { m: self.m, n: self.n, f: self.f.iter().map(|r| r.iter().map(|x| x * t).collect()).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.f.iter().flatten().all(|x| x.amax() == 0.0)
    }

    pub fn component(&self, i: usize, j: usize) -> &RMatrix {
        &self.f[i][j]
    }

    /// Spinorial action `σ(F_ij)` of `F_ij` placed in the normal block.
    pub fn spinorial(&self, split: &SplitRep, i: usize, j: usize) -> CMatrix {
        let (m, n) = (self.m, self.n);
        let mut x = RMatrix::zeros(m + n, m + n);
        x.view_mut((m, m), (n, n)).copy_from(&self.f[i][j]);
        split.spin_algebra(&x)
    }
}

/// `𝓡^N = 2 Σᵢⱼ γ(eᵢ)γ(eⱼ) R^N_{eᵢ,eⱼ}` on the fiber.
pub fn curvature_operator(split: &SplitRep, rn: &NormalCurvature) -> Result<CMatrix> {
    if rn.m != split.m() || rn.n != split.n() {
        return Err(Error::InvalidParameter("normal curvature shape does not match the split".into()));
    }
    let mut out = zeros(split.fiber_dim());
    for i in 0..rn.m {
        for j in 0..rn.m {
            if i != j {
                out += split.tangent(i) * split.tangent(j) * rn.spinorial(split, i, j) * c(2.0, 0.0);
            }
        }
    }
    let residual = hermitian_residual(&out);
    if residual > CURVATURE_HERMITIAN_TOL {
        return Err(Error::NotHermitian { residual, tolerance: CURVATURE_HERMITIAN_TOL });
    }
    Ok(out)
}

/// Infimum over the given curvature samples of the lowest eigenvalue of `𝓡^N`.
pub fn kappa1(split: &SplitRep, samples: &[NormalCurvature]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for rn in samples {
        let vals = eigvalsh(&curvature_operator(split, rn)?, CURVATURE_HERMITIAN_TOL)?;
        best = best.min(vals[0]);
    }
    Ok(best)
}

/// Which samples of a jet lie in `M_ψ`.
pub fn support_mask(jet: &SpinorJet) -> Result<Vec<bool>> {
    let peak = jet.max_psi_sq();
    if peak == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(jet.samples.iter().map(|s| norm_sq(&s.psi) >= SUPPORT_THRESHOLD * peak).collect())
}

/// `R^N_ψ = (𝓡^N ψ, ψ)/|ψ|²` at every sample of `M_ψ`.
pub fn compute_rn_psi(split: &SplitRep, rn: &NormalCurvature, jet: &SpinorJet) -> Result<Vec<Option<f64>>> {
    let mask = support_mask(jet)?;
    let op = curvature_operator(split, rn)?;
    Ok(jet
        .samples
        .iter()
        .zip(mask)
        .map(|(s, inside)| inside.then(|| re_inner(&(&op * &s.psi), &s.psi) / norm_sq(&s.psi)))
        .collect())
}

/// `Q_ij = ½ Re(eᵢ·ω⊥·∇ⱼψ + eⱼ·ω⊥·∇ᵢψ, ψ)/|ψ|²` at one sample.
pub fn em_at(split: &SplitRep, s: &JetSample) -> RMatrix {
    let m = split.m();
    let tau = split.tangent_action();
    let p = norm_sq(&s.psi);
    let mut q = RMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            q[(i, j)] = 0.5 * (re_inner(&(&tau[i] * &s.nabla[j]), &s.psi) + re_inner(&(&tau[j] * &s.nabla[i]), &s.psi)) / p;
        }
    }
    q
}

/// Energy-momentum tensor at the samples of a jet (`None` outside `M_ψ`).
#[derive(Debug, Clone, PartialEq)]
pub struct EMTensor {
    pub q: Vec<Option<RMatrix>>,
    pub norm_sq: Vec<Option<f64>>,
    pub trace: Vec<Option<f64>>,
}

pub fn energy_momentum(split: &SplitRep, jet: &SpinorJet) -> Result<EMTensor> {
    let mask = support_mask(jet)?;
    let q: Vec<Option<RMatrix>> =
        jet.samples.iter().zip(&mask).map(|(s, &inside)| inside.then(|| em_at(split, s))).collect();
    Ok(EMTensor {
        norm_sq: q.iter().map(|x| x.as_ref().map(|x| x.iter().map(|v| v * v).sum())).collect(),
        trace: q.iter().map(|x| x.as_ref().map(|x| x.trace())).collect(),
        q,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Basic,
    Kappa,
    #[serde(alias = "thm-q")]
    EnergyMomentum,
    Conformal,
    Yamabe,
    GenusZero,
    TwistedBasic,
    TwistedConformal,
    TwistedEnergyMomentum,
    TwistedConformalEnergyMomentum,
}

impl BoundKind {
    pub const ALL: [BoundKind; 10] = [
        BoundKind::Basic,
        BoundKind::Kappa,
        BoundKind::EnergyMomentum,
        BoundKind::Conformal,
        BoundKind::Yamabe,
        BoundKind::GenusZero,
        BoundKind::TwistedBasic,
        BoundKind::TwistedConformal,
        BoundKind::TwistedEnergyMomentum,
        BoundKind::TwistedConformalEnergyMomentum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Basic => "basic",
            BoundKind::Kappa => "kappa",
            BoundKind::EnergyMomentum => "energy-momentum",
            BoundKind::Conformal => "conformal",
            BoundKind::Yamabe => "yamabe",
            BoundKind::GenusZero => "genus-zero",
            BoundKind::TwistedBasic => "twisted-basic",
            BoundKind::TwistedConformal => "twisted-conformal",
            BoundKind::TwistedEnergyMomentum => "twisted-energy-momentum",
            BoundKind::TwistedConformalEnergyMomentum => "twisted-conformal-energy-momentum",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s == "thm-q" {
            return Some(BoundKind::EnergyMomentum);
        }
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_twisted(self) -> bool {
        matches!(
            self,
            BoundKind::TwistedBasic
                | BoundKind::TwistedConformal
                | BoundKind::TwistedEnergyMomentum
                | BoundKind::TwistedConformalEnergyMomentum
        )
    }

    pub fn needs_conformal(self) -> bool {
        matches!(
            self,
            BoundKind::Conformal | BoundKind::TwistedConformal | BoundKind::TwistedConformalEnergyMomentum
        )
    }

    /// `A` carries the factor `m/(m−1)`.
    fn friedrich_scaled(self) -> bool {
        matches!(self, BoundKind::Basic | BoundKind::Kappa | BoundKind::TwistedBasic | BoundKind::TwistedConformal)
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Geometric data shared by bound evaluations on one model.
#[derive(Debug, Clone)]
pub struct BoundContext {
    pub model: ModelGeometry,
    pub split: SplitRep,
    pub normal_curvature: NormalCurvature,
    pub conformal: Option<ConformalCurvature>,
    pub yamabe_mu1: Option<f64>,
    pub f: Option<BandLimited>,
}

impl BoundContext {
    pub fn new(model: &ModelGeometry, split: &SplitRep) -> Self {
        let f = model.auxiliary_bundle_data().ok().map(|a| a.f);
        Self {
            normal_curvature: NormalCurvature::zero(model.m(), model.n()),
            model: model.clone(),
            split: split.clone(),
            conformal: None,
            yamabe_mu1: None,
            f,
        }
    }

    pub fn with_normal_curvature(mut self, rn: NormalCurvature) -> Self {
        self.normal_curvature = rn;
        self
    }
    pub fn with_conformal(mut self, conf: ConformalCurvature) -> Self {
        self.conformal = Some(conf);
        self
    }
    pub fn with_yamabe(mut self, mu1: f64) -> Self {
        self.yamabe_mu1 = Some(mu1);
        self
    }
    pub fn with_f(mut self, f: BandLimited) -> Self {
        self.f = Some(f);
        self
    }

    pub fn m(&self) -> usize {
        self.model.m()
    }

    pub fn kappa1(&self) -> Result<f64> {
        kappa1(&self.split, std::slice::from_ref(&self.normal_curvature))
    }

    fn mean_curvature(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.model.has_frames() {
            self.model.mean_curvature(x)
        } else {
            Ok(vec![0.0; self.model.n()])
        }
    }
}

/// Residuals of the limiting-case equations for one spinor, each normalized
/// by `‖ψ‖_{L²}` (integrability scalars: max over `M_ψ`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitingResiduals {
    /// `∇ᵢψ + (μ/m) eᵢ·ω⊥·ψ`.
    pub killing_residual: Option<f64>,
    pub killing_mu: Option<f64>,
    /// `ω⊥·ψ − sgn(λ) (H/‖H‖)·ψ`; undefined for `H = 0`.
    pub alignment_residual: Option<f64>,
    /// `∇ᵢψ + Σⱼ Q_ij eⱼ·ω⊥·ψ`.
    pub em_residual: f64,
    /// Weakly EM equation with `du = 2 d ln|ψ| / (m−1)`.
    pub wem_residual: Option<f64>,
    /// `(max|ψ| − min|ψ|)/max|ψ|` over `M_ψ`.
    pub modulus_variation: f64,
    /// `|f² − m/(4(m−1))(R + R^N_ψ)|` with `f = −Re Σ(∇ᵢψ, eᵢ·ω⊥·ψ)/|ψ|²`.
    pub killing_integrability: Option<f64>,
    /// `|(tr Q)² − ¼(R + R^N_ψ + 4|Q|²)|`.
    pub trace_integrability: f64,
}

fn sign_candidates(lambda: f64) -> Vec<f64> {
    if lambda > 0.0 {
        vec![1.0]
    } else if lambda < 0.0 {
        vec![-1.0]
    } else {
        vec![1.0, -1.0]
    }
}

struct Pointwise<'a> {
    samples: Vec<&'a JetSample>,
    rn_psi: Vec<f64>,
    q: Vec<RMatrix>,
}

fn pointwise<'a>(ctx: &BoundContext, jet: &'a SpinorJet) -> Result<Pointwise<'a>> {
    let mask = support_mask(jet)?;
    let op = curvature_operator(&ctx.split, &ctx.normal_curvature)?;
    let samples: Vec<&JetSample> = jet.samples.iter().zip(&mask).filter(|(_, &k)| k).map(|(s, _)| s).collect();
    Ok(Pointwise {
        rn_psi: samples.iter().map(|s| re_inner(&(&op * &s.psi), &s.psi) / norm_sq(&s.psi)).collect(),
        q: samples.iter().map(|s| em_at(&ctx.split, s)).collect(),
        samples,
    })
}

fn l2_ratio(num: f64, jet: &SpinorJet) -> f64 {
    (num / (jet.norm_sq() + RESIDUAL_EPS)).sqrt()
}

/// Limiting-case residuals of `ψ` with eigenvalue `λ`.
pub fn limiting_case_residuals(ctx: &BoundContext, lambda: f64, jet: &SpinorJet) -> Result<LimitingResiduals> {
    let split = &ctx.split;
    let m = ctx.m();
    let mf = m as f64;
    let tau = split.tangent_action();
    let r = ctx.model.scalar_curvature();
    let kappa = ctx.kappa1()?;
    let pw = pointwise(ctx, jet)?;

    let integrate = |g: &dyn Fn(usize, &JetSample) -> f64| -> f64 {
        pw.samples.iter().enumerate().map(|(k, s)| s.weight * g(k, s)).sum()
    };

    let (killing_residual, killing_mu) = if m >= 2 && r + kappa >= 0.0 {
        let base = 0.5 * (mf / (mf - 1.0) * (r + kappa)).sqrt();
        let mut best = (f64::INFINITY, 0.0);
        for sg in sign_candidates(lambda) {
            let mu = sg * base;
            let res = integrate(&|_, s| {
                (0..m).map(|i| norm_sq(&(&s.nabla[i] + &tau[i] * &s.psi * c(mu / mf, 0.0)))).sum()
            });
            let res = l2_ratio(res, jet);
            if res < best.0 {
                best = (res, mu);
            }
        }
        (Some(best.0), Some(best.1))
    } else {
        (None, None)
    };

    let mut alignment_residual = None;
    if let Some(s0) = pw.samples.first() {
        let h = ctx.mean_curvature(&s0.point)?;
        let hn = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        if hn > 0.0 {
            let mut best = f64::INFINITY;
            for sg in sign_candidates(lambda) {
                let res = integrate(&|_, s| {
                    let h = ctx.mean_curvature(&s.point).unwrap_or_else(|_| vec![0.0; split.n()]);
                    let hn = h.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let hh: Vec<f64> = h.iter().map(|x| x / hn).collect();
                    norm_sq(&(split.omega_perp() * &s.psi - split.normal_vector(&hh) * &s.psi * c(sg, 0.0)))
                });
                best = best.min(l2_ratio(res, jet));
            }
            alignment_residual = Some(best);
        }
    }

    let em = integrate(&|k, s| {
        (0..m)
            .map(|i| {
                let mut v = s.nabla[i].clone();
                for j in 0..m {
                    v += &tau[j] * &s.psi * c(pw.q[k][(i, j)], 0.0);
                }
                norm_sq(&v)
            })
            .sum()
    });

    let wem_residual = (m >= 2).then(|| {
        let res = integrate(&|k, s| {
            let p = norm_sq(&s.psi);
            let du: Vec<f64> = (0..m).map(|i| 2.0 * re_inner(&s.nabla[i], &s.psi) / ((mf - 1.0) * p)).collect();
            let tdu = du.iter().enumerate().fold(zeros(split.fiber_dim()), |acc, (j, &d)| acc + &tau[j] * c(d, 0.0));
            (0..m)
                .map(|i| {
                    let mut v = &s.nabla[i] - &tau[i] * &tdu * &s.psi * c(0.5, 0.0) - &s.psi * c(0.5 * mf * du[i], 0.0);
                    for j in 0..m {
                        v += &tau[j] * &s.psi * c(pw.q[k][(i, j)], 0.0);
                    }
                    norm_sq(&v)
                })
                .sum()
        });
        l2_ratio(res, jet)
    });

    let moduli: Vec<f64> = pw.samples.iter().map(|s| norm_sq(&s.psi).sqrt()).collect();
    let (lo, hi) = moduli.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));

    let killing_integrability = (m >= 2).then(|| {
        pw.samples
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let f = -(0..m).map(|i| re_inner(&s.nabla[i], &(&tau[i] * &s.psi))).sum::<f64>() / norm_sq(&s.psi);
                (f * f - mf / (4.0 * (mf - 1.0)) * (r + pw.rn_psi[k])).abs()
            })
            .fold(0.0, f64::max)
    });

    let trace_integrability = pw
        .q
        .iter()
        .zip(&pw.rn_psi)
        .map(|(q, rn)| {
            let t = q.trace();
            let n2: f64 = q.iter().map(|v| v * v).sum();
            (t * t - 0.25 * (r + rn + 4.0 * n2)).abs()
        })
        .fold(0.0, f64::max);

    Ok(LimitingResiduals {
        killing_residual,
        killing_mu,
        alignment_residual,
        em_residual: l2_ratio(em, jet),
        wem_residual,
        modulus_variation: if hi > 0.0 { (hi - lo) / hi } else { 0.0 },
        killing_integrability,
        trace_integrability,
    })
}

/// ω⊥-alignment residual alone; fails when `H = 0`.
pub fn alignment_residual(ctx: &BoundContext, lambda: f64, jet: &SpinorJet) -> Result<f64> {
    limiting_case_residuals(ctx, lambda, jet)?
        .alignment_residual
        .ok_or_else(|| Error::Hypothesis("alignment undefined for H = 0".into()))
}

/// Outcome of one bound evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub schema_version: u32,
    pub bound_kind: BoundKind,
    pub model: String,
    pub lambda: f64,
    pub hypothesis_ok: bool,
    pub violated_clause: Option<String>,
    pub rhs: f64,
    pub lambda_sq: f64,
    pub margin: f64,
    #[serde(flatten)]
    pub limiting_case: LimitingResiduals,
}

impl BoundReport {
    /// At equality (`hypothesis_ok` and `margin < 1e−8`), whether the
    /// residuals characterizing the equality case are below `1e−6`.
    pub fn equality_consistent(&self) -> Option<bool> {
        if !self.hypothesis_ok || self.margin >= 1e-8 {
            return None;
        }
        let tol = 1e-6;
        let small = |x: Option<f64>| x.is_some_and(|v| v < tol);
        let l = &self.limiting_case;
        Some(match self.bound_kind {
            BoundKind::Basic | BoundKind::Kappa => small(l.killing_residual) && small(l.alignment_residual),
            BoundKind::EnergyMomentum => l.em_residual < tol && small(l.alignment_residual),
            BoundKind::TwistedBasic => small(l.killing_residual),
            BoundKind::TwistedEnergyMomentum => l.em_residual < tol,
            _ => small(l.wem_residual),
        })
    }
}

fn missing(kind: BoundKind, what: &str) -> Error {
    Error::MissingInput { kind: kind.name().into(), what: what.into() }
}

/// Evaluates one bound for an eigenpair `(λ, ψ)` sampled by `jet`.
pub fn evaluate_bound(kind: BoundKind, ctx: &BoundContext, lambda: f64, jet: &SpinorJet) -> Result<BoundReport> {
    let m = ctx.m();
    let mf = m as f64;
    if kind.needs_conformal() && ctx.conformal.is_none() {
        return Err(missing(kind, "conformal factor"));
    }
    if kind == BoundKind::Yamabe && ctx.yamabe_mu1.is_none() {
        return Err(missing(kind, "Yamabe eigenvalue"));
    }
    if kind.is_twisted() && ctx.f.is_none() {
        return Err(missing(kind, "function f"));
    }
    let pw = pointwise(ctx, jet)?;
    let r = ctx.model.scalar_curvature();
    let kappa = ctx.kappa1()?;

    let mut clause: Option<String> = match kind {
        BoundKind::Basic | BoundKind::Kappa | BoundKind::TwistedBasic | BoundKind::TwistedConformal if m < 2 => {
            Some("m >= 2".into())
        }
        BoundKind::Yamabe if m < 3 => Some("m >= 3".into()),
        BoundKind::GenusZero if !matches!(ctx.model.kind(), ModelKind::SphereInEuclidean { m: 2, .. }) => {
            Some("M is a genus-zero surface".into())
        }
        _ => None,
    };

    let b_name = if kind.is_twisted() { "f^2" } else { "|H|^2" };
    let a_name = match kind {
        BoundKind::Basic => "m(R+R^N_psi) > (m-1)|H|^2",
        BoundKind::Kappa => "m(R+kappa_1) > (m-1)|H|^2",
        BoundKind::EnergyMomentum => "R+kappa_1+4|Q|^2 > |H|^2",
        BoundKind::Conformal => "Rbar e^{2u}+kappa_1+4|Q|^2 > |H|^2",
        BoundKind::Yamabe => "mu_1+kappa_1+4|Q|^2 > |H|^2",
        BoundKind::GenusZero => "8pi/Area+kappa_1+4|Q|^2 > |H|^2",
        BoundKind::TwistedBasic => "m(R+kappa_1) > (m-1)f^2",
        BoundKind::TwistedConformal => "m(Rbar e^{2u}+kappa_1) > (m-1)f^2",
        BoundKind::TwistedEnergyMomentum => "R+kappa_1+4|Q|^2 > f^2",
        BoundKind::TwistedConformalEnergyMomentum => "Rbar e^{2u}+kappa_1+4|Q|^2 > f^2",
    };

    let mut inf = f64::INFINITY;
    for (k, s) in pw.samples.iter().enumerate() {
        let base = match kind {
            BoundKind::Basic => r + pw.rn_psi[k],
            BoundKind::Kappa | BoundKind::TwistedBasic | BoundKind::EnergyMomentum | BoundKind::TwistedEnergyMomentum => {
                r + kappa
            }
            BoundKind::Conformal | BoundKind::TwistedConformal | BoundKind::TwistedConformalEnergyMomentum => {
                ctx.conformal.as_ref().unwrap().eval_scaled(&s.point) + kappa
            }
            BoundKind::Yamabe => ctx.yamabe_mu1.unwrap() + kappa,
            BoundKind::GenusZero => 8.0 * PI / ctx.model.volume() + kappa,
        };
        let a = if kind.friedrich_scaled() {
            if m < 2 {
                f64::NAN
            } else {
                mf / (mf - 1.0) * base
            }
        } else {
            base + 4.0 * pw.q[k].iter().map(|v| v * v).sum::<f64>()
        };
        let b = if kind.is_twisted() {
            ctx.f.as_ref().unwrap().eval(&s.point).abs()
        } else {
            ctx.mean_curvature(&s.point)?.iter().map(|x| x * x).sum::<f64>().sqrt()
        };
        if clause.is_none() {
            if b * b <= HYPOTHESIS_TOL {
                clause = Some(format!("{b_name} > 0"));
            } else if a - b * b <= HYPOTHESIS_TOL * (1.0 + a.abs()) {
                clause = Some(a_name.into());
            }
        }
        if a.is_finite() {
            inf = inf.min((a.max(0.0).sqrt() - b).powi(2));
        }
    }
    let rhs = if inf.is_finite() { 0.25 * inf } else { 0.0 };
    Ok(BoundReport {
        schema_version: SCHEMA_VERSION,
        bound_kind: kind,
        model: ctx.model.name(),
        lambda,
        hypothesis_ok: clause.is_none(),
        violated_clause: clause,
        rhs,
        lambda_sq: lambda * lambda,
        margin: lambda * lambda - rhs,
        limiting_case: limiting_case_residuals(ctx, lambda, jet)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityKind {
    /// `∫|∇^λψ|²` for eigenspinors of `D_H`.
    Presq,
    /// `∫|∇^Qψ|²` for eigenspinors of `D_H`.
    Qpres,
    /// `∫|∇̂^λψ|²` for eigenspinors of `D_f`.
    TwistedPresq,
    /// `∫|∇̂^Qψ|²` for eigenspinors of `D_f`.
    TwistedQpres,
}

/// Signs of the `H` and `λ` terms in `∇^Q` (and `∇̂^Q`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QConnectionSign {
    /// `∇ᵢ + (1/2mq) eᵢ·H − qλ eᵢ·ω⊥ + Σ Q_ij eⱼ·ω⊥`, for which the identity holds.
    #[default]
    Consistent,
    /// `∇ᵢ − (1/2mq) eᵢ·H + (−1)^{n+1} qλ eᵢ·ω⊥ + Σ Q_ij eⱼ·ω⊥`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Smallest pointwise value of `‖H‖² − (H·ψ, ω⊥·ψ)²/|ψ|⁴` over `M_ψ`.
    pub min_deficit: f64,
}

/// Cauchy–Schwarz deficit `‖H‖² − (H·ψ, ω⊥·ψ)²/|ψ|⁴` at one sample.
pub fn cauchy_schwarz_deficit(split: &SplitRep, h: &[f64], psi: &CVector) -> f64 {
    let p = norm_sq(psi);
    let hp = re_inner(&(split.normal_vector(h) * psi), &(split.omega_perp() * psi));
    h.iter().map(|x| x * x).sum::<f64>() - hp * hp / (p * p)
}

/// Compares both sides of an integral identity for an eigenpair `(λ, ψ)`.
/// `q` holds one value per sample, or a single value used everywhere.
pub fn integral_identity_check(
    kind: IdentityKind,
    ctx: &BoundContext,
    lambda: f64,
    jet: &SpinorJet,
    q: &[f64],
    sign: QConnectionSign,
) -> Result<IdentityCheck> {
    let split = &ctx.split;
    let (m, n) = (ctx.m(), ctx.model.n());
    let mf = m as f64;
    let tau = split.tangent_action();
    let twisted = matches!(kind, IdentityKind::TwistedPresq | IdentityKind::TwistedQpres);
    if twisted && ctx.f.is_none() {
        return Err(Error::MissingInput { kind: format!("{kind:?}"), what: "function f".into() });
    }
    if q.len() != 1 && q.len() != jet.samples.len() {
        return Err(Error::InvalidParameter("q must be constant or given per sample".into()));
    }
    let q_at = |k: usize| if q.len() == 1 { q[0] } else { q[k] };
    let mask = support_mask(jet)?;
    let op = curvature_operator(split, &ctx.normal_curvature)?;
    let r = ctx.model.scalar_curvature();
    let (mut lhs, mut rhs) = (0.0, 0.0);
    let mut min_deficit = f64::INFINITY;
    for (k, s) in jet.samples.iter().enumerate() {
        let qk = q_at(k);
        match kind {
            IdentityKind::Presq | IdentityKind::TwistedPresq if (1.0 - mf * qk).abs() < 1e-12 => {
                return Err(Error::InvalidParameter("q must stay away from 1/m".into()));
            }
            IdentityKind::Qpres | IdentityKind::TwistedQpres if qk.abs() < 1e-12 => {
                return Err(Error::InvalidParameter("q must not vanish".into()));
            }
            _ => {}
        }
        let h = ctx.mean_curvature(&s.point)?;
        let gh = split.normal_vector(&h);
        let fx = ctx.f.as_ref().map_or(0.0, |f| f.eval(&s.point));
        let b2 = if twisted { fx * fx } else { h.iter().map(|x| x * x).sum() };
        let p = norm_sq(&s.psi);
        let inside = mask[k];
        let qmat = if inside { em_at(split, s) } else { RMatrix::zeros(m, m) };
        let rn = if inside { re_inner(&(&op * &s.psi), &s.psi) / p } else { 0.0 };

        let (a_h, b_l) = match kind {
            IdentityKind::Presq | IdentityKind::TwistedPresq => ((1.0 - qk) / (2.0 * (1.0 - mf * qk)), qk),
            _ => match sign {
                QConnectionSign::Consistent => (1.0 / (2.0 * mf * qk), -qk),
                QConnectionSign::Literal => {
                    (-1.0 / (2.0 * mf * qk), if n % 2 == 0 { -qk } else { qk })
                }
            },
        };
        let with_q = matches!(kind, IdentityKind::Qpres | IdentityKind::TwistedQpres);
        let mut pointwise_lhs = 0.0;
        for i in 0..m {
            let mut v = s.nabla[i].clone();
            if twisted {
                v += &tau[i] * &s.psi * c(a_h * fx + b_l * lambda, 0.0);
            } else {
                v += split.tangent(i) * &gh * &s.psi * c(a_h, 0.0) + &tau[i] * &s.psi * c(b_l * lambda, 0.0);
            }
            if with_q {
                for j in 0..m {
                    v += &tau[j] * &s.psi * c(qmat[(i, j)], 0.0);
                }
            }
            pointwise_lhs += norm_sq(&v);
        }
        lhs += s.weight * pointwise_lhs;

        let pointwise_rhs = if with_q {
            let w = 1.0 + mf * qk * qk;
            let n2: f64 = qmat.iter().map(|v| v * v).sum();
            let mut val = w * lambda * lambda - 0.25 * (r + rn + 4.0 * n2) + 0.25 * w * b2 / (mf * qk * qk);
            if !twisted && inside {
                let d = cauchy_schwarz_deficit(split, &h, &s.psi);
                min_deficit = min_deficit.min(d);
                val -= 0.25 * 2.0 / (mf * qk) * d;
            }
            val
        } else {
            let w = 1.0 + mf * qk * qk - 2.0 * qk;
            w * lambda * lambda - 0.25 * (r + rn) + 0.25 * w * (mf - 1.0) * b2 / (1.0 - mf * qk).powi(2)
        };
        rhs += s.weight * pointwise_rhs * p;
        if !with_q && !twisted && inside {
            min_deficit = min_deficit.min(cauchy_schwarz_deficit(split, &h, &s.psi));
        }
    }
    Ok(IdentityCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + RESIDUAL_EPS),
        min_deficit: if min_deficit.is_finite() { min_deficit } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QForm {
    /// Solves `(1 − mq)² = (m−1)B/(√A − B)`, branch `q < 1/m`, where
    /// `A = m/(m−1)(R + R^N_ψ)`.
    Presq,
    /// `q = √(B / (m(√A − B)))` with `A = R + κ₁ + 4|Q|²`.
    Qpres,
}

/// Optimizing `q` for given `A` and `B = ‖H‖` (or `|f|`).
pub fn q_choice(form: QForm, m: usize, a: f64, b: f64) -> Result<f64> {
    let mf = m as f64;
    if !(a > b * b && b > 0.0) {
        return Err(Error::Hypothesis(format!("need A > B^2 > 0 (A = {a}, B = {b})")));
    }
    let gap = a.sqrt() - b;
    Ok(match form {
        QForm::Presq => {
            if m < 2 {
                return Err(Error::Hypothesis("m >= 2".into()));
            }
            (1.0 - ((mf - 1.0) * b / gap).sqrt()) / mf
        }
        QForm::Qpres => (b / (mf * gap)).sqrt(),
    })
}

/// Residual of the defining equation of `q`.
pub fn q_choice_residual(form: QForm, m: usize, a: f64, b: f64, q: f64) -> f64 {
    let mf = m as f64;
    let gap = a.sqrt() - b;
    match form {
        QForm::Presq => ((1.0 - mf * q).powi(2) - (mf - 1.0) * b / gap).abs(),
        QForm::Qpres => (q * q - b / (mf * gap)).abs(),
    }
}

/// Curvature part of the bracket on the right of an identity, e.g.
/// `A/(1+mq²) − B²/(mq²)` for `Qpres`; at the optimal `q` it equals `(√A − B)²`.
pub fn bracket_curvature_term(form: QForm, m: usize, a: f64, b: f64, q: f64) -> f64 {
    let mf = m as f64;
    match form {
        QForm::Presq => {
            (mf - 1.0) / mf * a / (1.0 + mf * q * q - 2.0 * q) - (mf - 1.0) * b * b / (1.0 - mf * q).powi(2)
        }
        QForm::Qpres => a / (1.0 + mf * q * q) - b * b / (mf * q * q),
    }
}

/// `x` with 12 significant digits: positional for `1e−4 ≤ |x| < 1e12` and
/// for zero, scientific otherwise.
pub fn format_sig12(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return format!("{:.12}", 0.0);
    }
    let e = x.abs().log10().floor() as i32;
    if (-4..12).contains(&e) {
        let s = format!("{:.*}", (11 - e) as usize, x);
        // rounding can carry into a new leading digit
        let digits = s.chars().filter(char::is_ascii_digit).skip_while(|&c| c == '0').count();
        if digits <= 12 {
            s
        } else if e + 1 < 12 {
            format!("{:.*}", (10 - e) as usize, x)
        } else {
            format!("{x:.11e}")
        }
    } else {
        format!("{x:.11e}")
    }
}

/// Human-readable table of reports, 12 significant digits.
pub fn reports_table(reports: &[BoundReport]) -> String {
    let mut out = format!(
        "{:<34} {:<28} {:>20} {:>20} {:>20} {:>20}  {}\n",
        "bound", "model", "lambda", "lambda^2", "rhs", "margin", "hypothesis"
    );
    for r in reports {
        let hyp = match &r.violated_clause {
            None => "ok".to_string(),
            Some(c) => format!("violated: {c}"),
        };
        out.push_str(&format!(
            "{:<34} {:<28} {:>20} {:>20} {:>20} {:>20}  {}\n",
            r.bound_kind.name(),
            r.model,
            format_sig12(r.lambda),
            format_sig12(r.lambda_sq),
            format_sig12(r.rhs),
            format_sig12(r.margin),
            hyp
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use crate::operators::restricted_parallel_jet;

    fn sphere_ctx() -> (BoundContext, SpinorJet) {
        let model = ModelGeometry::sphere(2, 1.0).unwrap();
        let split = SplitRep::new(2, 1, 0, 0).unwrap();
        let psi0 = CVector::from_vec(vec![ONE, c(0.3, -0.2)]);
        let jet = restricted_parallel_jet(&model, &split, &psi0, &model.quadrature(12).unwrap()).unwrap();
        (BoundContext::new(&model, &split), jet)
    }

    #[test]
    fn sphere_energy_momentum_is_half_the_metric() {
        let (ctx, jet) = sphere_ctx();
        let em = energy_momentum(&ctx.split, &jet).unwrap();
        for (q, n2) in em.q.iter().zip(&em.norm_sq) {
            let q = q.as_ref().unwrap();
            assert!((q - RMatrix::identity(2, 2) * 0.5).amax() < 1e-12);
            assert!((n2.unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_genus_zero_sits_on_the_boundary() {
        let (ctx, jet) = sphere_ctx();
        let rep = evaluate_bound(BoundKind::GenusZero, &ctx, 0.0, &jet).unwrap();
        assert!(rep.rhs.abs() < 1e-10);
        assert!(rep.margin.abs() < 1e-10);
        assert!(!rep.hypothesis_ok);
        let l = rep.limiting_case;
        assert!(l.killing_residual.unwrap() < 1e-10);
        assert!((l.killing_mu.unwrap().abs() - 1.0).abs() < 1e-12);
        assert!(l.alignment_residual.unwrap() < 1e-10);
        assert!(l.em_residual < 1e-10);
        assert!(l.modulus_variation < 1e-12);
        assert!(l.trace_integrability < 1e-10);
        assert!(l.killing_integrability.unwrap() < 1e-10);
    }

    #[test]
    fn flat_torus_violates_positive_mean_curvature() {
        let model = ModelGeometry::flat_torus(2, 1, vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let split = SplitRep::new(2, 1, 0, 0).unwrap();
        let ops = crate::operators::TorusOperators::new(&model, &split, 2).unwrap();
        let zero = ops.lattice.index_of(&[0, 0]).unwrap();
        let field = crate::spectral::FourierSpinorField::single_mode(
            &ops.lattice,
            zero,
            CVector::from_vec(vec![ONE, c(0.0, 1.0)]),
        );
        let jet = crate::operators::torus_jet(&ops, &field, 8).unwrap();
        let ctx = BoundContext::new(&model, &split);
        let rep = evaluate_bound(BoundKind::EnergyMomentum, &ctx, 0.0, &jet).unwrap();
        assert!(!rep.hypothesis_ok);
        assert_eq!(rep.violated_clause.as_deref(), Some("|H|^2 > 0"));
        assert_eq!(rep.limiting_case.em_residual, 0.0);
        assert_eq!(rep.limiting_case.trace_integrability, 0.0);
        for kind in [IdentityKind::Presq, IdentityKind::Qpres] {
            let chk = integral_identity_check(kind, &ctx, 0.0, &jet, &[0.7], QConnectionSign::Consistent).unwrap();
            assert!(chk.lhs.abs() < 1e-14 && chk.rhs.abs() < 1e-14);
        }
    }

    #[test]
    fn kappa_scales_linearly_and_vanishes_for_zero_curvature() {
        let split = SplitRep::new(2, 2, 0, 0).unwrap();
        assert_eq!(kappa1(&split, &[NormalCurvature::zero(2, 2)]).unwrap(), 0.0);
        let rn = NormalCurvature::random(2, 2, 1.0, 3);
        let k = kappa1(&split, &[rn.clone()]).unwrap();
        let k3 = kappa1(&split, &[rn.scaled(3.0)]).unwrap();
        assert!((k3 - 3.0 * k).abs() < 1e-12);
    }

    #[test]
    fn q_choices_solve_their_equations() {
        for &(a, b) in &[(5.0, 1.0), (9.0, 2.5), (100.0, 0.1)] {
            let q = q_choice(QForm::Qpres, 2, a, b).unwrap();
            assert!(q_choice_residual(QForm::Qpres, 2, a, b, q) < 1e-12);
            let gap2 = (f64::sqrt(a) - b).powi(2);
            assert!((bracket_curvature_term(QForm::Qpres, 2, a, b, q) - gap2).abs() < 1e-12 * (1.0 + gap2));
            let q = q_choice(QForm::Presq, 3, a, b).unwrap();
            assert!(q_choice_residual(QForm::Presq, 3, a, b, q) < 1e-12);
            assert!(q < 1.0 / 3.0);
        }
        assert!((q_choice(QForm::Presq, 3, 1e16, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-3);
        assert!(q_choice(QForm::Qpres, 2, 1.0, 1.0).is_err());
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_sig12(0.0), "0.000000000000");
        assert_eq!(format_sig12(1.0), "1.00000000000");
        assert_eq!(format_sig12(-2.5), "-2.50000000000");
        assert_eq!(format_sig12(123.456), "123.456000000");
        assert_eq!(format_sig12(9.9999999999999), "10.0000000000");
        assert_eq!(format_sig12(1e-7), "1.00000000000e-7");
        assert_eq!(format_sig12(0.002337227559424293), "0.00233722755942");
        assert_eq!(format_sig12(0.00099999999999996), "0.00100000000000");
        assert_eq!(format_sig12(999999999999.9), "1.00000000000e12");
        assert_eq!(format_sig12(3.0e15), "3.00000000000e15");
    }
}
