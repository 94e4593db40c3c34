//! Connections and Dirac-type operators.
//!
//! On torus models every operator with constant coefficients acts on a
//! Fourier mode `ψ = c e^{iκ·x}` through a fiber matrix. Spinors are written in
//! the adapted frame, where the intrinsic connection reads `∇ᵢ = ∂ᵢ + σ(Ω^int_i)`
//! and the ambient one `∇̃ᵢ = ∇ᵢ + ½ Σⱼ γ(eⱼ)γ(h_ij)`. The remaining operators:
//!
//! - `D = Σ γ(eᵢ)∇ᵢ`, `D̃ = Σ γ(eᵢ)∇̃ᵢ`;
//! - `D_H = (−1)^n ω⊥ D + ½ γ(H) ω⊥`;
//! - `D_M^{ΣN} = Σ eᵢ·_M ∇ᵢ` (the doubled sign in odd–odd splits is carried by `·_M`);
//! - `D_f = D_M^{ΣN} − f/2`, which couples modes through the Fourier data of `f`.
//!
//! Spheres are handled pointwise: restricted ambient-parallel spinors in
//! closed form and frozen-coefficient symbols.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::clifford::SplitRep;
use crate::linalg::{c, eigh, expm, hermitian_residual, identity, max_abs, norm_sq, zeros, I};
use crate::models::{ConformalData, ModelGeometry};
use crate::spectral::{analyze, synthesize, FourierSpinorField, Lattice};
use crate::{CMatrix, CVector, Error, RMatrix, Result, C64};

/// Hermiticity tolerance for assembled blocks.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConnectionKind {
    Intrinsic,
    Ambient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OperatorTag {
    AmbientDirac,
    Dirac,
    SubmanifoldDirac,
    Twisted,
    Modified,
    Connection(usize),
    AmbientConnection(usize),
    ModifiedLambda(usize),
    ModifiedQ(usize),
}

impl OperatorTag {
    pub fn must_be_hermitian(self) -> bool {
        matches!(self, OperatorTag::SubmanifoldDirac | OperatorTag::Twisted | OperatorTag::Modified)
    }
}

/// Fiber matrix of an operator on one Fourier mode.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBlock {
    pub mode: Vec<i32>,
    pub tag: OperatorTag,
    pub matrix: CMatrix,
}

/// Sign of the Clifford multiplication used in `D_M^{ΣN}` and `D_f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum TwistSign {
    #[default]
    Standard,
    Opposite,
}

impl TwistSign {
    pub fn factor(self) -> f64 {
        match self {
            TwistSign::Standard => 1.0,
            TwistSign::Opposite => -1.0,
        }
    }
}

fn check_split(model: &ModelGeometry, split: &SplitRep) -> Result<()> {
    if model.m() != split.m() || model.n() != split.n() {
        return Err(Error::InvalidParameter(format!(
            "split ({}, {}) does not match model ({}, {})",
            split.m(),
            split.n(),
            model.m(),
            model.n()
        )));
    }
    Ok(())
}

/// `½ Σⱼ γ(eⱼ) γ(h_ij)` for each direction `i`.
pub fn gauss_spinor_terms(split: &SplitRep, h: &[Vec<Vec<f64>>]) -> Vec<CMatrix> {
    h.iter()
        .map(|hi| {
            let mut t = zeros(split.fiber_dim());
            for (j, hij) in hi.iter().enumerate() {
                t += split.tangent(j) * split.normal_vector(hij) * c(0.5, 0.0);
            }
            t
        })
        .collect()
}

/// Spinorial connection matrices `Aᵢ` at a point, so that `∇ᵢ = ∂_{eᵢ} + Aᵢ`.
/// The ambient version is built from the intrinsic one through the spinorial
/// Gauss formula.
pub fn connection_matrices(
    model: &ModelGeometry,
    split: &SplitRep,
    x: &[f64],
    which: ConnectionKind,
) -> Result<Vec<CMatrix>> {
    check_split(model, split)?;
    let intrinsic: Vec<CMatrix> = model.intrinsic_connection(x)?.iter().map(|o| split.spin_algebra(o)).collect();
    Ok(match which {
        ConnectionKind::Intrinsic => intrinsic,
        ConnectionKind::Ambient => {
            let h = model.second_fundamental_form(x)?;
            intrinsic.iter().zip(gauss_spinor_terms(split, &h)).map(|(a, g)| a + g).collect()
        }
    })
}

/// `σ(Ωᵢ)` of the full connection forms at a point.
pub fn ambient_spin_connection_direct(model: &ModelGeometry, split: &SplitRep, x: &[f64]) -> Result<Vec<CMatrix>> {
    check_split(model, split)?;
    Ok(model.connection_forms(x)?.iter().map(|o| split.spin_algebra(o)).collect())
}

/// Mode action of a covariant derivative on a torus: `∇ᵢ ↦ iκᵢ + Aᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionAction {
    pub kind: ConnectionKind,
    pub lattice: Lattice,
    pub constant: Vec<CMatrix>,
}

impl ConnectionAction {
    pub fn block(&self, idx: usize, i: usize) -> CMatrix {
        let kappa = self.lattice.wavevector(idx)[i];
        let fiber = self.constant[i].nrows();
        identity(fiber) * c(0.0, kappa) + &self.constant[i]
    }

    pub fn apply(&self, field: &FourierSpinorField, i: usize) -> FourierSpinorField {
        let blocks: Vec<CMatrix> = (0..self.lattice.len()).map(|idx| self.block(idx, i)).collect();
        field.apply_per_mode(&blocks)
    }
}

pub fn assemble_connection(
    model: &ModelGeometry,
    split: &SplitRep,
    which: ConnectionKind,
    lattice: &Lattice,
) -> Result<ConnectionAction> {
    if !model.is_torus() {
        return Err(Error::Unsupported("mode action on a sphere; use the pointwise connection".into()));
    }
    let origin = vec![0.0; model.m()];
    Ok(ConnectionAction {
        kind: which,
        lattice: lattice.clone(),
        constant: connection_matrices(model, split, &origin, which)?,
    })
}

/// All constant-coefficient operators of a torus model over one lattice.
#[derive(Debug, Clone)]
pub struct TorusOperators {
    pub split: SplitRep,
    pub lattice: Lattice,
    pub intrinsic: ConnectionAction,
    pub ambient: ConnectionAction,
    /// Normal components of `H`.
    pub mean_curvature: Vec<f64>,
    pub scalar_curvature: f64,
    pub volume: f64,
}

impl TorusOperators {
    pub fn new(model: &ModelGeometry, split: &SplitRep, truncation: usize) -> Result<Self> {
        check_split(model, split)?;
        let lattice = model.lattice(truncation)?;
        let intrinsic = assemble_connection(model, split, ConnectionKind::Intrinsic, &lattice)?;
        let ambient = assemble_connection(model, split, ConnectionKind::Ambient, &lattice)?;
        Ok(Self {
            split: split.clone(),
            mean_curvature: model.mean_curvature(&vec![0.0; model.m()])?,
            scalar_curvature: model.scalar_curvature(),
            volume: model.volume(),
            lattice,
            intrinsic,
            ambient,
        })
    }

    pub fn m(&self) -> usize {
        self.split.m()
    }
    pub fn fiber(&self) -> usize {
        self.split.fiber_dim()
    }

    /// `(−1)^n`.
    pub fn normal_sign(&self) -> f64 {
        if self.split.n() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn gamma_h(&self) -> CMatrix {
        self.split.normal_vector(&self.mean_curvature)
    }

    pub fn dirac_block(&self, idx: usize) -> CMatrix {
        (0..self.m()).fold(zeros(self.fiber()), |acc, i| acc + self.split.tangent(i) * self.intrinsic.block(idx, i))
    }

    pub fn ambient_dirac_block(&self, idx: usize) -> CMatrix {
        (0..self.m()).fold(zeros(self.fiber()), |acc, i| acc + self.split.tangent(i) * self.ambient.block(idx, i))
    }

    pub fn dh_block(&self, idx: usize) -> CMatrix {
        let w = self.split.omega_perp();
        w * self.dirac_block(idx) * c(self.normal_sign(), 0.0) + self.gamma_h() * w * c(0.5, 0.0)
    }

    pub fn twisted_block(&self, idx: usize) -> CMatrix {
        (0..self.m()).fold(zeros(self.fiber()), |acc, i| {
            acc + &self.split.tangent_action()[i] * self.intrinsic.block(idx, i)
        })
    }

    pub fn block(&self, idx: usize, tag: OperatorTag) -> Result<CMatrix> {
        Ok(match tag {
            OperatorTag::AmbientDirac => self.ambient_dirac_block(idx),
            OperatorTag::Dirac => self.dirac_block(idx),
            OperatorTag::SubmanifoldDirac => self.dh_block(idx),
            OperatorTag::Twisted => self.twisted_block(idx),
            OperatorTag::Connection(i) if i < self.m() => self.intrinsic.block(idx, i),
            OperatorTag::AmbientConnection(i) if i < self.m() => self.ambient.block(idx, i),
            other => return Err(Error::Unsupported(format!("{other:?} has no constant mode block"))),
        })
    }

    pub fn blocks(&self, tag: OperatorTag) -> Result<Vec<OperatorBlock>> {
        let out: Vec<OperatorBlock> = (0..self.lattice.len())
            .into_par_iter()
            .map(|idx| {
                Ok(OperatorBlock { mode: self.lattice.modes()[idx].clone(), tag, matrix: self.block(idx, tag)? })
            })
            .collect::<Result<_>>()?;
        if tag.must_be_hermitian() {
            for b in &out {
                let residual = hermitian_residual(&b.matrix);
                if residual > HERMITIAN_TOL {
                    return Err(Error::NotHermitian { residual, tolerance: HERMITIAN_TOL });
                }
            }
        }
        Ok(out)
    }

    /// Applies a per-mode operator to a field.
    pub fn apply(&self, tag: OperatorTag, field: &FourierSpinorField) -> Result<FourierSpinorField> {
        let blocks: Vec<CMatrix> = (0..self.lattice.len()).map(|idx| self.block(idx, tag)).collect::<Result<_>>()?;
        Ok(field.apply_per_mode(&blocks))
    }
}

pub fn assemble_dh(model: &ModelGeometry, split: &SplitRep, truncation: usize) -> Result<Vec<OperatorBlock>> {
    TorusOperators::new(model, split, truncation)?.blocks(OperatorTag::SubmanifoldDirac)
}

pub fn assemble_twisted(model: &ModelGeometry, split: &SplitRep, truncation: usize) -> Result<Vec<OperatorBlock>> {
    TorusOperators::new(model, split, truncation)?.blocks(OperatorTag::Twisted)
}

/// Operator made of per-mode fiber blocks plus scalar couplings
/// `ψ_a += c_ab ψ_b` between distinct modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoupledOperator {
    pub lattice: Lattice,
    pub fiber: usize,
    pub diagonal: Vec<CMatrix>,
    pub couplings: Vec<(usize, usize, C64)>,
}

impl ModeCoupledOperator {
    pub fn dim(&self) -> usize {
        self.fiber * self.lattice.len()
    }

    pub fn to_dense(&self) -> CMatrix {
        let f = self.fiber;
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for (idx, b) in self.diagonal.iter().enumerate() {
            out.view_mut((idx * f, idx * f), (f, f)).copy_from(b);
        }
        for &(a, b, v) in &self.couplings {
            for r in 0..f {
                out[(a * f + r, b * f + r)] += v;
            }
        }
        out
    }

    pub fn apply(&self, field: &FourierSpinorField) -> FourierSpinorField {
        let mut out = field.apply_per_mode(&self.diagonal);
        for &(a, b, v) in &self.couplings {
            let add = &field.coeffs()[b] * v;
            out.coeffs_mut()[a] += add;
        }
        out
    }

    /// Max of the block Hermitian residuals and of `|c_ab − conj(c_ba)|`.
    pub fn hermitian_residual(&self) -> f64 {
        let mut worst = self.diagonal.iter().map(hermitian_residual).fold(0.0, f64::max);
        let mut table: HashMap<(usize, usize), C64> = HashMap::new();
        for &(a, b, v) in &self.couplings {
            *table.entry((a, b)).or_default() += v;
        }
        for (&(a, b), &v) in &table {
            let back = table.get(&(b, a)).copied().unwrap_or_default();
            worst = worst.max((v - back.conj()).norm());
        }
        worst
    }

    /// Connected groups of modes under the couplings, each sorted, ordered by
    /// smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.lattice.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(a, b, v) in &self.couplings {
            if v.norm() > 0.0 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for x in 0..n {
            let r = find(&mut parent, x);
            groups.entry(r).or_default().push(x);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort_by_key(|g| g[0]);
        out
    }

    fn component_matrix(&self, group: &[usize]) -> CMatrix {
        let f = self.fiber;
        let pos: HashMap<usize, usize> = group.iter().enumerate().map(|(p, &g)| (g, p)).collect();
        let mut out = CMatrix::zeros(f * group.len(), f * group.len());
        for (p, &g) in group.iter().enumerate() {
            out.view_mut((p * f, p * f), (f, f)).copy_from(&self.diagonal[g]);
        }
        for &(a, b, v) in &self.couplings {
            if let (Some(&pa), Some(&pb)) = (pos.get(&a), pos.get(&b)) {
                for r in 0..f {
                    out[(pa * f + r, pb * f + r)] += v;
                }
            }
        }
        out
    }

    /// Eigen-decomposition solved independently on each connected component.
    pub fn spectrum(&self, tol: f64) -> Result<Spectrum> {
        let residual = self.hermitian_residual();
        if residual > tol {
            return Err(Error::NotHermitian { residual, tolerance: tol });
        }
        let groups = self.components();
        let parts: Vec<Vec<Eigenpair>> = groups
            .par_iter()
            .map(|g| {
                let (vals, vecs) = eigh(&self.component_matrix(g), tol)?;
                Ok(vals
                    .into_iter()
                    .enumerate()
                    .map(|(k, value)| Eigenpair { value, support: g.clone(), vector: vecs.column(k).into_owned() })
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(Spectrum::from_pairs(self.lattice.clone(), self.fiber, parts.into_iter().flatten().collect()))
    }
}

/// `D_f = ±D_M^{ΣN} − f/2` on an auxiliary bundle torus.
pub fn assemble_df(
    model: &ModelGeometry,
    split: &SplitRep,
    truncation: usize,
    sign: TwistSign,
) -> Result<ModeCoupledOperator> {
    let aux = model.auxiliary_bundle_data()?;
    if !aux.f.is_real() {
        return Err(Error::NotReal("f".into()));
    }
    let ops = TorusOperators::new(model, split, truncation)?;
    let lattice = ops.lattice.clone();
    let fiber = ops.fiber();
    let zero_mode = vec![0; model.m()];
    let f0 = aux.f.coefficient(&zero_mode);
    let diagonal: Vec<CMatrix> = (0..lattice.len())
        .into_par_iter()
        .map(|idx| ops.twisted_block(idx) * c(sign.factor(), 0.0) - identity(fiber) * (f0 * 0.5))
        .collect();
    let mut couplings = Vec::new();
    for (a, ka) in lattice.modes().iter().enumerate() {
        for (kf, v) in aux.f.terms() {
            if kf == &zero_mode || v.norm() == 0.0 {
                continue;
            }
            let kb: Vec<i32> = ka.iter().zip(kf).map(|(x, y)| x - y).collect();
            if let Some(b) = lattice.index_of(&kb) {
                couplings.push((a, b, -v * 0.5));
            }
        }
    }
    let op = ModeCoupledOperator { lattice, fiber, diagonal, couplings };
    let residual = op.hermitian_residual();
    if residual > HERMITIAN_TOL {
        return Err(Error::NotHermitian { residual, tolerance: HERMITIAN_TOL });
    }
    Ok(op)
}

/// One eigenpair, supported on a set of modes (mode-major coefficients).
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    pub support: Vec<usize>,
    pub vector: CVector,
}

impl Eigenpair {
    pub fn to_field(&self, lattice: &Lattice, fiber: usize) -> FourierSpinorField {
        let mut out = FourierSpinorField::zeros(lattice, fiber);
        for (p, &idx) in self.support.iter().enumerate() {
            out.coeffs_mut()[idx] = self.vector.rows(p * fiber, fiber).into_owned();
        }
        out
    }

    /// Mode carrying the largest coefficient norm, and that norm.
    pub fn dominant(&self, fiber: usize) -> (usize, f64) {
        self.support
            .iter()
            .enumerate()
            .map(|(p, &idx)| (idx, norm_sq(&self.vector.rows(p * fiber, fiber).into_owned()).sqrt()))
            .fold((self.support[0], -1.0), |best, cur| if cur.1 > best.1 + 1e-12 { cur } else { best })
    }
}

/// Real spectrum with eigenvectors, sorted by eigenvalue then mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub lattice: Lattice,
    pub fiber: usize,
    pub pairs: Vec<Eigenpair>,
}

impl Spectrum {
    fn from_pairs(lattice: Lattice, fiber: usize, mut pairs: Vec<Eigenpair>) -> Self {
        pairs.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.support[0].cmp(&b.support[0])));
        Self { lattice, fiber, pairs }
    }

    pub fn values(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    /// The `count` eigenpairs of smallest `|λ|` (ties broken by the sort order).
    pub fn lowest_by_abs(&self, count: usize) -> Vec<&Eigenpair> {
        let mut refs: Vec<&Eigenpair> = self.pairs.iter().collect();
        refs.sort_by(|a, b| a.value.abs().total_cmp(&b.value.abs()));
        refs.truncate(count);
        refs
    }

    pub fn field(&self, k: usize) -> FourierSpinorField {
        self.pairs[k].to_field(&self.lattice, self.fiber)
    }

    /// CSV with columns `index,mode,eigenvalue,weight`, where `mode` is the
    /// dominant mode (`;`-separated) and `weight` its coefficient norm.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,mode,eigenvalue,weight\n");
        for (k, p) in self.pairs.iter().enumerate() {
            let (idx, w) = p.dominant(self.fiber);
            let mode: Vec<String> = self.lattice.modes()[idx].iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "{k},{},{:.12e},{:.12e}", mode.join(";"), p.value, w);
        }
        out
    }
}

/// Eigen-decomposition of per-mode blocks, one independent solve per block.
pub fn spectrum(blocks: &[OperatorBlock], lattice: &Lattice, tol: f64) -> Result<Spectrum> {
    let fiber = blocks.first().map_or(0, |b| b.matrix.nrows());
    let parts: Vec<Vec<Eigenpair>> = blocks
        .par_iter()
        .map(|b| {
            let idx = lattice
                .index_of(&b.mode)
                .ok_or_else(|| Error::InvalidParameter("block mode outside lattice".into()))?;
            let (vals, vecs) = eigh(&b.matrix, tol)?;
            Ok(vals
                .into_iter()
                .enumerate()
                .map(|(k, value)| Eigenpair { value, support: vec![idx], vector: vecs.column(k).into_owned() })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(Spectrum::from_pairs(lattice.clone(), fiber, parts.into_iter().flatten().collect()))
}

/// Values of a spinor and its covariant derivatives at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct JetSample {
    pub point: Vec<f64>,
    /// Quadrature weight of the point.
    pub weight: f64,
    pub psi: CVector,
    /// Intrinsic `∇_{eᵢ}ψ`.
    pub nabla: Vec<CVector>,
    /// Ambient `∇̃_{eᵢ}ψ`.
    pub nabla_ambient: Vec<CVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinorJet {
    pub samples: Vec<JetSample>,
}

impl SpinorJet {
    pub fn integrate(&self, g: impl Fn(&JetSample) -> f64) -> f64 {
        self.samples.iter().map(|s| s.weight * g(s)).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.integrate(|s| norm_sq(&s.psi))
    }

    pub fn max_psi_sq(&self) -> f64 {
        self.samples.iter().map(|s| norm_sq(&s.psi)).fold(0.0, f64::max)
    }
}

/// Components `c(x) = S(x)⁻¹ψ₀` of the restriction of an ambient-parallel
/// spinor, with analytic derivatives from the product-of-exponentials lift
/// `S = Π exp(x_c σ(X))` of the frame rotation.
pub fn restricted_parallel_jet(
    model: &ModelGeometry,
    split: &SplitRep,
    psi0: &CVector,
    points: &[(Vec<f64>, f64)],
) -> Result<SpinorJet> {
    check_split(model, split)?;
    let factors: Vec<(usize, CMatrix)> =
        model.spin_lift_factors()?.into_iter().map(|(k, x)| (k, split.spin_algebra(&x))).collect();
    let samples = points
        .iter()
        .map(|(x, w)| {
            let inv: Vec<CMatrix> = factors.iter().map(|(k, s)| expm(&(s * c(-x[*k], 0.0)))).collect();
            let mut psi = psi0.clone();
            for e in &inv {
                psi = e * psi;
            }
            let scales = model.coordinate_scales(x);
            let intrinsic = connection_matrices(model, split, x, ConnectionKind::Intrinsic)?;
            let ambient = connection_matrices(model, split, x, ConnectionKind::Ambient)?;
            let mut partial = vec![CVector::zeros(psi0.len()); model.m()];
            for (p, (k, s)) in factors.iter().enumerate() {
                let mut v = psi0.clone();
                for e in &inv[..p] {
                    v = e * v;
                }
                v = -(s * inv[p].clone() * v);
                for e in &inv[p + 1..] {
                    v = e * v;
                }
                partial[*k] += v;
            }
            let deriv: Vec<CVector> = partial.iter().zip(&scales).map(|(d, s)| d / c(*s, 0.0)).collect();
            Ok(JetSample {
                point: x.clone(),
                weight: *w,
                nabla: deriv.iter().zip(&intrinsic).map(|(d, a)| d + a * &psi).collect(),
                nabla_ambient: deriv.iter().zip(&ambient).map(|(d, a)| d + a * &psi).collect(),
                psi,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SpinorJet { samples })
}

/// Jet of a Fourier field on the `n^m` grid of a torus model.
pub fn torus_jet(ops: &TorusOperators, field: &FourierSpinorField, n: usize) -> Result<SpinorJet> {
    let values = field.grid_values(n)?;
    let nabla: Vec<Vec<CVector>> =
        (0..ops.m()).map(|i| ops.intrinsic.apply(field, i).grid_values(n)).collect::<Result<_>>()?;
    let nabla_t: Vec<Vec<CVector>> =
        (0..ops.m()).map(|i| ops.ambient.apply(field, i).grid_values(n)).collect::<Result<_>>()?;
    let w = ops.volume / values.len() as f64;
    let points = ops.lattice.grid_points(n);
    let samples = points
        .into_iter()
        .zip(values)
        .enumerate()
        .map(|(j, (point, psi))| JetSample {
            point,
            weight: w,
            psi,
            nabla: nabla.iter().map(|g| g[j].clone()).collect(),
            nabla_ambient: nabla_t.iter().map(|g| g[j].clone()).collect(),
        })
        .collect();
    Ok(SpinorJet { samples })
}

/// `Σ γ(eᵢ) vᵢ` for per-direction vectors.
pub fn clifford_contract(split: &SplitRep, v: &[CVector]) -> CVector {
    v.iter().enumerate().fold(CVector::zeros(split.fiber_dim()), |acc, (i, x)| acc + split.tangent(i) * x)
}

/// Pointwise operator values from a jet sample.
pub fn dirac_at(split: &SplitRep, s: &JetSample) -> CVector {
    clifford_contract(split, &s.nabla)
}

pub fn ambient_dirac_at(split: &SplitRep, s: &JetSample) -> CVector {
    clifford_contract(split, &s.nabla_ambient)
}

pub fn dh_at(split: &SplitRep, h: &[f64], s: &JetSample) -> CVector {
    let sign = if split.n() % 2 == 0 { 1.0 } else { -1.0 };
    let w = split.omega_perp();
    w * dirac_at(split, s) * c(sign, 0.0) + split.normal_vector(h) * w * &s.psi * c(0.5, 0.0)
}

pub fn twisted_at(split: &SplitRep, s: &JetSample) -> CVector {
    s.nabla
        .iter()
        .enumerate()
        .fold(CVector::zeros(split.fiber_dim()), |acc, (i, x)| acc + &split.tangent_action()[i] * x)
}

/// Frozen-coefficient symbols at a covector `ξ` (frame components).
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlocks {
    pub dirac: CMatrix,
    pub ambient_dirac: CMatrix,
    pub dh: CMatrix,
    pub twisted: CMatrix,
    pub gamma_h: CMatrix,
}

/// `D ↦ Σ γ(eᵢ) iξᵢ`, `D̃ ↦ D − ½γ(H)`, `D_H`, `D_M^{ΣN}` with `H` taken at `x`.
pub fn symbol_blocks(model: &ModelGeometry, split: &SplitRep, x: &[f64], xi: &[f64]) -> Result<SymbolBlocks> {
    check_split(model, split)?;
    let h = model.mean_curvature(x)?;
    let gamma_h = split.normal_vector(&h);
    let dirac = split.tangent_vector(xi) * I;
    let twisted = split.intrinsic_vector(xi) * I;
    let ambient_dirac = &dirac - &gamma_h * c(0.5, 0.0);
    let sign = if split.n() % 2 == 0 { 1.0 } else { -1.0 };
    let w = split.omega_perp();
    let dh = w * &dirac * c(sign, 0.0) + &gamma_h * w * c(0.5, 0.0);
    Ok(SymbolBlocks { dirac, ambient_dirac, dh, twisted, gamma_h })
}

/// Multiplies a field by `e^{s u}` pseudo-spectrally on a grid padded two
/// times past the lattice, refusing results whose spectral tail beyond the
/// lattice exceeds `tol` relative to the largest coefficient.
pub fn conformal_transport(
    field: &FourierSpinorField,
    conf: &ConformalData,
    weight: f64,
    tol: f64,
) -> Result<FourierSpinorField> {
    let lattice = field.lattice();
    let k = lattice.truncation();
    let extended = Lattice::new(lattice.periods().to_vec(), lattice.shift().to_vec(), 2 * k)?;
    let n = 2 * extended.min_grid();
    let values = field.grid_values(n)?;
    let scaled: Vec<CVector> = lattice
        .grid_points(n)
        .iter()
        .zip(values)
        .map(|(x, v)| v * c((weight * conf.u.eval(x)).exp(), 0.0))
        .collect();
    let coeffs = analyze(&extended, &scaled, field.fiber(), n)?;
    let peak = coeffs.iter().map(|v| norm_sq(v).sqrt()).fold(0.0, f64::max);
    let tail = extended
        .modes()
        .iter()
        .zip(&coeffs)
        .filter(|(mode, _)| lattice.index_of(mode).is_none())
        .map(|(_, v)| norm_sq(v).sqrt())
        .fold(0.0, f64::max);
    if peak > 0.0 && tail > tol * peak {
        return Err(Error::InsufficientPadding { tail: tail / peak, tolerance: tol });
    }
    let kept = lattice
        .modes()
        .iter()
        .map(|mode| coeffs[extended.index_of(mode).unwrap()].clone())
        .collect();
    FourierSpinorField::from_coeffs(lattice, field.fiber(), kept)
}

/// Koszul connection forms of `ḡ = e^{2u} g` in the frame `ēₐ = e^{−u} eₐ`
/// from flat coordinates: `(Ω̄ₐ)_{cb} = e^{−u}(u_b δ_ac − u_c δ_ab)`.
pub fn koszul_connection(m: usize, n: usize, u: f64, du: &[f64]) -> Vec<RMatrix> {
    let eu = (-u).exp();
    (0..m)
        .map(|a| {
            let mut o = RMatrix::zeros(m + n, m + n);
            for b in 0..m {
                o[(a, b)] += eu * du[b];
                if a == b {
                    for cc in 0..m {
                        o[(cc, b)] -= eu * du[cc];
                    }
                }
            }
            o
        })
        .collect()
}

/// Jet of a field `φ` with respect to `ḡ = e^{2u} g` on the `n^m` grid:
/// `∇̄_{ēₐ}φ = e^{−u}∇ₐφ + σ(Ω̄ₐ)φ`, weights `e^{mu}` times the flat ones.
pub fn barred_jet(
    ops: &TorusOperators,
    conf: &ConformalData,
    field: &FourierSpinorField,
    n: usize,
) -> Result<SpinorJet> {
    let flat = torus_jet(ops, field, n)?;
    let (m, nn) = (ops.m(), ops.split.n());
    let samples = flat
        .samples
        .into_iter()
        .map(|s| {
            let u = conf.u.eval(&s.point);
            let du = conf.u.gradient(&s.point);
            let eu = c((-u).exp(), 0.0);
            let koszul = koszul_connection(m, nn, u, &du);
            let nabla: Vec<CVector> = s
                .nabla
                .iter()
                .zip(&koszul)
                .map(|(d, o)| d * eu + ops.split.spin_algebra(o) * &s.psi)
                .collect();
            JetSample {
                weight: s.weight * (m as f64 * u).exp(),
                nabla_ambient: nabla.clone(),
                nabla,
                point: s.point,
                psi: s.psi,
            }
        })
        .collect();
    Ok(SpinorJet { samples })
}

/// `D̄φ` on the grid.
pub fn barred_dirac(ops: &TorusOperators, conf: &ConformalData, field: &FourierSpinorField, n: usize) -> Result<Vec<CVector>> {
    Ok(barred_jet(ops, conf, field, n)?.samples.iter().map(|s| dirac_at(&ops.split, s)).collect())
}

/// `D̄_H φ = (−1)^n ω⊥ D̄φ + ½ e^{−u} γ(H) ω⊥ φ` on the grid.
pub fn barred_dh(ops: &TorusOperators, conf: &ConformalData, field: &FourierSpinorField, n: usize) -> Result<Vec<CVector>> {
    let jet = barred_jet(ops, conf, field, n)?;
    let gh = ops.gamma_h();
    let w = ops.split.omega_perp();
    Ok(jet
        .samples
        .iter()
        .map(|s| {
            let eu = (-conf.u.eval(&s.point)).exp();
            w * dirac_at(&ops.split, s) * c(ops.normal_sign(), 0.0) + &gh * w * &s.psi * c(0.5 * eu, 0.0)
        })
        .collect())
}

/// Grid values of `ψ` multiplied by `e^{s u}`.
pub fn weighted_grid(field: &FourierSpinorField, conf: &ConformalData, weight: f64, n: usize) -> Result<Vec<CVector>> {
    let values = synthesize(field.lattice(), field.coeffs(), field.fiber(), n)?;
    Ok(field
        .lattice()
        .grid_points(n)
        .iter()
        .zip(values)
        .map(|(x, v)| v * c((weight * conf.u.eval(x)).exp(), 0.0))
        .collect())
}

/// Relative `ℓ²` distance between two grid functions.
pub fn relative_grid_residual(a: &[CVector], b: &[CVector]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| norm_sq(&(x - y))).sum();
    let den: f64 = a.iter().chain(b).map(norm_sq).sum();
    (num / (den + 1e-300)).sqrt()
}

/// Max residual of `M² − Aᴴ A` for matching block lists.
pub fn square_identity_residual(dh: &[OperatorBlock], dt: &[OperatorBlock]) -> f64 {
    dh.iter()
        .zip(dt)
        .map(|(a, b)| max_abs(&(&a.matrix * &a.matrix - b.matrix.adjoint() * &b.matrix)))
        .fold(0.0, f64::max)
}
