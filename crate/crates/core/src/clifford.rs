//! Irreducible complex Clifford representations built from tensor products.
//!
//! A representation of `Cl_{m+n}` is assembled from representations of
//! `Cl_m` and `Cl_n` by one of four constructions, selected by the parities
//! of `m` and `n`. The resulting [`SplitRep`] keeps track of the tangent
//! (first `m`) and normal (last `n`) generators, the normal volume element
//! `ω⊥` and the intrinsic tangent multiplication `X ·_M ψ = X · ω⊥ · ψ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{
    anticommutator, block2, c, identity, kron, max_abs, skew_hermitian_residual, zeros, I, ONE,
};
use crate::{CMatrix, CVector, Error, Result};

/// Default cap on `m + n`; fibers grow as `2^⌊(m+n)/2⌋`.
pub const DEFAULT_DIM_CAP: usize = 12;

/// Tolerance for exact algebraic identities evaluated in double precision.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// An irreducible complex representation of `Cl_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordRep {
    dim: usize,
    generators: Vec<CMatrix>,
    parity_class: u8,
}

impl CliffordRep {
    /// Builds a representation from raw generators without validation.
    pub fn from_generators(generators: Vec<CMatrix>, parity_class: u8) -> Self {
        Self { dim: generators.len(), generators, parity_class: parity_class & 1 }
    }

    /// Irreducible representation of `Cl_k`, built by repeated `(k−2, 2)`
    /// splits down to the one- and two-dimensional bases. `parity` selects
    /// the class for odd `k` and is ignored for even `k`.
    pub fn irreducible(k: usize, parity: u8) -> Result<Self> {
        Self::irreducible_with_cap(k, parity, DEFAULT_DIM_CAP)
    }

    pub fn irreducible_with_cap(k: usize, parity: u8, cap: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidBase("k must be positive".into()));
        }
        if k > cap {
            return Err(Error::DimensionCap { dim: k, cap });
        }
        if k <= 2 {
            return base_rep(k, parity);
        }
        let lower = Self::irreducible_with_cap(k - 2, parity, cap)?;
        let plane = base_rep(2, 0)?;
        Ok(tensor_construct_with_cap(&lower, &plane, cap)?.total)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[CMatrix] {
        &self.generators
    }

    pub fn generator(&self, i: usize) -> &CMatrix {
        &self.generators[i]
    }

    /// Parity class `j` with `ρ(ω_k) = (−1)^j Id`; zero for even `k`.
    pub fn parity_class(&self) -> u8 {
        if self.dim % 2 == 1 { self.parity_class } else { 0 }
    }

    pub fn fiber_dim(&self) -> usize {
        self.generators.first().map_or(1, |g| g.nrows())
    }

    /// `ρ(v) = Σ vₐ ρ(eₐ)`.
    pub fn apply_vector(&self, v: &[f64]) -> CMatrix {
        let mut out = zeros(self.fiber_dim());
        for (g, &x) in self.generators.iter().zip(v) {
            out += g * c(x, 0.0);
        }
        out
    }

    /// Same representation with every generator negated.
    pub fn negated(&self) -> Self {
        let generators = self.generators.iter().map(|g| -g).collect();
        let flip = if self.dim % 2 == 1 { 1 } else { 0 };
        Self { dim: self.dim, generators, parity_class: self.parity_class ^ flip }
    }
}

/// Recursion base: `Cl_1` and `Cl_2`.
///
/// For `k = 1` the generator is `−i (−1)^j`, so `ω₁ = i ρ(e₁) = (−1)^j`.
/// For `k = 2` the generators are `i σ_x` and `i σ_y`, giving `ω₂ = diag(1, −1)`.
pub fn base_rep(k: usize, parity: u8) -> Result<CliffordRep> {
    match k {
        1 => {
            if parity > 1 {
                return Err(Error::InvalidBase(format!("parity class {parity} not in {{0,1}}")));
            }
            let sign = if parity == 0 { -1.0 } else { 1.0 };
            Ok(CliffordRep::from_generators(vec![CMatrix::from_element(1, 1, c(0.0, sign))], parity))
        }
        2 => {
            let z = c(0.0, 0.0);
            let e1 = CMatrix::from_row_slice(2, 2, &[z, I, I, z]);
            let e2 = CMatrix::from_row_slice(2, 2, &[z, ONE, -ONE, z]);
            Ok(CliffordRep::from_generators(vec![e1, e2], 0))
        }
        _ => Err(Error::InvalidBase(format!("base representation requires k in {{1,2}}, got {k}"))),
    }
}

/// Complex volume element `i^⌊(k+1)/2⌋ ρ(e₁)⋯ρ(e_k)`.
pub fn volume_element(rep: &CliffordRep) -> CMatrix {
    ordered_volume(rep.generators(), rep.fiber_dim())
}

fn ordered_volume(gens: &[CMatrix], size: usize) -> CMatrix {
    let k = gens.len();
    let mut prod = identity(size);
    for g in gens {
        prod *= g;
    }
    prod * I.powu(((k + 1) / 2) as u32)
}

/// Which of the four parity constructions produced a [`SplitRep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SplitCase {
    EvenEven,
    OddEven,
    EvenOdd,
    OddOdd,
}

impl SplitCase {
    pub fn of(m: usize, n: usize) -> Self {
        match (m % 2, n % 2) {
            (0, 0) => SplitCase::EvenEven,
            (1, 0) => SplitCase::OddEven,
            (0, 1) => SplitCase::EvenOdd,
            _ => SplitCase::OddOdd,
        }
    }
}

/// Representation of `Cl_{m+n}` adapted to a tangent/normal splitting.
#[derive(Debug, Clone)]
pub struct SplitRep {
    total: CliffordRep,
    rep_m: CliffordRep,
    rep_n: CliffordRep,
    m: usize,
    n: usize,
    case: SplitCase,
    tangent_action: Vec<CMatrix>,
    omega_perp: CMatrix,
    doubling: bool,
}

impl SplitRep {
    /// Split representation from irreducible factors of the given classes.
    pub fn new(m: usize, n: usize, parity_m: u8, parity_n: u8) -> Result<Self> {
        let rep_m = CliffordRep::irreducible(m, parity_m)?;
        let rep_n = CliffordRep::irreducible(n, parity_n)?;
        tensor_construct(&rep_m, &rep_n)
    }

    pub fn total(&self) -> &CliffordRep {
        &self.total
    }
    pub fn rep_m(&self) -> &CliffordRep {
        &self.rep_m
    }
    pub fn rep_n(&self) -> &CliffordRep {
        &self.rep_n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn case(&self) -> SplitCase {
        self.case
    }
    /// True exactly when `m` and `n` are both odd (fiber `Σ ⊕ Σ`).
    pub fn doubling(&self) -> bool {
        self.doubling
    }
    pub fn fiber_dim(&self) -> usize {
        self.total.fiber_dim()
    }
    pub fn omega_perp(&self) -> &CMatrix {
        &self.omega_perp
    }
    /// Matrices of `eᵢ ·_M`, i.e. `γ(eᵢ) ω⊥`.
    pub fn tangent_action(&self) -> &[CMatrix] {
        &self.tangent_action
    }

    /// `γ(eᵢ)` for tangent index `i < m`.
    pub fn tangent(&self, i: usize) -> &CMatrix {
        self.total.generator(i)
    }

    /// `γ(ν_α)` for normal index `α < n`.
    pub fn normal(&self, alpha: usize) -> &CMatrix {
        self.total.generator(self.m + alpha)
    }

    /// `γ(v)` for a tangent vector given in frame components.
    pub fn tangent_vector(&self, v: &[f64]) -> CMatrix {
        let mut out = zeros(self.fiber_dim());
        for (i, &x) in v.iter().enumerate().take(self.m) {
            out += self.tangent(i) * c(x, 0.0);
        }
        out
    }

    /// `γ(w)` for a normal vector given in frame components.
    pub fn normal_vector(&self, w: &[f64]) -> CMatrix {
        let mut out = zeros(self.fiber_dim());
        for (a, &x) in w.iter().enumerate().take(self.n) {
            out += self.normal(a) * c(x, 0.0);
        }
        out
    }

    /// `X ·_M` for a tangent vector in frame components.
    pub fn intrinsic_vector(&self, v: &[f64]) -> CMatrix {
        self.tangent_vector(v) * &self.omega_perp
    }

    /// Embedded `ω_m = i^⌊(m+1)/2⌋ γ(e₁)⋯γ(e_m)`.
    pub fn omega_m(&self) -> CMatrix {
        ordered_volume(&self.total.generators()[..self.m], self.fiber_dim())
    }

    /// Embedded `ω_n = i^⌊(n+1)/2⌋ γ(ν₁)⋯γ(ν_n)`.
    pub fn omega_n(&self) -> CMatrix {
        ordered_volume(&self.total.generators()[self.m..], self.fiber_dim())
    }

    /// Spin Lie algebra image `−¼ Σ X_ab γ_a γ_b` of an antisymmetric
    /// `(m+n)×(m+n)` matrix in the adapted frame.
    ///
    /// With this normalization `[σ(X), γ(v)] = γ(Xv)`, so `exp σ(X)` lifts `exp X`.
    pub fn spin_algebra(&self, x: &crate::RMatrix) -> CMatrix {
        let dim = self.m + self.n;
        let mut out = zeros(self.fiber_dim());
        for a in 0..dim {
            for b in 0..dim {
                let xab = x[(a, b)];
                if a != b && xab != 0.0 {
                    out -= self.total.generator(a) * self.total.generator(b) * c(0.25 * xab, 0.0);
                }
            }
        }
        out
    }
}

/// Builds the split representation with the default dimension cap.
pub fn tensor_construct(rep_m: &CliffordRep, rep_n: &CliffordRep) -> Result<SplitRep> {
    tensor_construct_with_cap(rep_m, rep_n, DEFAULT_DIM_CAP)
}

/// Builds a representation of `Cl_{m+n}` from `ρ_m` and `ρ_n`.
///
/// In the odd–odd case the second input plays the role of `ρ_n^0`, the
/// opposite class is taken as `ρ_n^1 := −ρ_n^0` and the intertwiner `τ` is
/// the identity.
pub fn tensor_construct_with_cap(
    rep_m: &CliffordRep,
    rep_n: &CliffordRep,
    cap: usize,
) -> Result<SplitRep> {
    let (m, n) = (rep_m.dim(), rep_n.dim());
    if m + n > cap {
        return Err(Error::DimensionCap { dim: m + n, cap });
    }
    let (dm, dn) = (rep_m.fiber_dim(), rep_n.fiber_dim());
    let (id_m, id_n) = (identity(dm), identity(dn));
    let vol_m = volume_element(rep_m);
    let vol_n = volume_element(rep_n);
    let case = SplitCase::of(m, n);

    let mut generators = Vec::with_capacity(m + n);
    let parity;
    match case {
        SplitCase::EvenEven | SplitCase::OddEven => {
            for g in rep_m.generators() {
                generators.push(kron(g, &vol_n));
            }
            for g in rep_n.generators() {
                generators.push(kron(&id_m, g));
            }
            parity = rep_m.parity_class();
        }
        SplitCase::EvenOdd => {
            for g in rep_m.generators() {
                generators.push(kron(&(g * &vol_m), &id_n) * I);
            }
            for g in rep_n.generators() {
                generators.push(kron(&vol_m, g));
            }
            parity = rep_n.parity_class();
        }
        SplitCase::OddOdd => {
            let z = zeros(dm * dn);
            for g in rep_m.generators() {
                let a = kron(g, &id_n);
                generators.push(block2(&z, &a, &(-&a), &z) * I);
            }
            // ρ_n^1 = −ρ_n^0, so −τ⁻¹∘ρ_n^1 = ρ_n^0 in the upper block.
            for g in rep_n.generators() {
                let b = kron(&id_m, g);
                generators.push(block2(&z, &b, &b, &z));
            }
            parity = 0;
        }
    }
    let total = CliffordRep::from_generators(generators, parity);
    let fiber = total.fiber_dim();
    let omega_n = ordered_volume(&total.generators()[m..], fiber);
    let omega_perp = if n % 2 == 0 { omega_n } else { omega_n * c(0.0, -1.0) };
    let tangent_action = (0..m).map(|i| total.generator(i) * &omega_perp).collect();
    Ok(SplitRep {
        total,
        rep_m: rep_m.clone(),
        rep_n: rep_n.clone(),
        m,
        n,
        case,
        tangent_action,
        omega_perp,
        doubling: case == SplitCase::OddOdd,
    })
}

/// One factor of a Clifford word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Token {
    /// Basis vector `e_a` of `R^{m+n}` (tangent first, then normal), zero based.
    Basis(usize),
    OmegaPerp,
}

/// A signed Clifford monomial such as `−e₁·ω⊥`.
#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    pub sign: f64,
    pub tokens: Vec<Token>,
}

impl Word {
    pub fn new(tokens: Vec<Token>) -> Self {
        Self { sign: 1.0, tokens }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn negated(mut self) -> Self {
        self.sign = -self.sign;
        self
    }
}

/// Matrix of a Clifford word: the product of its factors in reading order.
pub fn word_matrix(split: &SplitRep, word: &Word) -> Result<CMatrix> {
    let dim = split.m + split.n;
    let mut out = identity(split.fiber_dim()) * c(word.sign, 0.0);
    for t in &word.tokens {
        match *t {
            Token::Basis(a) if a >= dim => return Err(Error::IndexOutOfRange { index: a, dim }),
            Token::Basis(a) => out *= split.total.generator(a),
            Token::OmegaPerp => out *= &split.omega_perp,
        }
    }
    Ok(out)
}

/// Applies the Clifford product `w₁·w₂·⋯·ψ` of a word to a fiber vector.
pub fn clifford_apply(split: &SplitRep, word: &Word, spinor: &CVector) -> Result<CVector> {
    Ok(word_matrix(split, word)? * spinor)
}

/// Max residuals of the algebraic identities satisfied by a [`SplitRep`].
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct IdentityReport {
    pub m: usize,
    pub n: usize,
    pub parity_m: u8,
    pub parity_n: u8,
    pub clifford_relations: f64,
    pub skew_hermitian: f64,
    pub random_sum_square: f64,
    pub volume_square: f64,
    pub volume_relation: f64,
    pub volume_class: f64,
    pub normal_volume_action: f64,
    pub tangent_multiplication: f64,
    pub intrinsic_relations: f64,
    pub omega_perp_square: f64,
    pub normal_commutation: f64,
    pub doubled_blocks: f64,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.clifford_relations,
            self.skew_hermitian,
            self.random_sum_square,
            self.volume_square,
            self.volume_relation,
            self.volume_class,
            self.normal_volume_action,
            self.tangent_multiplication,
            self.intrinsic_relations,
            self.omega_perp_square,
            self.normal_commutation,
            self.doubled_blocks,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Evaluates every algebraic identity of the construction.
pub fn verify_identities(split: &SplitRep) -> IdentityReport {
    verify_identities_seeded(split, 0x5eed, 16)
}

pub fn verify_identities_seeded(split: &SplitRep, seed: u64, samples: usize) -> IdentityReport {
    let (m, n) = (split.m, split.n);
    let fiber = split.fiber_dim();
    let id = identity(fiber);
    let gens = split.total.generators();
    let mut rep = IdentityReport {
        m,
        n,
        parity_m: split.rep_m.parity_class(),
        parity_n: split.rep_n.parity_class(),
        ..Default::default()
    };

    for a in 0..m + n {
        rep.skew_hermitian = rep.skew_hermitian.max(skew_hermitian_residual(&gens[a]));
        for b in a..m + n {
            let expect = if a == b { &id * c(-2.0, 0.0) } else { zeros(fiber) };
            let r = max_abs(&(anticommutator(&gens[a], &gens[b]) - expect));
            rep.clifford_relations = rep.clifford_relations.max(r);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dm = split.rep_m.fiber_dim();
    let dn = split.rep_n.fiber_dim();
    let id_n = identity(dn);
    for _ in 0..samples {
        let v = random_vector(&mut rng, m);
        let w = random_vector(&mut rng, n);
        let g = split.tangent_vector(&v) + split.normal_vector(&w);
        let len2: f64 = v.iter().chain(&w).map(|x| x * x).sum();
        rep.random_sum_square = rep.random_sum_square.max(max_abs(&(&g * &g + &id * c(len2, 0.0))));

        // γ(v·ω_n) against the case formula.
        let rho_v = split.rep_m.apply_vector(&v);
        let gv_on = split.tangent_vector(&v) * split.omega_n();
        let expect = match split.case {
            SplitCase::EvenEven | SplitCase::OddEven => kron(&rho_v, &id_n),
            SplitCase::EvenOdd => {
                let sign = if split.rep_n.parity_class() == 0 { 1.0 } else { -1.0 };
                kron(&rho_v, &id_n) * c(0.0, sign)
            }
            SplitCase::OddOdd => {
                let a = kron(&rho_v, &id_n);
                block2(&a, &zeros(dm * dn), &zeros(dm * dn), &(-&a)) * I * c(odd_odd_normal_sign(split), 0.0)
            }
        };
        rep.normal_volume_action = rep.normal_volume_action.max(max_abs(&(gv_on - &expect)));

        // X ·_M against the intrinsic multiplication on Σ.
        let intrinsic = match split.case {
            SplitCase::EvenEven | SplitCase::OddEven => kron(&rho_v, &id_n),
            SplitCase::EvenOdd => {
                let sign = if split.rep_n.parity_class() == 0 { 1.0 } else { -1.0 };
                kron(&rho_v, &id_n) * c(sign, 0.0)
            }
            SplitCase::OddOdd => {
                let a = kron(&rho_v, &id_n);
                block2(&a, &zeros(dm * dn), &zeros(dm * dn), &(-&a)) * c(odd_odd_normal_sign(split), 0.0)
            }
        };
        let word_action = split.intrinsic_vector(&v);
        rep.tangent_multiplication = rep.tangent_multiplication.max(max_abs(&(word_action - intrinsic)));

        // H·ω⊥ = (−1)^{n−1} ω⊥·H for normal H.
        let h = split.normal_vector(&w);
        let sign = if (n - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let r = max_abs(&(&h * &split.omega_perp - &split.omega_perp * &h * c(sign, 0.0)));
        rep.normal_commutation = rep.normal_commutation.max(r);
    }

    for (a, ta) in split.tangent_action.iter().enumerate() {
        for (b, tb) in split.tangent_action.iter().enumerate().skip(a) {
            let expect = if a == b { &id * c(-2.0, 0.0) } else { zeros(fiber) };
            rep.intrinsic_relations = rep.intrinsic_relations.max(max_abs(&(anticommutator(ta, tb) - expect)));
        }
    }

    let vol = volume_element(&split.total);
    rep.volume_square = max_abs(&(&vol * &vol - &id));
    let om = split.omega_m();
    let on = split.omega_n();
    let product = if split.case == SplitCase::OddOdd { &om * &on * c(0.0, -1.0) } else { &om * &on };
    rep.volume_relation = max_abs(&(&vol - product));
    let class_expect = match split.case {
        SplitCase::EvenEven => kron(&volume_element(&split.rep_m), &volume_element(&split.rep_n)),
        SplitCase::OddEven | SplitCase::EvenOdd => {
            let s = if split.total.parity_class() == 0 { 1.0 } else { -1.0 };
            &id * c(s, 0.0)
        }
        SplitCase::OddOdd => {
            let half = fiber / 2;
            let s = odd_odd_volume_sign(split);
            block2(&identity(half), &zeros(half), &zeros(half), &(-identity(half))) * c(s, 0.0)
        }
    };
    rep.volume_class = max_abs(&(&vol - class_expect));

    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    rep.omega_perp_square = max_abs(&(&split.omega_perp * &split.omega_perp - &id * c(sign, 0.0)));

    if split.doubling {
        let half = fiber / 2;
        let off = |mat: &CMatrix| {
            max_abs(&mat.view((0, half), (half, half)).into_owned())
                .max(max_abs(&mat.view((half, 0), (half, half)).into_owned()))
        };
        let diag = |mat: &CMatrix| {
            max_abs(&mat.view((0, 0), (half, half)).into_owned())
                .max(max_abs(&mat.view((half, half), (half, half)).into_owned()))
        };
        let mut r: f64 = 0.0;
        for t in &split.tangent_action {
            r = r.max(off(t));
        }
        for alpha in 0..n {
            r = r.max(diag(split.normal(alpha)));
        }
        rep.doubled_blocks = r;
    }
    rep
}

/// `(−1)^{j_n}`: the odd–odd formulas for `γ(v·ω_n)` and `X ·_M` are stated
/// for `ρ_n^0` and pick up this sign when the normal factor has class 1.
pub fn odd_odd_normal_sign(split: &SplitRep) -> f64 {
    if split.rep_n.parity_class() == 0 { 1.0 } else { -1.0 }
}

/// Sign `s` with `γ(ω_{m+n}) = s · diag(Id_{Σ⁺}, −Id_{Σ⁻})` in the odd–odd case.
/// Equals `+1` when both factors have parity class 0.
pub fn odd_odd_volume_sign(split: &SplitRep) -> f64 {
    if (split.rep_m.parity_class() + split.rep_n.parity_class()) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}
