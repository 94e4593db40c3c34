//! Small dense complex linear-algebra helpers.

use nalgebra::SymmetricEigen;

use crate::{CMatrix, CVector, Error, RMatrix, Result, C64};

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(n: usize) -> CMatrix {
    CMatrix::zeros(n, n)
}

/// Kronecker product `a ⊗ b` with the row index of `a` varying slowest.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |r, c| {
        a[(r / br, c / bc)] * b[(r % br, c % bc)]
    })
}

/// 2×2 block matrix `[[a, b], [c, d]]` with equally sized square blocks.
pub fn block2(a: &CMatrix, b: &CMatrix, cc: &CMatrix, d: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let mut out = CMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((0, n), (n, n)).copy_from(b);
    out.view_mut((n, 0), (n, n)).copy_from(cc);
    out.view_mut((n, n), (n, n)).copy_from(d);
    out
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_vec(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Entry-wise max of `|M − Mᴴ|`.
pub fn hermitian_residual(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Entry-wise max of `|M + Mᴴ|`.
pub fn skew_hermitian_residual(m: &CMatrix) -> f64 {
    max_abs(&(m + m.adjoint()))
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

/// Real part of the Hermitian product `⟨a, b⟩ = Σ aᵢ conj(bᵢ)`.
pub fn re_inner(a: &CVector, b: &CVector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x * y.conj()).re).sum()
}

pub fn norm_sq(a: &CVector) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Rejects inputs whose Hermitian residual exceeds `tol`.
pub fn eigh(m: &CMatrix, tol: f64) -> Result<(Vec<f64>, CMatrix)> {
    let residual = hermitian_residual(m);
    if residual > tol {
        return Err(Error::NotHermitian { residual, tolerance: tol });
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Eigenvalues only of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &CMatrix, tol: f64) -> Result<Vec<f64>> {
    let residual = hermitian_residual(m);
    if residual > tol {
        return Err(Error::NotHermitian { residual, tolerance: tol });
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let norm: f64 = m.iter().map(|z| z.norm()).sum::<f64>().max(1e-300);
    let squarings = (norm.log2().ceil() as i32 + 1).max(0) as u32;
    let scaled = m.scale(0.5f64.powi(squarings as i32));
    let mut term = identity(n);
    let mut sum = identity(n);
    for k in 1..=24 {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Maximum absolute difference between two equally long sorted spectra.
pub fn spectrum_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
