//! Fourier lattices, band-limited functions and spinor fields on flat tori.
//!
//! A torus of periods `L₁..L_m` carries fields `ψ(x) = Σ_k c_k e^{iκ_k·x}` with
//! wave vectors `κ_k = 2π(k + δ)/L`, where `k` is integer and `δ ∈ [0, 1)^m`
//! is the spin-structure shift. Pointwise work happens on uniform grids
//! `x_j = L j / N` through FFTs.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::linalg::{c, norm_sq};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Retained Fourier modes `{k ∈ Z^m : |kᵢ + δᵢ| ≤ K}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    periods: Vec<f64>,
    shift: Vec<f64>,
    truncation: usize,
    modes: Vec<Vec<i32>>,
    index: HashMap<Vec<i32>, usize>,
}

impl Lattice {
    pub fn new(periods: Vec<f64>, shift: Vec<f64>, truncation: usize) -> Result<Self> {
        if truncation < 1 {
            return Err(Error::InvalidTruncation("K must be at least 1".into()));
        }
        if periods.is_empty() || periods.len() != shift.len() {
            return Err(Error::InvalidParameter("periods and shifts must have equal positive length".into()));
        }
        if periods.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter("periods must be positive".into()));
        }
        if shift.iter().any(|&d| !(0.0..1.0).contains(&d)) {
            return Err(Error::InvalidParameter("shifts must lie in [0, 1)".into()));
        }
        let kmax = truncation as f64 + 1e-9;
        let ranges: Vec<Vec<i32>> = shift
            .iter()
            .map(|&d| {
                let lo = (-kmax - d).ceil() as i32;
                let hi = (kmax - d).floor() as i32;
                (lo..=hi).collect()
            })
            .collect();
        let mut modes = vec![Vec::new()];
        for r in &ranges {
            modes = modes
                .into_iter()
                .flat_map(|prefix| {
                    r.iter().map(move |&k| {
                        let mut v = prefix.clone();
                        v.push(k);
                        v
                    })
                })
                .collect();
        }
        let index = modes.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        Ok(Self { periods, shift, truncation, modes, index })
    }

    pub fn dim(&self) -> usize {
        self.periods.len()
    }
    pub fn periods(&self) -> &[f64] {
        &self.periods
    }
    pub fn shift(&self) -> &[f64] {
        &self.shift
    }
    pub fn truncation(&self) -> usize {
        self.truncation
    }
    pub fn modes(&self) -> &[Vec<i32>] {
        &self.modes
    }
    pub fn len(&self) -> usize {
        self.modes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
    pub fn index_of(&self, mode: &[i32]) -> Option<usize> {
        self.index.get(mode).copied()
    }
    pub fn volume(&self) -> f64 {
        self.periods.iter().product()
    }

    /// `κ = 2π(k + δ)/L` for the mode at position `idx`.
    pub fn wavevector(&self, idx: usize) -> Vec<f64> {
        self.modes[idx]
            .iter()
            .zip(&self.periods)
            .zip(&self.shift)
            .map(|((&k, &l), &d)| 2.0 * PI * (k as f64 + d) / l)
            .collect()
    }

    /// Smallest grid size that resolves every retained mode without collisions.
    pub fn min_grid(&self) -> usize {
        (0..self.dim())
            .map(|d| {
                let lo = self.modes.iter().map(|k| k[d]).min().unwrap_or(0);
                let hi = self.modes.iter().map(|k| k[d]).max().unwrap_or(0);
                (hi - lo + 1) as usize
            })
            .max()
            .unwrap_or(1)
    }

    /// Grid points `x_j = L j / N`, flattened with the first axis slowest.
    pub fn grid_points(&self, n: usize) -> Vec<Vec<f64>> {
        grid_points(&self.periods, n)
    }
}

pub fn grid_points(periods: &[f64], n: usize) -> Vec<Vec<f64>> {
    let m = periods.len();
    let total = n.pow(m as u32);
    (0..total)
        .map(|flat| {
            let mut rem = flat;
            let mut x = vec![0.0; m];
            for d in (0..m).rev() {
                x[d] = periods[d] * (rem % n) as f64 / n as f64;
                rem /= n;
            }
            x
        })
        .collect()
}

fn wrap(k: i32, n: usize) -> usize {
    k.rem_euclid(n as i32) as usize
}

fn flat_index(mode: &[i32], n: usize) -> usize {
    mode.iter().fold(0, |acc, &k| acc * n + wrap(k, n))
}

/// In-place multidimensional FFT over an `n^m` array (first axis slowest).
fn fft_nd(data: &mut [C64], n: usize, m: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let mut line = vec![C64::new(0.0, 0.0); n];
    for axis in 0..m {
        let stride = n.pow((m - 1 - axis) as u32);
        let total = data.len();
        for start in 0..total {
            if (start / stride) % n != 0 {
                continue;
            }
            for j in 0..n {
                line[j] = data[start + j * stride];
            }
            fft.process(&mut line);
            for j in 0..n {
                data[start + j * stride] = line[j];
            }
        }
    }
}

/// Phase `e^{2πi δ·x/L}` at every grid point.
fn shift_phases(shift: &[f64], n: usize) -> Vec<C64> {
    let m = shift.len();
    let total = n.pow(m as u32);
    (0..total)
        .map(|flat| {
            let mut rem = flat;
            let mut phase = 0.0;
            for d in (0..m).rev() {
                phase += 2.0 * PI * shift[d] * (rem % n) as f64 / n as f64;
                rem /= n;
            }
            C64::from_polar(1.0, phase)
        })
        .collect()
}

/// Values of `Σ_k c_k e^{iκ_k·x}` on the `n^m` grid for a vector-valued field.
pub fn synthesize(lattice: &Lattice, coeffs: &[CVector], fiber: usize, n: usize) -> Result<Vec<CVector>> {
    if n < lattice.min_grid() {
        return Err(Error::InvalidTruncation(format!("grid {n} too coarse for lattice")));
    }
    let m = lattice.dim();
    let total = n.pow(m as u32);
    let phases = shift_phases(lattice.shift(), n);
    let mut out = vec![CVector::zeros(fiber); total];
    let mut buf = vec![C64::new(0.0, 0.0); total];
    for comp in 0..fiber {
        buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for (mode, cv) in lattice.modes().iter().zip(coeffs) {
            buf[flat_index(mode, n)] += cv[comp];
        }
        fft_nd(&mut buf, n, m, true);
        for (j, v) in out.iter_mut().enumerate() {
            v[comp] = buf[j] * phases[j];
        }
    }
    Ok(out)
}

/// Fourier coefficients on the lattice of grid values (inverse of [`synthesize`]
/// for resolved fields; higher modes alias).
pub fn analyze(lattice: &Lattice, values: &[CVector], fiber: usize, n: usize) -> Result<Vec<CVector>> {
    let m = lattice.dim();
    let total = n.pow(m as u32);
    if values.len() != total {
        return Err(Error::InvalidParameter("grid size mismatch".into()));
    }
    if n < lattice.min_grid() {
        return Err(Error::InvalidTruncation(format!("grid {n} too coarse for lattice")));
    }
    let phases = shift_phases(lattice.shift(), n);
    let norm = 1.0 / total as f64;
    let mut out = vec![CVector::zeros(fiber); lattice.len()];
    let mut buf = vec![C64::new(0.0, 0.0); total];
    for comp in 0..fiber {
        for j in 0..total {
            buf[j] = values[j][comp] * phases[j].conj();
        }
        fft_nd(&mut buf, n, m, false);
        for (idx, mode) in lattice.modes().iter().enumerate() {
            out[idx][comp] = buf[flat_index(mode, n)] * norm;
        }
    }
    Ok(out)
}

/// A finite real Fourier series `u(x) = Σ_k ĉ_k e^{2πi k·x/L}` on a torus.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLimited {
    periods: Vec<f64>,
    terms: BTreeMap<Vec<i32>, C64>,
}

impl BandLimited {
    pub fn zero(periods: Vec<f64>) -> Self {
        Self { periods, terms: BTreeMap::new() }
    }

    pub fn constant(periods: Vec<f64>, value: f64) -> Self {
        let m = periods.len();
        let mut out = Self::zero(periods);
        if value != 0.0 {
            out.terms.insert(vec![0; m], c(value, 0.0));
        }
        out
    }

    /// `amp · cos(2π k·x/L)`.
    pub fn cosine(periods: Vec<f64>, mode: Vec<i32>, amp: f64) -> Result<Self> {
        Self::trig(periods, mode, c(amp / 2.0, 0.0))
    }

    /// `amp · sin(2π k·x/L)`.
    pub fn sine(periods: Vec<f64>, mode: Vec<i32>, amp: f64) -> Result<Self> {
        Self::trig(periods, mode, c(0.0, -amp / 2.0))
    }

    fn trig(periods: Vec<f64>, mode: Vec<i32>, half: C64) -> Result<Self> {
        if mode.len() != periods.len() {
            return Err(Error::MalformedFourier("mode dimension differs from torus dimension".into()));
        }
        let neg: Vec<i32> = mode.iter().map(|k| -k).collect();
        let mut out = Self::zero(periods);
        *out.terms.entry(mode).or_default() += half;
        *out.terms.entry(neg).or_default() += half.conj();
        Ok(out)
    }

    /// Builds from explicit coefficients, rejecting dimension mismatches.
    pub fn from_terms(periods: Vec<f64>, terms: Vec<(Vec<i32>, C64)>) -> Result<Self> {
        let mut out = Self::zero(periods);
        for (k, v) in terms {
            if k.len() != out.periods.len() {
                return Err(Error::MalformedFourier("mode dimension differs from torus dimension".into()));
            }
            *out.terms.entry(k).or_default() += v;
        }
        Ok(out)
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i32>, &C64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, mode: &[i32]) -> C64 {
        self.terms.get(mode).copied().unwrap_or_default()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.terms {
            *out.terms.entry(k.clone()).or_default() += v;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let terms = self.terms.iter().map(|(k, v)| (k.clone(), v * s)).collect();
        Self { periods: self.periods.clone(), terms }
    }

    /// Max residual of the conjugate symmetry `ĉ_{−k} = conj(ĉ_k)`.
    pub fn reality_residual(&self) -> f64 {
        self.terms
            .iter()
            .map(|(k, v)| {
                let neg: Vec<i32> = k.iter().map(|x| -x).collect();
                (self.coefficient(&neg) - v.conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.reality_residual() <= 1e-14
    }

    /// True when every term is the zero mode.
    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(k, v)| k.iter().all(|&x| x == 0) || v.norm() == 0.0)
    }

    pub fn mean(&self) -> f64 {
        self.coefficient(&vec![0; self.periods.len()]).re
    }

    /// Largest `|kᵢ|` present.
    pub fn bandwidth(&self) -> usize {
        self.terms
            .iter()
            .filter(|(_, v)| v.norm() > 0.0)
            .flat_map(|(k, _)| k.iter().map(|x| x.unsigned_abs() as usize))
            .max()
            .unwrap_or(0)
    }

    fn wave(&self, k: &[i32]) -> Vec<f64> {
        k.iter().zip(&self.periods).map(|(&ki, &l)| 2.0 * PI * ki as f64 / l).collect()
    }

    pub fn eval_complex(&self, x: &[f64]) -> C64 {
        self.terms
            .iter()
            .map(|(k, v)| {
                let phase: f64 = self.wave(k).iter().zip(x).map(|(a, b)| a * b).sum();
                v * C64::from_polar(1.0, phase)
            })
            .sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_complex(x).re
    }

    /// Derivative along coordinate `axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(k, v)| (k.clone(), v * c(0.0, self.wave(k)[axis])))
            .collect();
        Self { periods: self.periods.clone(), terms }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.periods.len()).map(|d| self.derivative(d).eval(x)).collect()
    }

    /// Nonnegative Laplacian `Δu = −Σ ∂ᵢ²u`.
    pub fn laplacian(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(k, v)| (k.clone(), v * self.wave(k).iter().map(|w| w * w).sum::<f64>()))
            .collect();
        Self { periods: self.periods.clone(), terms }
    }

    /// Exact product of two finite series.
    pub fn product(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.periods.clone());
        for (ka, va) in &self.terms {
            for (kb, vb) in &other.terms {
                let k: Vec<i32> = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                *out.terms.entry(k).or_default() += va * vb;
            }
        }
        out
    }

    /// `|du|² = Σᵢ (∂ᵢu)²` as a finite series.
    pub fn grad_norm_sq(&self) -> Self {
        (0..self.periods.len()).fold(Self::zero(self.periods.clone()), |acc, d| {
            let g = self.derivative(d);
            acc.add(&g.product(&g))
        })
    }

    pub fn grid_values(&self, n: usize) -> Vec<f64> {
        grid_points(&self.periods, n).iter().map(|x| self.eval(x)).collect()
    }
}

/// A spinor field on a flat torus stored by its Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSpinorField {
    lattice: Lattice,
    fiber: usize,
    coeffs: Vec<CVector>,
}

impl FourierSpinorField {
    pub fn zeros(lattice: &Lattice, fiber: usize) -> Self {
        Self { lattice: lattice.clone(), fiber, coeffs: vec![CVector::zeros(fiber); lattice.len()] }
    }

    pub fn from_coeffs(lattice: &Lattice, fiber: usize, coeffs: Vec<CVector>) -> Result<Self> {
        if coeffs.len() != lattice.len() || coeffs.iter().any(|v| v.len() != fiber) {
            return Err(Error::InvalidParameter("coefficient layout does not match lattice".into()));
        }
        Ok(Self { lattice: lattice.clone(), fiber, coeffs })
    }

    pub fn single_mode(lattice: &Lattice, idx: usize, value: CVector) -> Self {
        let mut out = Self::zeros(lattice, value.len());
        out.coeffs[idx] = value;
        out
    }

    /// Random field supported on modes with `|kᵢ| ≤ bandwidth`.
    pub fn random(lattice: &Lattice, fiber: usize, bandwidth: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Self::zeros(lattice, fiber);
        for (idx, mode) in lattice.modes().iter().enumerate() {
            if mode.iter().all(|k| k.unsigned_abs() as usize <= bandwidth) {
                let decay = 1.0 / (1.0 + mode.iter().map(|k| (k * k) as f64).sum::<f64>());
                out.coeffs[idx] = CVector::from_fn(fiber, |_, _| {
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * decay
                });
            }
        }
        out
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }
    pub fn fiber(&self) -> usize {
        self.fiber
    }
    pub fn coeffs(&self) -> &[CVector] {
        &self.coeffs
    }
    pub fn coeffs_mut(&mut self) -> &mut [CVector] {
        &mut self.coeffs
    }

    /// `‖ψ‖²_{L²} = vol · Σ |c_k|²`.
    pub fn norm_sq(&self) -> f64 {
        self.lattice.volume() * self.coeffs.iter().map(norm_sq).sum::<f64>()
    }

    /// `‖ψ‖²_{L²}` by trapezoidal quadrature on an `n^m` grid.
    pub fn norm_sq_on_grid(&self, n: usize) -> Result<f64> {
        let values = self.grid_values(n)?;
        let w = self.lattice.volume() / values.len() as f64;
        Ok(w * values.iter().map(norm_sq).sum::<f64>())
    }

    pub fn grid_values(&self, n: usize) -> Result<Vec<CVector>> {
        synthesize(&self.lattice, &self.coeffs, self.fiber, n)
    }

    pub fn from_grid(lattice: &Lattice, fiber: usize, values: &[CVector], n: usize) -> Result<Self> {
        Ok(Self { lattice: lattice.clone(), fiber, coeffs: analyze(lattice, values, fiber, n)? })
    }

    /// Pointwise value by direct summation.
    pub fn evaluate(&self, x: &[f64]) -> CVector {
        let mut out = CVector::zeros(self.fiber);
        for (idx, cv) in self.coeffs.iter().enumerate() {
            let phase: f64 = self.lattice.wavevector(idx).iter().zip(x).map(|(a, b)| a * b).sum();
            out += cv * C64::from_polar(1.0, phase);
        }
        out
    }

    /// Coordinate derivative `∂ψ/∂x_axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, cv)| cv * c(0.0, self.lattice.wavevector(idx)[axis]))
            .collect();
        Self { lattice: self.lattice.clone(), fiber: self.fiber, coeffs }
    }

    /// Applies one fiber matrix per mode.
    pub fn apply_per_mode(&self, blocks: &[CMatrix]) -> Self {
        let coeffs = self.coeffs.iter().zip(blocks).map(|(cv, b)| b * cv).collect();
        Self { lattice: self.lattice.clone(), fiber: blocks.first().map_or(self.fiber, |b| b.nrows()), coeffs }
    }

    pub fn apply_constant(&self, mat: &CMatrix) -> Self {
        let coeffs = self.coeffs.iter().map(|cv| mat * cv).collect();
        Self { lattice: self.lattice.clone(), fiber: mat.nrows(), coeffs }
    }

    pub fn add(&self, other: &Self) -> Self {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Self { lattice: self.lattice.clone(), fiber: self.fiber, coeffs }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Self { lattice: self.lattice.clone(), fiber: self.fiber, coeffs }
    }

    pub fn scale(&self, s: C64) -> Self {
        let coeffs = self.coeffs.iter().map(|a| a * s).collect();
        Self { lattice: self.lattice.clone(), fiber: self.fiber, coeffs }
    }

    /// Coefficients as one flat vector, mode-major.
    pub fn to_flat(&self) -> CVector {
        let mut out = CVector::zeros(self.fiber * self.coeffs.len());
        for (idx, cv) in self.coeffs.iter().enumerate() {
            out.rows_mut(idx * self.fiber, self.fiber).copy_from(cv);
        }
        out
    }

    pub fn from_flat(lattice: &Lattice, fiber: usize, flat: &CVector) -> Self {
        let coeffs = (0..lattice.len()).map(|idx| flat.rows(idx * fiber, fiber).into_owned()).collect();
        Self { lattice: lattice.clone(), fiber, coeffs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_truncation_respects_shift() {
        let l = Lattice::new(vec![1.0, 2.0], vec![0.0, 0.5], 2).unwrap();
        assert_eq!(l.len(), 5 * 4);
        assert!(l.index_of(&[2, 1]).is_some());
        assert!(l.index_of(&[0, 2]).is_none());
        assert!(l.index_of(&[0, -2]).is_some());
        assert!(matches!(Lattice::new(vec![1.0], vec![0.0], 0), Err(Error::InvalidTruncation(_))));
    }

    #[test]
    fn synthesize_matches_direct_evaluation() {
        let l = Lattice::new(vec![1.0, 3.0], vec![0.5, 0.0], 3).unwrap();
        let f = FourierSpinorField::random(&l, 2, 3, 7);
        let n = 8;
        let grid = f.grid_values(n).unwrap();
        for (x, v) in l.grid_points(n).iter().zip(&grid) {
            let direct = f.evaluate(x);
            assert!(crate::linalg::max_abs_vec(&(direct - v)) < 1e-12);
        }
        let back = FourierSpinorField::from_grid(&l, 2, &grid, n).unwrap();
        assert!(crate::linalg::max_abs_vec(&(back.to_flat() - f.to_flat())) < 1e-13);
    }

    #[test]
    fn band_limited_calculus() {
        let p = vec![2.0 * PI, 2.0 * PI];
        let u = BandLimited::cosine(p.clone(), vec![1, 0], 0.1).unwrap();
        assert!(u.is_real());
        let x = [0.3, 1.1];
        assert!((u.eval(&x) - 0.1 * 0.3f64.cos()).abs() < 1e-15);
        assert!((u.laplacian().eval(&x) - 0.1 * 0.3f64.cos()).abs() < 1e-15);
        assert!((u.gradient(&x)[0] + 0.1 * 0.3f64.sin()).abs() < 1e-15);
        let g2 = u.grad_norm_sq().eval(&x);
        assert!((g2 - 0.01 * 0.3f64.sin().powi(2)).abs() < 1e-15);
        let bad = BandLimited::from_terms(p, vec![(vec![1, 0], c(1.0, 0.0))]).unwrap();
        assert!(!bad.is_real());
    }
}
