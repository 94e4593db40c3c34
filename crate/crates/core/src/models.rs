//! Exactly solvable model geometries.
//!
//! Every model carries an analytic adapted orthonormal frame
//! `(e₁..e_m, ν₁..ν_n)` along a parametrization, stored as the columns of an
//! ambient matrix. Connection forms are expressed in that frame:
//! `(Ωᵢ)_ab = ⟨f_a, ∂_{eᵢ} f_b⟩`, so the second fundamental form is
//! `h_ij^α = (Ωᵢ)_{m+α, j}`.
//!
//! Coordinates:
//! - sphere `S¹(r)`: angle `θ`; sphere `S²(r)`: `(φ, θ)` with `e₁ = e_φ`, `e₂ = e_θ`,
//!   `ν = −r̂`;
//! - tori: arc-length coordinates `xᵢ ∈ [0, Lᵢ)`, so `∂_{eᵢ} = ∂_{xᵢ}`.

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clifford::SplitRep;
use crate::linalg::{expm, identity, max_abs, to_complex};
use crate::spectral::{grid_points, BandLimited, Lattice};
use crate::{CMatrix, Error, RMatrix, Result};

/// Central-difference step for geometric oracles.
pub const FD_STEP: f64 = 1e-5;

/// Polar margin for random sphere samples.
const POLE_MARGIN: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    SphereInEuclidean { m: usize, radius: f64 },
    ProductOfCircles { radii: Vec<f64> },
    FlatTorusInFlatTorus { m: usize, n: usize, periods: Vec<f64>, shift: Vec<f64> },
    /// Flat torus with an auxiliary flat rank-`n` bundle. `holonomy[i][a]` is the
    /// spinor phase (in turns) picked up around the `i`-th circle by the weights
    /// of the `a`-th normal rotation plane `(ν_{2a}, ν_{2a+1})`.
    AuxiliaryBundleTorus {
        m: usize,
        n: usize,
        periods: Vec<f64>,
        shift: Vec<f64>,
        holonomy: Vec<Vec<f64>>,
        f: BandLimited,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGeometry {
    kind: ModelKind,
    m: usize,
    n: usize,
    spin_shift: Vec<f64>,
}

/// Connection and `f` data of an auxiliary bundle model.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryData {
    /// `Ω^N_i` as `n×n` antisymmetric matrices in the normal frame.
    pub normal_connection: Vec<RMatrix>,
    pub holonomy: Vec<Vec<f64>>,
    pub f: BandLimited,
}

fn check_positive(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidModel(format!("{what} must be positive and finite")));
    }
    Ok(())
}

fn check_shift(shift: &[f64], m: usize) -> Result<()> {
    if shift.len() != m {
        return Err(Error::InvalidModel(format!("spin structure needs {m} shifts")));
    }
    if shift.iter().any(|&d| d != 0.0 && d != 0.5) {
        return Err(Error::InvalidModel("spin-structure shifts must be 0 or 1/2".into()));
    }
    Ok(())
}

/// Area of the round sphere `S^m(1)`.
fn unit_sphere_volume(m: usize) -> f64 {
    match m {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (m as f64 - 1.0) * unit_sphere_volume(m - 2),
    }
}

fn rotation_generator(dim: usize, from: usize, to: usize, rate: f64) -> RMatrix {
    let mut x = RMatrix::zeros(dim, dim);
    x[(to, from)] = rate;
    x[(from, to)] = -rate;
    x
}

impl ModelGeometry {
    pub fn sphere(m: usize, radius: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidModel("sphere dimension must be at least 1".into()));
        }
        check_positive(&[radius], "radius")?;
        Ok(Self { kind: ModelKind::SphereInEuclidean { m, radius }, m, n: 1, spin_shift: Vec::new() })
    }

    /// Product of circles `S¹(r₁)×…×S¹(r_m) ⊂ R^{2m}`; the induced spin
    /// structure is measured by transporting ambient-parallel spinors.
    pub fn product_of_circles(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::InvalidModel("need at least one circle".into()));
        }
        check_positive(&radii, "radii")?;
        let m = radii.len();
        let mut out = Self { kind: ModelKind::ProductOfCircles { radii }, m, n: m, spin_shift: Vec::new() };
        let split = SplitRep::new(m, m, 0, 0)?;
        out.spin_shift = out.measure_spin_shift(&split)?;
        Ok(out)
    }

    pub fn flat_torus(m: usize, n: usize, periods: Vec<f64>, shift: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 || periods.len() != m {
            return Err(Error::InvalidModel("flat torus needs m, n ≥ 1 and m periods".into()));
        }
        check_positive(&periods, "periods")?;
        check_shift(&shift, m)?;
        let spin_shift = shift.clone();
        Ok(Self { kind: ModelKind::FlatTorusInFlatTorus { m, n, periods, shift }, m, n, spin_shift })
    }

    pub fn auxiliary_torus(
        m: usize,
        n: usize,
        periods: Vec<f64>,
        shift: Vec<f64>,
        holonomy: Vec<Vec<f64>>,
        f: BandLimited,
    ) -> Result<Self> {
        if m == 0 || n == 0 || periods.len() != m {
            return Err(Error::InvalidModel("auxiliary torus needs m, n ≥ 1 and m periods".into()));
        }
        check_positive(&periods, "periods")?;
        check_shift(&shift, m)?;
        if holonomy.len() != m || holonomy.iter().any(|row| row.len() != n / 2) {
            return Err(Error::InvalidModel(format!("holonomy table must be {m}×{}", n / 2)));
        }
        if holonomy.iter().flatten().any(|&h| !(0.0..1.0).contains(&h)) {
            return Err(Error::InvalidModel("holonomy phases must lie in [0, 1)".into()));
        }
        if f.periods() != periods.as_slice() {
            return Err(Error::MalformedFourier("f must live on the same torus".into()));
        }
        if !f.is_real() {
            return Err(Error::NotReal("f".into()));
        }
        let spin_shift = shift.clone();
        Ok(Self {
            kind: ModelKind::AuxiliaryBundleTorus { m, n, periods, shift, holonomy, f },
            m,
            n,
            spin_shift,
        })
    }

    pub fn build(kind: ModelKind) -> Result<Self> {
        match kind {
            ModelKind::SphereInEuclidean { m, radius } => Self::sphere(m, radius),
            ModelKind::ProductOfCircles { radii } => Self::product_of_circles(radii),
            ModelKind::FlatTorusInFlatTorus { m, n, periods, shift } => Self::flat_torus(m, n, periods, shift),
            ModelKind::AuxiliaryBundleTorus { m, n, periods, shift, holonomy, f } => {
                Self::auxiliary_torus(m, n, periods, shift, holonomy, f)
            }
        }
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> String {
        match &self.kind {
            ModelKind::SphereInEuclidean { m, radius } => format!("sphere(m={m},r={radius})"),
            ModelKind::ProductOfCircles { radii } => {
                let r: Vec<String> = radii.iter().map(|r| r.to_string()).collect();
                format!("circles({})", r.join(","))
            }
            ModelKind::FlatTorusInFlatTorus { m, n, .. } => format!("flat-torus(m={m},n={n})"),
            ModelKind::AuxiliaryBundleTorus { m, n, .. } => format!("aux-torus(m={m},n={n})"),
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.kind, ModelKind::SphereInEuclidean { .. })
    }

    pub fn is_torus(&self) -> bool {
        !self.is_sphere()
    }

    pub fn ambient_dim(&self) -> usize {
        match &self.kind {
            ModelKind::SphereInEuclidean { m, .. } => m + 1,
            ModelKind::ProductOfCircles { radii } => 2 * radii.len(),
            _ => self.m + self.n,
        }
    }

    /// Torus periods `Lᵢ` (arc length), `None` for spheres.
    pub fn periods(&self) -> Option<Vec<f64>> {
        match &self.kind {
            ModelKind::SphereInEuclidean { .. } => None,
            ModelKind::ProductOfCircles { radii } => Some(radii.iter().map(|r| 2.0 * PI * r).collect()),
            ModelKind::FlatTorusInFlatTorus { periods, .. } | ModelKind::AuxiliaryBundleTorus { periods, .. } => {
                Some(periods.clone())
            }
        }
    }

    /// Fourier shifts `δ` of the spin structure (torus models).
    pub fn spin_shift(&self) -> &[f64] {
        &self.spin_shift
    }

    pub fn lattice(&self, truncation: usize) -> Result<Lattice> {
        let periods = self.periods().ok_or_else(|| Error::Unsupported("spectral lattice on a sphere".into()))?;
        Lattice::new(periods, self.spin_shift.clone(), truncation)
    }

    /// Frames are available for tori and for spheres of dimension 1 and 2.
    pub fn has_frames(&self) -> bool {
        match self.kind {
            ModelKind::SphereInEuclidean { m, .. } => m <= 2,
            _ => true,
        }
    }

    fn require_frames(&self) -> Result<()> {
        if self.has_frames() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("adapted frames for {}", self.name())))
        }
    }

    pub fn embedding(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_frames()?;
        Ok(match &self.kind {
            ModelKind::SphereInEuclidean { m: 1, radius } => vec![radius * x[0].cos(), radius * x[0].sin()],
            ModelKind::SphereInEuclidean { radius, .. } => {
                let (phi, theta) = (x[0], x[1]);
                vec![
                    radius * theta.sin() * phi.cos(),
                    radius * theta.sin() * phi.sin(),
                    radius * theta.cos(),
                ]
            }
            ModelKind::ProductOfCircles { radii } => radii
                .iter()
                .zip(x)
                .flat_map(|(&r, &s)| {
                    let t = s / r;
                    [r * t.cos(), r * t.sin()]
                })
                .collect(),
            _ => {
                let mut p = x.to_vec();
                p.resize(self.m + self.n, 0.0);
                p
            }
        })
    }

    /// Adapted frame as columns `(e₁..e_m, ν₁..ν_n)` of an ambient matrix.
    pub fn adapted_frame(&self, x: &[f64]) -> Result<RMatrix> {
        self.require_frames()?;
        let d = self.ambient_dim();
        Ok(match &self.kind {
            ModelKind::SphereInEuclidean { m: 1, .. } => {
                let t = x[0];
                RMatrix::from_row_slice(2, 2, &[-t.sin(), -t.cos(), t.cos(), -t.sin()])
            }
            ModelKind::SphereInEuclidean { .. } => {
                let (phi, theta) = (x[0], x[1]);
                let (sp, cp, st, ct) = (phi.sin(), phi.cos(), theta.sin(), theta.cos());
                RMatrix::from_row_slice(
                    3,
                    3,
                    &[-sp, ct * cp, -st * cp, cp, ct * sp, -st * sp, 0.0, -st, -ct],
                )
            }
            ModelKind::ProductOfCircles { radii } => {
                let m = radii.len();
                let mut f = RMatrix::zeros(d, d);
                for (i, (&r, &s)) in radii.iter().zip(x).enumerate() {
                    let t = s / r;
                    f[(2 * i, i)] = -t.sin();
                    f[(2 * i + 1, i)] = t.cos();
                    f[(2 * i, m + i)] = -t.cos();
                    f[(2 * i + 1, m + i)] = -t.sin();
                }
                f
            }
            ModelKind::FlatTorusInFlatTorus { .. } => RMatrix::identity(d, d),
            ModelKind::AuxiliaryBundleTorus { .. } => {
                let mut gen = RMatrix::zeros(d, d);
                for (i, &xi) in x.iter().enumerate() {
                    gen += self.normal_block_generator(i) * xi;
                }
                expm(&to_complex(&gen)).map(|z| z.re)
            }
        })
    }

    /// `|∂ᵢX|`, so that `∂_{eᵢ} = (1/scaleᵢ) ∂_{xᵢ}`.
    pub fn coordinate_scales(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            ModelKind::SphereInEuclidean { m: 1, radius } => vec![*radius],
            ModelKind::SphereInEuclidean { radius, .. } => vec![radius * x[1].sin(), *radius],
            _ => vec![1.0; self.m],
        }
    }

    /// Normal-block generator of the auxiliary connection along `xᵢ`, as a full
    /// `(m+n)×(m+n)` matrix; zero for the other kinds.
    fn normal_block_generator(&self, i: usize) -> RMatrix {
        let d = self.m + self.n;
        let mut g = RMatrix::zeros(d, d);
        if let ModelKind::AuxiliaryBundleTorus { m, periods, holonomy, .. } = &self.kind {
            for (a, &h) in holonomy[i].iter().enumerate() {
                let rate = 4.0 * PI * h / periods[i];
                g += rotation_generator(d, m + 2 * a, m + 2 * a + 1, rate);
            }
        }
        g
    }

    /// Intrinsic part of the connection forms: tangent–tangent and
    /// normal–normal blocks of `Ωᵢ` only.
    pub fn intrinsic_connection(&self, x: &[f64]) -> Result<Vec<RMatrix>> {
        self.require_frames()?;
        let d = self.m + self.n;
        Ok(match &self.kind {
            ModelKind::SphereInEuclidean { m: 2, radius } => {
                let cot = x[1].cos() / x[1].sin();
                let mut o1 = RMatrix::zeros(3, 3);
                o1[(1, 0)] = -cot / radius;
                o1[(0, 1)] = cot / radius;
                vec![o1, RMatrix::zeros(3, 3)]
            }
            ModelKind::AuxiliaryBundleTorus { .. } => (0..self.m).map(|i| self.normal_block_generator(i)).collect(),
            _ => vec![RMatrix::zeros(d, d); self.m],
        })
    }

    /// Second fundamental form `h[i][j][α] = ⟨∇̃_{eᵢ} e_j, ν_α⟩`.
    pub fn second_fundamental_form(&self, _x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        self.require_frames()?;
        let (m, n) = (self.m, self.n);
        let mut h = vec![vec![vec![0.0; n]; m]; m];
        match &self.kind {
            ModelKind::SphereInEuclidean { radius, .. } => {
                for (i, hi) in h.iter_mut().enumerate() {
                    hi[i][0] = 1.0 / radius;
                }
            }
            ModelKind::ProductOfCircles { radii } => {
                for (i, &r) in radii.iter().enumerate() {
                    h[i][i][i] = 1.0 / r;
                }
            }
            _ => {}
        }
        Ok(h)
    }

    /// Full connection forms `Ωᵢ` in the adapted frame.
    pub fn connection_forms(&self, x: &[f64]) -> Result<Vec<RMatrix>> {
        let mut omega = self.intrinsic_connection(x)?;
        let h = self.second_fundamental_form(x)?;
        let m = self.m;
        for (i, oi) in omega.iter_mut().enumerate() {
            for j in 0..m {
                for alpha in 0..self.n {
                    oi[(m + alpha, j)] += h[i][j][alpha];
                    oi[(j, m + alpha)] -= h[i][j][alpha];
                }
            }
        }
        Ok(omega)
    }

    /// `H = Σᵢ h(eᵢ, eᵢ)` in normal-frame components.
    pub fn mean_curvature(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h = self.second_fundamental_form(x)?;
        Ok((0..self.n).map(|a| (0..self.m).map(|i| h[i][i][a]).sum()).collect())
    }

    /// Closed form of `‖H‖` (constant for every catalog model).
    pub fn mean_curvature_norm(&self) -> f64 {
        match &self.kind {
            ModelKind::SphereInEuclidean { m, radius } => *m as f64 / radius,
            ModelKind::ProductOfCircles { radii } => radii.iter().map(|r| 1.0 / (r * r)).sum::<f64>().sqrt(),
            _ => 0.0,
        }
    }

    /// Intrinsic scalar curvature (constant for every catalog model).
    pub fn scalar_curvature(&self) -> f64 {
        match &self.kind {
            ModelKind::SphereInEuclidean { m, radius } => (m * (m - 1)) as f64 / (radius * radius),
            _ => 0.0,
        }
    }

    /// Normal curvature `R^N_{ij}` as `n×n` matrices; zero for the catalog.
    pub fn normal_curvature(&self, _x: &[f64]) -> Vec<Vec<RMatrix>> {
        vec![vec![RMatrix::zeros(self.n, self.n); self.m]; self.m]
    }

    /// Riemannian volume of `M`.
    pub fn volume(&self) -> f64 {
        match &self.kind {
            ModelKind::SphereInEuclidean { m, radius } => unit_sphere_volume(*m) * radius.powi(*m as i32),
            _ => self.periods().map(|p| p.iter().product()).unwrap_or(0.0),
        }
    }

    /// Frame at the coordinate origin; `F(x) = F_ref · Π_k exp(x_{c_k} X_k)`.
    pub fn reference_frame(&self) -> Result<RMatrix> {
        self.require_frames()?;
        Ok(match &self.kind {
            ModelKind::SphereInEuclidean { m: 2, .. } => {
                RMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0])
            }
            _ => self.adapted_frame(&vec![0.0; self.m])?,
        })
    }

    /// Ordered factors `(coordinate, X)` with `F(x) = F_ref Π exp(x_c X)`.
    pub fn spin_lift_factors(&self) -> Result<Vec<(usize, RMatrix)>> {
        self.require_frames()?;
        let d = self.m + self.n;
        Ok(match &self.kind {
            ModelKind::SphereInEuclidean { m: 1, .. } => vec![(0, rotation_generator(2, 0, 1, 1.0))],
            ModelKind::SphereInEuclidean { .. } => {
                let a0 = self.reference_frame()?;
                let lz = RMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
                let ly = RMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0]);
                vec![(0, a0.transpose() * lz * &a0), (1, a0.transpose() * ly * &a0)]
            }
            ModelKind::ProductOfCircles { radii } => radii
                .iter()
                .enumerate()
                .map(|(i, &r)| (i, rotation_generator(d, i, self.m + i, 1.0 / r)))
                .collect(),
            ModelKind::FlatTorusInFlatTorus { .. } => Vec::new(),
            ModelKind::AuxiliaryBundleTorus { .. } => {
                (0..self.m).map(|i| (i, self.normal_block_generator(i))).collect()
            }
        })
    }

    /// Spin structure induced on each circle factor, read off from the
    /// holonomy `exp(−Lᵢ σ(Ωᵢ))` of an ambient-parallel spinor written in the
    /// adapted frame: `+1` gives `δ = 0`, `−1` gives `δ = ½`.
    pub fn measure_spin_shift(&self, split: &SplitRep) -> Result<Vec<f64>> {
        let periods = match &self.kind {
            ModelKind::ProductOfCircles { radii } => radii.iter().map(|r| 2.0 * PI * r).collect::<Vec<_>>(),
            _ => return Ok(self.spin_shift.clone()),
        };
        let omega = self.connection_forms(&vec![0.0; self.m])?;
        let fiber = split.fiber_dim();
        periods
            .iter()
            .zip(&omega)
            .map(|(&l, oi)| {
                let hol = expm(&(split.spin_algebra(oi) * crate::linalg::c(-l, 0.0)));
                if max_abs(&(&hol - identity(fiber))) < 1e-9 {
                    Ok(0.0)
                } else if max_abs(&(&hol + identity(fiber))) < 1e-9 {
                    Ok(0.5)
                } else {
                    Err(Error::InvalidModel("loop holonomy is not ±1".into()))
                }
            })
            .collect()
    }

    /// Random sample points (spheres stay away from the coordinate poles).
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| match &self.kind {
                ModelKind::SphereInEuclidean { m: 1, .. } => vec![rng.gen_range(0.0..2.0 * PI)],
                ModelKind::SphereInEuclidean { .. } => {
                    vec![rng.gen_range(0.0..2.0 * PI), rng.gen_range(POLE_MARGIN..PI - POLE_MARGIN)]
                }
                _ => self.periods().unwrap().iter().map(|&l| rng.gen_range(0.0..l)).collect(),
            })
            .collect()
    }

    /// Quadrature nodes and weights for `∫_M · v_g` with `n` nodes per
    /// coordinate (sphere: Gauss–Legendre in `cos θ`, `2n` nodes in `φ`).
    pub fn quadrature(&self, n: usize) -> Result<Vec<(Vec<f64>, f64)>> {
        match &self.kind {
            ModelKind::SphereInEuclidean { m: 1, radius } => {
                let w = 2.0 * PI * radius / n as f64;
                Ok((0..n).map(|j| (vec![2.0 * PI * j as f64 / n as f64], w)).collect())
            }
            ModelKind::SphereInEuclidean { m: 2, radius } => {
                let rule = GaussLegendre::new(n.max(1).try_into().unwrap());
                let dp = PI / n.max(1) as f64;
                let mut out = Vec::with_capacity(2 * n * n);
                for a in 0..2 * n {
                    for &(z, w) in rule.as_node_weight_pairs() {
                        out.push((vec![a as f64 * dp, z.acos()], radius * radius * w * dp));
                    }
                }
                Ok(out)
            }
            ModelKind::SphereInEuclidean { .. } => Err(Error::Unsupported("quadrature on S^m, m ≥ 3".into())),
            _ => {
                let periods = self.periods().unwrap();
                let w = self.volume() / n.pow(self.m as u32) as f64;
                Ok(grid_points(&periods, n).into_iter().map(|x| (x, w)).collect())
            }
        }
    }

    pub fn auxiliary_bundle_data(&self) -> Result<AuxiliaryData> {
        auxiliary_bundle_data(self)
    }

    /// Max deviation of the frame from orthonormality at `points`.
    pub fn frame_orthonormality_residual(&self, points: &[Vec<f64>]) -> Result<f64> {
        let mut worst = 0.0f64;
        for x in points {
            let f = self.adapted_frame(x)?;
            let g = f.transpose() * &f - RMatrix::identity(f.ncols(), f.ncols());
            worst = worst.max(g.amax());
        }
        Ok(worst)
    }
}

/// Max residual of the Gauss formula: central differences of the frame fields
/// along `eᵢ` against `∇ᵢ(X+Y) + h(eᵢ,X) − h*(eᵢ,Y)` built from the analytic
/// intrinsic connection and second fundamental form.
pub fn gauss_formula_residual(model: &ModelGeometry, points: &[Vec<f64>]) -> Result<f64> {
    let (m, n) = (model.m(), model.n());
    let mut worst = 0.0f64;
    for x in points {
        let frame = model.adapted_frame(x)?;
        let scales = model.coordinate_scales(x);
        let intrinsic = model.intrinsic_connection(x)?;
        let h = model.second_fundamental_form(x)?;
        for i in 0..m {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += FD_STEP;
            xm[i] -= FD_STEP;
            let deriv = (model.adapted_frame(&xp)? - model.adapted_frame(&xm)?) / (2.0 * FD_STEP * scales[i]);
            for b in 0..m + n {
                let mut analytic = frame.column(0) * 0.0;
                for a in 0..m + n {
                    analytic += frame.column(a) * intrinsic[i][(a, b)];
                }
                if b < m {
                    for alpha in 0..n {
                        analytic += frame.column(m + alpha) * h[i][b][alpha];
                    }
                } else {
                    for j in 0..m {
                        analytic -= frame.column(j) * h[i][j][b - m];
                    }
                }
                worst = worst.max((deriv.column(b) - analytic).amax());
            }
        }
    }
    Ok(worst)
}

/// A regular conformal change `ḡ = e^{2u} g` with `grad^N u = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalData {
    pub u: BandLimited,
    /// `u` is defined on `M` and extended constantly along normals.
    pub normal_gradient_zero: bool,
}

impl ConformalData {
    pub fn new(model: &ModelGeometry, u: BandLimited) -> Result<Self> {
        if !u.is_real() {
            return Err(Error::NotReal("conformal factor u".into()));
        }
        match model.periods() {
            Some(p) if p.as_slice() != u.periods() => {
                Err(Error::MalformedFourier("u must live on the model torus".into()))
            }
            None if !u.is_constant() => Err(Error::Unsupported("non-constant conformal factor on a sphere".into())),
            _ => Ok(Self { u, normal_gradient_zero: true }),
        }
    }

    pub fn constant(model: &ModelGeometry, value: f64) -> Result<Self> {
        let periods = model.periods().unwrap_or_else(|| vec![2.0 * PI; model.m()]);
        Self::new(model, BandLimited::constant(periods, value))
    }
}

/// `R̄` of `ḡ = e^{2u} g`, stored through the band-limited `R̄ e^{2u}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalCurvature {
    pub scaled: BandLimited,
    pub u: BandLimited,
}

impl ConformalCurvature {
    /// `R̄(x)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        (-2.0 * self.u.eval(x)).exp() * self.scaled.eval(x)
    }
    /// `R̄ e^{2u}(x)`.
    pub fn eval_scaled(&self, x: &[f64]) -> f64 {
        self.scaled.eval(x)
    }
}

/// `R̄ = e^{−2u}(R + 2(m−1)Δu − (m−1)(m−2)|du|²)` with `Δ ≥ 0`.
pub fn conformal_scalar_curvature(model: &ModelGeometry, conf: &ConformalData) -> Result<ConformalCurvature> {
    let m = model.m();
    if m == 1 {
        return Err(Error::Unsupported("scalar curvature in dimension 1".into()));
    }
    let mf = m as f64;
    let u = &conf.u;
    let scaled = BandLimited::constant(u.periods().to_vec(), model.scalar_curvature())
        .add(&u.laplacian().scale(2.0 * (mf - 1.0)))
        .add(&u.grad_norm_sq().scale(-(mf - 1.0) * (mf - 2.0)));
    Ok(ConformalCurvature { scaled, u: u.clone() })
}

/// Lowest Yamabe eigenpair on a truncated spectral basis.
#[derive(Debug, Clone, PartialEq)]
pub struct YamabeEigen {
    pub mu1: f64,
    /// Basis labels: Fourier modes on tori, `[l]` harmonic degrees on spheres.
    pub basis: Vec<Vec<i32>>,
    pub coefficients: Vec<f64>,
}

impl YamabeEigen {
    /// True when the eigenfunction lives on the constant mode only.
    pub fn is_constant(&self) -> bool {
        self.basis
            .iter()
            .zip(&self.coefficients)
            .all(|(k, c)| k.iter().all(|&x| x == 0) || c.abs() < 1e-12)
    }
}

/// First eigenvalue of `4(m−1)/(m−2) Δ + R`.
pub fn yamabe_first_eigenvalue(model: &ModelGeometry, truncation: usize) -> Result<YamabeEigen> {
    let m = model.m();
    if m < 3 {
        return Err(Error::Unsupported("Yamabe operator needs m ≥ 3".into()));
    }
    let c = 4.0 * (m as f64 - 1.0) / (m as f64 - 2.0);
    let r = model.scalar_curvature();
    let (basis, diag): (Vec<Vec<i32>>, Vec<f64>) = match model.kind() {
        ModelKind::SphereInEuclidean { radius, .. } => (0..=truncation as i32)
            .map(|l| (vec![l], c * (l * (l + m as i32 - 1)) as f64 / (radius * radius) + r))
            .unzip(),
        _ => {
            let periods = model.periods().unwrap();
            let lattice = Lattice::new(periods, vec![0.0; m], truncation)?;
            (0..lattice.len())
                .map(|idx| {
                    let k2: f64 = lattice.wavevector(idx).iter().map(|w| w * w).sum();
                    (lattice.modes()[idx].clone(), c * k2 + r)
                })
                .unzip()
        }
    };
    let mat = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        diag.len(),
        diag.iter().map(|&d| crate::linalg::c(d, 0.0)),
    ));
    let (vals, vecs) = crate::linalg::eigh(&mat, 1e-12)?;
    let v = vecs.column(0);
    let coefficients: Vec<f64> = v.iter().map(|z| z.re).collect();
    Ok(YamabeEigen { mu1: vals[0], basis, coefficients })
}

/// Flat connection of an auxiliary bundle together with `f`.
pub fn auxiliary_bundle_data(model: &ModelGeometry) -> Result<AuxiliaryData> {
    match model.kind() {
        ModelKind::AuxiliaryBundleTorus { m, n, holonomy, f, .. } => {
            let normal_connection = (0..*m)
                .map(|i| {
                    let g = model.normal_block_generator(i);
                    g.view((*m, *m), (*n, *n)).into_owned()
                })
                .collect();
            Ok(AuxiliaryData { normal_connection, holonomy: holonomy.clone(), f: f.clone() })
        }
        _ => Err(Error::Unsupported(format!("auxiliary data for {}", model.name()))),
    }
}
