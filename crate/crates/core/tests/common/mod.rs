//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use spinlab::clifford::SplitRep;
use spinlab::models::ModelGeometry;
use spinlab::spectral::{BandLimited, Lattice};
use spinlab::{CMatrix, CVector, RMatrix, C64};

pub const FD_STEP: f64 = 1e-4;
pub const TRANSPORT_STEP: f64 = 1e-3;

/// Scalar curvature of a metric given in coordinates, by central differences
/// of the metric (Christoffel symbols) and of the Christoffel symbols.
pub fn fd_scalar_curvature(metric: &dyn Fn(&[f64]) -> RMatrix, x: &[f64], h: f64) -> f64 {
    let m = x.len();
    let christoffel = |y: &[f64]| -> Vec<RMatrix> {
        let g = metric(y);
        let gi = g.clone().try_inverse().unwrap();
        let dg: Vec<RMatrix> = (0..m)
            .map(|k| {
                let (mut p, mut q) = (y.to_vec(), y.to_vec());
                p[k] += h;
                q[k] -= h;
                (metric(&p) - metric(&q)) / (2.0 * h)
            })
            .collect();
        (0..m)
            .map(|a| {
                RMatrix::from_fn(m, m, |b, c| {
                    (0..m).map(|d| 0.5 * gi[(a, d)] * (dg[b][(d, c)] + dg[c][(d, b)] - dg[d][(b, c)])).sum()
                })
            })
            .collect()
    };
    let gam = christoffel(x);
    let dgam: Vec<Vec<RMatrix>> = (0..m)
        .map(|k| {
            let (mut p, mut q) = (x.to_vec(), x.to_vec());
            p[k] += h;
            q[k] -= h;
            let (gp, gq) = (christoffel(&p), christoffel(&q));
            (0..m).map(|a| (&gp[a] - &gq[a]) / (2.0 * h)).collect()
        })
        .collect();
    // Ric_bd = ∂_a Γ^a_bd − ∂_d Γ^a_ba + Γ^a_ae Γ^e_bd − Γ^a_de Γ^e_ba
    let gi = metric(x).try_inverse().unwrap();
    let mut r = 0.0;
    for b in 0..m {
        for d in 0..m {
            let mut ric = 0.0;
            for a in 0..m {
                ric += dgam[a][a][(b, d)] - dgam[d][a][(b, a)];
                for e in 0..m {
                    ric += gam[a][(a, e)] * gam[e][(b, d)] - gam[a][(d, e)] * gam[e][(b, a)];
                }
            }
            r += gi[(b, d)] * ric;
        }
    }
    r
}

/// Five-point derivative of a spinor-valued function along coordinate `axis`.
pub fn fd_spinor_derivative(f: &dyn Fn(&[f64]) -> CVector, x: &[f64], axis: usize, h: f64) -> CVector {
    let at = |t: f64| {
        let mut y = x.to_vec();
        y[axis] += t;
        f(&y)
    };
    (at(-2.0 * h) - at(-h) * C64::new(8.0, 0.0) + at(h) * C64::new(8.0, 0.0) - at(2.0 * h)) / C64::new(12.0 * h, 0.0)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (br, bc) = b.shape();
    CMatrix::from_fn(a.nrows() * br, a.ncols() * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

fn spin(split: &SplitRep, x: &RMatrix) -> CMatrix {
    let d = x.nrows();
    let mut out = CMatrix::zeros(split.fiber_dim(), split.fiber_dim());
    for a in 0..d {
        for b in 0..d {
            out -= split.total().generator(a) * split.total().generator(b) * C64::new(0.25 * x[(a, b)], 0.0);
        }
    }
    out
}

fn wavevector_diagonals(lattice: &Lattice) -> Vec<CMatrix> {
    let m = lattice.dim();
    (0..m)
        .map(|i| {
            CMatrix::from_fn(lattice.len(), lattice.len(), |a, b| {
                if a == b {
                    let k = lattice.modes()[a][i] as f64 + lattice.shift()[i];
                    C64::new(0.0, 2.0 * std::f64::consts::PI * k / lattice.periods()[i])
                } else {
                    C64::new(0.0, 0.0)
                }
            })
        })
        .collect()
}

/// `D_H` over all retained modes as one dense matrix, from raw generators.
pub fn dense_dh(model: &ModelGeometry, split: &SplitRep, lattice: &Lattice) -> CMatrix {
    let m = split.m();
    let origin = vec![0.0; m];
    let omega = model.intrinsic_connection(&origin).unwrap();
    let h = model.mean_curvature(&origin).unwrap();
    let w = split.omega_perp();
    let sign = if split.n() % 2 == 0 { 1.0 } else { -1.0 };
    let fiber = split.fiber_dim();
    let mut gh = CMatrix::zeros(fiber, fiber);
    for (a, &x) in h.iter().enumerate() {
        gh += split.total().generator(m + a) * C64::new(x, 0.0);
    }
    let eye = CMatrix::identity(lattice.len(), lattice.len());
    let mut out = kron(&eye, &(&gh * w * C64::new(0.5, 0.0)));
    for (i, k) in wavevector_diagonals(lattice).iter().enumerate() {
        let g = w * split.total().generator(i) * C64::new(sign, 0.0);
        out += kron(k, &g) + kron(&eye, &(&g * spin(split, &omega[i])));
    }
    out
}

/// `D_f = D_M − f/2` over all retained modes as one dense matrix.
pub fn dense_df(model: &ModelGeometry, split: &SplitRep, lattice: &Lattice, f: &BandLimited) -> CMatrix {
    let (m, n) = (split.m(), split.n());
    let aux = model.auxiliary_bundle_data().unwrap();
    let omega: Vec<RMatrix> = aux
        .normal_connection
        .iter()
        .map(|a| {
            let mut o = RMatrix::zeros(m + n, m + n);
            o.view_mut((m, m), (n, n)).copy_from(a);
            o
        })
        .collect();
    let fiber = split.fiber_dim();
    let eye = CMatrix::identity(lattice.len(), lattice.len());
    let mut out = CMatrix::zeros(lattice.len() * fiber, lattice.len() * fiber);
    for (i, k) in wavevector_diagonals(lattice).iter().enumerate() {
        let t = split.total().generator(i) * split.omega_perp();
        out += kron(k, &t) + kron(&eye, &(&t * spin(split, &omega[i])));
    }
    let conv = CMatrix::from_fn(lattice.len(), lattice.len(), |a, b| {
        let d: Vec<i32> = lattice.modes()[a].iter().zip(&lattice.modes()[b]).map(|(x, y)| x - y).collect();
        f.coefficient(&d)
    });
    out - kron(&conv, &CMatrix::identity(fiber, fiber)) * C64::new(0.5, 0.0)
}

/// Transports `c` along `dc/dt = −A c` over `[0, length]` with classical RK4.
pub fn rk4_transport(a: &CMatrix, c0: &CVector, length: f64, steps: usize) -> CVector {
    let dt = length / steps as f64;
    let rhs = |c: &CVector| -(a * c);
    let mut c = c0.clone();
    let half = C64::new(0.5 * dt, 0.0);
    let full = C64::new(dt, 0.0);
    for _ in 0..steps {
        let k1 = rhs(&c);
        let k2 = rhs(&(&c + &k1 * half));
        let k3 = rhs(&(&c + &k2 * half));
        let k4 = rhs(&(&c + &k3 * full));
        c += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0);
    }
    c
}

/// Sorted eigenvalues of a Hermitian matrix.
pub fn dense_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Prints one acceptance line and records the outcome.
pub struct Ledger {
    pub failures: Vec<String>,
}

impl Ledger {
    pub fn new() -> Self {
        Self { failures: Vec::new() }
    }

    pub fn check(&mut self, name: &str, ok: bool, detail: String) {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures.push(name.to_string());
        }
    }
}
