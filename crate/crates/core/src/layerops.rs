//! Boundary layer operators K_lambda, W_lambda and C_lambda, discretized by
//! Galerkin projection onto band-limited spinor harmonics.
//!
//! Basis. With X: S^2 -> boundary the Gauss-map chart of the surface and J its
//! area element, beta_a(X(n)) = psi_a(n) / sqrt(J(n)) for all spinor
//! harmonics with j <= L - 1/2 is orthonormal in L^2(boundary)^2. Because
//! nu(X(n)) = n, sigma . nu maps beta_a to beta_{a'} with the branch flipped,
//! so it is an exact permutation in this basis, and operator adjoints are
//! plain conjugate transposes.
//!
//! Singular integrals. For every node x_i the weakly singular and principal
//! value integrals of 1/r, r, (x - y)/r^3 and (x - y)/r against each scalar
//! harmonic are computed once per surface on a polar grid of the parameter
//! sphere centred at the node's normal. The polar area element cancels the
//! 1/r singularity, and the odd leading part of (x - y)/r^3 cancels ring by
//! ring on an even trapezoid in the polar angle, which realizes the principal
//! value. The lambda dependent remainders
//!     e^{-sr}/r - 1/r - s^2 r / 2,
//!     (e^{-sr}(1 + sr) - 1 + s^2 r^2 / 2) (x - y) / r^3
//! are continuous and are integrated with the surface rule.

use std::io::Write;

use faer::{c64, Mat};

use crate::error::{domain, Error, Result};
use crate::quadrature::gauss_legendre_on;
use crate::sphspinor::{harmonic_index, spinor_labels, Branch, RealHarmonics, SpinorLabel};
use crate::surface::{dot3, norm3, sub3, QuadratureSurface, Shape, SpinorBoundaryField};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// |lambda| > m: oscillating kernels with wavenumber sqrt(lambda^2 - m^2).
    Propagating,
    /// |lambda| <= m: real exponential decay sqrt(m^2 - lambda^2).
    Evanescent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralParams {
    pub lambda: f64,
    pub mass: f64,
}

impl SpectralParams {
    pub fn new(lambda: f64, mass: f64) -> Result<Self> {
        if !lambda.is_finite() || !(mass >= 0.0) {
            return domain(format!("invalid spectral parameters lambda = {lambda}, m = {mass}"));
        }
        Ok(Self { lambda, mass })
    }

    pub fn regime(&self) -> Regime {
        if self.lambda.abs() > self.mass {
            Regime::Propagating
        } else {
            Regime::Evanescent
        }
    }

    /// s with kernels written as e^{-s r}: i sqrt(lambda^2 - m^2) or sqrt(m^2 - lambda^2).
    pub fn decay(&self) -> c64 {
        let d = (self.lambda - self.mass) * (self.lambda + self.mass);
        if d > 0.0 {
            c64::new(0.0, d.sqrt())
        } else {
            c64::new((-d).sqrt(), 0.0)
        }
    }
}

/// Fundamental solution phi_lambda(x) of H - lambda as a 4x4 matrix:
/// e^{-s|x|}/(4 pi |x|) (lambda + m beta + (1 + s|x|) i alpha . x / |x|^2).
pub fn kernel_phi(params: &SpectralParams, x: [f64; 3]) -> Result<[[c64; 4]; 4]> {
    let r = norm3(x);
    if r == 0.0 {
        return Err(Error::Domain("fundamental solution is singular at x = 0".into()));
    }
    let s = params.decay();
    let pref = (-s * r).exp() / (FOUR_PI * r);
    let lin = (s * r + 1.0) * c64::new(0.0, 1.0 / (r * r));
    let z = c64::new(0.0, 0.0);
    let sig = sigma_matrix(x);
    let mut out = [[z; 4]; 4];
    let (l, m) = (params.lambda, params.mass);
    for a in 0..2 {
        out[a][a] += c64::new(l + m, 0.0);
        out[a + 2][a + 2] += c64::new(l - m, 0.0);
        for b in 0..2 {
            out[a][b + 2] += lin * sig[a][b];
            out[a + 2][b] += lin * sig[a][b];
        }
    }
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            *v *= pref;
        }
    }
    Ok(out)
}

/// sigma . x as a 2x2 matrix.
fn sigma_matrix(x: [f64; 3]) -> [[c64; 2]; 2] {
    [[c64::new(x[2], 0.0), c64::new(x[0], -x[1])], [c64::new(x[0], x[1]), c64::new(-x[2], 0.0)]]
}

/// Orthonormal band-limited spinor basis of a surface.
#[derive(Clone, Debug)]
pub struct SpinorBasis {
    /// Maximal orbital degree L; spinors with j <= L - 1/2 are included.
    pub band: usize,
    pub labels: Vec<SpinorLabel>,
    /// Per basis function and spinor component: (harmonic index, coefficient).
    comps: Vec<[(usize, f64); 2]>,
    swap: Vec<usize>,
}

impl SpinorBasis {
    pub fn new(band: usize) -> Self {
        let labels = spinor_labels(2 * band as u32 - 1);
        let comps = labels
            .iter()
            .map(|l| {
                let j = l.j.value::<f64>();
                let mu = l.mu2 as f64 / 2.0;
                let ell = l.ell();
                let m_lo = ((l.mu2 - 1) / 2) as i64;
                let idx = |m: i64| if m.unsigned_abs() as usize > ell { 0 } else { harmonic_index(ell, m) };
                let (c0, c1) = match l.branch {
                    Branch::Minus => ((j + mu).sqrt() / (2.0 * j).sqrt(), (j - mu).sqrt() / (2.0 * j).sqrt()),
                    Branch::Plus => (
                        (j + 1.0 - mu).sqrt() / (2.0 * j + 2.0).sqrt(),
                        -(j + 1.0 + mu).sqrt() / (2.0 * j + 2.0).sqrt(),
                    ),
                };
                [(idx(m_lo), c0), (idx(m_lo + 1), c1)]
            })
            .collect();
        let swap = labels
            .iter()
            .map(|l| labels.iter().position(|o| *o == l.swapped()).expect("swap partner in basis"))
            .collect();
        Self { band, labels, comps, swap }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn harmonic_count(&self) -> usize {
        (self.band + 1) * (self.band + 1)
    }

    /// Index of the basis function (sigma . nu) beta_a.
    pub fn swap_index(&self, a: usize) -> usize {
        self.swap[a]
    }

    /// Orbital degree of basis function a.
    pub fn ell(&self, a: usize) -> usize {
        self.labels[a].ell()
    }

    pub fn index_of(&self, label: SpinorLabel) -> Option<usize> {
        self.labels.iter().position(|l| *l == label)
    }
}

/// Band limit used for a surface rule.
pub fn band_for(surface: &QuadratureSurface) -> usize {
    surface.n_theta / 2 - 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightConvention {
    /// Matrix in an orthonormal basis of L^2(boundary): adjoints are conjugate transposes.
    Orthonormal,
}

/// Dense operator on band-limited boundary spinors, stored in the orthonormal basis.
#[derive(Clone, Debug)]
pub struct BoundaryOperator {
    pub matrix: Mat<c64>,
    pub kind: String,
    pub surface_id: String,
    pub weight_convention: WeightConvention,
}

impl BoundaryOperator {
    pub fn new(matrix: Mat<c64>, kind: impl Into<String>, surface_id: impl Into<String>) -> Self {
        Self { matrix, kind: kind.into(), surface_id: surface_id.into(), weight_convention: WeightConvention::Orthonormal }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn identity(dim: usize, surface_id: &str) -> Self {
        Self::new(Mat::<c64>::identity(dim, dim), "I", surface_id)
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.matrix.adjoint().to_owned(), format!("({})*", self.kind), self.surface_id.clone())
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::new(&self.matrix * &other.matrix, format!("{} {}", self.kind, other.kind), self.surface_id.clone())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(&self.matrix + &other.matrix, format!("{} + {}", self.kind, other.kind), self.surface_id.clone())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(&self.matrix - &other.matrix, format!("{} - {}", self.kind, other.kind), self.surface_id.clone())
    }

    pub fn scale(&self, s: c64) -> Self {
        let m = Mat::<c64>::from_fn(self.dim(), self.matrix.ncols(), |i, j| self.matrix[(i, j)] * s);
        Self::new(m, format!("{s} {}", self.kind), self.surface_id.clone())
    }

    /// self + s I.
    pub fn shift(&self, s: c64) -> Self {
        let mut m = self.matrix.clone();
        for i in 0..self.dim().min(m.ncols()) {
            m[(i, i)] += s;
        }
        Self::new(m, format!("{} + {s}", self.kind), self.surface_id.clone())
    }

    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        (0..self.dim()).map(|i| (0..x.len()).map(|j| self.matrix[(i, j)] * x[j]).sum()).collect()
    }

    /// Spectral norm.
    pub fn norm2(&self) -> f64 {
        norm2(&self.matrix)
    }

    /// ||A - A*||_2.
    pub fn hermitian_defect(&self) -> f64 {
        norm2(&(&self.matrix - self.matrix.adjoint()))
    }

    /// Binary dump: u64 N, f64 lambda, f64 m, u64 length + kind bytes, then
    /// N*N row-major (re, im) pairs, all little-endian.
    pub fn write_binary(&self, out: &mut impl Write, params: &SpectralParams) -> Result<()> {
        let n = self.dim();
        out.write_all(&(n as u64).to_le_bytes())?;
        out.write_all(&params.lambda.to_le_bytes())?;
        out.write_all(&params.mass.to_le_bytes())?;
        out.write_all(&(self.kind.len() as u64).to_le_bytes())?;
        out.write_all(self.kind.as_bytes())?;
        for i in 0..n {
            for j in 0..n {
                let v = self.matrix[(i, j)];
                out.write_all(&v.re.to_le_bytes())?;
                out.write_all(&v.im.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

pub(crate) fn norm2(m: &Mat<c64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    match m.singular_values() {
        Ok(s) => s[0],
        Err(_) => f64::NAN,
    }
}

/// Surface, basis and the lambda independent singular integrals.
pub struct LayerOperators {
    pub surface: QuadratureSurface,
    pub basis: SpinorBasis,
    pub surface_id: String,
    /// Complex harmonics at the nodes: Y_h(n_i).
    y: Mat<c64>,
    /// w_i sqrt(J_i) Y_h(n_i).
    yw: Mat<c64>,
    /// The same with real harmonics.
    ywr: Mat<f64>,
    /// (1/4pi) int kernel sqrt(J) Y_h over the parameter sphere, per node, for
    /// the kernels 1/r, r, (x-y)_c/r^3, (x-y)_c/r.
    a0: Mat<c64>,
    a2: Mat<c64>,
    b0: [Mat<c64>; 3],
    b2: [Mat<c64>; 3],
}

/// K and W at one spectral parameter.
pub struct LayerPair {
    pub params: SpectralParams,
    pub k: BoundaryOperator,
    pub w: BoundaryOperator,
    /// Hermitian defects before symmetrization in the evanescent regime.
    pub raw_hermitian_defect: (f64, f64),
}

impl LayerOperators {
    pub fn new(surface: &QuadratureSurface) -> Result<Self> {
        let band = band_for(surface);
        if band < 2 {
            return Err(Error::Assembly(format!("surface {}x{} too coarse", surface.n_theta, surface.n_phi)));
        }
        let basis = SpinorBasis::new(band);
        let nh = basis.harmonic_count();
        let n = surface.len();
        let rh = RealHarmonics::<f64>::new(band);

        let mut yre = vec![0.0; nh];
        let mut y = Mat::<c64>::zeros(n, nh);
        let mut yw = Mat::<c64>::zeros(n, nh);
        let mut ywr = Mat::<f64>::zeros(n, nh);
        for i in 0..n {
            rh.eval_into(surface.normals[i], &mut yre);
            let row = complex_from_real(&yre, band);
            let wj = surface.sphere_weights[i] * surface.jacobian[i].sqrt();
            for h in 0..nh {
                y[(i, h)] = row[h];
                yw[(i, h)] = row[h] * wj;
                ywr[(i, h)] = yre[h] * wj;
            }
        }

        let (a0, a2, b0, b2) = singular_integrals(surface, &rh, band);
        let surface_id = format!("{:?}@{}x{}", surface.shape, surface.n_theta, surface.n_phi);
        Ok(Self { surface: surface.clone(), basis, surface_id, y, yw, ywr, a0, a2, b0, b2 })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// sigma . nu in the basis: the exact branch-swap permutation.
    pub fn sigma_nu(&self) -> BoundaryOperator {
        let d = self.dim();
        let m = Mat::<c64>::from_fn(d, d, |i, j| {
            if self.basis.swap_index(j) == i {
                c64::new(1.0, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        BoundaryOperator::new(m, "sigma.nu", self.surface_id.clone())
    }

    pub fn identity(&self) -> BoundaryOperator {
        BoundaryOperator::identity(self.dim(), &self.surface_id)
    }

    /// Basis functions with orbital degree at most half the band limit.
    pub fn resolved_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&a| 2 * self.basis.ell(a) <= self.basis.band).collect()
    }

    /// Assemble K_lambda and W_lambda.
    pub fn assemble(&self, params: &SpectralParams) -> LayerPair {
        let s = params.decay();
        let n = self.surface.len();
        let nh = self.basis.harmonic_count();
        let s2half = s * s * 0.5;
        let mut ik = Mat::<c64>::from_fn(n, nh, |i, h| self.a0[(i, h)] + s2half * self.a2[(i, h)]);
        let mut iw: [Mat<c64>; 3] =
            std::array::from_fn(|c| Mat::<c64>::from_fn(n, nh, |i, h| self.b0[c][(i, h)] - s2half * self.b2[c][(i, h)]));
        if s != c64::new(0.0, 0.0) {
            // Smooth remainders, applied to real harmonics so every product is a real matmul.
            let nodes = &self.surface.nodes;
            let propagating = s.re == 0.0;
            let mut kre = Mat::<f64>::zeros(n, n);
            let mut kim = Mat::<f64>::zeros(n, n);
            let mut qre = Mat::<f64>::zeros(n, n);
            let mut qim = Mat::<f64>::zeros(n, n);
            for j in 0..n {
                for i in 0..n {
                    let (k, q) = if i == j {
                        (-s / FOUR_PI, c64::new(0.0, 0.0))
                    } else {
                        let r = norm3(sub3(nodes[i], nodes[j]));
                        let (k, w) = remainders(s, r);
                        (k / FOUR_PI, w / (FOUR_PI * r * r * r))
                    };
                    kre[(i, j)] = k.re;
                    kim[(i, j)] = k.im;
                    qre[(i, j)] = q.re;
                    qim[(i, j)] = q.im;
                }
            }
            let band = self.basis.band;
            let add = |target: &mut Mat<c64>, re: &Mat<f64>, im: &Mat<f64>| {
                let pr = re * &self.ywr;
                let pi = if propagating { Some(im * &self.ywr) } else { None };
                let i_unit = c64::new(0.0, 1.0);
                for i in 0..n {
                    let row: Vec<c64> = (0..nh)
                        .map(|h| c64::new(pr[(i, h)], 0.0) + pi.as_ref().map_or(c64::new(0.0, 0.0), |p| i_unit * p[(i, h)]))
                        .collect();
                    let cx = complex_from_real_parts(&row, band);
                    for h in 0..nh {
                        target[(i, h)] += cx[h];
                    }
                }
            };
            add(&mut ik, &kre, &kim);
            drop((kre, kim));
            let mut bre = Mat::<f64>::zeros(n, n);
            let mut bim = Mat::<f64>::zeros(n, n);
            for (c, iwc) in iw.iter_mut().enumerate() {
                for j in 0..n {
                    for i in 0..n {
                        let dc = nodes[i][c] - nodes[j][c];
                        bre[(i, j)] = qre[(i, j)] * dc;
                        bim[(i, j)] = qim[(i, j)] * dc;
                    }
                }
                add(iwc, &bre, &bim);
            }
        }
        // Project onto test harmonics: P[h', h] = sum_i conj(yw[i, h']) I[i, h].
        let pk = self.yw.adjoint() * &ik;
        let pw: [Mat<c64>; 3] = std::array::from_fn(|c| self.yw.adjoint() * &iw[c]);
        let d = self.dim();
        let comps = &self.basis.comps;
        let kmat = Mat::<c64>::from_fn(d, d, |a, b| {
            (0..2).map(|c| pk[(comps[a][c].0, comps[b][c].0)] * (comps[a][c].1 * comps[b][c].1)).sum()
        });
        let i_unit = c64::new(0.0, 1.0);
        let wmat = Mat::<c64>::from_fn(d, d, |a, b| {
            let mut acc = c64::new(0.0, 0.0);
            for c in 0..2 {
                for cp in 0..2 {
                    let (ha, ca) = comps[a][c];
                    let (hb, cb) = comps[b][cp];
                    let coef = ca * cb;
                    if coef == 0.0 {
                        continue;
                    }
                    let (p1, p2, p3) = (pw[0][(ha, hb)], pw[1][(ha, hb)], pw[2][(ha, hb)]);
                    let sig = match (c, cp) {
                        (0, 0) => p3,
                        (0, 1) => p1 - i_unit * p2,
                        (1, 0) => p1 + i_unit * p2,
                        _ => -p3,
                    };
                    acc += sig * coef;
                }
            }
            acc * i_unit
        });
        let mut k = BoundaryOperator::new(kmat, format!("K[{}]", params.lambda), self.surface_id.clone());
        let mut w = BoundaryOperator::new(wmat, format!("W[{}]", params.lambda), self.surface_id.clone());
        let mut raw = (0.0, 0.0);
        if params.regime() == Regime::Evanescent {
            raw = (k.hermitian_defect(), w.hermitian_defect());
            k.matrix = hermitian_part(&k.matrix);
            w.matrix = hermitian_part(&w.matrix);
        }
        LayerPair { params: *params, k, w, raw_hermitian_defect: raw }
    }

    pub fn assemble_k(&self, params: &SpectralParams) -> BoundaryOperator {
        self.assemble(params).k
    }

    pub fn assemble_w(&self, params: &SpectralParams) -> BoundaryOperator {
        self.assemble(params).w
    }

    /// C_lambda = [[(lambda + m) K, W], [W, (lambda - m) K]] on C^4 boundary data.
    pub fn assemble_c(&self, pair: &LayerPair) -> BoundaryOperator {
        let d = self.dim();
        let (l, m) = (pair.params.lambda, pair.params.mass);
        let mat = Mat::<c64>::from_fn(2 * d, 2 * d, |i, j| match (i < d, j < d) {
            (true, true) => pair.k.matrix[(i, j)] * (l + m),
            (false, false) => pair.k.matrix[(i - d, j - d)] * (l - m),
            (true, false) => pair.w.matrix[(i, j - d)],
            (false, true) => pair.w.matrix[(i - d, j)],
        });
        BoundaryOperator::new(mat, format!("C[{l}]"), self.surface_id.clone())
    }

    /// alpha . nu on C^4 boundary data.
    pub fn alpha_nu(&self) -> BoundaryOperator {
        let d = self.dim();
        let s = self.sigma_nu();
        let mat = Mat::<c64>::from_fn(2 * d, 2 * d, |i, j| match (i < d, j < d) {
            (true, false) => s.matrix[(i, j - d)],
            (false, true) => s.matrix[(i - d, j)],
            _ => c64::new(0.0, 0.0),
        });
        BoundaryOperator::new(mat, "alpha.nu", self.surface_id.clone())
    }

    /// Node values of sum_a c_a beta_a.
    pub fn synthesize(&self, coeffs: &[c64]) -> SpinorBoundaryField {
        let n = self.surface.len();
        let mut values = vec![[c64::new(0.0, 0.0); 2]; n];
        for (i, v) in values.iter_mut().enumerate() {
            let inv = 1.0 / self.surface.jacobian[i].sqrt();
            for (a, ca) in coeffs.iter().enumerate() {
                if *ca == c64::new(0.0, 0.0) {
                    continue;
                }
                for (c, vc) in v.iter_mut().enumerate() {
                    let (h, coef) = self.basis.comps[a][c];
                    if coef != 0.0 {
                        *vc += *ca * self.y[(i, h)] * (coef * inv);
                    }
                }
            }
        }
        SpinorBoundaryField { values }
    }

    /// Values of sum_a c_a beta_a at the nodes of another rule for the same
    /// shape. The field is band-limited, so this is exact up to rounding.
    pub fn synthesize_on(&self, coeffs: &[c64], target: &QuadratureSurface) -> Result<SpinorBoundaryField> {
        if target.shape != self.surface.shape {
            return domain("target rule describes a different surface");
        }
        let band = self.basis.band;
        let rh = RealHarmonics::<f64>::new(band);
        let mut re = vec![0.0; rh.len()];
        let values = target
            .normals
            .iter()
            .zip(&target.jacobian)
            .map(|(n, jac)| {
                rh.eval_into(*n, &mut re);
                let y = complex_from_real(&re, band);
                let inv = 1.0 / jac.sqrt();
                let mut v = [c64::new(0.0, 0.0); 2];
                for (ca, comps) in coeffs.iter().zip(&self.basis.comps) {
                    for (c, (h, coef)) in comps.iter().enumerate() {
                        if *coef != 0.0 {
                            v[c] += *ca * y[*h] * (*coef * inv);
                        }
                    }
                }
                v
            })
            .collect();
        Ok(SpinorBoundaryField { values })
    }

    /// Coefficients <u, beta_a> by the surface rule.
    pub fn analyze(&self, field: &SpinorBoundaryField) -> Vec<c64> {
        (0..self.dim())
            .map(|a| {
                let mut acc = c64::new(0.0, 0.0);
                for (i, u) in field.values.iter().enumerate() {
                    for (c, uc) in u.iter().enumerate() {
                        let (h, coef) = self.basis.comps[a][c];
                        if coef != 0.0 {
                            acc += self.yw[(i, h)].conj() * *uc * coef;
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// Basis coefficients of the node samples of a spinor harmonic divided by
    /// sqrt(J), i.e. the unit vector of that basis function.
    pub fn unit_vector(&self, a: usize) -> Vec<c64> {
        let mut v = vec![c64::new(0.0, 0.0); self.dim()];
        v[a] = c64::new(1.0, 0.0);
        v
    }
}

fn hermitian_part(m: &Mat<c64>) -> Mat<c64> {
    Mat::<c64>::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// e^{-sr}/r - 1/r - s^2 r/2, i.e. -s + sum_{n>=3} (-1)^n s^n r^{n-1}/n!.
fn rem_k(s: c64, r: f64) -> c64 {
    let z = s * r;
    if z.norm() < 0.5 {
        let mut term = z * z * z / 6.0;
        let mut acc = c64::new(0.0, 0.0);
        let mut sign = -1.0;
        for n in 3..30 {
            acc += term * sign;
            term = term * z / (n as f64 + 1.0);
            sign = -sign;
        }
        acc / r - s
    } else {
        ((-z).exp() - 1.0 + z - z * z * 0.5) / r - s
    }
}

/// e^{-z}(1 + z) - 1 + z^2/2 with z = s r, i.e. sum_{n>=3} (-1)^n (1 - n) z^n / n!.
fn rem_w(s: c64, r: f64) -> c64 {
    let z = s * r;
    if z.norm() < 0.5 {
        let mut pow = z * z * z / 6.0;
        let mut acc = c64::new(0.0, 0.0);
        for n in 3..30 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            acc += pow * (sign * (1.0 - n as f64));
            pow = pow * z / (n as f64 + 1.0);
        }
        acc
    } else {
        (-z).exp() * (z + 1.0) - 1.0 + z * z * 0.5
    }
}

/// Both remainders at once, sharing the exponential.
fn remainders(s: c64, r: f64) -> (c64, c64) {
    let z = s * r;
    if z.norm() < 0.5 {
        (rem_k(s, r), rem_w(s, r))
    } else {
        let e = (-z).exp();
        ((e - 1.0 + z - z * z * 0.5) / r - s, e * (z + 1.0) - 1.0 + z * z * 0.5)
    }
}

/// Convert real harmonic values (cos/sin parts) to complex Y_h.
fn complex_from_real(re: &[f64], band: usize) -> Vec<c64> {
    let mut out = vec![c64::new(0.0, 0.0); re.len()];
    for n in 0..=band {
        let base = n * n + n;
        out[base] = c64::new(re[base], 0.0);
        for l in 1..=n {
            let (c, s) = (re[base + l], re[base - l]);
            out[base + l] = c64::new(c, s);
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            out[base - l] = c64::new(c, -s) * sign;
        }
    }
    out
}

/// complex_from_real for integrals with complex weights: the cosine and sine
/// parts are combined linearly.
fn complex_from_real_parts(re: &[c64], band: usize) -> Vec<c64> {
    let i_unit = c64::new(0.0, 1.0);
    let mut out = vec![c64::new(0.0, 0.0); re.len()];
    for n in 0..=band {
        let base = n * n + n;
        out[base] = re[base];
        for l in 1..=n {
            let (c, s) = (re[base + l], re[base - l]);
            out[base + l] = c + i_unit * s;
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            out[base - l] = (c - i_unit * s) * sign;
        }
    }
    out
}

type Singular = (Mat<c64>, Mat<c64>, [Mat<c64>; 3], [Mat<c64>; 3]);

/// Polar-grid integrals of the singular kernels against every harmonic.
fn singular_integrals(surface: &QuadratureSurface, rh: &RealHarmonics<f64>, band: usize) -> Singular {
    let n = surface.len();
    let nh = rh.len();
    let shape = surface.shape;
    let (tq, tw) = gauss_legendre_on::<f64>(surface.n_theta, 0.0, std::f64::consts::PI);
    let n_phi = surface.n_phi;
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let q = tq.len() * n_phi;
    let trig: Vec<(f64, f64)> = (0..n_phi).map(|k| (k as f64 * dphi).sin_cos()).collect();

    let mut out: [Mat<c64>; 8] = std::array::from_fn(|_| Mat::<c64>::zeros(n, nh));
    let mut yr = Mat::<f64>::zeros(q, nh);
    let mut kw = Mat::<f64>::zeros(8, q);
    let mut buf = vec![0.0; nh];
    for i in 0..n {
        let e3 = surface.normals[i];
        let (e1, e2) = frame(e3);
        let xi = surface.nodes[i];
        let mut idx = 0;
        for (t, wt) in tq.iter().zip(&tw) {
            let (st, ct) = t.sin_cos();
            for (sp, cp) in &trig {
                let dir = [
                    ct * e3[0] + st * (cp * e1[0] + sp * e2[0]),
                    ct * e3[1] + st * (cp * e1[1] + sp * e2[1]),
                    ct * e3[2] + st * (cp * e1[2] + sp * e2[2]),
                ];
                let y = shape.point(dir);
                let jac = shape.jacobian(dir);
                let d = sub3(xi, y);
                let r = norm3(d);
                let w = wt * st * dphi * jac.sqrt() / FOUR_PI;
                let (ir, ir3) = (1.0 / r, 1.0 / (r * r * r));
                kw[(0, idx)] = w * ir;
                kw[(1, idx)] = w * r;
                for c in 0..3 {
                    kw[(2 + c, idx)] = w * d[c] * ir3;
                    kw[(5 + c, idx)] = w * d[c] * ir;
                }
                rh.eval_into(dir, &mut buf);
                for h in 0..nh {
                    yr[(idx, h)] = buf[h];
                }
                idx += 1;
            }
        }
        let t = &kw * &yr;
        for (k, o) in out.iter_mut().enumerate() {
            let row: Vec<f64> = (0..nh).map(|h| t[(k, h)]).collect();
            let cx = complex_from_real(&row, band);
            for h in 0..nh {
                o[(i, h)] = cx[h];
            }
        }
    }
    let [a0, a2, b00, b01, b02, b20, b21, b22] = out;
    (a0, a2, [b00, b01, b02], [b20, b21, b22])
}

/// Orthonormal e1, e2 completing e3.
fn frame(e3: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if e3[0].abs() < 0.8 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let p = dot3(helper, e3);
    let v = [helper[0] - p * e3[0], helper[1] - p * e3[1], helper[2] - p * e3[2]];
    let nv = norm3(v);
    let e1 = [v[0] / nv, v[1] / nv, v[2] / nv];
    let e2 = [e3[1] * e1[2] - e3[2] * e1[1], e3[2] * e1[0] - e3[0] * e1[2], e3[0] * e1[1] - e3[1] * e1[0]];
    (e1, e2)
}

/// Phi_lambda g(x) = int phi_lambda(x - y) g(y) dsigma(y) by the surface rule.
///
/// `g` holds C^4 samples at the surface nodes. Points must stay at least two
/// local mesh sizes away from the surface.
pub fn volume_potential(
    surface: &QuadratureSurface,
    params: &SpectralParams,
    g: &[[c64; 4]],
    points: &[[f64; 3]],
) -> Result<Vec<[c64; 4]>> {
    if g.len() != surface.len() {
        return domain(format!("density has {} samples, surface {} nodes", g.len(), surface.len()));
    }
    let guard = 2.0 * surface.max_patch();
    points
        .iter()
        .map(|x| {
            let mut acc = [c64::new(0.0, 0.0); 4];
            for ((y, w), gy) in surface.nodes.iter().zip(&surface.weights).zip(g) {
                let d = sub3(*x, *y);
                if norm3(d) < guard {
                    return Err(Error::Accuracy(format!("point {x:?} within {guard:.3e} of the surface")));
                }
                let phi = kernel_phi(params, d)?;
                for a in 0..4 {
                    for b in 0..4 {
                        acc[a] += phi[a][b] * gy[b] * *w;
                    }
                }
            }
            Ok(acc)
        })
        .collect()
}

/// Residual norms of the three layer identities at one lambda:
/// (C (alpha.nu))^2 = -1/4, (W S)^2 + (lambda^2 - m^2)(K S)^2 = -1/4, {K S, W S} = 0.
///
/// Products of truncated operators lose the coupling through modes above the
/// band limit, which on a non-spherical surface is of unit size at the band
/// edge. Residuals are therefore measured on the resolved subspace, the basis
/// functions with orbital degree at most half the band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityResiduals {
    pub c_alpha: f64,
    pub ws_ks: f64,
    pub anticommutator: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.c_alpha.max(self.ws_ks).max(self.anticommutator)
    }
}

pub fn identity_residuals(ops: &LayerOperators, pair: &LayerPair) -> IdentityResiduals {
    let s = ops.sigma_nu();
    let quarter = c64::new(0.25, 0.0);
    let low = ops.resolved_indices();
    let d = ops.dim();
    let low4: Vec<usize> = low.iter().copied().chain(low.iter().map(|i| i + d)).collect();
    let c = ops.assemble_c(pair);
    let ca = c.mul(&ops.alpha_nu());
    let c_alpha = norm2(&compress(&ca.mul(&ca).shift(quarter).matrix, &low4));
    let ks = pair.k.mul(&s);
    let ws = pair.w.mul(&s);
    let (l, m) = (pair.params.lambda, pair.params.mass);
    let sum = ws.mul(&ws).add(&ks.mul(&ks).scale(c64::new((l - m) * (l + m), 0.0))).shift(quarter);
    let ws_ks = norm2(&compress(&sum.matrix, &low));
    let anticommutator = norm2(&compress(&ks.mul(&ws).add(&ws.mul(&ks)).matrix, &low));
    IdentityResiduals { c_alpha, ws_ks, anticommutator }
}

/// For each orbital degree l <= l_max, the largest ||K_m beta - beta / (2l + 1)||
/// over basis spinors beta of that degree. On a sphere of radius R the exact
/// value is R / (2l + 1); the check divides K by R.
pub fn sphere_single_layer_errors(ops: &LayerOperators, mass: f64, l_max: usize) -> Result<Vec<f64>> {
    let Shape::Sphere { radius } = ops.surface.shape else {
        return domain("single-layer modes are only known on a sphere");
    };
    let k = ops.assemble_k(&SpectralParams::new(mass, mass)?);
    let mut worst = vec![0.0f64; l_max + 1];
    for a in 0..ops.dim() {
        let ell = ops.basis.ell(a);
        if ell > l_max {
            continue;
        }
        let d = radius / (2.0 * ell as f64 + 1.0);
        let col = k.apply(&ops.unit_vector(a));
        let err = col
            .iter()
            .enumerate()
            .map(|(b, v)| (v - c64::new(if a == b { d } else { 0.0 }, 0.0)).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / radius;
        worst[ell] = worst[ell].max(err);
    }
    Ok(worst)
}

/// Principal submatrix on the given indices.
pub(crate) fn compress(m: &Mat<c64>, idx: &[usize]) -> Mat<c64> {
    Mat::<c64>::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// ||{W, sigma.nu}||_2.
pub fn anticommutator_norm(ops: &LayerOperators, w: &BoundaryOperator) -> f64 {
    let s = ops.sigma_nu();
    w.mul(&s).add(&s.mul(w)).norm2()
}
