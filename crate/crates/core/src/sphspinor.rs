//! Spherical harmonics Y_n^l (orthonormal, Condon–Shortley phase) and the
//! spherical harmonic spinors psi^mu_{j -+ 1/2}.

use num_complex::Complex;

use crate::error::{domain, Result};
use crate::halfint_bessel::HalfInt;
use crate::quadrature::gauss_legendre;
use crate::real::Real;

/// Selects psi_{j-1/2} (`Minus`) or psi_{j+1/2} (`Plus`); on the ball it also
/// labels the invariant subspaces L^-_{j,mu} and L^+_{j,mu}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    Minus,
    Plus,
}

impl Branch {
    pub fn flip(self) -> Self {
        match self {
            Branch::Minus => Branch::Plus,
            Branch::Plus => Branch::Minus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Branch::Minus => '-',
            Branch::Plus => '+',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpinorLabel {
    pub j: HalfInt,
    /// 2*mu, odd, |mu| <= j.
    pub mu2: i32,
    pub branch: Branch,
}

impl SpinorLabel {
    pub fn new(j: HalfInt, mu2: i32, branch: Branch) -> Result<Self> {
        let label = Self { j, mu2, branch };
        label.validate()?;
        Ok(label)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.j.is_half_odd() {
            return domain(format!("spinor j = {} must be a half-odd integer", self.j));
        }
        if self.mu2.rem_euclid(2) != 1 || self.mu2.unsigned_abs() > self.j.twice() {
            return domain(format!("mu = {}/2 not admissible for j = {}", self.mu2, self.j));
        }
        Ok(())
    }

    /// Orbital degree of the harmonics in this spinor.
    pub fn ell(&self) -> usize {
        let lower = (self.j.twice() / 2) as usize;
        match self.branch {
            Branch::Minus => lower,
            Branch::Plus => lower + 1,
        }
    }

    /// The label of (sigma . nu) psi on the sphere.
    pub fn swapped(self) -> Self {
        Self { branch: self.branch.flip(), ..self }
    }
}

/// All labels with 2j <= `j2_max`, grouped by j, then mu ascending, then branch.
pub fn spinor_labels(j2_max: u32) -> Vec<SpinorLabel> {
    let mut out = Vec::new();
    for j2 in (1..=j2_max).step_by(2) {
        let j = HalfInt::new(j2).expect("positive");
        for mu2 in (-(j2 as i32)..=j2 as i32).step_by(2) {
            for branch in [Branch::Minus, Branch::Plus] {
                out.push(SpinorLabel { j, mu2, branch });
            }
        }
    }
    out
}

/// Evaluator for real harmonics with precomputed recurrence coefficients.
///
/// Slot `n^2 + n + l` of the output holds Pbar_n^l cos(l phi) for l >= 0 and
/// Pbar_n^|l| sin(|l| phi) for l < 0, where Y_n^l = Pbar_n^l e^{i l phi}.
#[derive(Clone, Debug)]
pub struct RealHarmonics<T> {
    nmax: usize,
    diag: Vec<T>,
    sub: Vec<T>,
    a: Vec<T>,
}

impl<T: Real> RealHarmonics<T> {
    pub fn new(nmax: usize) -> Self {
        let two = T::lit(2.0);
        let w = nmax + 1;
        let mut diag = vec![T::zero(); w];
        let mut sub = vec![T::zero(); w];
        let mut a = vec![T::zero(); w * w];
        for l in 0..=nmax {
            let lf = T::from_usize_lossy(l);
            if l > 0 {
                diag[l] = ((two * lf + T::one()) / (two * lf)).sqrt();
            }
            sub[l] = (two * lf + T::lit(3.0)).sqrt();
            for n in (l + 1)..=nmax {
                let k = T::from_usize_lossy(n);
                a[n * w + l] = ((T::lit(4.0) * k * k - T::one()) / (k * k - lf * lf)).sqrt();
            }
        }
        Self { nmax, diag, sub, a }
    }

    pub fn len(&self) -> usize {
        (self.nmax + 1) * (self.nmax + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval_into(&self, point: [T; 3], out: &mut [T]) {
        let nmax = self.nmax;
        let w = nmax + 1;
        let [x, y, z] = unit(point);
        let rho = (x * x + y * y).sqrt();
        let (cphi, sphi) = if rho > T::zero() { (x / rho, y / rho) } else { (T::one(), T::zero()) };
        let mut pll = T::one() / (T::lit(4.0) * T::PI()).sqrt();
        let (mut cl, mut sl) = (T::one(), T::zero());
        for l in 0..=nmax {
            if l > 0 {
                pll = -self.diag[l] * rho * pll;
                let c_next = cl * cphi - sl * sphi;
                sl = sl * cphi + cl * sphi;
                cl = c_next;
            }
            let mut write = |n: usize, p: T| {
                out[n * n + n + l] = p * cl;
                if l > 0 {
                    out[n * n + n - l] = p * sl;
                }
            };
            write(l, pll);
            if l == nmax {
                break;
            }
            let mut p_prev = pll;
            let mut p = self.sub[l] * z * pll;
            write(l + 1, p);
            for n in (l + 2)..=nmax {
                let next = self.a[n * w + l] * (z * p - p_prev / self.a[(n - 1) * w + l]);
                p_prev = p;
                p = next;
                write(n, p);
            }
        }
    }
}

/// Index of Y_n^l in the arrays returned by [`harmonics_up_to`].
pub fn harmonic_index(n: usize, ell: i64) -> usize {
    ((n * n + n) as i64 + ell) as usize
}

fn unit<T: Real>(p: [T; 3]) -> [T; 3] {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / r, p[1] / r, p[2] / r]
}

/// Y_n^l for all n <= `nmax`, |l| <= n, at the direction of `point`.
pub fn harmonics_up_to<T: Real>(nmax: usize, point: [T; 3]) -> Vec<Complex<T>> {
    let [x, y, z] = unit(point);
    let rho = (x * x + y * y).sqrt();
    let eiphi = if rho > T::zero() { Complex::new(x / rho, y / rho) } else { Complex::new(T::one(), T::zero()) };
    let plm = normalized_legendre(nmax, z, rho);
    let mut out = vec![Complex::new(T::zero(), T::zero()); (nmax + 1) * (nmax + 1)];
    let mut phase = Complex::new(T::one(), T::zero());
    for l in 0..=nmax {
        for n in l..=nmax {
            let v = phase * plm[n * (nmax + 1) + l];
            out[n * n + n + l] = v;
            if l > 0 {
                let sign = if l % 2 == 0 { T::one() } else { -T::one() };
                out[n * n + n - l] = v.conj() * sign;
            }
        }
        phase = phase * eiphi;
    }
    out
}

/// Orthonormal associated Legendre functions including 1/sqrt(2 pi) and the
/// Condon–Shortley phase, stored at `n * (nmax + 1) + l` for 0 <= l <= n.
fn normalized_legendre<T: Real>(nmax: usize, c: T, s: T) -> Vec<T> {
    let w = nmax + 1;
    let mut p = vec![T::zero(); w * w];
    let four_pi = T::lit(4.0) * T::PI();
    p[0] = T::one() / four_pi.sqrt();
    for l in 1..=nmax {
        let lf = T::from_usize_lossy(l);
        p[l * w + l] = -((T::lit(2.0) * lf + T::one()) / (T::lit(2.0) * lf)).sqrt() * s * p[(l - 1) * w + l - 1];
    }
    for l in 0..nmax {
        let lf = T::from_usize_lossy(l);
        p[(l + 1) * w + l] = (T::lit(2.0) * lf + T::lit(3.0)).sqrt() * c * p[l * w + l];
    }
    for l in 0..=nmax {
        let lf = T::from_usize_lossy(l);
        for n in (l + 2)..=nmax {
            let nf = T::from_usize_lossy(n);
            let a = |k: T| ((T::lit(4.0) * k * k - T::one()) / (k * k - lf * lf)).sqrt();
            let an = a(nf);
            let an1 = a(nf - T::one());
            p[n * w + l] = an * (c * p[(n - 1) * w + l] - p[(n - 2) * w + l] / an1);
        }
    }
    p
}

/// Y_n^l at the direction of `point`.
pub fn spherical_harmonic<T: Real>(n: usize, ell: i64, point: [T; 3]) -> Result<Complex<T>> {
    if ell.unsigned_abs() as usize > n {
        return domain(format!("|l| = {} exceeds degree {n}", ell.abs()));
    }
    Ok(harmonics_up_to(n, point)[harmonic_index(n, ell)])
}

/// Fetch Y_n^l from a [`harmonics_up_to`] table, zero if |l| > n.
fn y_of<T: Real>(table: &[Complex<T>], n: usize, ell: i64) -> Complex<T> {
    if ell.unsigned_abs() as usize > n {
        return Complex::new(T::zero(), T::zero());
    }
    table[harmonic_index(n, ell)]
}

/// psi^mu evaluated from a table of harmonics of degree at least `label.ell()`.
pub fn spinor_from_harmonics<T: Real>(label: SpinorLabel, table: &[Complex<T>]) -> [Complex<T>; 2] {
    let j = label.j.value::<T>();
    let mu = T::from_i32(label.mu2).unwrap() / T::lit(2.0);
    let ell = label.ell();
    // Y order mu -+ 1/2 as an integer.
    let m_lo = ((label.mu2 - 1) / 2) as i64;
    let m_hi = m_lo + 1;
    let (ylo, yhi) = (y_of(table, ell, m_lo), y_of(table, ell, m_hi));
    match label.branch {
        Branch::Minus => {
            let norm = T::one() / (T::lit(2.0) * j).sqrt();
            [ylo * ((j + mu).sqrt() * norm), yhi * ((j - mu).sqrt() * norm)]
        }
        Branch::Plus => {
            let norm = T::one() / (T::lit(2.0) * j + T::lit(2.0)).sqrt();
            [ylo * ((j + T::one() - mu).sqrt() * norm), yhi * (-(j + T::one() + mu).sqrt() * norm)]
        }
    }
}

/// psi^mu_{j -+ 1/2} at the direction of `point`.
pub fn spinor<T: Real>(label: SpinorLabel, point: [T; 3]) -> Result<[Complex<T>; 2]> {
    label.validate()?;
    let table = harmonics_up_to(label.ell(), point);
    Ok(spinor_from_harmonics(label, &table))
}

/// (sigma . n) v for a real 3-vector n.
pub fn sigma_dot<T: Real>(n: [T; 3], v: [Complex<T>; 2]) -> [Complex<T>; 2] {
    let a = Complex::new(n[0], -n[1]);
    let b = Complex::new(n[0], n[1]);
    [v[0] * n[2] + v[1] * a, v[0] * b - v[1] * n[2]]
}

/// Product rule on the unit sphere: Gauss–Legendre in cos(theta) times the
/// trapezoid rule in phi. Returns (points, weights); exact for harmonics of
/// total degree below min(2 n_theta, n_phi).
pub fn sphere_rule<T: Real>(n_theta: usize, n_phi: usize) -> (Vec<[T; 3]>, Vec<T>) {
    let (ct, wt) = gauss_legendre::<T>(n_theta);
    let dphi = T::lit(2.0) * T::PI() / T::from_usize_lossy(n_phi);
    let mut pts = Vec::with_capacity(n_theta * n_phi);
    let mut wts = Vec::with_capacity(n_theta * n_phi);
    for (c, w) in ct.iter().zip(&wt) {
        let s = (T::one() - *c * *c).sqrt();
        for k in 0..n_phi {
            let phi = dphi * T::from_usize_lossy(k);
            let (sp, cp) = phi.sin_cos();
            pts.push([s * cp, s * sp, *c]);
            wts.push(*w * dphi);
        }
    }
    (pts, wts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    type C = Complex<f64>;

    fn close(a: C, b: C, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn low_degree_values() {
        let p = [0.3, -0.5, 0.2];
        let y00 = spherical_harmonic(0, 0, p).unwrap();
        assert!(close(y00, C::new(1.0 / (4.0 * PI).sqrt(), 0.0), 1e-15));
        let y10 = spherical_harmonic(1, 0, [0.0, 0.0, 1.0]).unwrap();
        assert!(close(y10, C::new((3.0 / (4.0 * PI)).sqrt(), 0.0), 1e-15));

        // Y_2^1 = -sqrt(15/(8 pi)) sin cos e^{i phi} with the Condon–Shortley sign.
        let (th, ph) = (0.7f64, 2.1f64);
        let pt = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
        let expected = C::from_polar(-(15.0 / (8.0 * PI)).sqrt() * th.sin() * th.cos(), ph);
        assert!(close(spherical_harmonic(2, 1, pt).unwrap(), expected, 1e-14));
        let conj_rel = -spherical_harmonic(2, 1, pt).unwrap().conj();
        assert!(close(spherical_harmonic(2, -1, pt).unwrap(), conj_rel, 1e-14));
        assert!(spherical_harmonic(2, 3, pt).is_err());
    }

    #[test]
    fn harmonic_normalization_by_quadrature() {
        let (pts, w) = sphere_rule::<f64>(10, 20);
        let s: f64 = pts
            .iter()
            .zip(&w)
            .map(|(p, w)| w * spherical_harmonic(2, 1, *p).unwrap().norm_sqr())
            .sum();
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn harmonics_orthonormal() {
        let nmax = 6;
        let (pts, w) = sphere_rule::<f64>(10, 20);
        let tables: Vec<_> = pts.iter().map(|p| harmonics_up_to(nmax, *p)).collect();
        let count = (nmax + 1) * (nmax + 1);
        for a in 0..count {
            for b in 0..count {
                let g: C = tables.iter().zip(&w).map(|(t, w)| t[a] * t[b].conj() * *w).sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!(close(g, C::new(expected, 0.0), 1e-12), "{a} {b} {g}");
            }
        }
    }

    #[test]
    fn real_harmonics_match_complex() {
        let nmax = 7;
        let mut re = vec![0.0; 64];
        for p in [[0.3, -0.5, 0.2], [0.0, 0.0, -1.0], [1.0, 2.0, 0.5]] {
            RealHarmonics::new(nmax).eval_into(p, &mut re);
            let cx = harmonics_up_to(nmax, p);
            for n in 0..=nmax {
                for l in 0..=n as i64 {
                    let y = cx[harmonic_index(n, l)];
                    let c = re[harmonic_index(n, l)];
                    let s = if l > 0 { re[harmonic_index(n, -l)] } else { 0.0 };
                    assert!(close(y, C::new(c, s), 1e-14), "n={n} l={l}");
                }
            }
        }
    }

    #[test]
    fn first_spinor_is_constant() {
        let label = SpinorLabel::new(HalfInt::half_odd(0), 1, Branch::Minus).unwrap();
        let v = spinor(label, [0.1, 0.9, -0.3]).unwrap();
        assert!(close(v[0], C::new(1.0 / (4.0 * PI).sqrt(), 0.0), 1e-15));
        assert!(close(v[1], C::new(0.0, 0.0), 1e-15));
    }

    #[test]
    fn label_validation() {
        let j = HalfInt::half_odd(1);
        assert!(SpinorLabel::new(j, 5, Branch::Plus).is_err());
        assert!(SpinorLabel::new(j, 2, Branch::Plus).is_err());
        assert!(SpinorLabel::new(HalfInt::new(2).unwrap(), 1, Branch::Plus).is_err());
        assert_eq!(spinor_labels(7).len(), 2 * (2 + 4 + 6 + 8));
    }

    #[test]
    fn spinors_orthonormal_up_to_seven_halves() {
        let labels = spinor_labels(7);
        let (pts, w) = sphere_rule::<f64>(12, 24);
        let vals: Vec<Vec<[C; 2]>> = pts
            .iter()
            .map(|p| {
                let t = harmonics_up_to(5, *p);
                labels.iter().map(|l| spinor_from_harmonics(*l, &t)).collect()
            })
            .collect();
        for a in 0..labels.len() {
            for b in 0..labels.len() {
                let g: C = vals
                    .iter()
                    .zip(&w)
                    .map(|(v, w)| (v[a][0] * v[b][0].conj() + v[a][1] * v[b][1].conj()) * *w)
                    .sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!(close(g, C::new(expected, 0.0), 1e-10), "{:?} {:?} {g}", labels[a], labels[b]);
            }
        }
    }

    #[test]
    fn swap_identity_at_nodes() {
        let (pts, _) = sphere_rule::<f64>(12, 24);
        for p in &pts {
            let t = harmonics_up_to(5, *p);
            for label in spinor_labels(7) {
                let lhs = sigma_dot(*p, spinor_from_harmonics(label, &t));
                let rhs = spinor_from_harmonics(label.swapped(), &t);
                assert!(close(lhs[0], rhs[0], 1e-10) && close(lhs[1], rhs[1], 1e-10), "{label:?}");
            }
        }
    }

    #[test]
    fn single_precision_smoke() {
        let label = SpinorLabel::new(HalfInt::half_odd(1), -1, Branch::Plus).unwrap();
        let p = [0.2f32, 0.4, 0.8];
        let lhs = sigma_dot(unit(p), spinor(label, p).unwrap());
        let rhs = spinor(label.swapped(), p).unwrap();
        assert!((lhs[0] - rhs[0]).norm() < 1e-5 && (lhs[1] - rhs[1]).norm() < 1e-5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn direction() -> impl Strategy<Value = [f64; 3]> {
            (0.0f64..PI, 0.0f64..2.0 * PI).prop_map(|(t, p)| [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()])
        }

        proptest! {
            #[test]
            fn swap_identity(pt in direction(), j in 0u32..5, mu_idx in 0u32..10, plus in any::<bool>()) {
                let j2 = 2 * j + 1;
                let mu2 = -(j2 as i32) + 2 * (mu_idx % (j2 + 1)) as i32;
                let branch = if plus { Branch::Plus } else { Branch::Minus };
                let label = SpinorLabel::new(HalfInt::new(j2).unwrap(), mu2, branch).unwrap();
                let lhs = sigma_dot(pt, spinor(label, pt).unwrap());
                let rhs = spinor(label.swapped(), pt).unwrap();
                prop_assert!(close(lhs[0], rhs[0], 1e-10) && close(lhs[1], rhs[1], 1e-10));
            }

            #[test]
            fn unsold_sum(pt in direction(), j in 0u32..5, plus in any::<bool>()) {
                // sum over mu of |psi^mu|^2 = (2j+1)/(4 pi)
                let j2 = 2 * j + 1;
                let branch = if plus { Branch::Plus } else { Branch::Minus };
                let s: f64 = (-(j2 as i32)..=j2 as i32).step_by(2)
                    .map(|mu2| {
                        let v = spinor(SpinorLabel::new(HalfInt::new(j2).unwrap(), mu2, branch).unwrap(), pt).unwrap();
                        v[0].norm_sqr() + v[1].norm_sqr()
                    })
                    .sum();
                prop_assert!((s - (j2 as f64 + 1.0) / (4.0 * PI)).abs() < 1e-12);
            }
        }
    }
}
