//! The Rayleigh functional R(u) = <S K_m S u, u> / ||u||^2 with S = sigma.nu,
//! its maximum over the Hardy space range(P+), and the comparison of that
//! maximum with the first-order coefficient L* of the first eigenvalue.

use faer::{c64, Mat, Side};

use crate::bie_spectrum::{first_on_grid, BieConfig, BieEigenpair};
use crate::error::{domain, Error, Result};
use crate::halfint_bessel::HalfInt;
use crate::hardy::{vec_norm, ProjectionPair};
use crate::layerops::{BoundaryOperator, LayerOperators, SpectralParams};
use crate::sphspinor::{Branch, SpinorLabel};
use crate::surface::SpinorBoundaryField;

/// S K_m S. K_m does not depend on m, so it is assembled at lambda = m = 0.
pub fn rayleigh_operator(ops: &LayerOperators) -> BoundaryOperator {
    let k = ops.assemble_k(&SpectralParams { lambda: 0.0, mass: 0.0 });
    let s = ops.sigma_nu();
    let mut op = s.mul(&k).mul(&s);
    op.kind = "S K_m S".into();
    op
}

/// R(u) for basis coefficients; the imaginary part is returned for auditing.
pub fn rayleigh_quotient(op: &BoundaryOperator, u: &[c64]) -> Result<(f64, f64)> {
    let n2: f64 = u.iter().map(|x| x.norm_sqr()).sum();
    if n2 == 0.0 {
        return domain("Rayleigh quotient of the zero field");
    }
    let au = op.apply(u);
    let num: c64 = au.iter().zip(u).map(|(a, b)| a * b.conj()).sum();
    Ok((num.re / n2, num.im / n2))
}

/// R(u) for a field sampled at the surface nodes.
pub fn rayleigh_value(ops: &LayerOperators, u: &SpinorBoundaryField) -> Result<f64> {
    u.check_len(&ops.surface)?;
    Ok(rayleigh_quotient(&rayleigh_operator(ops), &ops.analyze(u))?.0)
}

#[derive(Clone, Debug)]
pub struct RayleighResult {
    pub r_omega: f64,
    pub maximizer_coeffs: Vec<c64>,
    pub maximizer: SpinorBoundaryField,
    /// ||(P+)* u - (1/R) S K S u|| / ||u||.
    pub el_residual: f64,
    /// Weight of the maximizer on the j = 1/2 modes with orbital degree 1,
    /// the preimages under S of the constant spinors.
    pub excluded_mode_overlap: f64,
    /// ||P- u|| / ||u||.
    pub p_minus_fraction: f64,
    /// Top eigenvalue of S K S without the Hardy constraint.
    pub unconstrained_max: f64,
    /// 1/mu for the positive eigenvalues mu of the reduced operator, ascending:
    /// the discrete counterpart of the set of L with P* u = L S K S u.
    pub pencil: Vec<f64>,
}

/// Maximize R over range(P+) as the top eigenvalue of the reduced Hermitian operator.
pub fn rayleigh_max(ops: &LayerOperators, proj: &ProjectionPair) -> Result<RayleighResult> {
    let q = &proj.range_basis_plus;
    if q.ncols() == 0 {
        return Err(Error::Rank("empty Hardy basis".into()));
    }
    let op = rayleigh_operator(ops);
    let herm = hermitian(&op.matrix);
    let reduced = hermitian(&(q.adjoint() * &herm * q));
    let eig = reduced.self_adjoint_eigen(Side::Lower).map_err(|e| Error::LinAlg(format!("{e:?}")))?;
    let vals: Vec<f64> = eig.S().column_vector().iter().map(|x| x.re).collect();
    let top = vals.len() - 1;
    let r_omega = vals[top];
    let y: Vec<c64> = (0..reduced.nrows()).map(|i| eig.U()[(i, top)]).collect();
    let u: Vec<c64> = (0..q.nrows()).map(|i| (0..q.ncols()).map(|j| q[(i, j)] * y[j]).sum()).collect();

    let pu = proj.p_plus_adj.apply(&u);
    let au = op.apply(&u);
    let el: Vec<c64> = pu.iter().zip(&au).map(|(p, a)| p - a / r_omega).collect();
    let nu = vec_norm(&u);
    let el_residual = vec_norm(&el) / nu;

    let excluded: f64 = [-1, 1]
        .iter()
        .filter_map(|&mu2| SpinorLabel::new(HalfInt::half_odd(0), mu2, Branch::Plus).ok())
        .filter_map(|l| ops.basis.index_of(l))
        .map(|a| u[a].norm_sqr())
        .sum::<f64>()
        .sqrt()
        / nu;

    let full = herm.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::LinAlg(format!("{e:?}")))?;
    let mut pencil: Vec<f64> = vals.iter().filter(|&&v| v > 0.0).map(|v| 1.0 / v).collect();
    pencil.sort_by(f64::total_cmp);
    Ok(RayleighResult {
        r_omega,
        maximizer: ops.synthesize(&u),
        el_residual,
        excluded_mode_overlap: excluded,
        p_minus_fraction: proj.minus_fraction(&u),
        unconstrained_max: full.last().copied().unwrap_or(f64::NAN),
        pencil,
        maximizer_coeffs: u,
    })
}

fn hermitian(m: &Mat<c64>) -> Mat<c64> {
    Mat::<c64>::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

#[derive(Clone, Debug)]
pub struct LstarComparison {
    pub tau_probe: f64,
    pub lambda: f64,
    /// L(tau_probe) = (lambda - m) e^-tau.
    pub l_value: f64,
    pub r_omega: f64,
    /// L(tau_probe) * R_Omega, at least 1 - delta when the inequality holds.
    pub product: f64,
    pub delta: f64,
    pub holds: bool,
    pub pair: BieEigenpair,
}

/// Compare L(tau_probe) from the boundary solver with 1/R_Omega.
///
/// The low eigenvalues at very negative tau sit just above m, at roughly
/// m + e^tau L with L ranging over the reduced pencil, so the lowest one is
/// searched on a grid from m up to a few multiples of e^tau / R_Omega.
pub fn compare_lstar(ops: &LayerOperators, cfg: &BieConfig, tau_probe: f64, rayleigh: &RayleighResult, delta: f64) -> Result<LstarComparison> {
    let m = cfg.mass;
    let reach = 8.0 * tau_probe.exp() / rayleigh.r_omega;
    let count = 48;
    let grid: Vec<f64> = (1..=count).map(|k| m + reach * k as f64 / count as f64).collect();
    let pair = first_on_grid(ops, cfg, tau_probe, &grid)?;
    let l_value = (pair.lambda - m) * (-tau_probe).exp();
    let product = l_value * rayleigh.r_omega;
    Ok(LstarComparison { tau_probe, lambda: pair.lambda, l_value, r_omega: rayleigh.r_omega, product, delta, holds: product >= 1.0 - delta, pair })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardy::{build_projections, ProjectionPair};
    use crate::surface::make_sphere;

    fn label(j2: u32, mu2: i32, branch: Branch) -> SpinorLabel {
        SpinorLabel::new(HalfInt::new(j2).unwrap(), mu2, branch).unwrap()
    }

    #[test]
    fn sphere_mode_values() {
        let ops = LayerOperators::new(&make_sphere(1.0, 16, 32).unwrap()).unwrap();
        let op = rayleigh_operator(&ops);
        // u = psi_0: S u = psi_1 and K psi_1 = psi_1 / 3.
        let a = ops.basis.index_of(label(1, 1, Branch::Minus)).unwrap();
        let (r, im) = rayleigh_quotient(&op, &ops.unit_vector(a)).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-10 && im.abs() < 1e-12);
        // S u = psi_0: d_0 = 1.
        let b = ops.basis.index_of(label(1, 1, Branch::Plus)).unwrap();
        assert!((rayleigh_quotient(&op, &ops.unit_vector(b)).unwrap().0 - 1.0).abs() < 1e-10);
        // Homogeneity.
        let mut u = ops.unit_vector(a);
        u[b] = c64::new(0.3, -0.2);
        let r1 = rayleigh_quotient(&op, &u).unwrap().0;
        let scaled: Vec<c64> = u.iter().map(|x| x * c64::new(-2.5, 1.0)).collect();
        assert!((rayleigh_quotient(&op, &scaled).unwrap().0 - r1).abs() < 1e-14);
        assert!(rayleigh_quotient(&op, &vec![c64::new(0.0, 0.0); ops.dim()]).is_err());
        // Field entry point agrees with the coefficient form.
        let field = ops.synthesize(&u);
        assert!((rayleigh_value(&ops, &field).unwrap() - r1).abs() < 1e-12);
    }

    #[test]
    fn sphere_maximum_excludes_constant_preimage() {
        let ops = LayerOperators::new(&make_sphere(2.0, 12, 24).unwrap()).unwrap();
        let proj = build_projections(&ops).unwrap();
        let res = rayleigh_max(&ops, &proj).unwrap();
        assert!((res.r_omega - 2.0 / 3.0).abs() < 1e-8, "{}", res.r_omega);
        assert!((res.unconstrained_max - 2.0).abs() < 1e-8);
        assert!(res.excluded_mode_overlap < 1e-8 && res.p_minus_fraction < 1e-8);
        assert!(res.el_residual < 1e-8, "{}", res.el_residual);
        assert!((res.pencil[0] - 1.5).abs() < 1e-8);
    }

    mod props {
        use super::*;
        use crate::surface::make_ellipsoid;
        use proptest::prelude::*;
        use std::sync::OnceLock;

        fn fixture() -> &'static (LayerOperators, ProjectionPair, RayleighResult) {
            static CELL: OnceLock<(LayerOperators, ProjectionPair, RayleighResult)> = OnceLock::new();
            CELL.get_or_init(|| {
                let ops = LayerOperators::new(&make_ellipsoid(1.3, 1.0, 0.8, 10, 20).unwrap()).unwrap();
                let proj = build_projections(&ops).unwrap();
                let res = rayleigh_max(&ops, &proj).unwrap();
                (ops, proj, res)
            })
        }

        proptest! {
            #[test]
            fn hardy_fields_stay_below_the_maximum(seed in prop::collection::vec(-1.0f64..1.0, 16)) {
                let (ops, proj, res) = fixture();
                let q = &proj.range_basis_plus;
                let u: Vec<c64> = (0..q.nrows())
                    .map(|i| (0..q.ncols()).map(|j| q[(i, j)] * c64::new(seed[j % 16], seed[(3 * j + 5) % 16])).sum())
                    .collect();
                prop_assume!(vec_norm(&u) > 1e-8);
                let (r, _) = rayleigh_quotient(&rayleigh_operator(ops), &u).unwrap();
                prop_assert!(res.r_omega > 0.0);
                prop_assert!(r <= res.r_omega + 1e-10, "{r} > {}", res.r_omega);
                prop_assert!(res.r_omega <= res.unconstrained_max + 1e-10);
            }
        }
    }
}
