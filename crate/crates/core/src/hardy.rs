//! Skew projections P± = 1/2 ± i W_m (sigma.nu) onto the discrete Hardy
//! spaces, and diagnostics that separate balls from other domains.

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::layerops::{compress, norm2, BoundaryOperator, LayerOperators, SpectralParams};
use crate::surface::{dot3, norm3, sub3};

/// Default relative cut for the range of P+: P+ is a projection up to
/// discretization error, so its singular values cluster near 0 and at or above
/// 1 and any cut in between separates them.
pub const DEFAULT_RANK_TOLERANCE: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct ProjectionPair {
    pub p_plus: BoundaryOperator,
    pub p_minus: BoundaryOperator,
    pub p_plus_adj: BoundaryOperator,
    pub p_minus_adj: BoundaryOperator,
    /// Orthonormal columns spanning range(P+).
    pub range_basis_plus: Mat<c64>,
    pub rank_tolerance: f64,
    /// Singular values of P+ in decreasing order.
    pub singular_values: Vec<f64>,
    /// Smallest kept and largest dropped singular value.
    pub gap: (f64, f64),
}

/// Residuals of the projection algebra, measured on the resolved subspace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionResiduals {
    /// ||P+ + P- - I||, zero up to rounding of the two sums.
    pub sum: f64,
    /// ||P+ P-||.
    pub cross: f64,
    /// max of ||P+^2 - P+|| and ||P-^2 - P-||.
    pub idempotent: f64,
    /// ||(P+)* - 1/2 + i (sigma.nu) W_m||.
    pub adjoint: f64,
}

/// W_m does not depend on m, so it is assembled at lambda = m = 0.
pub fn build_projections(ops: &LayerOperators) -> Result<ProjectionPair> {
    build_projections_with(ops, DEFAULT_RANK_TOLERANCE)
}

pub fn build_projections_with(ops: &LayerOperators, rank_tolerance: f64) -> Result<ProjectionPair> {
    let w = ops.assemble_w(&SpectralParams::new(0.0, 0.0)?);
    let s = ops.sigma_nu();
    let iws = w.mul(&s).scale(c64::new(0.0, 1.0));
    let half = ops.identity().scale(c64::new(0.5, 0.0));
    let mut p_plus = half.add(&iws);
    let mut p_minus = half.sub(&iws);
    p_plus.kind = "P+".into();
    p_minus.kind = "P-".into();
    // (P±)* = 1/2 ∓ i (sigma.nu) W_m.
    let isw = s.mul(&w).scale(c64::new(0.0, 1.0));
    let mut p_plus_adj = half.sub(&isw);
    let mut p_minus_adj = half.add(&isw);
    p_plus_adj.kind = "P+*".into();
    p_minus_adj.kind = "P-*".into();

    let svd = p_plus.matrix.svd().map_err(|e| Error::LinAlg(format!("{e:?}")))?;
    let sv: Vec<f64> = svd.S().column_vector().iter().map(|x| x.re).collect();
    let top = sv.first().copied().unwrap_or(0.0);
    let cut = rank_tolerance * top;
    let rank = sv.iter().take_while(|&&x| x > cut).count();
    if rank == 0 {
        return Err(Error::Rank("P+ has empty numerical range".into()));
    }
    let gap = (sv[rank - 1], sv.get(rank).copied().unwrap_or(0.0));
    let u = svd.U();
    let range_basis_plus = Mat::<c64>::from_fn(u.nrows(), rank, |i, j| u[(i, j)]);
    Ok(ProjectionPair { p_plus, p_minus, p_plus_adj, p_minus_adj, range_basis_plus, rank_tolerance, singular_values: sv, gap })
}

impl ProjectionPair {
    pub fn rank(&self) -> usize {
        self.range_basis_plus.ncols()
    }

    pub fn residuals(&self, ops: &LayerOperators) -> ProjectionResiduals {
        let low = ops.resolved_indices();
        let on_low = |m: &Mat<c64>| norm2(&compress(m, &low));
        let id = ops.identity();
        let sum = self.p_plus.add(&self.p_minus).sub(&id).norm2();
        let cross = on_low(&self.p_plus.mul(&self.p_minus).matrix);
        let ip = on_low(&self.p_plus.mul(&self.p_plus).sub(&self.p_plus).matrix);
        let im = on_low(&self.p_minus.mul(&self.p_minus).sub(&self.p_minus).matrix);
        let adjoint = self.p_plus_adj.sub(&self.p_plus.adjoint()).norm2();
        ProjectionResiduals { sum, cross, idempotent: ip.max(im), adjoint }
    }

    /// ||P- u|| / ||u||.
    pub fn minus_fraction(&self, u: &[c64]) -> f64 {
        let pu = self.p_minus.apply(u);
        vec_norm(&pu) / vec_norm(u)
    }
}

pub(crate) fn vec_norm(v: &[c64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallDiagnostics {
    /// ||{W_m, sigma.nu}||_2.
    pub anticommutator: f64,
    /// ||P+ - (P+)*||_2.
    pub p_plus_skew: f64,
    /// max over node pairs of |nu(y) - nu(x) + 2((x - y).nu(x))(x - y)/|x - y|^2|.
    pub reflection: f64,
}

/// Diagnostics that all vanish exactly when the surface is a sphere.
pub fn ball_test(ops: &LayerOperators, proj: &ProjectionPair) -> BallDiagnostics {
    let w = ops.assemble_w(&SpectralParams { lambda: 0.0, mass: 0.0 });
    let s = ops.sigma_nu();
    let anticommutator = w.mul(&s).add(&s.mul(&w)).norm2();
    let p_plus_skew = proj.p_plus.sub(&proj.p_plus.adjoint()).norm2();
    BallDiagnostics { anticommutator, p_plus_skew, reflection: reflection_residual(ops, 7) }
}

/// Reflection identity over node pairs sampled with the given stride.
pub fn reflection_residual(ops: &LayerOperators, stride: usize) -> f64 {
    let surf = &ops.surface;
    let n = surf.len();
    let mut worst = 0.0f64;
    for i in (0..n).step_by(stride.max(1)) {
        for j in (0..n).step_by(stride.max(1)) {
            let d = sub3(surf.nodes[i], surf.nodes[j]);
            let r2 = dot3(d, d);
            if r2 == 0.0 {
                continue;
            }
            let t = 2.0 * dot3(d, surf.normals[i]) / r2;
            let v = [
                surf.normals[j][0] - surf.normals[i][0] + t * d[0],
                surf.normals[j][1] - surf.normals[i][1] + t * d[1],
                surf.normals[j][2] - surf.normals[i][2] + t * d[2],
            ];
            worst = worst.max(norm3(v));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphspinor::{Branch, SpinorLabel};
    use crate::surface::{make_ellipsoid, make_sphere};
    use crate::halfint_bessel::HalfInt;

    #[test]
    fn sphere_projections() {
        let ops = LayerOperators::new(&make_sphere(1.0, 16, 32).unwrap()).unwrap();
        let proj = build_projections(&ops).unwrap();
        let r = proj.residuals(&ops);
        assert!(r.sum <= 4.0 * f64::EPSILON);
        assert!(r.cross < 1e-10 && r.idempotent < 1e-10, "{r:?}");
        assert!(r.adjoint < 1e-12);
        // Half of the spinor modes are Hardy traces.
        assert_eq!(proj.rank(), ops.dim() / 2);
        assert!(proj.gap.0 > 0.9 && proj.gap.1 < 1e-8, "{:?}", proj.gap);
        // Constant spinors lie in range(P+).
        let label = SpinorLabel::new(HalfInt::half_odd(0), 1, Branch::Minus).unwrap();
        let a = ops.basis.index_of(label).unwrap();
        assert!(proj.minus_fraction(&ops.unit_vector(a)) < 1e-10);
        let diag = ball_test(&ops, &proj);
        assert!(diag.anticommutator < 1e-10 && diag.p_plus_skew < 1e-10 && diag.reflection < 1e-12, "{diag:?}");
    }

    #[test]
    fn ellipsoid_breaks_ball_identities() {
        let ops = LayerOperators::new(&make_ellipsoid(2.0, 1.0, 1.0, 16, 32).unwrap()).unwrap();
        let proj = build_projections(&ops).unwrap();
        let diag = ball_test(&ops, &proj);
        assert!(diag.anticommutator > 0.05 && diag.reflection > 0.1, "{diag:?}");
        let r = proj.residuals(&ops);
        assert!(r.cross < 5e-3 && r.idempotent < 5e-3, "{r:?}");
    }

    mod props {
        use super::*;
        use crate::surface::make_ellipsoid;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(8))]
            #[test]
            fn projections_split_the_identity(a in 0.7f64..1.6, c in 0.7f64..1.3) {
                let ops = LayerOperators::new(&make_ellipsoid(a, 1.0, c, 8, 16).unwrap()).unwrap();
                let proj = build_projections(&ops).unwrap();
                prop_assert!(proj.residuals(&ops).sum <= 1e-13);
                let q = &proj.range_basis_plus;
                prop_assert!(q.ncols() > 0 && q.ncols() < ops.dim());
            }
        }
    }
}
