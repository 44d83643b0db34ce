//! Eigenvalues of H_tau on general surfaces from the boundary system
//!     M1 u = (I - 2i W S + 2(lambda + m) e^tau K) u = 0,
//!     M2 u = (I - 2i S W - 2(lambda - m) e^-tau S K S) u = 0,
//! with S = sigma.nu.
//!
//! M1 alone is a poor detector away from tau = 0: for e^tau -> 0 it tends to
//! 2 P-, which vanishes on the Hardy space, and for e^tau -> infinity it is
//! dominated by K. Both equations are therefore stacked, each scaled by the
//! size of its lambda dependent term, and lambda is located where the
//! smallest singular value of the stacked matrix vanishes. The two blocks'
//! separate residuals are reported for the accepted vector.
//!
//! Each block is also conjugated by D = diag(sqrt(2j + 1)), i.e. the detector
//! looks at D M D with unknown D^-1 u. K has order -1, so without D the
//! top-band modes give singular values of order 1/L wherever K dominates
//! (large |tau|) and the dips at eigenvalues shrink with the band. D restores
//! an O(1) floor and does not move the null space; D commutes with S because
//! S preserves j.

use faer::{c64, Mat};

use crate::ball_spectrum::BallModel;
use crate::error::{domain, Error, Result};
use crate::halfint_bessel::{bessel_zero, HalfInt};
use crate::hardy::vec_norm;
use crate::layerops::{identity_residuals, volume_potential, LayerOperators, LayerPair, SpectralParams};
use crate::quadrature::gauss_legendre_on;
use crate::surface::{dot3, make_surface, SpinorBoundaryField};

/// Stacked and scaled boundary system at one (lambda, tau).
pub struct BoundarySystem {
    pub m1: Mat<c64>,
    pub m2: Mat<c64>,
    /// Scale factors 1 + |lambda + m| e^tau and 1 + |lambda - m| e^-tau.
    pub n1: f64,
    pub n2: f64,
    /// sqrt(2j + 1) per basis function.
    pub order: Vec<f64>,
}

impl BoundarySystem {
    pub fn new(ops: &LayerOperators, pair: &LayerPair, tau: f64) -> Self {
        let d = ops.dim();
        let (l, m) = (pair.params.lambda, pair.params.mass);
        let (k, w) = (&pair.k.matrix, &pair.w.matrix);
        let et = tau.exp();
        let a1 = 2.0 * (l + m) * et;
        let a2 = 2.0 * (l - m) / et;
        let swap = |a: usize| ops.basis.swap_index(a);
        // S is a permutation with S^2 = I: (W S)[i, j] = W[i, swap(j)], (S W)[i, j] = W[swap(i), j].
        let i2 = c64::new(0.0, 2.0);
        let m1 = Mat::<c64>::from_fn(d, d, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            c64::new(id, 0.0) - i2 * w[(i, swap(j))] + k[(i, j)] * a1
        });
        let m2 = Mat::<c64>::from_fn(d, d, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            c64::new(id, 0.0) - i2 * w[(swap(i), j)] - k[(swap(i), swap(j))] * a2
        });
        let order = ops.basis.labels.iter().map(|lb| ((lb.j.twice() + 1) as f64).sqrt()).collect();
        Self { m1, m2, n1: 1.0 + ((l + m) * et).abs(), n2: 1.0 + ((l - m) / et).abs(), order }
    }

    /// [D M1 D / n1; D M2 D / n2].
    pub fn stacked(&self) -> Mat<c64> {
        let d = self.m1.nrows();
        let o = &self.order;
        Mat::<c64>::from_fn(2 * d, d, |i, j| {
            if i < d {
                self.m1[(i, j)] * (o[i] * o[j] / self.n1)
            } else {
                self.m2[(i - d, j)] * (o[i - d] * o[j] / self.n2)
            }
        })
    }

    /// Coefficients u = D w of a null vector w of the stacked matrix, unit norm.
    pub fn unscale(&self, w: &[c64]) -> Vec<c64> {
        let u: Vec<c64> = w.iter().zip(&self.order).map(|(x, o)| x * o).collect();
        let n = vec_norm(&u);
        u.into_iter().map(|x| x / n).collect()
    }

    /// Scaled residuals (||M1 u|| / n1, ||M2 u|| / n2) / ||u||.
    pub fn residuals(&self, u: &[c64]) -> (f64, f64) {
        let apply = |m: &Mat<c64>| -> f64 {
            let v: Vec<c64> = (0..m.nrows()).map(|i| (0..u.len()).map(|j| m[(i, j)] * u[j]).sum()).collect();
            vec_norm(&v)
        };
        let nu = vec_norm(u);
        (apply(&self.m1) / (self.n1 * nu), apply(&self.m2) / (self.n2 * nu))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanPoint {
    pub lambda: f64,
    pub sigma_min: f64,
    pub sigma_next: f64,
}

/// Eigenvalue of H_tau found on a surface, with its boundary data.
#[derive(Clone, Debug)]
pub struct BieEigenpair {
    pub tau: f64,
    pub lambda: f64,
    /// Basis coefficients of u.
    pub coeffs: Vec<c64>,
    pub u: SpinorBoundaryField,
    /// v = i e^tau (sigma.nu) u.
    pub v: SpinorBoundaryField,
    pub sigma_min: f64,
    pub sigma_next: f64,
    pub m1_residual: f64,
    pub cross_residual: f64,
    pub tol: f64,
    /// Size of the bottom cluster of singular values: the values below tol up
    /// to the largest relative gap.
    pub multiplicity: usize,
}

/// Settings of the general-domain solver.
#[derive(Clone, Copy, Debug)]
pub struct BieConfig {
    pub mass: f64,
    /// Stopping width of the minimization in lambda.
    pub lambda_tol: f64,
    /// Detection threshold; `None` derives it from the layer identity residual.
    pub tol: Option<f64>,
    /// Bounds for the adaptive threshold.
    pub tol_floor: f64,
    pub tol_cap: f64,
}

impl BieConfig {
    pub fn new(mass: f64) -> Self {
        Self { mass, lambda_tol: 1e-8, tol: None, tol_floor: 1e-6, tol_cap: 0.1 }
    }
}

/// sqrt((z_{5/2,1} / R_equiv)^2 + m^2) with R_equiv the equal-volume radius.
pub fn default_lambda_max(ops: &LayerOperators, mass: f64) -> f64 {
    let r = ops.surface.shape.equivalent_radius();
    let z: f64 = bessel_zero(HalfInt::half_odd(2), 1).expect("tabulated zero");
    ((z / r).powi(2) + mass * mass).sqrt()
}

/// Singular values of the stacked system, smallest first, optionally with the right singular vector.
fn stacked_svd(ops: &LayerOperators, cfg: &BieConfig, tau: f64, lambda: f64, vector: bool) -> Result<(Vec<f64>, Option<Vec<c64>>, BoundarySystem)> {
    let pair = ops.assemble(&SpectralParams::new(lambda, cfg.mass)?);
    let sys = BoundarySystem::new(ops, &pair, tau);
    let st = sys.stacked();
    let linalg = |e| Error::LinAlg(format!("{e:?}"));
    if vector {
        let svd = st.thin_svd().map_err(linalg)?;
        let mut sv: Vec<f64> = svd.S().column_vector().iter().map(|x| x.re).collect();
        sv.reverse();
        let v = svd.V();
        let last = v.ncols() - 1;
        let w: Vec<c64> = (0..v.nrows()).map(|i| v[(i, last)]).collect();
        Ok((sv, Some(sys.unscale(&w)), sys))
    } else {
        let mut sv = st.singular_values().map_err(linalg)?;
        sv.reverse();
        Ok((sv, None, sys))
    }
}

/// Smallest two singular values of the stacked system over a lambda grid.
pub fn sigma_min_scan(ops: &LayerOperators, cfg: &BieConfig, tau: f64, grid: &[f64]) -> Result<Vec<ScanPoint>> {
    grid.iter()
        .map(|&lambda| {
            let (sv, _, _) = stacked_svd(ops, cfg, tau, lambda, false)?;
            Ok(ScanPoint { lambda, sigma_min: sv[0], sigma_next: sv.get(1).copied().unwrap_or(f64::INFINITY) })
        })
        .collect()
}

/// Brackets around the interior local minima of a scan.
pub fn scan_minima(scan: &[ScanPoint]) -> Vec<[f64; 2]> {
    scan.windows(3)
        .filter(|w| w[1].sigma_min < w[0].sigma_min && w[1].sigma_min <= w[2].sigma_min)
        .map(|w| [w[0].lambda, w[2].lambda])
        .collect()
}

/// Grid on (m, lambda_max) refined quadratically towards m, where eigenvalues
/// accumulate as tau -> -infinity.
pub fn default_grid(mass: f64, lambda_max: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| mass + (lambda_max - mass) * (k as f64 / count as f64).powi(2)).collect()
}

/// Brent minimization (golden section with parabolic steps) on [a, b].
pub(crate) fn minimize<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<(f64, f64)> {
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let xm = 0.5 * (a + b);
        let tol1 = xtol * 0.5 + 1e-15 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return Ok((x, fx));
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    Ok((x, fx))
}

/// Detection threshold at lambda: ten times the largest layer identity
/// residual, times the largest 2j + 1 on the resolved subspace (the most D
/// can amplify an error there), clamped to [tol_floor, tol_cap].
pub fn detection_tolerance(ops: &LayerOperators, cfg: &BieConfig, lambda: f64) -> Result<f64> {
    if let Some(t) = cfg.tol {
        return Ok(t);
    }
    let pair = ops.assemble(&SpectralParams::new(lambda, cfg.mass)?);
    let amp = ops.resolved_indices().iter().map(|&a| ops.basis.labels[a].j.twice() + 1).max().unwrap_or(1) as f64;
    Ok((10.0 * amp * identity_residuals(ops, &pair).max()).clamp(cfg.tol_floor, cfg.tol_cap))
}

/// Minimize the smallest singular value over the bracket and accept the
/// minimum when it is below the detection threshold.
pub fn refine_eigenvalue(ops: &LayerOperators, cfg: &BieConfig, tau: f64, bracket: [f64; 2]) -> Result<BieEigenpair> {
    if !(bracket[0] < bracket[1]) || !(bracket[0] > cfg.mass || bracket[1] < -cfg.mass) {
        return domain(format!("bracket {bracket:?} must be increasing and outside [-m, m] with m = {}", cfg.mass));
    }
    // sigma^2 is smooth at a simple crossing, which suits the parabolic steps.
    let (lambda, _) = minimize(|l| Ok(stacked_svd(ops, cfg, tau, l, false)?.0[0].powi(2)), bracket[0], bracket[1], cfg.lambda_tol)?;
    let (sv, u, sys) = stacked_svd(ops, cfg, tau, lambda, true)?;
    let coeffs = u.expect("vector requested");
    let tol = detection_tolerance(ops, cfg, lambda)?;
    if sv[0] >= tol {
        return Err(Error::NoEigenvalue(format!(
            "tau = {tau}: minimum sigma {:.3e} at lambda = {lambda:.10} is above tol {tol:.3e}",
            sv[0]
        )));
    }
    let (m1_residual, cross_residual) = sys.residuals(&coeffs);
    let field = ops.synthesize(&coeffs);
    let v = field.sigma_nu(&ops.surface).scale(c64::new(0.0, tau.exp()));
    Ok(BieEigenpair {
        tau,
        lambda,
        u: field,
        v,
        coeffs,
        sigma_min: sv[0],
        sigma_next: sv.get(1).copied().unwrap_or(f64::INFINITY),
        m1_residual,
        cross_residual,
        tol,
        multiplicity: cluster_size(&sv, tol),
    })
}

/// Lowest eigenvalue in (m, lambda_max): scan upwards and refine local minima in order.
pub fn first_eigenvalue(ops: &LayerOperators, cfg: &BieConfig, tau: f64, lambda_max: f64, count: usize) -> Result<BieEigenpair> {
    first_on_grid(ops, cfg, tau, &default_grid(cfg.mass, lambda_max, count))
}

/// Negative eigenvalue closest to -m in (-lambda_max, -m).
pub fn first_negative_eigenvalue(ops: &LayerOperators, cfg: &BieConfig, tau: f64, lambda_max: f64, count: usize) -> Result<BieEigenpair> {
    let grid: Vec<f64> = default_grid(cfg.mass, lambda_max, count).iter().map(|l| -l).collect();
    first_on_grid(ops, cfg, tau, &grid)
}

/// Walk a grid that starts at the spectral gap edge and moves outwards,
/// refining each local minimum until one is accepted.
pub fn first_on_grid(ops: &LayerOperators, cfg: &BieConfig, tau: f64, grid: &[f64]) -> Result<BieEigenpair> {
    let Some(&g0) = grid.first() else {
        return Err(Error::NoEigenvalue("empty grid".into()));
    };
    let edge = cfg.mass.copysign(g0);
    let sorted = |a: f64, b: f64| [a.min(b), a.max(b)];
    let mut seen: Vec<ScanPoint> = Vec::new();
    for &l in grid {
        seen.extend(sigma_min_scan(ops, cfg, tau, &[l])?);
        let n = seen.len();
        let bracket = if n >= 3 && seen[n - 2].sigma_min < seen[n - 3].sigma_min && seen[n - 2].sigma_min <= seen[n - 1].sigma_min {
            Some(sorted(seen[n - 3].lambda, seen[n - 1].lambda))
        } else if n == 2 && seen[0].sigma_min <= seen[1].sigma_min {
            // A minimum at the first grid point is bracketed by the gap edge.
            Some(sorted(edge + (seen[0].lambda - edge) * 1e-3, seen[1].lambda))
        } else {
            None
        };
        if let Some(b) = bracket {
            match refine_eigenvalue(ops, cfg, tau, b) {
                Ok(p) => return Ok(p),
                Err(Error::NoEigenvalue(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Err(Error::NoEigenvalue(format!("no eigenvalue between {g0} and {} at tau = {tau}", grid[grid.len() - 1])))
}

/// Every eigenvalue whose sigma_min dip is a local minimum of the scan over `grid`.
///
/// Dips closer together than the grid spacing merge into one; the caller picks
/// the spacing.
pub fn eigenvalues_in(ops: &LayerOperators, cfg: &BieConfig, tau: f64, grid: &[f64]) -> Result<Vec<BieEigenpair>> {
    let scan = sigma_min_scan(ops, cfg, tau, grid)?;
    let mut found = Vec::new();
    for bracket in scan_minima(&scan) {
        match refine_eigenvalue(ops, cfg, tau, bracket) {
            Ok(p) => found.push(p),
            Err(Error::NoEigenvalue(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(found)
}

/// Number of smallest singular values (ascending input) before the largest
/// ratio sv[k] / sv[k - 1] among the values below tol and the first above it.
pub fn cluster_size(sv: &[f64], tol: f64) -> usize {
    let below = sv.iter().take_while(|&&s| s < tol).count();
    if below <= 1 {
        return below;
    }
    let end = (below + 1).min(sv.len());
    (1..end)
        .max_by(|&a, &b| (sv[a] / sv[a - 1].max(f64::MIN_POSITIVE)).total_cmp(&(sv[b] / sv[b - 1].max(f64::MIN_POSITIVE))))
        .unwrap_or(below)
}

/// Result of a continuation in tau.
#[derive(Clone, Debug)]
pub struct CurveTrace {
    pub pairs: Vec<BieEigenpair>,
    /// Set when the curve was lost before the end of the grid.
    pub lost: Option<String>,
}

/// Follow an eigenvalue curve over an ordered tau grid.
///
/// Since L(tau) = (lambda - m) e^-tau decreases while lambda increases, a step
/// dt > 0 keeps lambda in [lambda_n, m + (lambda_n - m) e^dt], and a step
/// dt < 0 keeps it in [m + (lambda_n - m) e^dt, lambda_n]. That interval,
/// widened by a small margin for discretization error, is the next bracket.
pub fn trace_curve(ops: &LayerOperators, cfg: &BieConfig, taus: &[f64], seed: [f64; 2]) -> Result<CurveTrace> {
    let mut pairs = Vec::with_capacity(taus.len());
    let Some(&t0) = taus.first() else {
        return Ok(CurveTrace { pairs, lost: None });
    };
    if taus.windows(2).any(|w| w[1] <= w[0]) && taus.windows(2).any(|w| w[1] >= w[0]) {
        return domain("tau grid must be strictly monotone");
    }
    pairs.push(refine_eigenvalue(ops, cfg, t0, seed)?);
    for &t in &taus[1..] {
        let last = pairs.last().expect("seeded");
        let gap = last.lambda - cfg.mass;
        let other = cfg.mass + gap * (t - last.tau).exp();
        let (lo, hi) = (last.lambda.min(other), last.lambda.max(other));
        let margin = 1e-3 * gap.max(1e-3) + 0.05 * (hi - lo);
        let bracket = [(lo - margin).max(cfg.mass + 1e-12 * gap.max(1e-300)), hi + margin];
        match refine_eigenvalue(ops, cfg, t, bracket) {
            Ok(p) => pairs.push(p),
            Err(Error::NoEigenvalue(msg)) => return Ok(CurveTrace { pairs, lost: Some(msg) }),
            Err(e) => return Err(e),
        }
    }
    Ok(CurveTrace { pairs, lost: None })
}

/// Interior and boundary norms of a reconstructed eigenfunction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormReport {
    /// ||u||^2 on the boundary.
    pub boundary_u2: f64,
    /// ||u||^2 and ||v||^2 in the domain.
    pub u2: f64,
    pub v2: f64,
    /// e^tau ||u||^2_boundary.
    pub lhs: f64,
    /// (lambda - m) ||u||^2 - (lambda + m) ||v||^2.
    pub rhs: f64,
    pub relative_residual: f64,
    /// ||u||^2 / ||phi||^2 in the domain.
    pub u_fraction: f64,
    /// lambda' from e^tau ||u||^2_boundary / ||phi||^2.
    pub lambda_prime_boundary: f64,
    /// lambda' from ((lambda - m)||u||^2 - (lambda + m)||v||^2) / ||phi||^2.
    pub lambda_prime_volume: f64,
}

/// Reconstruct phi = Phi_lambda(i (alpha.nu) g) inside the domain and compare
/// its norms with the boundary data.
///
/// The volume rule is a cone rule x = t X(n) over the surface's own angular
/// nodes with `n_radial` Gauss points in t. The potential is evaluated with a
/// rule of twice the surface resolution at anchor radii that keep a distance
/// of two local mesh sizes from the boundary; along each ray, values at the
/// remaining radii are interpolated through the anchors and the boundary value
/// phi = g.
pub fn eigenfunction_norms(ops: &LayerOperators, pair: &BieEigenpair, model_mass: f64, n_radial: usize) -> Result<NormReport> {
    let surf = &ops.surface;
    let fine = make_surface(surf.shape, 2 * surf.n_theta, 2 * surf.n_phi)?;
    let u_fine = ops.synthesize_on(&pair.coeffs, &fine)?;
    let et = pair.tau.exp();
    let i = c64::new(0.0, 1.0);
    // i (alpha.nu) g with g = (u, i e^tau S u) is (-e^tau u, i S u).
    let su = u_fine.sigma_nu(&fine);
    let density: Vec<[c64; 4]> = u_fine
        .values
        .iter()
        .zip(&su.values)
        .map(|(u, s)| [u[0] * (-et), u[1] * (-et), s[0] * i, s[1] * i])
        .collect();

    let guard = 2.0 * fine.max_patch();
    let inradius = surf.nodes.iter().zip(&surf.normals).map(|(x, n)| dot3(*x, *n)).fold(f64::INFINITY, f64::min);
    let extent = surf.nodes.iter().map(|x| dot3(*x, *x).sqrt()).fold(0.0, f64::max);
    let t_anchor_max = 1.0 - 1.05 * guard / inradius * (extent / inradius);
    if t_anchor_max < 0.3 {
        return Err(Error::Accuracy(format!("surface too coarse for interior evaluation (anchor radius {t_anchor_max:.3})")));
    }
    let n_anchor = 10;
    // Chebyshev points on [0, t_anchor_max], clustered at the ends.
    let anchors: Vec<f64> = (0..n_anchor)
        .map(|k| 0.5 * t_anchor_max * (1.0 - (std::f64::consts::PI * (k as f64 + 0.5) / n_anchor as f64).cos()))
        .collect();
    let params = SpectralParams::new(pair.lambda, model_mass)?;
    let points: Vec<[f64; 3]> = surf
        .nodes
        .iter()
        .flat_map(|x| anchors.iter().map(move |t| [t * x[0], t * x[1], t * x[2]]))
        .collect();
    let values = volume_potential(&fine, &params, &density, &points)?;

    let (tq, tw) = gauss_legendre_on::<f64>(n_radial, 0.0, 1.0);
    let mut ts = anchors.clone();
    ts.push(1.0);
    let (mut u2, mut v2) = (0.0, 0.0);
    for (node, ((x, n), (sw, jac))) in surf.nodes.iter().zip(&surf.normals).zip(surf.sphere_weights.iter().zip(&surf.jacobian)).enumerate() {
        let cone = sw * jac * dot3(*x, *n);
        let mut samples: Vec<[c64; 4]> = values[node * n_anchor..(node + 1) * n_anchor].to_vec();
        let b = pair.u.values[node];
        let bv = pair.v.values[node];
        samples.push([b[0], b[1], bv[0], bv[1]]);
        for (t, w) in tq.iter().zip(&tw) {
            let phi = lagrange(&ts, &samples, *t);
            let dv = cone * t * t * w;
            u2 += dv * (phi[0].norm_sqr() + phi[1].norm_sqr());
            v2 += dv * (phi[2].norm_sqr() + phi[3].norm_sqr());
        }
    }
    let boundary_u2 = pair.u.norm(surf).powi(2);
    let (l, m) = (pair.lambda, model_mass);
    let lhs = et * boundary_u2;
    let rhs = (l - m) * u2 - (l + m) * v2;
    let phi2 = u2 + v2;
    Ok(NormReport {
        boundary_u2,
        u2,
        v2,
        lhs,
        rhs,
        relative_residual: (lhs - rhs).abs() / lhs.abs(),
        u_fraction: u2 / phi2,
        lambda_prime_boundary: lhs / phi2,
        lambda_prime_volume: rhs / phi2,
    })
}

fn lagrange(ts: &[f64], ys: &[[c64; 4]], t: f64) -> [c64; 4] {
    let mut out = [c64::new(0.0, 0.0); 4];
    for (k, (tk, yk)) in ts.iter().zip(ys).enumerate() {
        let mut w = 1.0;
        for (j, tj) in ts.iter().enumerate() {
            if j != k {
                w *= (t - tj) / (tk - tj);
            }
        }
        for c in 0..4 {
            out[c] += yk[c] * w;
        }
    }
    out
}

/// Ball with the volume of the surface, for comparisons with the exact solver.
pub fn equal_volume_ball(ops: &LayerOperators, mass: f64) -> Result<BallModel<f64>> {
    BallModel::new(ops.surface.shape.equivalent_radius(), mass)
}
