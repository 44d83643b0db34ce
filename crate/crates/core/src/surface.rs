//! Quadrature representations of closed star-shaped surfaces.
//!
//! Every surface here is parametrized over the unit sphere by the inverse of
//! its Gauss map, X: S^2 -> boundary with outward normal nu(X(n)) = n. For a
//! sphere X(n) = R n; for the ellipsoid with semi-axes D = diag(a, b, c) it is
//! X(n) = D^2 n / |D n|, whose area element relative to S^2 is the inverse
//! Gauss curvature (abc)^2 / |D n|^4. Nodes come from a Gauss–Legendre (in
//! cos theta) times trapezoid (in phi) rule on the parameter sphere, so no
//! node sits on a pole.

use faer::c64;

use crate::error::{domain, Result};
use crate::sphspinor::{sigma_dot, sphere_rule};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Sphere { radius: f64 },
    Ellipsoid { a: f64, b: f64, c: f64 },
}

impl Shape {
    fn axes(&self) -> [f64; 3] {
        match *self {
            Shape::Sphere { radius } => [radius; 3],
            Shape::Ellipsoid { a, b, c } => [a, b, c],
        }
    }

    /// Boundary point with outward normal `n` (unit).
    pub fn point(&self, n: [f64; 3]) -> [f64; 3] {
        let d = self.axes();
        let dn = norm3([d[0] * n[0], d[1] * n[1], d[2] * n[2]]);
        [d[0] * d[0] * n[0] / dn, d[1] * d[1] * n[1] / dn, d[2] * d[2] * n[2] / dn]
    }

    /// Area element of the boundary relative to the unit sphere at normal `n`.
    pub fn jacobian(&self, n: [f64; 3]) -> f64 {
        let d = self.axes();
        let dn2 = (d[0] * n[0]).powi(2) + (d[1] * n[1]).powi(2) + (d[2] * n[2]).powi(2);
        let abc = d[0] * d[1] * d[2];
        abc * abc / (dn2 * dn2)
    }

    pub fn volume(&self) -> f64 {
        let d = self.axes();
        4.0 / 3.0 * std::f64::consts::PI * d[0] * d[1] * d[2]
    }

    /// Closed-form area where one exists.
    pub fn area(&self) -> Option<f64> {
        match *self {
            Shape::Sphere { radius } => Some(4.0 * std::f64::consts::PI * radius * radius),
            Shape::Ellipsoid { a, b, c } if a == b && b == c => Some(4.0 * std::f64::consts::PI * a * a),
            Shape::Ellipsoid { .. } => None,
        }
    }

    /// Same shape uniformly scaled by `s`.
    pub fn scaled(&self, s: f64) -> Shape {
        match *self {
            Shape::Sphere { radius } => Shape::Sphere { radius: radius * s },
            Shape::Ellipsoid { a, b, c } => Shape::Ellipsoid { a: a * s, b: b * s, c: c * s },
        }
    }

    /// Radius of the ball with the same volume.
    pub fn equivalent_radius(&self) -> f64 {
        let d = self.axes();
        (d[0] * d[1] * d[2]).cbrt()
    }

    pub fn is_sphere(&self) -> bool {
        let d = self.axes();
        d[0] == d[1] && d[1] == d[2]
    }
}

/// Factor that rescales an (a, b, c) ellipsoid to the given volume.
pub fn equal_volume_scale(a: f64, b: f64, c: f64, volume: f64) -> f64 {
    (volume / Shape::Ellipsoid { a, b, c }.volume()).cbrt()
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[derive(Clone, Debug)]
pub struct QuadratureSurface {
    pub shape: Shape,
    pub n_theta: usize,
    pub n_phi: usize,
    pub nodes: Vec<[f64; 3]>,
    /// Outward unit normals; these are also the parameter points on S^2.
    pub normals: Vec<[f64; 3]>,
    /// Area weights, summing to the surface area.
    pub weights: Vec<f64>,
    /// sqrt of the area weight, a local mesh size.
    pub patch_metric: Vec<f64>,
    /// Weights of the parameter rule on S^2.
    pub sphere_weights: Vec<f64>,
    /// Area element relative to S^2 at each node.
    pub jacobian: Vec<f64>,
}

pub fn make_sphere(radius: f64, n_theta: usize, n_phi: usize) -> Result<QuadratureSurface> {
    if !(radius > 0.0) {
        return domain(format!("sphere radius must be positive, got {radius}"));
    }
    build(Shape::Sphere { radius }, n_theta, n_phi)
}

pub fn make_ellipsoid(a: f64, b: f64, c: f64, n_theta: usize, n_phi: usize) -> Result<QuadratureSurface> {
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return domain(format!("ellipsoid semi-axes must be positive, got ({a}, {b}, {c})"));
    }
    build(Shape::Ellipsoid { a, b, c }, n_theta, n_phi)
}

pub fn make_surface(shape: Shape, n_theta: usize, n_phi: usize) -> Result<QuadratureSurface> {
    match shape {
        Shape::Sphere { radius } => make_sphere(radius, n_theta, n_phi),
        Shape::Ellipsoid { a, b, c } => make_ellipsoid(a, b, c, n_theta, n_phi),
    }
}

fn build(shape: Shape, n_theta: usize, n_phi: usize) -> Result<QuadratureSurface> {
    if n_theta < 8 || n_phi < 16 {
        return domain(format!("resolution {n_theta}x{n_phi} below the 8x16 minimum"));
    }
    if !n_phi.is_multiple_of(2) || !n_theta.is_multiple_of(2) {
        return domain(format!("resolution {n_theta}x{n_phi} must be even in both directions"));
    }
    if n_phi < n_theta {
        return domain(format!("n_phi = {n_phi} must be at least n_theta = {n_theta}"));
    }
    let (dirs, sw) = sphere_rule::<f64>(n_theta, n_phi);
    let nodes: Vec<_> = dirs.iter().map(|n| shape.point(*n)).collect();
    let jacobian: Vec<_> = dirs.iter().map(|n| shape.jacobian(*n)).collect();
    let weights: Vec<f64> = sw.iter().zip(&jacobian).map(|(w, j)| w * j).collect();
    Ok(QuadratureSurface {
        shape,
        n_theta,
        n_phi,
        nodes,
        patch_metric: weights.iter().map(|w| w.sqrt()).collect(),
        normals: dirs,
        weights,
        sphere_weights: sw,
        jacobian,
    })
}

impl QuadratureSurface {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Divergence-theorem volume (1/3) sum w (x . nu).
    pub fn volume(&self) -> f64 {
        self.nodes
            .iter()
            .zip(&self.normals)
            .zip(&self.weights)
            .map(|((x, n), w)| w * dot3(*x, *n))
            .sum::<f64>()
            / 3.0
    }

    pub fn centroid(&self) -> [f64; 3] {
        let a = self.area();
        let mut c = [0.0; 3];
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            for k in 0..3 {
                c[k] += w * x[k] / a;
            }
        }
        c
    }

    /// Largest local mesh size.
    pub fn max_patch(&self) -> f64 {
        self.patch_metric.iter().cloned().fold(0.0, f64::max)
    }

    /// CSV dump with columns x,y,z,nx,ny,nz,w.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z,nx,ny,nz,w\n");
        for ((x, n), w) in self.nodes.iter().zip(&self.normals).zip(&self.weights) {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                x[0], x[1], x[2], n[0], n[1], n[2], w
            ));
        }
        out
    }
}

/// C^2-valued samples aligned with the nodes of a surface.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinorBoundaryField {
    pub values: Vec<[c64; 2]>,
}

impl SpinorBoundaryField {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![[c64::new(0.0, 0.0); 2]; n] }
    }

    pub fn check_len(&self, surface: &QuadratureSurface) -> Result<()> {
        if self.values.len() != surface.len() {
            return domain(format!("field has {} samples, surface {} nodes", self.values.len(), surface.len()));
        }
        Ok(())
    }

    /// Weighted inner product sum_i w_i u_i . conj(v_i).
    pub fn inner(&self, other: &Self, surface: &QuadratureSurface) -> c64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(&surface.weights)
            .map(|((u, v), w)| (u[0] * v[0].conj() + u[1] * v[1].conj()) * *w)
            .sum()
    }

    pub fn norm(&self, surface: &QuadratureSurface) -> f64 {
        self.inner(self, surface).re.max(0.0).sqrt()
    }

    /// Pointwise (sigma . nu) u.
    pub fn sigma_nu(&self, surface: &QuadratureSurface) -> Self {
        Self { values: self.values.iter().zip(&surface.normals).map(|(v, n)| sigma_dot(*n, *v)).collect() }
    }

    pub fn scale(&self, s: c64) -> Self {
        Self { values: self.values.iter().map(|v| [v[0] * s, v[1] * s]).collect() }
    }
}
