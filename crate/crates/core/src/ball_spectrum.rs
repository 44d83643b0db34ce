//! Exact eigenvalue curves of the Dirac operator on a ball.
//!
//! On the ball the boundary problem separates into channels (j, branch, k).
//! In channel (j, -, *) an eigenvalue at parameter tau is a root of
//! h(lambda) = e^tau with h = (b / (lambda + m)) J_{j+1}(bR) / J_j(bR) and
//! b = sqrt(lambda^2 - m^2); in channel (j, +, *) the quotient is inverted
//! and negated. Each h is increasing on each of its intervals, so every
//! channel carries one smooth increasing curve lambda(tau).
//!
//! Roots are located in the wavenumber b rather than in lambda. This keeps
//! lambda - m = b^2 / (m + sqrt(b^2 + m^2)) at full relative precision, which
//! matters when tau is very negative and lambda crowds against m.

use std::fmt;

use crate::error::{domain, Error, Result};
use crate::halfint_bessel::{bessel_j_half, ratio_derivative, ratio_unchecked, DirectZeros, HalfInt, ZeroSource};
use crate::quadrature::gauss_legendre_on;
use crate::real::Real;
use crate::sphspinor::Branch;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallModel<T> {
    pub radius: T,
    pub mass: T,
}

impl<T: Real> BallModel<T> {
    pub fn new(radius: T, mass: T) -> Result<Self> {
        if !(radius > T::zero()) || !(mass >= T::zero()) {
            return domain(format!("ball needs R > 0 and m >= 0, got R = {radius}, m = {mass}"));
        }
        Ok(Self { radius, mass })
    }
}

/// Identifies one eigenvalue curve. `k >= 0` are the intervals on the side of
/// the spectrum natural to the branch (positive for `-`), `k < 0` the others.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelIndex {
    pub j: HalfInt,
    pub branch: Branch,
    pub k: i32,
}

impl ChannelIndex {
    pub fn new(j: HalfInt, branch: Branch, k: i32) -> Result<Self> {
        if !j.is_half_odd() {
            return domain(format!("channel j = {j} must be a half-odd integer"));
        }
        Ok(Self { j, branch, k })
    }

    /// The lowest positive channel (1/2, -, 0).
    pub const fn ground() -> Self {
        Self { j: HalfInt::half_odd(0), branch: Branch::Minus, k: 0 }
    }

    /// Channel whose curve is lambda -> -lambda(-tau) of this one.
    pub fn mirrored(self) -> Self {
        Self { branch: self.branch.flip(), ..self }
    }

    /// Dimension of the eigenspace carried by this channel: 2j + 1.
    pub fn multiplicity(self) -> u32 {
        self.j.twice() + 1
    }

    /// Whether the eigenvalues of this channel are positive.
    fn positive_side(self) -> bool {
        (self.branch == Branch::Minus) == (self.k >= 0)
    }
}

impl fmt::Display for ChannelIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.j, self.branch.symbol(), self.k)
    }
}

/// Open interval (lo, hi).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Interval<T> {
    pub fn contains(&self, x: T) -> bool {
        x > self.lo && x < self.hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenCurveSample<T> {
    pub tau: T,
    pub lambda: T,
    pub channel: ChannelIndex,
    /// |h(lambda) - e^tau| / e^tau.
    pub residual: T,
    pub multiplicity: u32,
    /// |lambda| - m, computed without cancellation.
    pub excess: T,
    /// Wavenumber sqrt(lambda^2 - m^2).
    pub wavenumber: T,
    /// Set when |tau| exceeds the exponent range and lambda is the interval endpoint.
    pub limit: bool,
}

fn energy<T: Real>(b: T, m: T) -> T {
    (b * b + m * m).sqrt()
}

/// Wavenumber interval (in b, not bR) for a channel, ordered ascending.
fn wavenumber_interval<T: Real>(zs: &dyn ZeroSource<T>, ch: ChannelIndex, model: &BallModel<T>) -> Result<(T, T)> {
    let p = ch.j;
    let q = p.succ();
    let r = model.radius;
    let k = ch.k;
    let (lo, hi) = if k == 0 {
        (T::zero(), zs.zero(p, 1)?)
    } else if k > 0 {
        (zs.zero(q, k as u32)?, zs.zero(p, k as u32 + 1)?)
    } else {
        let a = k.unsigned_abs();
        (zs.zero(p, a)?, zs.zero(q, a)?)
    };
    Ok((lo / r, hi / r))
}

/// The interval I^{branch}_{j,k} of eigenvalues of a channel.
pub fn interval<T: Real>(channel: ChannelIndex, model: &BallModel<T>) -> Result<Interval<T>> {
    interval_with(&DirectZeros, channel, model)
}

pub fn interval_with<T: Real>(zs: &dyn ZeroSource<T>, channel: ChannelIndex, model: &BallModel<T>) -> Result<Interval<T>> {
    ChannelIndex::new(channel.j, channel.branch, channel.k)?;
    let (blo, bhi) = wavenumber_interval(zs, channel, model)?;
    let m = model.mass;
    let (elo, ehi) = (energy(blo, m), energy(bhi, m));
    Ok(if channel.positive_side() {
        Interval { lo: elo, hi: ehi }
    } else {
        Interval { lo: -ehi, hi: -elo }
    })
}

/// log h and d(log h)/db at wavenumber b.
fn log_h<T: Real>(ch: ChannelIndex, model: &BallModel<T>, b: T) -> (T, T) {
    let n = (ch.j.twice() / 2) as usize;
    let (m, r) = (model.mass, model.radius);
    let e = energy(b, m);
    let x = b * r;
    let rho = ratio_unchecked(n, x);
    let drho = ratio_derivative(n, x, rho);
    // |A| = b / (E + m) on the positive side and (E + m) / b on the negative side.
    let (mut log_a, mut dlog_a) = (b.ln() - (e + m).ln(), T::one() / b - b / (e * (e + m)));
    if !ch.positive_side() {
        log_a = -log_a;
        dlog_a = -dlog_a;
    }
    let log_rho = rho.abs().ln();
    let dlog_rho = r * drho / rho;
    match ch.branch {
        Branch::Minus => (log_a + log_rho, dlog_a + dlog_rho),
        Branch::Plus => (log_a - log_rho, dlog_a - dlog_rho),
    }
}

/// h(lambda) for a channel; lambda must lie in the channel's interval.
pub fn h_of_lambda<T: Real>(channel: ChannelIndex, model: &BallModel<T>, lambda: T) -> Result<T> {
    let iv = interval(channel, model)?;
    let m = model.mass;
    if channel.k == 0 {
        // Continuity at the edge |lambda| = m.
        if channel.branch == Branch::Minus && lambda == m {
            return Ok(T::zero());
        }
        if channel.branch == Branch::Plus && lambda == -m {
            return Ok(T::infinity());
        }
    }
    if !iv.contains(lambda) {
        return domain(format!("lambda = {lambda} outside ({}, {}) of channel {channel}", iv.lo, iv.hi));
    }
    let b = ((lambda - m) * (lambda + m)).sqrt();
    let n = (channel.j.twice() / 2) as usize;
    let rho = ratio_unchecked(n, b * model.radius);
    let a = b / (lambda + m);
    Ok(match channel.branch {
        Branch::Minus => a * rho,
        Branch::Plus => -a / rho,
    })
}

fn tau_cap<T: Real>() -> T {
    T::lit(700.0).min(T::max_value().ln() - T::lit(10.0))
}

/// Solve h(lambda) = e^tau on the channel's interval.
pub fn eigenvalue_at<T: Real>(channel: ChannelIndex, model: &BallModel<T>, tau: T) -> Result<EigenCurveSample<T>> {
    eigenvalue_at_with(&DirectZeros, channel, model, tau)
}

pub fn eigenvalue_at_with<T: Real>(
    zs: &dyn ZeroSource<T>,
    channel: ChannelIndex,
    model: &BallModel<T>,
    tau: T,
) -> Result<EigenCurveSample<T>> {
    ChannelIndex::new(channel.j, channel.branch, channel.k)?;
    if tau.is_nan() {
        return domain("tau is NaN");
    }
    let (blo, bhi) = wavenumber_interval(zs, channel, model)?;
    let m = model.mass;
    let positive = channel.positive_side();
    let sign = if positive { T::one() } else { -T::one() };
    let sample = |b: T, residual: T, limit: bool| {
        let e = energy(b, m);
        EigenCurveSample {
            tau,
            lambda: sign * e,
            channel,
            residual,
            multiplicity: channel.multiplicity(),
            excess: b * b / (e + m),
            wavenumber: b,
            limit,
        }
    };

    // h increases with lambda; lambda moves with b on the positive side only.
    let cap = tau_cap::<T>();
    if tau.abs() > cap {
        let at_upper_lambda = tau > T::zero();
        let b = if at_upper_lambda == positive { bhi } else { blo };
        return Ok(sample(b, T::zero(), true));
    }
    let g = |b: T| {
        let (v, d) = log_h(channel, model, b);
        (v - tau, d)
    };
    // g is increasing in b on the positive side, decreasing otherwise.
    let below = |v: T| (v < T::zero()) == positive;

    let eps = T::epsilon();
    let b = if blo == T::zero() {
        // Geometric bisection in t = ln b.
        let mut t_hi = bhi.ln();
        let mut t_lo = T::min_positive_value().ln() + T::one();
        if !below(g(t_lo.exp()).0) {
            return Ok(sample(blo, T::zero(), true));
        }
        for _ in 0..400 {
            let t = (t_lo + t_hi) / T::lit(2.0);
            if below(g(t.exp()).0) {
                t_lo = t;
            } else {
                t_hi = t;
            }
            if t_hi - t_lo <= T::lit(4.0) * eps {
                break;
            }
        }
        ((t_lo + t_hi) / T::lit(2.0)).exp()
    } else {
        let (mut lo, mut hi) = (blo, bhi);
        for _ in 0..400 {
            let mid = (lo + hi) / T::lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            if below(g(mid).0) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::lit(4.0) * eps * hi {
                break;
            }
        }
        (lo + hi) / T::lit(2.0)
    };
    // Newton polish, accepted only while the residual shrinks.
    let mut best = b;
    let (mut gv, mut gd) = g(best);
    for _ in 0..3 {
        if gv == T::zero() || gd == T::zero() {
            break;
        }
        let cand = best - gv / gd;
        if !(cand > blo && cand < bhi) {
            break;
        }
        let (cv, cd) = g(cand);
        if cv.abs() >= gv.abs() {
            break;
        }
        best = cand;
        gv = cv;
        gd = cd;
    }
    if !gv.is_finite() {
        return Err(Error::Bracket(format!("channel {channel} at tau = {tau}: log h not finite at b = {best}")));
    }
    Ok(sample(best, gv.exp_m1().abs(), false))
}

/// The first positive eigenvalue; its eigenspace has dimension 2.
pub fn first_positive<T: Real>(model: &BallModel<T>, tau: T) -> Result<EigenCurveSample<T>> {
    eigenvalue_at(ChannelIndex::ground(), model, tau)
}

/// Samples of every channel and of its mirrored channel over a tau grid.
pub fn curve_sweep<T: Real>(
    channels: &[ChannelIndex],
    model: &BallModel<T>,
    taus: &[T],
) -> Result<Vec<EigenCurveSample<T>>> {
    curve_sweep_with(&DirectZeros, channels, model, taus)
}

pub fn curve_sweep_with<T: Real>(
    zs: &dyn ZeroSource<T>,
    channels: &[ChannelIndex],
    model: &BallModel<T>,
    taus: &[T],
) -> Result<Vec<EigenCurveSample<T>>> {
    let mut all: Vec<ChannelIndex> = Vec::with_capacity(2 * channels.len());
    for c in channels {
        for cand in [*c, c.mirrored()] {
            if !all.contains(&cand) {
                all.push(cand);
            }
        }
    }
    let mut out = Vec::with_capacity(all.len() * taus.len());
    for ch in all {
        for &tau in taus {
            out.push(eigenvalue_at_with(zs, ch, model, tau)?);
        }
    }
    Ok(out)
}

/// Channels (j, branch, k) with 2j <= `j2_max` and |k| <= `k_max`.
pub fn channels_up_to(j2_max: u32, k_max: u32) -> Vec<ChannelIndex> {
    let mut out = Vec::new();
    for j2 in (1..=j2_max).step_by(2) {
        let j = HalfInt::new(j2).expect("positive");
        for branch in [Branch::Minus, Branch::Plus] {
            for k in -(k_max as i32)..=k_max as i32 {
                out.push(ChannelIndex { j, branch, k });
            }
        }
    }
    out
}

/// Radial components (f(r), g(r)) of the eigenfunction, with g(R) = -e^tau f(R).
///
/// They solve f' + (kappa/r) f = (lambda + m) g and -g' + (kappa/r) g =
/// (lambda - m) f with kappa = -(j + 1/2) on branch `-`, +(j + 1/2) on `+`.
pub fn radial_profile<T: Real>(channel: ChannelIndex, model: &BallModel<T>, lambda: T, r_grid: &[T]) -> Result<Vec<(T, T)>> {
    let m = model.mass;
    let b = ((lambda - m) * (lambda + m)).sqrt();
    if !(b > T::zero()) {
        return domain(format!("radial profile needs |lambda| > m, got {lambda}"));
    }
    let a = b / (lambda + m);
    let (pf, pg, sg) = match channel.branch {
        Branch::Minus => (channel.j, channel.j.succ(), -T::one()),
        Branch::Plus => (channel.j.succ(), channel.j, T::one()),
    };
    r_grid
        .iter()
        .map(|&r| {
            if r == T::zero() {
                return Ok((T::zero(), T::zero()));
            }
            let s = r.sqrt();
            Ok((s * bessel_j_half(pf, b * r)?, sg * a * s * bessel_j_half(pg, b * r)?))
        })
        .collect()
}

/// L(tau) = (lambda_1(tau) - m) e^{-tau}.
#[allow(non_snake_case)]
pub fn L_of_tau<T: Real>(model: &BallModel<T>, tau: T) -> Result<T> {
    let s = first_positive(model, tau)?;
    Ok(s.excess * (-tau).exp())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeReport<T> {
    pub lambda: T,
    /// Central difference of lambda(tau).
    pub finite_difference: T,
    /// e^tau ||u||^2_boundary / ||phi||^2.
    pub from_boundary: T,
    /// ((lambda - m) ||u||^2 - (lambda + m) ||v||^2) / ||phi||^2.
    pub from_volume: T,
    /// Relative mismatch of e^tau ||u||^2_boundary = (lambda - m)||u||^2 - (lambda + m)||v||^2.
    pub norm_identity_residual: T,
    pub u_fraction: T,
    pub v_fraction: T,
    /// Largest pairwise relative disagreement of the three derivative values.
    pub max_relative_gap: T,
}

/// Compare lambda'(tau) from finite differences against the boundary and
/// volume formulas, using radial Gauss–Legendre integrals.
pub fn derivative_check<T: Real>(channel: ChannelIndex, model: &BallModel<T>, tau: T, dtau: T) -> Result<DerivativeReport<T>> {
    let s = eigenvalue_at(channel, model, tau)?;
    let up = eigenvalue_at(channel, model, tau + dtau)?;
    let down = eigenvalue_at(channel, model, tau - dtau)?;
    let fd = (up.lambda - down.lambda) / (T::lit(2.0) * dtau);
    let lambda = s.lambda;
    let m = model.mass;
    let r = model.radius;
    let (nodes, weights) = gauss_legendre_on(96, T::zero(), r);
    let prof = radial_profile(channel, model, lambda, &nodes)?;
    let (mut uu, mut vv) = (T::zero(), T::zero());
    for ((f, g), w) in prof.iter().zip(&weights) {
        uu = uu + *w * *f * *f;
        vv = vv + *w * *g * *g;
    }
    let fr = radial_profile(channel, model, lambda, &[r])?[0].0;
    let boundary = tau.exp() * fr * fr;
    let total = uu + vv;
    let volume = (lambda - m) * uu - (lambda + m) * vv;
    let from_boundary = boundary / total;
    let from_volume = volume / total;
    let rel = |a: T, b: T| (a - b).abs() / a.abs().max(b.abs());
    let gap = rel(fd, from_boundary).max(rel(fd, from_volume)).max(rel(from_boundary, from_volume));
    Ok(DerivativeReport {
        lambda,
        finite_difference: fd,
        from_boundary,
        from_volume,
        norm_identity_residual: (boundary - volume).abs() / boundary,
        u_fraction: uu / total,
        v_fraction: vv / total,
        max_relative_gap: gap,
    })
}
