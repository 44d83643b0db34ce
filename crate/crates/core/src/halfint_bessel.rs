//! Bessel functions of half-odd-integer order J_{n+1/2}, their consecutive
//! ratios, and their positive zeros.
//!
//! Everything is computed through the spherical Bessel functions
//! j_n(x) = sqrt(pi / (2x)) J_{n+1/2}(x), which share zeros and ratios with
//! the cylindrical ones.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::RwLock;

use crate::error::{domain, Error, Result};
use crate::real::Real;

/// A non-negative multiple of 1/2, stored exactly as `2p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt {
    twice_value: u32,
}

impl HalfInt {
    pub fn new(twice_value: u32) -> Result<Self> {
        if twice_value == 0 {
            return domain("half-integer order must be positive");
        }
        Ok(Self { twice_value })
    }

    /// `n + 1/2`.
    pub const fn half_odd(n: u32) -> Self {
        Self { twice_value: 2 * n + 1 }
    }

    pub const fn twice(self) -> u32 {
        self.twice_value
    }

    pub fn value<T: Real>(self) -> T {
        T::from_u32(self.twice_value).unwrap() / T::lit(2.0)
    }

    pub const fn is_half_odd(self) -> bool {
        self.twice_value % 2 == 1
    }

    /// `p + 1`.
    pub const fn succ(self) -> Self {
        Self { twice_value: self.twice_value + 2 }
    }

    /// The spherical index `n` with `p = n + 1/2`.
    pub fn spherical_index(self) -> Result<usize> {
        if !self.is_half_odd() {
            return domain(format!("order {self} is not of the form n + 1/2"));
        }
        Ok((self.twice_value / 2) as usize)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_half_odd() {
            write!(f, "{}/2", self.twice_value)
        } else {
            write!(f, "{}", self.twice_value / 2)
        }
    }
}

/// Spherical Bessel values j_0(x), ..., j_n(x) for x > 0.
///
/// Upward recurrence when x >= n; otherwise Miller's downward recurrence
/// normalized by sum_k (2k+1) j_k(x)^2 = 1.
pub fn spherical_jn_all<T: Real>(n: usize, x: T) -> Vec<T> {
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    if n == 0 {
        return vec![j0];
    }
    if x >= T::from_usize_lossy(n) {
        let mut out = Vec::with_capacity(n + 1);
        out.push(j0);
        out.push(j0 / x - c / x);
        for k in 1..n {
            let next = T::from_usize_lossy(2 * k + 1) / x * out[k] - out[k - 1];
            out.push(next);
        }
        return out;
    }
    miller_downward(n, x, j0, c)
}

fn miller_downward<T: Real>(n: usize, x: T, j0: T, c: T) -> Vec<T> {
    let start = n + 30 + (4.0 * (n as f64).sqrt()) as usize;
    let big = T::max_value().sqrt().sqrt();
    let rescale = T::one() / big;
    let mut out = vec![T::zero(); n + 1];
    let mut f_next = T::zero();
    let mut f = T::min_positive_value().sqrt();
    let mut sum = T::zero();
    for k in (0..=start).rev() {
        let kf = T::from_usize_lossy(k);
        sum = sum + (T::lit(2.0) * kf + T::one()) * f * f;
        if k <= n {
            out[k] = f;
        }
        if k == 0 {
            break;
        }
        let f_prev = (T::lit(2.0) * kf + T::one()) / x * f - f_next;
        f_next = f;
        f = f_prev;
        if f.abs() > big {
            f = f * rescale;
            f_next = f_next * rescale;
            sum = sum * rescale * rescale;
            for v in out.iter_mut() {
                *v = *v * rescale;
            }
        }
    }
    let mut norm = T::one() / sum.sqrt();
    // The sum fixes the magnitude only; take the sign from whichever of
    // j_0, j_1 is larger in closed form.
    let j1 = j0 / x - c / x;
    let reference = if j0.abs() >= j1.abs() || n == 0 { (j0, out[0]) } else { (j1, out[1]) };
    if (reference.0 < T::zero()) != (reference.1 < T::zero()) {
        norm = -norm;
    }
    out.iter().map(|&v| v * norm).collect()
}

/// J_p(x) for half-odd p and x > 0.
pub fn bessel_j_half<T: Real>(p: HalfInt, x: T) -> Result<T> {
    let n = p.spherical_index()?;
    if !(x > T::zero()) {
        return domain(format!("J_{p}(x) requires x > 0, got {x}"));
    }
    let j = spherical_jn_all(n, x);
    Ok((T::lit(2.0) * x / T::PI()).sqrt() * j[n])
}

/// J_{p+1}(x) / J_p(x), odd in x.
///
/// Fails with [`Error::Pole`] when |J_p(x)| is below 1e-300.
pub fn bessel_ratio<T: Real>(p: HalfInt, x: T) -> Result<T> {
    let n = p.spherical_index()?;
    if x == T::zero() {
        return Ok(T::zero());
    }
    let ax = x.abs();
    let jp = (T::lit(2.0) * ax / T::PI()).sqrt() * spherical_jn_all(n, ax)[n];
    if jp.abs().to_f64().unwrap_or(0.0) < 1e-300 {
        let xf = ax.to_f64().unwrap_or(f64::NAN);
        return Err(Error::Pole {
            order: p.value::<f64>(),
            x: xf,
            nearest_zero: nearest_zero(n, xf),
        });
    }
    let r = ratio_unchecked(n, ax);
    Ok(if x < T::zero() { -r } else { r })
}

/// j_{n+1}(x) / j_n(x) for x > 0 without the pole guard.
///
/// Series for x < 1e-4, continued fraction otherwise.
pub(crate) fn ratio_unchecked<T: Real>(n: usize, x: T) -> T {
    let p1 = T::from_usize_lossy(2 * n + 3);
    if x < T::lit(1e-4) {
        // x/(2p+2) + x^3/((2p+2)^2 (2p+4)) with 2p + 2 = 2n + 3
        return x / p1 + x * x * x / (p1 * p1 * (p1 + T::lit(2.0)));
    }
    // 1/ratio = b0 - 1/(b1 - 1/(b2 - ...)), b_i = (2n + 3 + 2i)/x, modified Lentz.
    let tiny = T::min_positive_value().sqrt();
    let eps = T::epsilon();
    let mut f = p1 / x;
    if f == T::zero() {
        f = tiny;
    }
    let mut c = f;
    let mut d = T::zero();
    let max_iter = 10_000 + 2 * x.to_usize().unwrap_or(usize::MAX / 4);
    for i in 1..max_iter {
        let b = (p1 + T::from_usize_lossy(2 * i)) / x;
        d = b - d;
        if d == T::zero() {
            d = tiny;
        }
        c = b - T::one() / c;
        if c == T::zero() {
            c = tiny;
        }
        d = T::one() / d;
        let delta = c * d;
        f = f * delta;
        if (delta - T::one()).abs() < eps {
            break;
        }
    }
    T::one() / f
}

/// d/dx of the ratio r = J_{p+1}/J_p: r' = 1 - ((2p+1)/x) r + r^2.
pub(crate) fn ratio_derivative<T: Real>(n: usize, x: T, r: T) -> T {
    if x < T::lit(1e-4) {
        let p1 = T::from_usize_lossy(2 * n + 3);
        return T::one() / p1 + T::lit(3.0) * x * x / (p1 * p1 * (p1 + T::lit(2.0)));
    }
    T::one() - T::from_usize_lossy(2 * n + 2) / x * r + r * r
}

fn nearest_zero(n: usize, x: f64) -> f64 {
    let mut best = 0.0f64;
    let mut k = 1;
    loop {
        let z: f64 = spherical_zeros(n, k)[k - 1];
        if (z - x).abs() < (best - x).abs() {
            best = z;
        }
        if z > x || k > 100_000 {
            return best;
        }
        k += 1;
    }
}

fn mcmahon<T: Real>(nu: T, k: usize) -> T {
    let mu = T::lit(4.0) * nu * nu;
    let beta = (T::from_usize_lossy(k) + nu / T::lit(2.0) - T::lit(0.25)) * T::PI();
    let b8 = T::lit(8.0) * beta;
    beta - (mu - T::one()) / b8
        - T::lit(4.0) * (mu - T::one()) * (T::lit(7.0) * mu - T::lit(31.0)) / (T::lit(3.0) * b8 * b8 * b8)
}

/// First `count` positive zeros of j_n, ascending.
///
/// Zeros of j_l are bracketed by consecutive zeros of j_{l-1} (interlacing),
/// starting from j_0 whose zeros are k*pi. Inside that bracket the McMahon
/// estimate +-0.5 is used when it already brackets a sign change.
pub fn spherical_zeros<T: Real>(n: usize, count: usize) -> Vec<T> {
    let mut level: Vec<T> = (1..=count + n).map(|k| T::from_usize_lossy(k) * T::PI()).collect();
    for l in 1..=n {
        let nu = T::from_usize_lossy(l) + T::lit(0.5);
        let mut next = Vec::with_capacity(level.len() - 1);
        for k in 0..level.len() - 1 {
            let (lo, hi) = (level[k], level[k + 1]);
            let seed = mcmahon(nu, k + 1);
            let half = T::lit(0.5);
            let f = |x: T| spherical_jn_all(l, x)[l];
            let (mut a, mut b) = (lo, hi);
            if seed - half > lo && seed + half < hi {
                let (sa, sb) = (f(seed - half), f(seed + half));
                if sa * sb < T::zero() {
                    a = seed - half;
                    b = seed + half;
                }
            }
            next.push(refine_zero(l, a, b));
        }
        level = next;
    }
    level.truncate(count);
    level
}

/// Safeguarded Newton on j_l inside a sign-change bracket.
fn refine_zero<T: Real>(l: usize, mut a: T, mut b: T) -> T {
    let eval = |x: T| {
        let j = spherical_jn_all(l, x);
        let d = j[l - 1] - T::from_usize_lossy(l + 1) / x * j[l];
        (j[l], d)
    };
    let (fa, _) = eval(a);
    let mut fa_neg = fa < T::zero();
    let mut x = (a + b) / T::lit(2.0);
    for _ in 0..200 {
        let (fx, dx) = eval(x);
        if fx == T::zero() {
            return x;
        }
        if (fx < T::zero()) == fa_neg {
            a = x;
            fa_neg = fx < T::zero();
        } else {
            b = x;
        }
        let newton = x - fx / dx;
        let step_ok = newton > a && newton < b;
        let next = if step_ok { newton } else { (a + b) / T::lit(2.0) };
        if (next - x).abs() <= T::lit(2.0) * T::epsilon() * x.abs() || (b - a) <= T::lit(2.0) * T::epsilon() * x.abs() {
            return next;
        }
        x = next;
    }
    x
}

/// z_{p,k}, the k-th positive zero of J_p (k >= 1).
pub fn bessel_zero<T: Real>(p: HalfInt, k: u32) -> Result<T> {
    let n = p.spherical_index()?;
    if k == 0 {
        return domain("zero index starts at 1");
    }
    Ok(spherical_zeros::<T>(n, k as usize)[k as usize - 1])
}

/// The first zeros of J_p for one order.
#[derive(Clone, Debug, PartialEq)]
pub struct BesselZeroTable<T> {
    pub order: HalfInt,
    pub zeros: Vec<T>,
}

impl<T: Real> BesselZeroTable<T> {
    pub fn build(order: HalfInt, count: usize) -> Result<Self> {
        let n = order.spherical_index()?;
        Ok(Self { order, zeros: spherical_zeros(n, count) })
    }

    /// z_{p,k} < z_{p+1,k} < z_{p,k+1} wherever both tables have the entries.
    pub fn interlaces_with(&self, next: &Self) -> bool {
        next.order == self.order.succ()
            && (0..next.zeros.len().min(self.zeros.len().saturating_sub(1)))
                .all(|k| self.zeros[k] < next.zeros[k] && next.zeros[k] < self.zeros[k + 1])
    }
}

/// Where eigenvalue solvers get their zeros from.
pub trait ZeroSource<T: Real> {
    fn zero(&self, p: HalfInt, k: u32) -> Result<T>;
}

/// Computes every zero on request.
#[derive(Clone, Copy, Debug, Default)]
pub struct DirectZeros;

impl<T: Real> ZeroSource<T> for DirectZeros {
    fn zero(&self, p: HalfInt, k: u32) -> Result<T> {
        bessel_zero(p, k)
    }
}

/// Thread-safe memo of zero tables, optionally persisted as text lines `2p k z`.
#[derive(Debug, Default)]
pub struct ZeroCache {
    tables: RwLock<HashMap<u32, Vec<f64>>>,
}

impl ZeroCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut entries: HashMap<u32, Vec<(u32, f64)>> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Config { line: i + 1, msg: format!("malformed zero cache entry `{line}`") };
            let mut it = line.split_whitespace();
            let twice: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let k: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let z: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            entries.entry(twice).or_default().push((k, z));
        }
        let mut tables = HashMap::new();
        for (twice, mut list) in entries {
            list.sort_by_key(|e| e.0);
            // Keep only the contiguous prefix k = 1, 2, ...
            let zeros: Vec<f64> = list
                .iter()
                .enumerate()
                .take_while(|(i, e)| e.0 as usize == i + 1)
                .map(|(_, e)| e.1)
                .collect();
            tables.insert(twice, zeros);
        }
        Ok(Self { tables: RwLock::new(tables) })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tables = self.tables.read().expect("zero cache lock");
        let mut keys: Vec<_> = tables.keys().copied().collect();
        keys.sort_unstable();
        let mut out = String::new();
        for twice in keys {
            for (i, z) in tables[&twice].iter().enumerate() {
                out.push_str(&format!("{} {} {:.16e}\n", twice, i + 1, z));
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tables.read().expect("zero cache lock").values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ZeroSource<f64> for ZeroCache {
    fn zero(&self, p: HalfInt, k: u32) -> Result<f64> {
        let n = p.spherical_index()?;
        if k == 0 {
            return domain("zero index starts at 1");
        }
        let k = k as usize;
        if let Some(z) = self.tables.read().expect("zero cache lock").get(&p.twice()).and_then(|t| t.get(k - 1)) {
            return Ok(*z);
        }
        let mut tables = self.tables.write().expect("zero cache lock");
        let table = tables.entry(p.twice()).or_default();
        if table.len() < k {
            let count = k.max(2 * table.len()).max(8);
            *table = spherical_zeros(n, count);
        }
        Ok(table[k - 1])
    }
}
