//! Command-line front end: flat key=value run files, one mode per run, CSV
//! and report artifacts, and a verification suite.
//!
//! A run file looks like
//!
//! ```text
//! mode = curves
//! R = 3
//! m = 1
//! j_max = 7/2
//! k_max = 2
//! tau_min = -6
//! tau_max = 6
//! tau_step = 0.05
//! ```
//!
//! Ball modes (`curves`, `first`) take `R`; surface modes (`bie`, `rayleigh`,
//! `verify`) take `kind = sphere|ellipsoid` with `R` or `a, b, c` and
//! `n_theta, n_phi`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::ball_spectrum::{
    channels_up_to, derivative_check, eigenvalue_at_with, first_positive, interval_with, BallModel, ChannelIndex,
    EigenCurveSample, L_of_tau,
};
use crate::bie_spectrum::{
    default_grid, default_lambda_max, first_eigenvalue, first_negative_eigenvalue, sigma_min_scan, trace_curve,
    BieConfig, BieEigenpair,
};
use crate::error::{Error, Result};
use crate::halfint_bessel::{DirectZeros, ZeroCache, ZeroSource};
use crate::hardy::{ball_test, build_projections};
use crate::layerops::{identity_residuals, sphere_single_layer_errors, LayerOperators, SpectralParams};
use crate::rayleigh::{compare_lstar, rayleigh_max};
use crate::surface::{equal_volume_scale, make_surface, QuadratureSurface, Shape};

/// File name of the zero table inside a cache directory.
pub const ZERO_CACHE_FILE: &str = "bessel_zeros.txt";
/// Environment variable naming a cache directory.
pub const CACHE_ENV: &str = "DIRACBAG_CACHE";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Curves,
    First,
    Bie,
    Rayleigh,
    Verify,
}

impl Mode {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "curves" => Mode::Curves,
            "first" => Mode::First,
            "bie" => Mode::Bie,
            "rayleigh" => Mode::Rayleigh,
            "verify" => Mode::Verify,
            _ => return None,
        })
    }

    fn uses_ball(self) -> bool {
        matches!(self, Mode::Curves | Mode::First)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSpec {
    pub shape: Shape,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl SurfaceSpec {
    pub fn build(&self) -> Result<QuadratureSurface> {
        make_surface(self.shape, self.n_theta, self.n_phi)
    }

    pub fn at(&self, (n_theta, n_phi): (usize, usize)) -> Self {
        Self { n_theta, n_phi, ..*self }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub mass: f64,
    pub ball: Option<BallModel<f64>>,
    pub surface: Option<SurfaceSpec>,
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_step: f64,
    /// 2 j_max.
    pub j2_max: u32,
    pub k_max: u32,
    pub output: Option<PathBuf>,
    /// Resolutions (n_theta, n_phi) for convergence checks; empty means the surface's own.
    pub ladder: Vec<(usize, usize)>,
    pub lambda_max: Option<f64>,
    pub scan_points: usize,
    pub tau_probe: Option<f64>,
    pub delta: f64,
    pub tol: Option<f64>,
    pub scan_output: Option<PathBuf>,
    pub pencil_output: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "mode", "R", "m", "kind", "a", "b", "c", "volume", "n_theta", "n_phi", "tau_min", "tau_max", "tau_step", "j_max",
    "k_max", "out", "ladder", "lambda_max", "scan_points", "tau_probe", "delta", "tol", "scan_out", "pencil_out",
];

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.0.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config { line, msg: format!("cannot parse `{v}` for {key}") }),
        }
    }

    fn positive(&self, key: &str) -> Result<Option<f64>> {
        let v = self.parse::<f64>(key)?;
        match (v, self.raw(key)) {
            (Some(x), Some((line, _))) if !(x > 0.0 && x.is_finite()) => {
                Err(Error::Config { line, msg: format!("{key} must be positive and finite") })
            }
            _ => Ok(v),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.raw(key).map_or(0, |(l, _)| l)
    }
}

/// 2j for `7/2`, `3.5` or `0.5`.
fn parse_j2(s: &str) -> Option<u32> {
    let twice = match s.split_once('/') {
        Some((num, "2")) => num.trim().parse::<u32>().ok()?,
        Some(_) => return None,
        None => {
            let x: f64 = s.parse().ok()?;
            let t = 2.0 * x;
            if t.fract() != 0.0 || t < 0.0 {
                return None;
            }
            t as u32
        }
    };
    (twice % 2 == 1).then_some(twice)
}

fn parse_ladder(s: &str) -> Option<Vec<(usize, usize)>> {
    s.split(',')
        .map(|item| {
            let (t, p) = item.trim().split_once('x')?;
            Some((t.trim().parse().ok()?, p.trim().parse().ok()?))
        })
        .collect()
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(Error::Config { line, msg: format!("expected key = value, got `{content}`") });
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Config { line, msg: format!("unknown key `{k}`") });
            }
            if let Some((first, _)) = map.insert(k.to_string(), (line, v.to_string())) {
                return Err(Error::Config { line, msg: format!("`{k}` already set on line {first}") });
            }
        }
        let e = Entries(map);

        let Some((mode_line, mode_str)) = e.raw("mode") else {
            return Err(Error::Config { line: 0, msg: "missing `mode`".into() });
        };
        let mode = Mode::parse(mode_str)
            .ok_or_else(|| Error::Config { line: mode_line, msg: format!("unknown mode `{mode_str}`") })?;
        let mass = e.parse::<f64>("m")?.unwrap_or(1.0);
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(Error::Config { line: e.line_of("m"), msg: "m must be non-negative".into() });
        }

        let kind = e.raw("kind");
        let (ball, surface) = if mode.uses_ball() {
            if let Some((line, _)) = kind {
                return Err(Error::Config { line, msg: format!("mode {mode_str} runs on a ball; drop `kind`") });
            }
            let r = e.positive("R")?.unwrap_or(1.0);
            (Some(BallModel::new(r, mass)?), None)
        } else {
            let Some((kline, kind)) = kind else {
                return Err(Error::Config { line: mode_line, msg: format!("mode {mode_str} needs `kind`") });
            };
            let mut shape = match kind {
                "sphere" => Shape::Sphere { radius: e.positive("R")?.unwrap_or(1.0) },
                "ellipsoid" => {
                    let axis = |k: &str| {
                        e.positive(k)?.ok_or_else(|| Error::Config { line: kline, msg: format!("ellipsoid needs `{k}`") })
                    };
                    Shape::Ellipsoid { a: axis("a")?, b: axis("b")?, c: axis("c")? }
                }
                other => return Err(Error::Config { line: kline, msg: format!("unknown kind `{other}`") }),
            };
            if let Some(v) = e.positive("volume")? {
                let s = match shape {
                    Shape::Sphere { radius } => equal_volume_scale(radius, radius, radius, v),
                    Shape::Ellipsoid { a, b, c } => equal_volume_scale(a, b, c, v),
                };
                shape = shape.scaled(s);
            }
            let n_theta = e.parse::<usize>("n_theta")?.unwrap_or(24);
            let n_phi = e.parse::<usize>("n_phi")?.unwrap_or(2 * n_theta);
            (None, Some(SurfaceSpec { shape, n_theta, n_phi }))
        };

        let j2_max = match e.raw("j_max") {
            None => 7,
            Some((line, v)) => {
                parse_j2(v).ok_or_else(|| Error::Config { line, msg: format!("j_max must be a half-odd integer, got `{v}`") })?
            }
        };
        let ladder = match e.raw("ladder") {
            None => Vec::new(),
            Some((line, v)) => parse_ladder(v)
                .ok_or_else(|| Error::Config { line, msg: format!("ladder entries look like 24x48, got `{v}`") })?,
        };
        let tau_step = e.positive("tau_step")?.unwrap_or(0.05);
        let cfg = Self {
            mode,
            mass,
            ball,
            surface,
            tau_min: e.parse("tau_min")?.unwrap_or(0.0),
            tau_max: e.parse("tau_max")?.unwrap_or(0.0),
            tau_step,
            j2_max,
            k_max: e.parse("k_max")?.unwrap_or(2),
            output: e.parse::<String>("out")?.map(PathBuf::from),
            ladder,
            lambda_max: e.positive("lambda_max")?,
            scan_points: e.parse("scan_points")?.unwrap_or(40),
            tau_probe: e.parse("tau_probe")?,
            delta: e.parse("delta")?.unwrap_or(0.1),
            tol: e.positive("tol")?,
            scan_output: e.parse::<String>("scan_out")?.map(PathBuf::from),
            pencil_output: e.parse::<String>("pencil_out")?.map(PathBuf::from),
        };
        if !cfg.tau_min.is_finite() || !cfg.tau_max.is_finite() {
            return Err(Error::Config { line: e.line_of("tau_min").max(e.line_of("tau_max")), msg: "tau range must be finite".into() });
        }
        Ok(cfg)
    }

    /// tau_min, tau_min + step, ... up to tau_max; empty when tau_max < tau_min.
    pub fn taus(&self) -> Vec<f64> {
        if self.tau_max < self.tau_min {
            return Vec::new();
        }
        let n = ((self.tau_max - self.tau_min) / self.tau_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.tau_min + i as f64 * self.tau_step).collect()
    }

    fn resolutions(&self) -> Vec<(usize, usize)> {
        match (&self.surface, self.ladder.is_empty()) {
            (Some(s), true) => vec![(s.n_theta, s.n_phi)],
            _ => self.ladder.clone(),
        }
    }

    fn bie_config(&self) -> BieConfig {
        BieConfig { tol: self.tol, ..BieConfig::new(self.mass) }
    }
}

/// Process-level settings from flags and environment.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub threads: usize,
    pub cache_dir: Option<PathBuf>,
}

impl RunOptions {
    /// The flag wins over DIRACBAG_CACHE.
    pub fn resolve_cache(flag: Option<PathBuf>) -> Option<PathBuf> {
        flag.or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
    }
}

/// One line of the verification suite.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, pass: value < bound }
    }

    fn above(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, pass: value > bound }
    }
}

/// A search that finds no eigenvalue fails the named check instead of the run.
fn found<T>(result: Result<T>, name: &str, out: &mut Vec<Check>) -> Result<Option<T>> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(Error::NoEigenvalue(_)) => {
            out.push(Check { name: name.to_string(), value: f64::NAN, bound: f64::NAN, pass: false });
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Everything a run produces. Files named in the config other than the main
/// output are listed in `extra`.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub csv: Option<String>,
    pub report: Option<String>,
    pub extra: Vec<(PathBuf, String)>,
    pub checks: Vec<Check>,
}

impl Artifacts {
    pub fn verification_failed(&self) -> bool {
        self.checks.iter().any(|c| !c.pass)
    }

    /// Main artifact text: the CSV if any, else the report.
    pub fn primary(&self) -> &str {
        self.csv.as_deref().or(self.report.as_deref()).unwrap_or("")
    }
}

pub const BALL_HEADER: &str = "tau,lambda,j2,branch,k,residual,multiplicity";
pub const BIE_HEADER: &str = "tau,lambda,j2,branch,k,residual,multiplicity,sigma_min,cross_residual";

fn g(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn ball_row(s: &EigenCurveSample<f64>) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        g(s.tau),
        g(s.lambda),
        s.channel.j.twice(),
        s.channel.branch.symbol(),
        s.channel.k,
        g(s.residual),
        s.multiplicity
    )
}

pub fn bie_row(p: &BieEigenpair) -> String {
    format!(
        "{},{},-1,-1,-1,{},{},{},{}",
        g(p.tau),
        g(p.lambda),
        g(p.m1_residual),
        p.multiplicity,
        g(p.sigma_min),
        g(p.cross_residual)
    )
}

pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<Artifacts> {
    match cfg.mode {
        Mode::Curves | Mode::First => {
            let cache_file = opts.cache_dir.as_ref().map(|d| d.join(ZERO_CACHE_FILE));
            let cache = match &cache_file {
                Some(f) if f.exists() => ZeroCache::load(f)?,
                _ => ZeroCache::new(),
            };
            let out = if cfg.mode == Mode::Curves { run_curves(cfg, opts, &cache)? } else { run_first(cfg)? };
            if let Some(f) = cache_file {
                std::fs::create_dir_all(f.parent().expect("file in a directory"))?;
                cache.save(&f)?;
            }
            Ok(out)
        }
        Mode::Bie => run_bie(cfg),
        Mode::Rayleigh => run_rayleigh(cfg),
        Mode::Verify => {
            let checks = verify_suite(cfg)?;
            let mut report = String::new();
            for c in &checks {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                writeln!(report, "{tag} {} value={:e} bound={:e}", c.name, c.value, c.bound).expect("string write");
            }
            Ok(Artifacts { report: Some(report), checks, ..Default::default() })
        }
    }
}

fn ball_of(cfg: &RunConfig) -> Result<BallModel<f64>> {
    cfg.ball.ok_or_else(|| Error::Config { line: 0, msg: "ball mode without a ball".into() })
}

fn surface_of(cfg: &RunConfig) -> Result<SurfaceSpec> {
    cfg.surface.ok_or_else(|| Error::Config { line: 0, msg: "surface mode without `kind`".into() })
}

/// Every channel up to (j_max, k_max) over the tau grid, channels split across
/// worker threads; rows keep channel-major order whatever the thread count.
pub fn sweep(
    zs: &(dyn ZeroSource<f64> + Sync),
    channels: &[ChannelIndex],
    model: &BallModel<f64>,
    taus: &[f64],
    threads: usize,
) -> Result<Vec<EigenCurveSample<f64>>> {
    let threads = threads.clamp(1, channels.len().max(1));
    let chunk = channels.len().div_ceil(threads).max(1);
    let parts: Vec<Result<Vec<EigenCurveSample<f64>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = channels
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    let mut out = Vec::with_capacity(part.len() * taus.len());
                    for &ch in part {
                        for &tau in taus {
                            out.push(eigenvalue_at_with(zs, ch, model, tau)?);
                        }
                    }
                    Ok(out)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let mut all = Vec::new();
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

fn run_curves(cfg: &RunConfig, opts: &RunOptions, cache: &ZeroCache) -> Result<Artifacts> {
    let model = ball_of(cfg)?;
    let channels = channels_up_to(cfg.j2_max, cfg.k_max);
    let samples = sweep(cache, &channels, &model, &cfg.taus(), opts.threads)?;
    let mut csv = String::from(BALL_HEADER);
    csv.push('\n');
    for s in &samples {
        csv.push_str(&ball_row(s));
        csv.push('\n');
    }
    Ok(Artifacts { csv: Some(csv), ..Default::default() })
}

fn run_first(cfg: &RunConfig) -> Result<Artifacts> {
    let model = ball_of(cfg)?;
    let mut csv = String::from("tau,lambda,L,residual\n");
    for tau in cfg.taus() {
        let s = first_positive(&model, tau)?;
        writeln!(csv, "{},{},{},{}", g(tau), g(s.lambda), g(s.excess * (-tau).exp()), g(s.residual)).expect("string write");
    }
    Ok(Artifacts { csv: Some(csv), ..Default::default() })
}

fn run_bie(cfg: &RunConfig) -> Result<Artifacts> {
    let spec = surface_of(cfg)?;
    let ops = LayerOperators::new(&spec.build()?)?;
    let bcfg = cfg.bie_config();
    let taus = cfg.taus();
    let lambda_max = cfg.lambda_max.unwrap_or_else(|| default_lambda_max(&ops, cfg.mass));
    let mut art = Artifacts::default();
    let mut csv = String::from(BIE_HEADER);
    csv.push('\n');
    if let Some(&t0) = taus.first() {
        if let Some(path) = &cfg.scan_output {
            let scan = sigma_min_scan(&ops, &bcfg, t0, &default_grid(cfg.mass, lambda_max, cfg.scan_points))?;
            let mut text = String::from("lambda,sigma_min,sigma_next\n");
            for p in scan {
                writeln!(text, "{},{},{}", g(p.lambda), g(p.sigma_min), g(p.sigma_next)).expect("string write");
            }
            art.extra.push((path.clone(), text));
        }
        let first = first_eigenvalue(&ops, &bcfg, t0, lambda_max, cfg.scan_points)?;
        let d = 1e-6 * (first.lambda - cfg.mass);
        let trace = trace_curve(&ops, &bcfg, &taus, [first.lambda - d, first.lambda + d])?;
        for p in &trace.pairs {
            csv.push_str(&bie_row(p));
            csv.push('\n');
        }
        if let Some(msg) = trace.lost {
            return Err(Error::NoEigenvalue(format!("curve lost after {} of {} tau values: {msg}", trace.pairs.len(), taus.len())));
        }
    }
    art.csv = Some(csv);
    Ok(art)
}

fn run_rayleigh(cfg: &RunConfig) -> Result<Artifacts> {
    let spec = surface_of(cfg)?;
    let ops = LayerOperators::new(&spec.build()?)?;
    let proj = build_projections(&ops)?;
    let res = rayleigh_max(&ops, &proj)?;
    let diag = ball_test(&ops, &proj);
    let mut r = String::new();
    let mut kv = |k: &str, v: String| writeln!(r, "{k}={v}").expect("string write");
    kv("r_omega", g(res.r_omega));
    kv("inverse_r_omega", g(1.0 / res.r_omega));
    kv("unconstrained_max", g(res.unconstrained_max));
    kv("el_residual", g(res.el_residual));
    kv("excluded_mode_overlap", g(res.excluded_mode_overlap));
    kv("p_minus_fraction", g(res.p_minus_fraction));
    kv("hardy_rank", proj.rank().to_string());
    kv("dimension", ops.dim().to_string());
    kv("rank_gap_kept", g(proj.gap.0));
    kv("rank_gap_dropped", g(proj.gap.1));
    kv("anticommutator", g(diag.anticommutator));
    kv("reflection_residual", g(diag.reflection));
    if let Some(tau) = cfg.tau_probe {
        let cmp = compare_lstar(&ops, &cfg.bie_config(), tau, &res, cfg.delta)?;
        kv("tau_probe", g(tau));
        kv("lambda", g(cmp.lambda));
        kv("l_value", g(cmp.l_value));
        kv("product", g(cmp.product));
        kv("delta", g(cmp.delta));
        kv("holds", cmp.holds.to_string());
    }
    let mut art = Artifacts { report: Some(r), ..Default::default() };
    if let Some(path) = &cfg.pencil_output {
        let mut text = String::from("index,L\n");
        for (i, l) in res.pencil.iter().enumerate() {
            writeln!(text, "{i},{}", g(*l)).expect("string write");
        }
        art.extra.push((path.clone(), text));
    }
    Ok(art)
}

/// Values on the round-off floor count as converged.
const ROUNDOFF_FLOOR: f64 = 1e-12;

fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0] || w[1].max(w[0]) < ROUNDOFF_FLOOR)
}

/// Largest pairwise violation across a sequence, 0 when it is non-increasing.
fn growth(xs: &[f64]) -> f64 {
    if non_increasing(xs) {
        0.0
    } else {
        xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

fn ball_checks(model: &BallModel<f64>, out: &mut Vec<Check>) -> Result<()> {
    let (r, m) = (model.radius, model.mass);
    out.push(Check::below("ball.gap_edge", first_positive(model, -40.0)?.excess, 1e-8));
    let dirichlet = ((std::f64::consts::PI / r).powi(2) + m * m).sqrt();
    out.push(Check::below("ball.dirichlet_limit", (first_positive(model, 40.0)?.lambda - dirichlet).abs(), 1e-8));
    out.push(Check::below("ball.lstar", (L_of_tau(model, -30.0)? * r - 3.0).abs(), 1e-6));

    let taus: Vec<f64> = (0..=48).map(|i| -6.0 + 0.25 * i as f64).collect();
    let channels = channels_up_to(7, 2);
    let samples = sweep(&DirectZeros, &channels, model, &taus, 1)?;
    let residual = samples.iter().map(|s| s.residual).fold(0.0, f64::max);
    out.push(Check::below("ball.inversion", residual, 1e-11));
    let n = taus.len();
    let mut bad_steps = 0usize;
    let mut outside = 0usize;
    let mut mirror = 0.0f64;
    for (ci, ch) in channels.iter().enumerate() {
        let curve = &samples[ci * n..(ci + 1) * n];
        bad_steps += curve.windows(2).filter(|w| w[1].lambda <= w[0].lambda).count();
        let iv = interval_with(&DirectZeros, *ch, model)?;
        outside += curve.iter().filter(|s| !iv.contains(s.lambda)).count();
        let mi = channels.iter().position(|c| *c == ch.mirrored()).expect("mirror in list");
        let other = &samples[mi * n..(mi + 1) * n];
        for (i, s) in curve.iter().enumerate() {
            mirror = mirror.max((s.lambda + other[n - 1 - i].lambda).abs());
        }
    }
    out.push(Check::below("ball.monotone_violations", bad_steps as f64, 0.5));
    out.push(Check::below("ball.outside_interval", outside as f64, 0.5));
    out.push(Check::below("ball.mirror_symmetry", mirror, 1e-10));
    let mut gap = 0.0f64;
    for tau in [-2.0, 0.0, 2.0] {
        gap = gap.max(derivative_check(ChannelIndex::ground(), model, tau, 1e-4)?.max_relative_gap);
    }
    out.push(Check::below("ball.derivative_formulas", gap, 1e-5));
    Ok(())
}

/// Per-resolution numbers that the suite compares along the ladder.
struct LevelResult {
    identities: [f64; 2],
    projections: f64,
    bie_error: Option<f64>,
}

fn level_checks(spec: SurfaceSpec, cfg: &RunConfig, out: &mut Vec<Check>) -> Result<LevelResult> {
    let tag = format!("{}x{}", spec.n_theta, spec.n_phi);
    let m = cfg.mass;
    let ops = LayerOperators::new(&spec.build()?)?;
    let sphere = spec.shape.is_sphere();
    let radius = spec.shape.equivalent_radius();

    if sphere {
        let errs = sphere_single_layer_errors(&ops, m, 3)?;
        out.push(Check::below(format!("layer.single_layer_modes@{tag}"), errs.iter().copied().fold(0.0, f64::max), 5e-3));
    }
    let mut identities = [0.0; 2];
    for (slot, lambda) in [m, m + 0.5].into_iter().enumerate() {
        let pair = ops.assemble(&SpectralParams::new(lambda, m)?);
        identities[slot] = identity_residuals(&ops, &pair).max();
        out.push(Check::below(format!("layer.identities(lambda={lambda})@{tag}"), identities[slot], 0.05));
    }
    let proj = build_projections(&ops)?;
    let pr = proj.residuals(&ops);
    out.push(Check::below(format!("hardy.cross_and_idempotent@{tag}"), pr.cross.max(pr.idempotent), 0.05));
    out.push(Check { name: format!("hardy.sum_is_identity@{tag}"), value: pr.sum, bound: 4.0 * f64::EPSILON, pass: pr.sum <= 4.0 * f64::EPSILON });
    let diag = ball_test(&ops, &proj);
    if sphere {
        out.push(Check::below(format!("hardy.anticommutator@{tag}"), diag.anticommutator, 0.02));
    } else {
        let twin = SurfaceSpec { shape: Shape::Sphere { radius }, ..spec };
        let tops = LayerOperators::new(&twin.build()?)?;
        let tdiag = ball_test(&tops, &build_projections(&tops)?);
        out.push(Check::above(format!("hardy.anticommutator_ratio@{tag}"), diag.anticommutator / tdiag.anticommutator.max(f64::MIN_POSITIVE), 10.0));
        out.push(Check::above(format!("hardy.reflection_ratio@{tag}"), diag.reflection / tdiag.reflection.max(f64::MIN_POSITIVE), 100.0));
    }

    let bcfg = cfg.bie_config();
    let lambda_max = cfg.lambda_max.unwrap_or_else(|| default_lambda_max(&ops, m));
    let ball = BallModel::new(radius, m)?;
    let mut bie_error = None;
    if sphere {
        let name = format!("bie.ball_oracle(tau=0)@{tag}");
        if let Some(p) = found(first_eigenvalue(&ops, &bcfg, 0.0, lambda_max, cfg.scan_points), &name, out)? {
            let err = (p.lambda - first_positive(&ball, 0.0)?.lambda).abs();
            bie_error = Some(err);
            out.push(Check::below(name, err, 1e-2));
            let even = p.multiplicity >= 2 && p.multiplicity % 2 == 0;
            out.push(Check { name: format!("bie.even_multiplicity@{tag}"), value: p.multiplicity as f64, bound: 2.0, pass: even });
        }
    }

    let res = rayleigh_max(&ops, &proj)?;
    if sphere {
        out.push(Check::below(format!("rayleigh.sphere_value@{tag}"), (res.r_omega / radius - 1.0 / 3.0).abs(), 1e-2));
        out.push(Check::below(format!("rayleigh.excluded_overlap@{tag}"), res.excluded_mode_overlap, 0.05));
    }
    let tau_probe = cfg.tau_probe.unwrap_or(-6.0);
    let name = format!("rayleigh.{}@{tag}", if sphere { "ball_equality" } else { "lstar_bound" });
    if let Some(cmp) = found(compare_lstar(&ops, &bcfg, tau_probe, &res, cfg.delta), &name, out)? {
        out.push(if sphere {
            Check::below(name, (cmp.product - 1.0).abs(), cfg.delta)
        } else {
            Check::above(name, cmp.product, 1.0 - cfg.delta)
        });
    }

    let name = format!("bie.spectrum_symmetry@{tag}");
    let pos = found(first_eigenvalue(&ops, &bcfg, 1.0, lambda_max, cfg.scan_points), &name, out)?;
    if let Some(pos) = pos {
        if let Some(neg) = found(first_negative_eigenvalue(&ops, &bcfg, -1.0, lambda_max, cfg.scan_points), &name, out)? {
            out.push(Check::below(name, (pos.lambda + neg.lambda).abs(), 2e-2));
        }
    }

    Ok(LevelResult { identities, projections: pr.cross.max(pr.idempotent), bie_error })
}

/// Ball checks on the equal-volume ball, then layer, Hardy, boundary-integral
/// and Rayleigh checks at every resolution of the ladder, then convergence
/// along the ladder.
pub fn verify_suite(cfg: &RunConfig) -> Result<Vec<Check>> {
    let spec = surface_of(cfg)?;
    let mut out = Vec::new();
    ball_checks(&BallModel::new(spec.shape.equivalent_radius(), cfg.mass)?, &mut out)?;
    let levels: Vec<LevelResult> =
        cfg.resolutions().into_iter().map(|r| level_checks(spec.at(r), cfg, &mut out)).collect::<Result<_>>()?;
    if levels.len() > 1 {
        for slot in 0..2 {
            let xs: Vec<f64> = levels.iter().map(|l| l.identities[slot]).collect();
            out.push(Check::below(format!("ladder.identities[{slot}]_growth"), growth(&xs), f64::MIN_POSITIVE));
        }
        let xs: Vec<f64> = levels.iter().map(|l| l.projections).collect();
        out.push(Check::below("ladder.projections_growth", growth(&xs), f64::MIN_POSITIVE));
        let xs: Vec<f64> = levels.iter().filter_map(|l| l.bie_error).collect();
        if xs.len() > 1 {
            out.push(Check::below("ladder.bie_error_growth", growth(&xs), f64::MIN_POSITIVE));
        }
    }
    Ok(out)
}

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const SOLVER: u8 = 2;
    pub const VERIFY: u8 = 3;
}

/// Exit code for an error: configuration and I/O problems are usage errors.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::Io(_) => exit::USAGE,
        _ => exit::SOLVER,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ball_config_with_comments() {
        let cfg = RunConfig::parse("# figure data\nmode = curves\nR = 3 # radius\nm=1\nj_max = 7/2\ntau_min=-1\ntau_max=1\ntau_step=0.5\n").unwrap();
        assert_eq!(cfg.mode, Mode::Curves);
        assert_eq!(cfg.ball.unwrap().radius, 3.0);
        assert_eq!(cfg.j2_max, 7);
        assert_eq!(cfg.taus(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn config_errors_carry_line_numbers() {
        let err = RunConfig::parse("mode = curves\n\nR = x\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 3, .. }), "{err}");
        let err = RunConfig::parse("mode = curves\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        let err = RunConfig::parse("mode = curves\nR = 1\nR = 2\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 3, .. }));
        let err = RunConfig::parse("mode = bie\nR = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
        let err = RunConfig::parse("mode = first\nkind = sphere\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        assert!(RunConfig::parse("mode = curves\nj_max = 2\n").is_err());
        assert_eq!(exit_code(&err), exit::USAGE);
    }

    #[test]
    fn surface_config_rescales_to_volume() {
        let cfg = RunConfig::parse("mode = rayleigh\nkind = ellipsoid\na = 2\nb = 1\nc = 1\nvolume = 1\nn_theta = 12\n").unwrap();
        let s = cfg.surface.unwrap();
        assert!((s.shape.volume() - 1.0).abs() < 1e-14);
        assert_eq!((s.n_theta, s.n_phi), (12, 24));
        let cfg = RunConfig::parse("mode = verify\nkind = sphere\nladder = 16x32, 24x48\n").unwrap();
        assert_eq!(cfg.resolutions(), vec![(16, 32), (24, 48)]);
    }

    #[test]
    fn empty_tau_range_gives_header_only() {
        let cfg = RunConfig::parse("mode = curves\ntau_min = 1\ntau_max = 0\n").unwrap();
        let art = run(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(art.csv.unwrap(), format!("{BALL_HEADER}\n"));
    }

    #[test]
    fn sweep_is_independent_of_thread_count() {
        let model = BallModel::new(3.0, 1.0).unwrap();
        let channels = channels_up_to(3, 1);
        let taus = [-1.0, 0.0, 2.0];
        let a = sweep(&DirectZeros, &channels, &model, &taus, 1).unwrap();
        let b = sweep(&DirectZeros, &channels, &model, &taus, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ladder_growth() {
        assert_eq!(growth(&[1e-3, 1e-4, 1e-5]), 0.0);
        assert_eq!(growth(&[3e-15, 4e-15]), 0.0);
        assert!(growth(&[1e-3, 2e-3]) > 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tau_grid_covers_the_range(lo in -20.0f64..20.0, span in 0.0f64..10.0, step in 0.01f64..2.0) {
                let text = format!("mode = curves\ntau_min = {lo}\ntau_max = {}\ntau_step = {step}\n", lo + span);
                let taus = RunConfig::parse(&text).unwrap().taus();
                prop_assert_eq!(taus.len(), ((span / step) + 1e-9).floor() as usize + 1);
                prop_assert_eq!(taus[0], lo);
                prop_assert!(*taus.last().unwrap() <= lo + span + 1e-6);
            }

            #[test]
            fn ball_values_round_trip(r in 0.01f64..100.0, m in 0.0f64..50.0, j in 0u32..6) {
                let text = format!("mode = curves\nR = {r}\nm = {m}\nj_max = {}/2\n", 2 * j + 1);
                let cfg = RunConfig::parse(&text).unwrap();
                let ball = cfg.ball.unwrap();
                prop_assert_eq!((ball.radius, ball.mass, cfg.j2_max), (r, m, 2 * j + 1));
            }

            #[test]
            fn unknown_keys_are_rejected(key in "[a-z]{3,8}") {
                prop_assume!(!KEYS.contains(&key.as_str()));
                let err = RunConfig::parse(&format!("mode = curves\n{key} = 1\n")).unwrap_err();
                let is_line_2 = matches!(err, Error::Config { line: 2, .. });
                prop_assert!(is_line_2);
            }
        }
    }
}
