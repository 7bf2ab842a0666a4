//! Walk-on-spheres estimators of harmonic measure, Green function,
//! hyperbolic density and hyperbolic distance.
//!
//! Each walk draws from its own ChaCha stream keyed by `(seed, walk_index)`;
//! walks run in parallel and are reduced in index order, so every estimate is
//! bit-identical for a given seed regardless of the thread schedule.
//!
//! A walk stops once it is within `epsilon_shell` of `∂Ω` or of `K`, and its
//! exit point is snapped to the nearest point of that boundary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compacts::CompactSet;
use crate::domains::KoenigsDomain;
use crate::error::{Error, Result};
use crate::scalar::shift;
use crate::{Point, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WosConfig {
    pub epsilon_shell: f64,
    pub max_steps: usize,
    pub n_walks: usize,
    /// Supplied by the caller; config files carry the seed elsewhere.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for WosConfig {
    fn default() -> Self {
        Self {
            epsilon_shell: 1e-3,
            max_steps: 10_000,
            n_walks: 10_000,
            seed: 0,
        }
    }
}

impl WosConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_shell > 0.0 && self.epsilon_shell <= 0.1) {
            return Err(Error::InvalidParameter(format!(
                "epsilon_shell must lie in (0, 0.1], got {}",
                self.epsilon_shell
            )));
        }
        if self.n_walks < 100 {
            return Err(Error::InvalidParameter(format!(
                "n_walks must be at least 100, got {}",
                self.n_walks
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn with_walks(self, n_walks: usize) -> Self {
        Self { n_walks, ..self }
    }
}

/// Diagnostic attached to an estimate or report row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flag {
    /// More than 1e−3 of the walks hit `max_steps`.
    Truncation,
    /// A negative Green estimate was clamped to zero.
    Clamped,
    /// Green estimate ≤ 0, distance reported as `+∞`.
    InfiniteDistance,
    /// A sequence expected to be monotone is not.
    NonMonotone,
    /// Fewer distinct candidates than requested points.
    TooFewCandidates,
    /// The simplex solver hit its iteration cap.
    NotConverged,
    /// Value is a deterministic bound, not an estimate.
    Bound,
}

impl Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::Truncation => "truncation",
            Flag::Clamped => "clamped",
            Flag::InfiniteDistance => "infinite-distance",
            Flag::NonMonotone => "non-monotone",
            Flag::TooFewCandidates => "too-few-candidates",
            Flag::NotConverged => "not-converged",
            Flag::Bound => "bound",
        }
    }
}

/// A Monte Carlo (or exact, when `n_samples == 0`) value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate<T> {
    pub value: T,
    pub std_err: T,
    pub n_samples: usize,
    pub n_truncated: usize,
    pub n_clamped: usize,
    pub seed: u64,
    pub flags: Vec<Flag>,
}

impl<T: Real> Estimate<T> {
    /// A deterministic value with zero error.
    pub fn exact(value: T) -> Self {
        Self {
            value,
            std_err: T::zero(),
            n_samples: 0,
            n_truncated: 0,
            n_clamped: 0,
            seed: 0,
            flags: Vec::new(),
        }
    }

    fn flag(&mut self, f: Flag) {
        if !self.flags.contains(&f) {
            self.flags.push(f);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hit {
    Outer,
    Inner,
    Truncated,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exit<T> {
    pub point: Point<T>,
    pub hit: Hit,
    pub steps: usize,
}

/// Decorrelates per-row seeds.
pub fn splitmix(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn walk_rng(seed: u64, walk_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(walk_index);
    rng
}

/// One walk from `z` in `Ω` (unshifted frame), optionally absorbed by `K`.
pub fn wos_exit<T: Real>(
    z: Point<T>,
    domain: &KoenigsDomain<T>,
    k: Option<&CompactSet<T>>,
    cfg: &WosConfig,
    walk_index: u64,
) -> Exit<T> {
    let mut rng = walk_rng(cfg.seed, walk_index);
    walk(z, domain, k, T::lit(cfg.epsilon_shell), cfg.max_steps, &mut rng)
}

/// Walks that wander this far are stopped and counted as truncated. In
/// domains whose boundary distance grows exponentially (the cusp) the sphere
/// radii can otherwise run away to infinity.
const ESCAPE_RADIUS: f64 = 1e12;

fn walk<T: Real>(
    mut w: Point<T>,
    domain: &KoenigsDomain<T>,
    k: Option<&CompactSet<T>>,
    eps: T,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Exit<T> {
    let escape = T::lit(ESCAPE_RADIUS * ESCAPE_RADIUS);
    for steps in 0..max_steps {
        if !(w.norm_sqr() < escape) {
            return Exit {
                point: w,
                hit: Hit::Truncated,
                steps,
            };
        }
        let (d_out, foot_out) = domain.closest_boundary(w);
        let (d_in, foot_in) = k.map_or((T::infinity(), w), |k| k.closest_point(w));
        if d_in < eps || d_out < eps {
            let (point, hit) = if d_in <= d_out {
                (foot_in, Hit::Inner)
            } else {
                (foot_out, Hit::Outer)
            };
            return Exit { point, hit, steps };
        }
        let r = d_out.min(d_in);
        let theta = T::lit(rng.random::<f64>()) * T::TAU();
        let (s, c) = theta.sin_cos();
        w = Point::new(w.re + r * c, w.im + r * s);
    }
    Exit {
        point: w,
        hit: Hit::Truncated,
        steps: max_steps,
    }
}

fn run_walks<T: Real>(
    z: Point<T>,
    domain: &KoenigsDomain<T>,
    k: Option<&CompactSet<T>>,
    cfg: &WosConfig,
    seed: u64,
) -> Vec<Exit<T>> {
    let eps = T::lit(cfg.epsilon_shell);
    (0..cfg.n_walks as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = walk_rng(seed, i);
            walk(z, domain, k, eps, cfg.max_steps, &mut rng)
        })
        .collect()
}

fn require_inside<T: Real>(domain: &KoenigsDomain<T>, w: Point<T>, t: T) -> Result<Point<T>> {
    let s = shift(w, t);
    if !domain.contains(s) {
        return Err(Error::outside(w, "shifted domain"));
    }
    Ok(s)
}

/// Exit points of walks from `z` in `Ω − t`, expressed in the `Ω − t` frame,
/// with the number of truncated walks (which are dropped).
pub fn exit_points<T: Real>(
    z: Point<T>,
    domain: &KoenigsDomain<T>,
    t: T,
    cfg: &WosConfig,
    seed: u64,
) -> Result<(Vec<Point<T>>, usize)> {
    cfg.validate()?;
    let s = require_inside(domain, z, t)?;
    let exits = run_walks(s, domain, None, cfg, seed);
    let back = Point::new(t, T::zero());
    let mut pts = Vec::with_capacity(exits.len());
    let mut truncated = 0;
    for e in exits {
        match e.hit {
            Hit::Truncated => truncated += 1,
            _ => pts.push(e.point - back),
        }
    }
    Ok((pts, truncated))
}

fn truncation_check<T: Real>(est: &mut Estimate<T>) {
    if est.n_truncated as f64 > 1e-3 * (est.n_samples + est.n_truncated).max(1) as f64 {
        est.flag(Flag::Truncation);
    }
}

/// `ω(z, K, Ω − t)`: fraction of walks absorbed on `K`.
pub fn harmonic_measure_mc<T: Real>(
    z: Point<T>,
    k: &CompactSet<T>,
    domain: &KoenigsDomain<T>,
    t: T,
    cfg: &WosConfig,
) -> Result<Estimate<T>> {
    cfg.validate()?;
    let s = require_inside(domain, z, t)?;
    let ks = k.translate(t);
    ks.clearance(|w| domain.contains(w), |w| domain.closest_boundary(w).0)
        .ok_or_else(|| Error::Precondition("K is not inside the shifted domain".into()))?;
    if ks.distance_to_set(s) <= T::lit(cfg.epsilon_shell) {
        return Err(Error::Precondition("start point lies on K".into()));
    }
    let exits = run_walks(s, domain, Some(&ks), cfg, cfg.seed);
    let n = exits.len();
    let inner = exits.iter().filter(|e| e.hit == Hit::Inner).count();
    let truncated = exits.iter().filter(|e| e.hit == Hit::Truncated).count();
    let p = inner as f64 / n as f64;
    let mut est = Estimate {
        value: T::lit(p),
        std_err: T::lit((p * (1.0 - p) / n as f64).sqrt()),
        n_samples: n,
        n_truncated: truncated,
        n_clamped: 0,
        seed: cfg.seed,
        flags: Vec::new(),
    };
    truncation_check(&mut est);
    Ok(est)
}

/// Mean and standard error of `log|X − w|` over exit points `X`.
pub(crate) fn log_mean(exits: &[Point<f64>], w: Point<f64>) -> (f64, f64) {
    let n = exits.len() as f64;
    let logs = exits.iter().map(|x| (x - w).norm().ln());
    let mean = logs.clone().sum::<f64>() / n;
    let var = logs.map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

fn to_f64<T: Real>(p: Point<T>) -> Point<f64> {
    Point::new(p.re.as_f64(), p.im.as_f64())
}

fn samples<T: Real>(
    z: Point<T>,
    domain: &KoenigsDomain<T>,
    t: T,
    cfg: &WosConfig,
) -> Result<(Vec<Point<f64>>, usize)> {
    let (pts, truncated) = exit_points(z, domain, t, cfg, cfg.seed)?;
    if pts.len() < 2 {
        return Err(Error::Precondition("every walk was truncated".into()));
    }
    Ok((pts.into_iter().map(to_f64).collect(), truncated))
}

/// `g_{Ω−t}(z, w) = −log|z − w| + E log|X_z − w|`.
pub fn green_mc<T: Real>(
    z: Point<T>,
    w: Point<T>,
    domain: &KoenigsDomain<T>,
    t: T,
    cfg: &WosConfig,
) -> Result<Estimate<T>> {
    if z == w {
        return Err(Error::Precondition("Green function needs z != w".into()));
    }
    require_inside(domain, w, t)?;
    let (pts, truncated) = samples(z, domain, t, cfg)?;
    let (mean, se) = log_mean(&pts, to_f64(w));
    let raw = -(to_f64(z) - to_f64(w)).norm().ln() + mean;
    let mut est = Estimate {
        value: T::lit(raw.max(0.0)),
        std_err: T::lit(se),
        n_samples: pts.len(),
        n_truncated: truncated,
        n_clamped: usize::from(raw < 0.0),
        seed: cfg.seed,
        flags: Vec::new(),
    };
    if raw < 0.0 {
        est.flag(Flag::Clamped);
    }
    truncation_check(&mut est);
    Ok(est)
}

/// `λ_{Ω−t}(w) = exp(−E log|X_w − w|)`, the reciprocal conformal radius.
pub fn robin_density_mc<T: Real>(
    w: Point<T>,
    domain: &KoenigsDomain<T>,
    t: T,
    cfg: &WosConfig,
) -> Result<Estimate<T>> {
    let (pts, truncated) = samples(w, domain, t, cfg)?;
    let (mean, se) = log_mean(&pts, to_f64(w));
    let lambda = (-mean).exp();
    let mut est = Estimate {
        value: T::lit(lambda),
        std_err: T::lit(lambda * se),
        n_samples: pts.len(),
        n_truncated: truncated,
        n_clamped: 0,
        seed: cfg.seed,
        flags: Vec::new(),
    };
    truncation_check(&mut est);
    Ok(est)
}

/// `d = artanh(exp(−g))` from [`green_mc`], with delta-method error.
pub fn hyp_distance_mc<T: Real>(
    z: Point<T>,
    w: Point<T>,
    domain: &KoenigsDomain<T>,
    t: T,
    cfg: &WosConfig,
) -> Result<Estimate<T>> {
    let g = green_mc(z, w, domain, t, cfg)?;
    let gv = g.value.as_f64();
    let mut est = g.clone();
    if gv <= 0.0 {
        est.value = T::infinity();
        est.std_err = T::infinity();
        est.flag(Flag::InfiniteDistance);
        return Ok(est);
    }
    let rho = (-gv).exp();
    est.value = T::lit(rho.atanh());
    est.std_err = T::lit(rho / (1.0 - rho * rho) * g.std_err.as_f64());
    Ok(est)
}
