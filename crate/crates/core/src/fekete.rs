//! Euclidean and hyperbolic n-th diameters by Fekete-tuple search, and the
//! hyperbolic transfinite diameter by extrapolation in `n`.
//!
//! The objective is `S = Σ_{μ<ν} log k(w_μ, w_ν)` with `k = |w_μ − w_ν|` or
//! `k = tanh d = exp(−g)`, and `d_n = exp(2S / (n(n−1)))`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compacts::{CompactSet, Piece};
use crate::error::{Error, Result};
use crate::kernel::{GreenSource, KernelSource};
use crate::oracles::ClosedForm;
use crate::scalar::shift;
use crate::wos::Flag;
use crate::{Point, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeketeConfig {
    /// Random restarts on top of the greedy start (at least 8).
    pub restarts: usize,
    pub seed: u64,
    /// Continuous refinement of the best tuple along the pieces of `K`
    /// (only for kernels with a pointwise formula).
    pub polish: bool,
}

impl Default for FeketeConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            polish: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeketeResult<T> {
    pub n: usize,
    pub diameter: T,
    /// Propagated Monte Carlo error (zero for pointwise kernels).
    pub std_err: T,
    /// Sorted lexicographically by `(re, im)`. Among optima found by the
    /// search whose sums agree to 1e−12, the lexicographically smallest wins.
    pub tuple: Vec<Point<T>>,
    pub n_restarts: usize,
    pub flags: Vec<Flag>,
}

/// Which kernel `k` to maximize.
#[derive(Clone, Debug)]
pub enum Metric<T> {
    Euclidean,
    Hyperbolic(GreenSource<T>),
}

type PairFn<'a, T> = Box<dyn Fn(Point<T>, Point<T>) -> T + Sync + 'a>;

impl<T: Real> Metric<T> {
    /// Pointwise `log k`, when available without sampling.
    fn pointwise(&self) -> Option<PairFn<'_, T>> {
        match self {
            Metric::Euclidean => Some(Box::new(|a: Point<T>, b: Point<T>| (a - b).norm().ln())),
            Metric::Hyperbolic(GreenSource::Oracle { form, t }) => {
                let (form, t): (ClosedForm<T>, T) = (*form, *t);
                Some(Box::new(move |a: Point<T>, b: Point<T>| {
                    form.green(shift(a, t), shift(b, t))
                        .map(|g| -g)
                        .unwrap_or(T::neg_infinity())
                }))
            }
            Metric::Hyperbolic(_) => None,
        }
    }
}

/// `log k` over a fixed candidate set, computed once and then read-only.
#[derive(Clone, Debug)]
pub struct LogKernel<T> {
    points: Vec<Point<T>>,
    /// Diagonal stored as zero; never read by the search.
    log_k: Vec<Vec<T>>,
    std_err: Vec<Vec<T>>,
    source: Option<KernelSource>,
}

fn dedup<T: Real>(points: &[Point<T>]) -> Vec<Point<T>> {
    let mut out: Vec<Point<T>> = Vec::with_capacity(points.len());
    for p in points {
        if !out.contains(p) {
            out.push(*p);
        }
    }
    out
}

impl<T: Real> LogKernel<T> {
    pub fn euclidean(points: &[Point<T>]) -> Self {
        let points = dedup(points);
        let n = points.len();
        let log_k = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            T::zero()
                        } else {
                            (points[i] - points[j]).norm().ln()
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            points,
            log_k,
            std_err: vec![vec![T::zero(); n]; n],
            source: None,
        }
    }

    /// `log tanh d = −g` from a Green source.
    pub fn hyperbolic(points: &[Point<T>], src: &GreenSource<T>) -> Result<Self> {
        let points = dedup(points);
        let (g, s) = src.matrix(&points)?;
        let n = points.len();
        let log_k = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { T::zero() } else { -g[i][j] })
                    .collect()
            })
            .collect();
        Ok(Self {
            points,
            log_k,
            std_err: s,
            source: Some(src.source()),
        })
    }

    pub fn from_metric(points: &[Point<T>], metric: &Metric<T>) -> Result<Self> {
        match metric {
            Metric::Euclidean => Ok(Self::euclidean(points)),
            Metric::Hyperbolic(src) => Self::hyperbolic(points, src),
        }
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn log_k(&self, i: usize, j: usize) -> T {
        self.log_k[i][j]
    }

    pub fn source(&self) -> Option<KernelSource> {
        self.source
    }

    fn pair_sum(&self, idx: &[usize]) -> T {
        let mut s = T::zero();
        for a in 0..idx.len() {
            for b in a + 1..idx.len() {
                s += self.log_k[idx[a]][idx[b]];
            }
        }
        s
    }

    fn pair_err(&self, idx: &[usize]) -> T {
        let mut v = T::zero();
        for a in 0..idx.len() {
            for b in a + 1..idx.len() {
                let e = self.std_err[idx[a]][idx[b]];
                v += e * e;
            }
        }
        v.sqrt()
    }
}

fn exponent<T: Real>(n: usize) -> T {
    T::lit(2.0 / (n * (n - 1)) as f64)
}

fn lex_less<T: Real>(a: &[Point<T>], b: &[Point<T>]) -> bool {
    for (p, q) in a.iter().zip(b) {
        if p.re != q.re {
            return p.re < q.re;
        }
        if p.im != q.im {
            return p.im < q.im;
        }
    }
    false
}

fn sorted<T: Real>(mut pts: Vec<Point<T>>) -> Vec<Point<T>> {
    pts.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .expect("finite")
            .then(a.im.partial_cmp(&b.im).expect("finite"))
    });
    pts
}

/// Single-point exchange ascent from `start`; returns the local optimum.
fn ascend<T: Real>(kernel: &LogKernel<T>, mut idx: Vec<usize>) -> Vec<usize> {
    let n_c = kernel.points.len();
    let mut in_tuple = vec![false; n_c];
    for &i in &idx {
        in_tuple[i] = true;
    }
    let mut sums: Vec<T> = (0..n_c)
        .map(|c| idx.iter().map(|&q| kernel.log_k[c][q]).sum())
        .collect();
    loop {
        let scale = T::one() + kernel.pair_sum(&idx).abs();
        let mut best: Option<(T, usize, usize)> = None;
        for (p, &tp) in idx.iter().enumerate() {
            for c in 0..n_c {
                if in_tuple[c] {
                    continue;
                }
                let gain = sums[c] - kernel.log_k[c][tp] - sums[tp];
                if gain > T::tol(1e-13) * scale && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, p, c));
                }
            }
        }
        let Some((_, p, c)) = best else {
            return idx;
        };
        let old = idx[p];
        idx[p] = c;
        in_tuple[old] = false;
        in_tuple[c] = true;
        for (s, row) in sums.iter_mut().zip(&kernel.log_k) {
            *s += row[c] - row[old];
        }
    }
}

fn greedy<T: Real>(kernel: &LogKernel<T>, n: usize) -> Vec<usize> {
    let n_c = kernel.points.len();
    let mut first = (0, 1);
    for i in 0..n_c {
        for j in i + 1..n_c {
            if kernel.log_k[i][j] > kernel.log_k[first.0][first.1] {
                first = (i, j);
            }
        }
    }
    let mut idx = vec![first.0, first.1];
    while idx.len() < n {
        let next = (0..n_c)
            .filter(|c| !idx.contains(c))
            .max_by(|&a, &b| {
                let sa: T = idx.iter().map(|&q| kernel.log_k[a][q]).sum();
                let sb: T = idx.iter().map(|&q| kernel.log_k[b][q]).sum();
                sa.partial_cmp(&sb).expect("finite").then(b.cmp(&a))
            })
            .expect("enough candidates");
        idx.push(next);
    }
    idx
}

/// Fekete search over the candidates of a cached kernel.
pub fn n_diameter_on<T: Real>(
    kernel: &LogKernel<T>,
    n: usize,
    cfg: &FeketeConfig,
) -> Result<FeketeResult<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "n-diameter needs n >= 2, got {n}"
        )));
    }
    let n_c = kernel.points.len();
    if n_c < n {
        let mut tuple = kernel.points.clone();
        while tuple.len() < n {
            tuple.push(kernel.points[0]);
        }
        return Ok(FeketeResult {
            n,
            diameter: T::zero(),
            std_err: T::zero(),
            tuple: sorted(tuple),
            n_restarts: 0,
            flags: vec![Flag::TooFewCandidates],
        });
    }
    let restarts = cfg.restarts.max(8);
    let starts: Vec<Vec<usize>> = std::iter::once(greedy(kernel, n))
        .chain((0..restarts as u64).map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r);
            sample(&mut rng, n_c, n).into_vec()
        }))
        .collect();
    let optima: Vec<Vec<usize>> = starts.into_par_iter().map(|s| ascend(kernel, s)).collect();

    let mut best: Option<(T, Vec<Point<T>>, Vec<usize>)> = None;
    for idx in optima {
        let s = kernel.pair_sum(&idx);
        let pts = sorted(idx.iter().map(|&i| kernel.points[i]).collect());
        let replace = match &best {
            None => true,
            Some((bs, bp, _)) => {
                let tie = T::lit(1e-12) * bs.abs().max(T::min_positive_value());
                s > *bs + tie || ((s - *bs).abs() <= tie && lex_less(&pts, bp))
            }
        };
        if replace {
            best = Some((s, pts, idx));
        }
    }
    let (s, tuple, idx) = best.expect("at least one start");
    let e = exponent::<T>(n);
    let diameter = (e * s).exp();
    Ok(FeketeResult {
        n,
        diameter,
        std_err: diameter * e * kernel.pair_err(&idx),
        tuple,
        n_restarts: restarts,
        flags: Vec::new(),
    })
}

/// How a tuple point may move during polish.
enum Chart<T> {
    Circle { center: Point<T>, radius: T, theta: T },
    Segment { a: Point<T>, b: Point<T>, s: T },
}

impl<T: Real> Chart<T> {
    fn locate(k: &CompactSet<T>, p: Point<T>) -> Option<Self> {
        let tol = T::tol(1e-9);
        for piece in k.pieces() {
            match piece {
                Piece::Disk { center, radius } => {
                    let v = p - *center;
                    if (v.norm() - *radius).abs() <= tol * *radius {
                        return Some(Chart::Circle {
                            center: *center,
                            radius: *radius,
                            theta: v.im.atan2(v.re),
                        });
                    }
                }
                Piece::Polyline(vs) => {
                    for s in vs.windows(2) {
                        let ab = s[1] - s[0];
                        let u = ((p - s[0]) * ab.conj()).re / ab.norm_sqr();
                        let foot = s[0] + ab * u;
                        if (p - foot).norm() <= tol * ab.norm() && u >= T::zero() && u <= T::one() {
                            return Some(Chart::Segment {
                                a: s[0],
                                b: s[1],
                                s: u,
                            });
                        }
                    }
                }
            }
        }
        None
    }

    fn param(&self) -> T {
        match self {
            Chart::Circle { theta, .. } => *theta,
            Chart::Segment { s, .. } => *s,
        }
    }

    fn at(&self, x: T) -> Point<T> {
        match self {
            Chart::Circle { center, radius, .. } => *center + Point::from_polar(*radius, x),
            Chart::Segment { a, b, .. } => *a + (*b - *a) * x,
        }
    }

    fn bracket(&self, n: usize) -> (T, T) {
        let x = self.param();
        match self {
            Chart::Circle { .. } => {
                let h = T::PI() / T::lit(n as f64);
                (x - h, x + h)
            }
            Chart::Segment { .. } => {
                let h = T::lit(0.5 / n as f64);
                ((x - h).max(T::zero()), (x + h).min(T::one()))
            }
        }
    }
}

/// Golden-section maximization of `f` on `[a, b]`.
fn golden_max<T: Real>(f: impl Fn(T) -> T, mut a: T, mut b: T) -> T {
    let r = T::lit(0.5 * (5f64.sqrt() - 1.0));
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) / T::lit(2.0)
}

/// Coordinate-wise continuous ascent of the tuple along its pieces.
fn polish<T: Real>(
    k: &CompactSet<T>,
    tuple: &mut [Point<T>],
    log_k: &(dyn Fn(Point<T>, Point<T>) -> T + Sync),
) {
    let n = tuple.len();
    let total = |t: &[Point<T>]| -> T {
        let mut s = T::zero();
        for a in 0..t.len() {
            for b in a + 1..t.len() {
                s += log_k(t[a], t[b]);
            }
        }
        s
    };
    for _ in 0..50 {
        let before = total(tuple);
        for i in 0..n {
            let Some(chart) = Chart::locate(k, tuple[i]) else {
                continue;
            };
            let local = |p: Point<T>| -> T { (0..n).filter(|&j| j != i).map(|j| log_k(p, tuple[j])).sum() };
            let (lo, hi) = chart.bracket(n);
            let x = golden_max(|x| local(chart.at(x)), lo, hi);
            let cand = chart.at(x);
            if local(cand) > local(tuple[i]) {
                tuple[i] = cand;
            }
        }
        if total(tuple) - before <= T::tol(1e-14) * (T::one() + before.abs()) {
            break;
        }
    }
}

/// n-th diameter of `K` over the candidate grid of `K.discretize(m)`,
/// polished along `K` when the metric has a pointwise formula.
pub fn n_diameter<T: Real>(
    k: &CompactSet<T>,
    n: usize,
    metric: &Metric<T>,
    m: usize,
    cfg: &FeketeConfig,
) -> Result<FeketeResult<T>> {
    let grid = k.discretize(m)?.candidates;
    if grid.len() < 4 * n {
        return Err(Error::Precondition(format!(
            "candidate grid has {} points, need at least {}",
            grid.len(),
            4 * n
        )));
    }
    let kernel = LogKernel::from_metric(&grid, metric)?;
    finish_tuple(k, n_diameter_on(&kernel, n, cfg)?, metric, cfg)
}

fn finish_tuple<T: Real>(
    k: &CompactSet<T>,
    mut res: FeketeResult<T>,
    metric: &Metric<T>,
    cfg: &FeketeConfig,
) -> Result<FeketeResult<T>> {
    if !cfg.polish || res.diameter == T::zero() {
        return Ok(res);
    }
    if let Some(f) = metric.pointwise() {
        polish(k, &mut res.tuple, f.as_ref());
        let mut s = T::zero();
        for a in 0..res.n {
            for b in a + 1..res.n {
                s += f(res.tuple[a], res.tuple[b]);
            }
        }
        res.diameter = (exponent::<T>(res.n) * s).exp();
        res.tuple = sorted(std::mem::take(&mut res.tuple));
    }
    Ok(res)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaphEstimate<T> {
    pub value: T,
    /// `d_{2,h}, …, d_{n_max,h}`.
    pub sequence: Vec<FeketeResult<T>>,
    pub flags: Vec<Flag>,
}

/// Extrapolates `caph K = lim d_{n,h}` from `d_2 … d_{n_max}`.
///
/// Fits `log d_n − log(n)/(n−1) = L + a/(n−1)` over `n ≥ 4` and returns
/// `e^L`. The `log n` term is the self-energy of `n` point charges and is
/// exact for equally spaced points on a circle.
pub fn caph_estimate<T: Real>(
    k: &CompactSet<T>,
    src: &GreenSource<T>,
    n_max: usize,
    m: usize,
    cfg: &FeketeConfig,
) -> Result<CaphEstimate<T>> {
    let metric = Metric::Hyperbolic(src.clone());
    let kernel = LogKernel::from_metric(&k.discretize(m)?.candidates, &metric)?;
    caph_from(&kernel, n_max, cfg, |r| finish_tuple(k, r, &metric, cfg))
}

/// [`caph_estimate`] over an explicit cached kernel, without polish.
pub fn caph_estimate_on<T: Real>(
    kernel: &LogKernel<T>,
    n_max: usize,
    cfg: &FeketeConfig,
) -> Result<CaphEstimate<T>> {
    caph_from(kernel, n_max, cfg, Ok)
}

fn caph_from<T: Real>(
    kernel: &LogKernel<T>,
    n_max: usize,
    cfg: &FeketeConfig,
    refine: impl Fn(FeketeResult<T>) -> Result<FeketeResult<T>>,
) -> Result<CaphEstimate<T>> {
    if n_max < 6 {
        return Err(Error::InvalidParameter(format!(
            "caph needs n_max >= 6, got {n_max}"
        )));
    }
    let sequence: Vec<FeketeResult<T>> = (2..=n_max)
        .map(|n| refine(n_diameter_on(kernel, n, cfg)?))
        .collect::<Result<_>>()?;
    let mut flags = Vec::new();
    for p in sequence.windows(2) {
        let slack = T::lit(3.0) * (p[0].std_err + p[1].std_err) + T::tol(1e-9) * p[0].diameter;
        if p[1].diameter > p[0].diameter + slack {
            flags.push(Flag::NonMonotone);
            break;
        }
    }
    if sequence.iter().any(|r| r.diameter == T::zero()) {
        return Ok(CaphEstimate {
            value: T::zero(),
            sequence,
            flags,
        });
    }
    let pts: Vec<(f64, f64)> = sequence
        .iter()
        .filter(|r| r.n >= 4)
        .map(|r| {
            let nm1 = (r.n - 1) as f64;
            (1.0 / nm1, r.diameter.as_f64().ln() - (r.n as f64).ln() / nm1)
        })
        .collect();
    let (intercept, _) = linear_fit(&pts);
    Ok(CaphEstimate {
        value: T::lit(intercept.exp()),
        sequence,
        flags,
    })
}

/// Least-squares line `y = c + a·x`, returned as `(c, a)`.
fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - a * mx, a)
}

/// Exhaustive maximum of `S` over all `n`-subsets of the kernel's
/// candidates, as `(S, sorted tuple)`. For verification on small grids.
pub fn exhaustive<T: Real>(kernel: &LogKernel<T>, n: usize) -> (T, Vec<Point<T>>) {
    let n_c = kernel.points.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut best: Option<(T, Vec<Point<T>>)> = None;
    loop {
        let s = kernel.pair_sum(&idx);
        let pts = sorted(idx.iter().map(|&i| kernel.points[i]).collect());
        let replace = match &best {
            None => true,
            Some((bs, bp)) => {
                let tie = T::lit(1e-12) * bs.abs().max(T::min_positive_value());
                s > *bs + tie || ((s - *bs).abs() <= tie && lex_less(&pts, bp))
            }
        };
        if replace {
            best = Some((s, pts));
        }
        // Next combination in lexicographic order.
        let mut i = n;
        while i > 0 && idx[i - 1] == n_c - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
    best.expect("n <= candidates")
}

/// `exp(2S/(n(n−1)))` for a pair-sum `S`.
pub fn diameter_from_sum<T: Real>(s: T, n: usize) -> T {
    (exponent::<T>(n) * s).exp()
}
