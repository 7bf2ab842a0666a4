//! Green equilibrium measures, Green energy `V(K, D)` and condenser capacity
//! `Cap(D, K) = 2π / V`.
//!
//! The measure is discretized as point masses on boundary nodes of `K`. The
//! self-interaction of node `i` is `g(x_i, x_i + ℓ_i/(2π) · n_i)`, where `ℓ_i`
//! is the node's arc weight and `n_i` its normal. This offset makes the
//! diagonal consistent with the point-evaluated off-diagonal sum, so the
//! energy of a smooth density converges at `O(1/m²)`.

use serde::Serialize;

use crate::compacts::{BoundaryNode, CompactSet};
use crate::domains::KoenigsDomain;
use crate::error::{Error, Result};
use crate::kernel::{GreenMatrix, GreenSource, KernelSource};
use crate::wos::{Flag, WosConfig};
use crate::{Point, Real};

use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumResult<T> {
    /// Green energy `V = wᵀGw`.
    pub energy: T,
    /// `2π / V`.
    pub capacity: T,
    /// Propagated Monte Carlo error of `V` (zero for oracle kernels).
    pub std_err: T,
    pub weights: Vec<T>,
    pub nodes: Vec<Point<T>>,
    pub kernel_source: KernelSource,
    pub iterations: usize,
    pub flags: Vec<Flag>,
}

impl<T: Real> EquilibriumResult<T> {
    /// Standard error of the capacity by the delta method.
    pub fn capacity_std_err(&self) -> T {
        self.capacity * self.std_err / self.energy
    }
}

/// Point used for the self-interaction of a node.
fn self_point<T: Real>(n: &BoundaryNode<T>) -> Point<T> {
    n.point + n.normal * (n.weight / T::TAU())
}

/// Symmetric Green matrix over boundary nodes with the regularized
/// diagonal, and per-entry standard errors.
pub fn green_matrix<T: Real>(nodes: &[BoundaryNode<T>], src: &GreenSource<T>) -> Result<GreenMatrix<T>> {
    let points: Vec<Point<T>> = nodes.iter().map(|n| n.point).collect();
    for i in 1..points.len() {
        if points[..i].contains(&points[i]) {
            return Err(Error::Precondition("green matrix nodes must be distinct".into()));
        }
    }
    let rows: Vec<Vec<(T, T)>> = nodes
        .par_iter()
        .enumerate()
        .map(|(i, n)| {
            let mut targets = points.clone();
            targets[i] = self_point(n);
            src.row(n.point, &targets, i as u64)
        })
        .collect::<Result<_>>()?;
    let (g, s) = crate::kernel::symmetrize(&rows);
    if g.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("green matrix has a non-finite entry".into()));
    }
    Ok((g, s))
}

/// Outcome of [`simplex_qp`].
#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution<T> {
    pub weights: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub converged: bool,
}

fn mat_vec<T: Real>(g: &[Vec<T>], w: &[T]) -> Vec<T> {
    g.iter()
        .map(|row| row.iter().zip(w).map(|(a, b)| *a * *b).sum())
        .collect()
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex<T: Real>(v: &[T]) -> Vec<T> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut acc = T::zero();
    let mut theta = T::zero();
    for (k, &x) in u.iter().enumerate() {
        acc += x;
        let cand = (acc - T::one()) / T::lit((k + 1) as f64);
        if x - cand > T::zero() {
            theta = cand;
        }
    }
    v.iter().map(|x| (*x - theta).max(T::zero())).collect()
}

/// Minimizes `wᵀGw` over the probability simplex.
///
/// Projected gradient with a Barzilai–Borwein trial step and exact line
/// search along the projected direction. When the direction has
/// nonpositive curvature a Frank–Wolfe vertex step is taken instead.
/// Stops when the objective drops by less than `1e−10` over 50 iterations.
pub fn simplex_qp<T: Real>(g: &[Vec<T>], max_iter: usize) -> QpSolution<T> {
    let n = g.len();
    let two = T::lit(2.0);
    let mut w = vec![T::one() / T::lit(n as f64); n];
    let scale = g
        .iter()
        .flatten()
        .fold(T::zero(), |a, b| a.max(b.abs()))
        .max(T::min_positive_value());
    let mut alpha = T::one() / (two * scale);
    let mut gw = mat_vec(g, &w);
    let mut history = vec![dot(&w, &gw)];
    let (mut prev_w, mut prev_grad): (Option<Vec<T>>, Option<Vec<T>>) = (None, None);
    let tol = T::tol(1e-10);

    for it in 0..max_iter {
        let grad: Vec<T> = gw.iter().map(|x| *x * two).collect();
        if let (Some(pw), Some(pg)) = (&prev_w, &prev_grad) {
            let s: Vec<T> = w.iter().zip(pw).map(|(a, b)| *a - *b).collect();
            let y: Vec<T> = grad.iter().zip(pg).map(|(a, b)| *a - *b).collect();
            let sy = dot(&s, &y);
            if sy > T::zero() {
                alpha = dot(&s, &s) / sy;
            }
        }
        let trial: Vec<T> = w.iter().zip(&grad).map(|(x, d)| *x - alpha * *d).collect();
        let mut d: Vec<T> = project_simplex(&trial)
            .iter()
            .zip(&w)
            .map(|(a, b)| *a - *b)
            .collect();
        let mut gd = mat_vec(g, &d);
        let mut curv = dot(&d, &gd);
        let mut slope = dot(&grad, &d);
        if !(curv > T::zero()) || !(slope < T::zero()) {
            // Frank–Wolfe: move toward the best vertex.
            let k = (0..n)
                .min_by(|&a, &b| grad[a].partial_cmp(&grad[b]).expect("finite"))
                .expect("nonempty");
            d = w.iter().map(|x| -*x).collect();
            d[k] += T::one();
            gd = mat_vec(g, &d);
            curv = dot(&d, &gd);
            slope = dot(&grad, &d);
        }
        if !(slope < T::zero()) {
            return finish(g, w, it, true);
        }
        let tau = if curv > T::zero() {
            (-slope / (two * curv)).min(T::one())
        } else {
            T::one()
        };
        prev_w = Some(w.clone());
        prev_grad = Some(grad);
        for i in 0..n {
            w[i] = (w[i] + tau * d[i]).max(T::zero());
            gw[i] += tau * gd[i];
        }
        let value = dot(&w, &gw);
        history.push(value);
        if history.len() > 50 {
            let old = history[history.len() - 51];
            if old - value < tol * value.abs().max(T::one()) {
                return finish(g, w, it + 1, true);
            }
        }
    }
    finish(g, w, max_iter, false)
}

fn finish<T: Real>(g: &[Vec<T>], w: Vec<T>, iterations: usize, converged: bool) -> QpSolution<T> {
    let total: T = w.iter().copied().sum();
    let w: Vec<T> = w.into_iter().map(|x| x / total).collect();
    let value = dot(&w, &mat_vec(g, &w));
    QpSolution {
        weights: w,
        value,
        iterations,
        converged,
    }
}

/// Green equilibrium measure of `K` in `Ω − t` with `m` boundary nodes.
pub fn equilibrium<T: Real>(
    k: &CompactSet<T>,
    domain: &KoenigsDomain<T>,
    t: T,
    m: usize,
    cfg: &WosConfig,
) -> Result<EquilibriumResult<T>> {
    equilibrium_with(k, &GreenSource::for_domain(domain, t, cfg), m)
}

/// [`equilibrium`] with an explicit kernel.
pub fn equilibrium_with<T: Real>(
    k: &CompactSet<T>,
    src: &GreenSource<T>,
    m: usize,
) -> Result<EquilibriumResult<T>> {
    if m < 16 {
        return Err(Error::InvalidParameter(format!(
            "equilibrium needs m >= 16, got {m}"
        )));
    }
    let nodes = k.discretize(m)?.boundary_nodes;
    let (g, s) = green_matrix(&nodes, src)?;
    let sol = simplex_qp(&g, 100_000);
    if !(sol.value > T::zero()) {
        return Err(Error::Precondition(format!(
            "nonpositive Green energy {}; kernel is not positive definite",
            sol.value
        )));
    }
    let w = &sol.weights;
    let mut var = T::zero();
    for i in 0..w.len() {
        for j in 0..w.len() {
            let e = w[i] * w[j] * s[i][j];
            var += e * e;
        }
    }
    let mut flags = Vec::new();
    if !sol.converged {
        flags.push(Flag::NotConverged);
    }
    Ok(EquilibriumResult {
        energy: sol.value,
        capacity: T::TAU() / sol.value,
        std_err: var.sqrt(),
        weights: sol.weights,
        nodes: nodes.iter().map(|n| n.point).collect(),
        kernel_source: src.source(),
        iterations: sol.iterations,
        flags,
    })
}

/// `Cap(Ω − t, K) = 2π / V(K, Ω − t)`; same computation as [`equilibrium`].
pub fn condenser_capacity<T: Real>(
    k: &CompactSet<T>,
    domain: &KoenigsDomain<T>,
    t: T,
    m: usize,
    cfg: &WosConfig,
) -> Result<EquilibriumResult<T>> {
    equilibrium(k, domain, t, m, cfg)
}

/// Green potential `Σ w_j g(z, x_j)` of the discrete equilibrium measure.
/// Divided by `V` this is the harmonic measure `ω(z, K, D)` off `K`.
pub fn equilibrium_potential<T: Real>(
    eq: &EquilibriumResult<T>,
    src: &GreenSource<T>,
    z: Point<T>,
) -> Result<T> {
    let row = src.row(z, &eq.nodes, u64::MAX)?;
    Ok(row.iter().zip(&eq.weights).map(|((g, _), w)| *g * *w).sum())
}
