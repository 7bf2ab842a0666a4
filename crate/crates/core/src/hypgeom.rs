//! Hyperbolic area, quasi-hyperbolic density, and the deterministic
//! distance, Green and density bounds in terms of `δ_{Ω−t}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::compacts::{AreaNode, CompactSet};
use crate::domains::KoenigsDomain;
use crate::error::{Error, Result};
use crate::kernel::{GreenSource, KernelSource};
use crate::quadrature::gauss_legendre;
use crate::wos::WosConfig;
use crate::{Point, Real};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AreaResult<T> {
    pub value: T,
    pub std_err: T,
    pub n_nodes: usize,
    /// `|value(m) − value(m/2)|`.
    pub refinement_error: T,
    pub lambda_source: KernelSource,
}

/// `1/δ_{Ω−t}(w)`.
pub fn quasi_density<T: Real>(w: Point<T>, domain: &KoenigsDomain<T>, t: T) -> Result<T> {
    Ok(T::one() / domain.shifted_distance(w, t)?)
}

/// `(1/(4δ), 1/δ)`, the Koebe bounds on `λ_{Ω−t}(w)`.
pub fn density_bounds<T: Real>(w: Point<T>, domain: &KoenigsDomain<T>, t: T) -> Result<(T, T)> {
    let q = quasi_density(w, domain, t)?;
    Ok((q / T::lit(4.0), q))
}

/// `¼ log(1 + |z − w| / min(δ(z), δ(w)))`.
pub fn distance_lower_bound<T: Real>(z: Point<T>, w: Point<T>, domain: &KoenigsDomain<T>, t: T) -> Result<T> {
    if z == w {
        return Err(Error::Precondition("distance bound needs z != w".into()));
    }
    let dz = domain.shifted_distance(z, t)?;
    let dw = domain.shifted_distance(w, t)?;
    Ok(((z - w).norm() / dz.min(dw)).ln_1p() / T::lit(4.0))
}

/// `−log tanh` of [`distance_lower_bound`].
pub fn green_upper_bound<T: Real>(z: Point<T>, w: Point<T>, domain: &KoenigsDomain<T>, t: T) -> Result<T> {
    Ok(neg_log_tanh(distance_lower_bound(z, w, domain, t)?))
}

/// `−log tanh x`, accurate for large `x`.
pub fn neg_log_tanh<T: Real>(x: T) -> T {
    let e = (-T::lit(2.0) * x).exp();
    e.ln_1p() - (-e).ln_1p()
}

/// Quasi-hyperbolic length of the straight segment `[z, w]` in `Ω − t`:
/// composite Gauss–Legendre quadrature of `1/δ` with `panels × 10` nodes.
pub fn quasi_segment_length<T: Real>(
    z: Point<T>,
    w: Point<T>,
    domain: &KoenigsDomain<T>,
    t: T,
    panels: usize,
) -> Result<T> {
    let (x, wt) = gauss_legendre(10);
    let len = (w - z).norm();
    let mut total = T::zero();
    for p in 0..panels {
        let (a, b) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
        for (xi, wi) in x.iter().zip(&wt) {
            let s = T::lit(0.5 * (a + b) + 0.5 * (b - a) * xi);
            let q = quasi_density(z + (w - z) * s, domain, t)?;
            total += T::lit(0.5 * (b - a) * wi) * q;
        }
    }
    Ok(total * len)
}

/// `∫_K λ² dA` over the area nodes, with its standard error.
fn area_sum<T: Real>(nodes: &[AreaNode<T>], src: &GreenSource<T>) -> Result<(T, T)> {
    let parts: Vec<(T, T)> = nodes
        .par_iter()
        .enumerate()
        .map(|(i, n)| {
            let (l, s) = src.density(n.point, i as u64)?;
            let two = T::lit(2.0);
            Ok((n.weight * l * l, n.weight * two * l * s))
        })
        .collect::<Result<_>>()?;
    let value = parts.iter().map(|p| p.0).sum();
    let var: T = parts.iter().map(|p| p.1 * p.1).sum();
    Ok((value, var.sqrt()))
}

/// Hyperbolic area of `K` in `Ω − t`, using the closed-form density when `Ω`
/// has one and walk-on-spheres otherwise.
pub fn hyp_area<T: Real>(
    k: &CompactSet<T>,
    domain: &KoenigsDomain<T>,
    t: T,
    m: usize,
    cfg: &WosConfig,
) -> Result<AreaResult<T>> {
    hyp_area_with(k, &GreenSource::for_domain(domain, t, cfg), m)
}

/// [`hyp_area`] with an explicit density source.
pub fn hyp_area_with<T: Real>(k: &CompactSet<T>, src: &GreenSource<T>, m: usize) -> Result<AreaResult<T>> {
    if m < 16 {
        return Err(Error::InvalidParameter(format!(
            "hyp_area needs m >= 16, got {m}"
        )));
    }
    if !k.has_area() {
        return Ok(AreaResult {
            value: T::zero(),
            std_err: T::zero(),
            n_nodes: 0,
            refinement_error: T::zero(),
            lambda_source: src.source(),
        });
    }
    let fine = k.discretize(m)?.area_nodes;
    let coarse = k.discretize(m / 2)?.area_nodes;
    let (value, std_err) = area_sum(&fine, src)?;
    let (half, _) = area_sum(&coarse, src)?;
    Ok(AreaResult {
        value,
        std_err,
        n_nodes: fine.len(),
        refinement_error: (value - half).abs(),
        lambda_source: src.source(),
    })
}
