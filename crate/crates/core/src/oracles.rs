//! Closed-form hyperbolic density, distance, Green function and harmonic
//! measure for the disk, half-planes and horizontal strips.
//!
//! Normalization: `λ_𝔻(z) = 1/(1 − |z|²)`, `tanh d = pseudo-hyperbolic
//! distance`, and the Green function is positive: `g = −log tanh d`.

use crate::error::{Error, Result};
use crate::{Point, Real};

/// Density at the first point, distance and Green function between the two.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricTriple<T> {
    pub density: T,
    pub distance: T,
    /// `+∞` when the points coincide.
    pub green: T,
}

impl<T: Real> MetricTriple<T> {
    /// Builds the triple from `log Q`, where `cosh 2d = 1 + Q`. Working with
    /// `Q` keeps both tails accurate: `g = ½ log1p(2/Q)` for distant points
    /// and `d = ½ acosh(1 + Q)` for close ones.
    fn from_log_q(density: T, log_q: T) -> Self {
        let half = T::lit(0.5);
        let q = log_q.exp();
        let distance = if log_q > T::lit(30.0) {
            half * (log_q + T::LN_2())
        } else {
            half * (q + (q * (q + T::lit(2.0))).sqrt()).ln_1p()
        };
        Self {
            density,
            distance,
            green: half * (T::lit(2.0) / q).ln_1p(),
        }
    }
}

pub fn disk_metrics<T: Real>(z: Point<T>, w: Point<T>) -> Result<MetricTriple<T>> {
    for p in [z, w] {
        if !(p.norm_sqr() < T::one()) {
            return Err(Error::outside(p, "unit disk"));
        }
    }
    let (az, aw) = (T::one() - z.norm_sqr(), T::one() - w.norm_sqr());
    let q = T::lit(2.0) * (z - w).norm_sqr() / (az * aw);
    Ok(MetricTriple::from_log_q(T::one() / az, q.ln()))
}

/// Metrics of the half-plane `{Im > 0}`.
pub fn halfplane_metrics<T: Real>(z: Point<T>, w: Point<T>) -> Result<MetricTriple<T>> {
    shifted_halfplane_metrics(z, w, T::zero())
}

fn shifted_halfplane_metrics<T: Real>(z: Point<T>, w: Point<T>, y0: T) -> Result<MetricTriple<T>> {
    for p in [z, w] {
        if !(p.im > y0) {
            return Err(Error::outside(p, "half-plane"));
        }
    }
    let (yz, yw) = (z.im - y0, w.im - y0);
    let q = (z - w).norm_sqr() / (T::lit(2.0) * yz * yw);
    Ok(MetricTriple::from_log_q(T::one() / (T::lit(2.0) * yz), q.ln()))
}

/// Metrics of the strip `{y0 < Im < y1}`, through `w ↦ exp(π(w − i y0)/L)`
/// onto the upper half-plane. In rescaled coordinates `u = Δ + i a`,
/// `Q = 2(sinh²(Δ/2) + sin²((a_z − a_w)/2)) / (sin a_z sin a_w)`, which
/// depends only on the real offset and stays finite for far-apart points.
pub fn strip_metrics<T: Real>(z: Point<T>, w: Point<T>, y0: T, y1: T) -> Result<MetricTriple<T>> {
    if !(y0 < y1) {
        return Err(Error::InvalidParameter(format!(
            "strip needs y0 < y1, got ({y0}, {y1})"
        )));
    }
    for p in [z, w] {
        if !(y0 < p.im && p.im < y1) {
            return Err(Error::outside(p, "strip"));
        }
    }
    let two = T::lit(2.0);
    let scale = T::PI() / (y1 - y0);
    let (az, aw) = ((z.im - y0) * scale, (w.im - y0) * scale);
    let half_dx = ((z.re - w.re) * scale / two).abs();
    let sy = ((az - aw) / two).sin();
    let log_sum = if half_dx > T::lit(20.0) {
        two * half_dx - two * T::LN_2()
    } else {
        let sh = half_dx.sinh();
        (sh * sh + sy * sy).ln()
    };
    let log_q = T::LN_2() + log_sum - (az.sin() * aw.sin()).ln();
    Ok(MetricTriple::from_log_q(scale / (two * az.sin()), log_q))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

/// Harmonic measure of one boundary line of a strip.
pub fn strip_harmonic_measure<T: Real>(z: Point<T>, y0: T, y1: T, side: Side) -> Result<T> {
    if !(y0 < z.im && z.im < y1) {
        return Err(Error::outside(z, "strip"));
    }
    let up = (z.im - y0) / (y1 - y0);
    Ok(match side {
        Side::Upper => up,
        Side::Lower => T::one() - up,
    })
}

/// Harmonic measure of `{|w| ≤ r}` at a point of modulus `z_abs` in the unit
/// disk, and the condenser capacity `Cap(𝔻, {|w| ≤ r})`.
pub fn disk_concentric<T: Real>(z_abs: T, r: T) -> Result<(T, T)> {
    if !(T::zero() < r && r < z_abs && z_abs < T::one()) {
        return Err(Error::Precondition(format!(
            "need 0 < r < |z| < 1, got r={r}, |z|={z_abs}"
        )));
    }
    let omega = z_abs.ln() / r.ln();
    let cap = T::TAU() / (T::one() / r).ln();
    Ok((omega, cap))
}

/// Harmonic measure of the real segment `[a, b]` in the upper half-plane:
/// the angle it subtends at `z`, over `π`.
pub fn halfplane_segment_measure<T: Real>(z: Point<T>, a: T, b: T) -> Result<T> {
    if !(z.im > T::zero()) {
        return Err(Error::outside(z, "half-plane"));
    }
    if !(a < b) {
        return Err(Error::InvalidParameter(format!("need a < b, got [{a}, {b}]")));
    }
    let angle = ((b - z.re) / z.im).atan() - ((a - z.re) / z.im).atan();
    Ok(angle / T::PI())
}

/// Density of harmonic measure of the strip `{0 < Im < 1}` on its upper
/// line, at boundary abscissa `s`.
pub fn unit_strip_upper_poisson<T: Real>(z: Point<T>, s: T) -> T {
    let (sy, cy) = (T::PI() * z.im).sin_cos();
    sy / (T::lit(2.0) * ((T::PI() * (z.re - s)).cosh() + cy))
}

/// Harmonic measure of the segment `[a, b]` of the lower line of
/// `{0 < Im < 1}` (via `w ↦ e^{πw}`).
pub fn unit_strip_lower_segment_measure<T: Real>(z: Point<T>, a: T, b: T) -> Result<T> {
    if !(T::zero() < z.im && z.im < T::one()) {
        return Err(Error::outside(z, "strip"));
    }
    let zeta = (z * T::PI()).exp();
    halfplane_segment_measure(zeta, (T::PI() * a).exp(), (T::PI() * b).exp())
}

/// Domains with closed-form metrics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClosedForm<T> {
    Disk,
    HalfPlane { y0: T },
    Strip { y0: T, y1: T },
}

impl<T: Real> ClosedForm<T> {
    pub fn contains(&self, z: Point<T>) -> bool {
        match *self {
            ClosedForm::Disk => z.norm_sqr() < T::one(),
            ClosedForm::HalfPlane { y0 } => z.im > y0,
            ClosedForm::Strip { y0, y1 } => y0 < z.im && z.im < y1,
        }
    }

    pub fn metrics(&self, z: Point<T>, w: Point<T>) -> Result<MetricTriple<T>> {
        match *self {
            ClosedForm::Disk => disk_metrics(z, w),
            ClosedForm::HalfPlane { y0 } => shifted_halfplane_metrics(z, w, y0),
            ClosedForm::Strip { y0, y1 } => strip_metrics(z, w, y0, y1),
        }
    }

    pub fn density(&self, z: Point<T>) -> Result<T> {
        Ok(self.metrics(z, z)?.density)
    }

    pub fn green(&self, z: Point<T>, w: Point<T>) -> Result<T> {
        Ok(self.metrics(z, w)?.green)
    }

    pub fn distance(&self, z: Point<T>, w: Point<T>) -> Result<T> {
        Ok(self.metrics(z, w)?.distance)
    }

    pub fn label(&self) -> String {
        match *self {
            ClosedForm::Disk => "unit-disk".into(),
            ClosedForm::HalfPlane { y0 } => format!("half-plane({y0})"),
            ClosedForm::Strip { y0, y1 } => format!("strip({y0}, {y1})"),
        }
    }
}
