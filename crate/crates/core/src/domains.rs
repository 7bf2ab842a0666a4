//! Koenigs domains, their petals, and the translation flow.
//!
//! A Koenigs domain is closed under `w ↦ w + s` for `s ≥ 0`. The semigroup
//! acts as translation, so the backward orbit at time `t ≤ 0` of a point `w`
//! of a petal is `w + t`, and every query about `Ω − t` reduces to a query
//! about `Ω` at the shifted point.

use crate::error::{Error, Result};
use crate::oracles::ClosedForm;
use crate::scalar::{is_finite_point, shift};
use crate::{Point, Real};

/// A removed horizontal half-line `{Im w = y, Re w ≤ x}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slit<T> {
    pub y: T,
    pub x: T,
}

impl<T: Real> Slit<T> {
    #[inline]
    fn closest(&self, w: Point<T>) -> (T, Point<T>) {
        if w.re <= self.x {
            ((w.im - self.y).abs(), Point::new(w.re, self.y))
        } else {
            let tip = Point::new(self.x, self.y);
            ((w - tip).norm(), tip)
        }
    }

    #[inline]
    fn covers(&self, w: Point<T>) -> bool {
        w.im == self.y && w.re <= self.x
    }
}

/// The closed catalog of domain shapes.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape<T> {
    /// The unit disk. Not a Koenigs domain; used as the model geometry for
    /// oracle fixtures.
    UnitDisk,
    UpperHalfPlane,
    HorizontalStrip {
        y0: T,
        y1: T,
    },
    /// `{0 < Im w < height}` minus the slits.
    SlitStrip {
        height: T,
        slits: Vec<Slit<T>>,
    },
    /// `{Im w > 0}` minus the slits.
    SlitHalfPlane {
        slits: Vec<Slit<T>>,
    },
    /// `{Im w > −exp(Re w)}`; the line `Im w = 0` is a degenerate petal.
    ExpCusp,
}

/// Which model a petal's image is.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PetalKind<T> {
    HyperbolicStrip { y0: T, y1: T },
    ParabolicHalfPlane { y0: T },
    DegenerateLine { y0: T },
}

/// A maximal horizontal strip, half-plane or degenerate line inside a domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Petal<T> {
    pub kind: PetalKind<T>,
    pub parent: KoenigsDomain<T>,
}

/// A validated catalog domain. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct KoenigsDomain<T> {
    shape: Shape<T>,
}

fn validate_slits<T: Real>(slits: &mut [Slit<T>], top: Option<T>) -> Result<()> {
    for s in slits.iter() {
        if !(s.x.is_finite() && s.y.is_finite()) {
            return Err(Error::InvalidParameter("slit coordinates must be finite".into()));
        }
        let inside = s.y > T::zero() && top.is_none_or(|h| s.y < h);
        if !inside {
            return Err(Error::InvalidParameter(format!(
                "slit ordinate {} must lie strictly inside the domain",
                s.y
            )));
        }
    }
    slits.sort_by(|a, b| a.y.partial_cmp(&b.y).expect("finite"));
    if slits.windows(2).any(|p| p[0].y == p[1].y) {
        return Err(Error::InvalidParameter("slit ordinates must be distinct".into()));
    }
    Ok(())
}

impl<T: Real> KoenigsDomain<T> {
    pub fn new(shape: Shape<T>) -> Result<Self> {
        let shape = match shape {
            Shape::HorizontalStrip { y0, y1 } => {
                if !(y0.is_finite() && y1.is_finite() && y0 < y1) {
                    return Err(Error::InvalidParameter(format!(
                        "strip needs finite y0 < y1, got ({y0}, {y1})"
                    )));
                }
                Shape::HorizontalStrip { y0, y1 }
            }
            Shape::SlitStrip { height, mut slits } => {
                if !(height.is_finite() && height > T::zero()) {
                    return Err(Error::InvalidParameter(format!(
                        "slit strip height must be positive, got {height}"
                    )));
                }
                validate_slits(&mut slits, Some(height))?;
                Shape::SlitStrip { height, slits }
            }
            Shape::SlitHalfPlane { mut slits } => {
                validate_slits(&mut slits, None)?;
                Shape::SlitHalfPlane { slits }
            }
            other => other,
        };
        Ok(Self { shape })
    }

    pub fn unit_disk() -> Self {
        Self {
            shape: Shape::UnitDisk,
        }
    }

    pub fn upper_half_plane() -> Self {
        Self {
            shape: Shape::UpperHalfPlane,
        }
    }

    pub fn strip(y0: T, y1: T) -> Result<Self> {
        Self::new(Shape::HorizontalStrip { y0, y1 })
    }

    pub fn slit_strip(height: T, slits: Vec<Slit<T>>) -> Result<Self> {
        Self::new(Shape::SlitStrip { height, slits })
    }

    pub fn slit_half_plane(slits: Vec<Slit<T>>) -> Result<Self> {
        Self::new(Shape::SlitHalfPlane { slits })
    }

    pub fn exp_cusp() -> Self {
        Self {
            shape: Shape::ExpCusp,
        }
    }

    pub fn shape(&self) -> &Shape<T> {
        &self.shape
    }

    /// Short kebab-case name, matching the configuration syntax.
    pub fn name(&self) -> &'static str {
        match self.shape {
            Shape::UnitDisk => "unit-disk",
            Shape::UpperHalfPlane => "upper-half-plane",
            Shape::HorizontalStrip { .. } => "horizontal-strip",
            Shape::SlitStrip { .. } => "slit-strip",
            Shape::SlitHalfPlane { .. } => "slit-half-plane",
            Shape::ExpCusp => "exp-cusp",
        }
    }

    /// Whether the shape is convex in the positive direction. Only the unit
    /// disk is not.
    pub fn is_koenigs(&self) -> bool {
        !matches!(self.shape, Shape::UnitDisk)
    }

    /// Membership in the open domain. Boundary and slit points are outside.
    pub fn contains(&self, w: Point<T>) -> bool {
        if !is_finite_point(w) {
            return false;
        }
        match &self.shape {
            Shape::UnitDisk => w.norm_sqr() < T::one(),
            Shape::UpperHalfPlane => w.im > T::zero(),
            Shape::HorizontalStrip { y0, y1 } => *y0 < w.im && w.im < *y1,
            Shape::SlitStrip { height, slits } => {
                w.im > T::zero() && w.im < *height && !slits.iter().any(|s| s.covers(w))
            }
            Shape::SlitHalfPlane { slits } => w.im > T::zero() && !slits.iter().any(|s| s.covers(w)),
            Shape::ExpCusp => w.im > -w.re.exp(),
        }
    }

    /// Euclidean distance from `w` to the boundary set together with a
    /// nearest boundary point. Valid on either side of the boundary; callers
    /// that need the interior distance check [`contains`](Self::contains).
    pub fn closest_boundary(&self, w: Point<T>) -> (T, Point<T>) {
        match &self.shape {
            Shape::UnitDisk => {
                let r = w.norm();
                let foot = if r > T::zero() {
                    w / r
                } else {
                    Point::new(T::one(), T::zero())
                };
                ((T::one() - r).abs(), foot)
            }
            Shape::UpperHalfPlane => (w.im.abs(), Point::new(w.re, T::zero())),
            Shape::HorizontalStrip { y0, y1 } => {
                let lo = (w.im - *y0).abs();
                let hi = (*y1 - w.im).abs();
                if lo <= hi {
                    (lo, Point::new(w.re, *y0))
                } else {
                    (hi, Point::new(w.re, *y1))
                }
            }
            Shape::SlitStrip { height, slits } => {
                let mut best = (w.im.abs(), Point::new(w.re, T::zero()));
                let top = (*height - w.im).abs();
                if top < best.0 {
                    best = (top, Point::new(w.re, *height));
                }
                nearest_slit(slits, w, best)
            }
            Shape::SlitHalfPlane { slits } => {
                nearest_slit(slits, w, (w.im.abs(), Point::new(w.re, T::zero())))
            }
            Shape::ExpCusp => exp_cusp_closest(w),
        }
    }

    /// Distance to `∂Ω` for a point of `Ω`.
    pub fn distance_to_boundary(&self, w: Point<T>) -> Result<T> {
        if !self.contains(w) {
            return Err(Error::outside(w, "domain"));
        }
        Ok(self.closest_boundary(w).0)
    }

    /// `δ_{Ω−t}(w)`, computed as `δ_Ω(w + t)`.
    pub fn shifted_distance(&self, w: Point<T>, t: T) -> Result<T> {
        self.distance_to_boundary(shift(w, t))
    }

    /// Closed-form metric data when the whole domain is a disk, half-plane
    /// or strip.
    pub fn closed_form(&self) -> Option<ClosedForm<T>> {
        match &self.shape {
            Shape::UnitDisk => Some(ClosedForm::Disk),
            Shape::UpperHalfPlane => Some(ClosedForm::HalfPlane { y0: T::zero() }),
            Shape::HorizontalStrip { y0, y1 } => Some(ClosedForm::Strip { y0: *y0, y1: *y1 }),
            Shape::SlitStrip { height, slits } if slits.is_empty() => Some(ClosedForm::Strip {
                y0: T::zero(),
                y1: *height,
            }),
            Shape::SlitHalfPlane { slits } if slits.is_empty() => {
                Some(ClosedForm::HalfPlane { y0: T::zero() })
            }
            _ => None,
        }
    }

    /// Maximal horizontal strips and half-planes, or the degenerate line.
    pub fn petals(&self) -> Vec<Petal<T>> {
        let kinds: Vec<PetalKind<T>> = match &self.shape {
            Shape::UnitDisk => Vec::new(),
            Shape::UpperHalfPlane => vec![PetalKind::ParabolicHalfPlane { y0: T::zero() }],
            Shape::HorizontalStrip { y0, y1 } => {
                vec![PetalKind::HyperbolicStrip { y0: *y0, y1: *y1 }]
            }
            Shape::SlitStrip { height, slits } => {
                let mut cuts = vec![T::zero()];
                cuts.extend(slits.iter().map(|s| s.y));
                cuts.push(*height);
                cuts.windows(2)
                    .map(|c| PetalKind::HyperbolicStrip { y0: c[0], y1: c[1] })
                    .collect()
            }
            Shape::SlitHalfPlane { slits } => {
                let mut cuts = vec![T::zero()];
                cuts.extend(slits.iter().map(|s| s.y));
                let mut kinds: Vec<_> = cuts
                    .windows(2)
                    .map(|c| PetalKind::HyperbolicStrip { y0: c[0], y1: c[1] })
                    .collect();
                kinds.push(PetalKind::ParabolicHalfPlane {
                    y0: *cuts.last().expect("nonempty"),
                });
                kinds
            }
            Shape::ExpCusp => vec![PetalKind::DegenerateLine { y0: T::zero() }],
        };
        kinds
            .into_iter()
            .map(|kind| Petal {
                kind,
                parent: self.clone(),
            })
            .collect()
    }

    /// Slits of the shape (empty for slit-free shapes).
    pub fn slits(&self) -> &[Slit<T>] {
        match &self.shape {
            Shape::SlitStrip { slits, .. } | Shape::SlitHalfPlane { slits } => slits,
            _ => &[],
        }
    }
}

fn nearest_slit<T: Real>(slits: &[Slit<T>], w: Point<T>, init: (T, Point<T>)) -> (T, Point<T>) {
    slits.iter().fold(init, |best, s| {
        let c = s.closest(w);
        if c.0 < best.0 {
            c
        } else {
            best
        }
    })
}

/// Nearest point of the curve `s ↦ s − i·e^s` to `w`.
///
/// Stationary points of `|w − c(s)|²` are roots of
/// `φ(s) = s − x + (y + e^s)e^s`. `φ'` vanishes where `2u² + yu + 1 = 0`
/// (`u = e^s`), so `φ` has at most three monotone pieces; each piece is
/// searched for a root and the closest candidate wins.
fn exp_cusp_closest<T: Real>(w: Point<T>) -> (T, Point<T>) {
    let (x, y) = (w.re, w.im);
    let two = T::lit(2.0);
    let phi = |s: T| {
        let e = s.exp();
        s - x + (y + e) * e
    };
    let dphi = |s: T| {
        let e = s.exp();
        T::one() + y * e + two * e * e
    };

    let mut breaks: Vec<T> = Vec::with_capacity(2);
    let disc = y * y - T::lit(8.0);
    if y < T::zero() && disc > T::zero() {
        let sq = disc.sqrt();
        for u in [(-y - sq) / T::lit(4.0), (-y + sq) / T::lit(4.0)] {
            if u > T::zero() {
                breaks.push(u.ln());
            }
        }
    }

    // Outer brackets where φ is certainly negative / positive, anchored near
    // `e^s (y + e^s) = |x| + 1` so `e^{2s}` stays finite however far right
    // `w` is.
    let c = x.abs() + T::one();
    let u = if y >= T::zero() {
        two * c / (y + (y * y + T::lit(4.0) * c).sqrt())
    } else {
        (-y + (y * y + T::lit(4.0) * c).sqrt()) / two
    };
    let anchor = u.ln();
    let mut lo = breaks.first().copied().unwrap_or(anchor).min(anchor).min(x) - T::one();
    let mut step = T::one();
    while phi(lo) >= T::zero() {
        step *= two;
        lo -= step;
    }
    let mut hi = breaks.last().copied().unwrap_or(anchor).max(anchor) + T::one();
    step = T::one();
    while phi(hi) <= T::zero() {
        step *= two;
        hi += step;
    }

    let mut knots = vec![lo];
    knots.extend(breaks.iter().copied());
    knots.push(hi);

    let mut best: Option<(T, Point<T>)> = None;
    for seg in knots.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let (fa, fb) = (phi(a), phi(b));
        if fa == T::zero() || fb == T::zero() || (fa < T::zero()) != (fb < T::zero()) {
            let s = safeguarded_root(&phi, &dphi, a, b, fa);
            let c = Point::new(s, -s.exp());
            let d = (w - c).norm();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, c));
            }
        }
    }
    // φ → −∞ on the left and +∞ on the right, so some piece brackets a root.
    best.expect("exp-cusp distance: no stationary point bracketed")
}

/// Newton iteration kept inside a sign-change bracket `[a, b]`.
fn safeguarded_root<T: Real>(f: &impl Fn(T) -> T, df: &impl Fn(T) -> T, mut a: T, mut b: T, fa: T) -> T {
    let tol = T::tol(1e-13);
    let neg_left = fa < T::zero();
    let mut s = (a + b) / T::lit(2.0);
    for _ in 0..200 {
        let fs = f(s);
        if fs == T::zero() {
            return s;
        }
        if (fs < T::zero()) == neg_left {
            a = s;
        } else {
            b = s;
        }
        let d = df(s);
        let newton = s - fs / d;
        let next = if d != T::zero() && newton > a && newton < b {
            newton
        } else {
            (a + b) / T::lit(2.0)
        };
        let scale = T::one().max(next.abs());
        if (next - s).abs() <= tol * scale || (b - a) <= tol * scale {
            return next;
        }
        s = next;
    }
    s
}

impl<T: Real> Petal<T> {
    /// Membership in the petal image (for the degenerate line, exact
    /// ordinate match).
    pub fn contains(&self, w: Point<T>) -> bool {
        match self.kind {
            PetalKind::HyperbolicStrip { y0, y1 } => y0 < w.im && w.im < y1,
            PetalKind::ParabolicHalfPlane { y0 } => w.im > y0,
            PetalKind::DegenerateLine { y0 } => w.im == y0,
        }
    }

    /// Distance from `w` to the edge of the petal image.
    pub fn clearance(&self, w: Point<T>) -> T {
        match self.kind {
            PetalKind::HyperbolicStrip { y0, y1 } => (w.im - y0).min(y1 - w.im),
            PetalKind::ParabolicHalfPlane { y0 } => w.im - y0,
            PetalKind::DegenerateLine { .. } => T::zero(),
        }
    }

    pub fn closed_form(&self) -> Option<ClosedForm<T>> {
        match self.kind {
            PetalKind::HyperbolicStrip { y0, y1 } => Some(ClosedForm::Strip { y0, y1 }),
            PetalKind::ParabolicHalfPlane { y0 } => Some(ClosedForm::HalfPlane { y0 }),
            PetalKind::DegenerateLine { .. } => None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self.kind, PetalKind::DegenerateLine { .. })
    }

    /// Ordinates of the petal's boundary lines.
    pub fn boundary_lines(&self) -> Vec<T> {
        match self.kind {
            PetalKind::HyperbolicStrip { y0, y1 } => vec![y0, y1],
            PetalKind::ParabolicHalfPlane { y0 } | PetalKind::DegenerateLine { y0 } => vec![y0],
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            PetalKind::HyperbolicStrip { y0, y1 } => format!("hyperbolic-strip({y0}, {y1})"),
            PetalKind::ParabolicHalfPlane { y0 } => format!("parabolic-half-plane({y0})"),
            PetalKind::DegenerateLine { y0 } => format!("degenerate-line({y0})"),
        }
    }
}
