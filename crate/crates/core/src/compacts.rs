//! Compact sets built from closed disks and polylines, with the boundary,
//! area and candidate discretizations used by the estimators.

use crate::error::{Error, Result};
use crate::scalar::is_finite_point;
use crate::{Point, Real};

#[derive(Clone, Debug, PartialEq)]
pub enum Piece<T> {
    Disk { center: Point<T>, radius: T },
    Polyline(Vec<Point<T>>),
}

impl<T: Real> Piece<T> {
    /// Distance from `w` and the nearest point of the piece.
    pub fn closest(&self, w: Point<T>) -> (T, Point<T>) {
        match self {
            Piece::Disk { center, radius } => {
                let v = w - *center;
                let r = v.norm();
                if r <= *radius {
                    (T::zero(), w)
                } else {
                    (r - *radius, *center + v * (*radius / r))
                }
            }
            Piece::Polyline(vs) => vs
                .windows(2)
                .map(|s| segment_closest(s[0], s[1], w))
                .fold((T::infinity(), vs[0]), |a, b| if b.0 < a.0 { b } else { a }),
        }
    }

    /// Circumference of a disk or arc length of a polyline.
    pub fn length(&self) -> T {
        match self {
            Piece::Disk { radius, .. } => T::TAU() * *radius,
            Piece::Polyline(vs) => vs.windows(2).map(|s| (s[1] - s[0]).norm()).sum(),
        }
    }

    pub fn area(&self) -> T {
        match self {
            Piece::Disk { radius, .. } => T::PI() * *radius * *radius,
            Piece::Polyline(_) => T::zero(),
        }
    }

    fn translate(&self, t: T) -> Self {
        let d = Point::new(t, T::zero());
        match self {
            Piece::Disk { center, radius } => Piece::Disk {
                center: *center + d,
                radius: *radius,
            },
            Piece::Polyline(vs) => Piece::Polyline(vs.iter().map(|v| *v + d).collect()),
        }
    }
}

fn segment_closest<T: Real>(a: Point<T>, b: Point<T>, w: Point<T>) -> (T, Point<T>) {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    let s = if len2 > T::zero() {
        ((w - a).re * ab.re + (w - a).im * ab.im) / len2
    } else {
        T::zero()
    };
    let foot = a + ab * s.max(T::zero()).min(T::one());
    ((w - foot).norm(), foot)
}

/// A boundary quadrature node: position, arc-length weight and unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryNode<T> {
    pub point: Point<T>,
    pub weight: T,
    pub normal: Point<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AreaNode<T> {
    pub point: Point<T>,
    pub weight: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discretization<T> {
    pub boundary_nodes: Vec<BoundaryNode<T>>,
    /// Empty for polylines.
    pub area_nodes: Vec<AreaNode<T>>,
    pub candidates: Vec<Point<T>>,
}

/// A nonempty union of disks and polylines.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactSet<T> {
    pieces: Vec<Piece<T>>,
}

impl<T: Real> CompactSet<T> {
    pub fn new(pieces: Vec<Piece<T>>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidParameter(
                "compact set needs at least one piece".into(),
            ));
        }
        for p in &pieces {
            match p {
                Piece::Disk { center, radius } => {
                    if !is_finite_point(*center) || !(radius.is_finite() && *radius > T::zero()) {
                        return Err(Error::InvalidParameter(format!(
                            "disk needs a finite center and positive radius, got r={radius}"
                        )));
                    }
                }
                Piece::Polyline(vs) => {
                    if vs.len() < 2 || !vs.iter().all(|v| is_finite_point(*v)) {
                        return Err(Error::InvalidParameter(
                            "polyline needs at least two finite vertices".into(),
                        ));
                    }
                    if vs.windows(2).any(|s| s[0] == s[1]) {
                        return Err(Error::InvalidParameter(
                            "polyline has a repeated consecutive vertex".into(),
                        ));
                    }
                }
            }
        }
        Ok(Self { pieces })
    }

    pub fn disk(center: Point<T>, radius: T) -> Result<Self> {
        Self::new(vec![Piece::Disk { center, radius }])
    }

    pub fn polyline(vertices: Vec<Point<T>>) -> Result<Self> {
        Self::new(vec![Piece::Polyline(vertices)])
    }

    pub fn pieces(&self) -> &[Piece<T>] {
        &self.pieces
    }

    pub fn has_area(&self) -> bool {
        self.pieces.iter().any(|p| matches!(p, Piece::Disk { .. }))
    }

    /// Euclidean distance to the set; zero on it.
    pub fn distance_to_set(&self, w: Point<T>) -> T {
        self.closest_point(w).0
    }

    pub fn closest_point(&self, w: Point<T>) -> (T, Point<T>) {
        self.pieces
            .iter()
            .map(|p| p.closest(w))
            .fold((T::infinity(), w), |a, b| if b.0 < a.0 { b } else { a })
    }

    pub fn contains(&self, w: Point<T>) -> bool {
        self.distance_to_set(w) == T::zero()
    }

    /// The set moved by `t` along the real axis.
    pub fn translate(&self, t: T) -> Self {
        Self {
            pieces: self.pieces.iter().map(|p| p.translate(t)).collect(),
        }
    }

    pub fn boundary_length(&self) -> T {
        self.pieces.iter().map(Piece::length).sum()
    }

    pub fn area(&self) -> T {
        self.pieces.iter().map(Piece::area).sum()
    }

    /// `min_{w ∈ K} δ(w)` for a distance `delta` to the complement of the
    /// open set `inside`: exact for disks, sampled at spacing ≤ 0.01 along
    /// polylines. `None` when part of `K` is not inside.
    pub fn clearance(&self, inside: impl Fn(Point<T>) -> bool, delta: impl Fn(Point<T>) -> T) -> Option<T> {
        let mut worst = T::infinity();
        for p in &self.pieces {
            match p {
                Piece::Disk { center, radius } => {
                    if !inside(*center) {
                        return None;
                    }
                    worst = worst.min(delta(*center) - *radius);
                }
                Piece::Polyline(vs) => {
                    for s in vs.windows(2) {
                        let len = (s[1] - s[0]).norm();
                        let k = (len.as_f64() / 1e-2).ceil().clamp(1.0, 1e5) as usize;
                        for j in 0..=k {
                            let q = s[0] + (s[1] - s[0]) * T::lit(j as f64 / k as f64);
                            if !inside(q) {
                                return None;
                            }
                            worst = worst.min(delta(q));
                        }
                    }
                }
            }
        }
        (worst > T::zero()).then_some(worst)
    }

    /// Discretizes with `m` boundary nodes shared among pieces by arc length.
    pub fn discretize(&self, m: usize) -> Result<Discretization<T>> {
        if m < 8 {
            return Err(Error::InvalidParameter(format!(
                "discretize needs m >= 8, got {m}"
            )));
        }
        if self.pieces.len() > m {
            return Err(Error::InvalidParameter(format!(
                "{} pieces cannot share {m} nodes",
                self.pieces.len()
            )));
        }
        let lengths: Vec<f64> = self.pieces.iter().map(|p| p.length().as_f64()).collect();
        let counts = allocate(&lengths, m);
        let mut out = Discretization {
            boundary_nodes: Vec::with_capacity(m),
            area_nodes: Vec::new(),
            candidates: Vec::new(),
        };
        for (p, &k) in self.pieces.iter().zip(&counts) {
            match p {
                Piece::Disk { center, radius } => disk_nodes(*center, *radius, k, &mut out),
                Piece::Polyline(vs) => polyline_nodes(vs, k, &mut out),
            }
        }
        Ok(out)
    }
}

/// Largest-remainder apportionment of `m` among `weights`, at least one each.
fn allocate(weights: &[f64], m: usize) -> Vec<usize> {
    let n = weights.len();
    let spare = m - n;
    let total: f64 = weights.iter().sum();
    let quota: Vec<f64> = weights.iter().map(|w| w / total * spare as f64).collect();
    let mut counts: Vec<usize> = quota.iter().map(|q| 1 + q.floor() as usize).collect();
    let mut left = m - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quota[a] - quota[a].floor(), quota[b] - quota[b].floor());
        rb.partial_cmp(&ra).expect("finite").then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

fn disk_nodes<T: Real>(c: Point<T>, r: T, k: usize, out: &mut Discretization<T>) {
    let kt = T::lit(k as f64);
    let dtheta = T::TAU() / kt;
    for j in 0..k {
        let u = Point::from_polar(T::one(), dtheta * T::lit(j as f64));
        out.boundary_nodes.push(BoundaryNode {
            point: c + u * r,
            weight: r * dtheta,
            normal: u,
        });
        out.candidates.push(c + u * r);
    }
    // Midpoint polar rule with exact annular-sector weights.
    let n_r = (k / 4).max(2);
    let half = T::lit(0.5);
    for i in 0..n_r {
        let r0 = r * T::lit(i as f64 / n_r as f64);
        let r1 = r * T::lit((i + 1) as f64 / n_r as f64);
        let rm = (r0 + r1) * half;
        let w = dtheta * (r1 * r1 - r0 * r0) * half;
        for j in 0..k {
            let theta = dtheta * (T::lit(j as f64) + half);
            out.area_nodes.push(AreaNode {
                point: c + Point::from_polar(rm, theta),
                weight: w,
            });
        }
    }
    out.candidates.push(c);
    let ring = (k / 4).max(4);
    for j in 0..ring {
        let theta = T::TAU() * T::lit(j as f64 / ring as f64);
        out.candidates.push(c + Point::from_polar(r * half, theta));
    }
}

/// Point at arc length `s` along the polyline.
fn along<T: Real>(vs: &[Point<T>], seg_len: &[T], mut s: T) -> (Point<T>, Point<T>) {
    for (i, &l) in seg_len.iter().enumerate() {
        if s <= l || i + 1 == seg_len.len() {
            let dir = (vs[i + 1] - vs[i]) / l;
            return (vs[i] + dir * s.min(l), dir);
        }
        s -= l;
    }
    unreachable!("polyline has at least one segment")
}

fn polyline_nodes<T: Real>(vs: &[Point<T>], k: usize, out: &mut Discretization<T>) {
    let seg_len: Vec<T> = vs.windows(2).map(|s| (s[1] - s[0]).norm()).collect();
    let total: T = seg_len.iter().copied().sum();
    let h = total / T::lit(k as f64);
    for j in 0..k {
        let (p, dir) = along(vs, &seg_len, h * (T::lit(j as f64) + T::lit(0.5)));
        out.boundary_nodes.push(BoundaryNode {
            point: p,
            weight: h,
            normal: Point::new(-dir.im, dir.re),
        });
    }
    out.candidates.push(vs[0]);
    for j in 1..k {
        out.candidates.push(along(vs, &seg_len, h * T::lit(j as f64)).0);
    }
    out.candidates.push(*vs.last().expect("nonempty"));
}
