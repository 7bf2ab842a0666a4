//! Flow-time sweeps and theorem checks.
//!
//! A sweep evaluates the requested quantities for `K` and the probe points
//! inside `Ω − t` along a decreasing grid of times, computes the limiting
//! values inside the petal once, and turns the rows into verdicts. All seeds
//! are fixed across `t`, so neighbouring rows share their random numbers and
//! trend tests see differences rather than independent noise.

use serde::{Deserialize, Serialize};

use crate::compacts::{CompactSet, Piece};
use crate::domains::{KoenigsDomain, Petal, Slit};
use crate::energy;
use crate::error::{Error, Result};
use crate::fekete::{self, FeketeConfig, Metric};
use crate::hypgeom;
use crate::kernel::{GreenSource, KernelSource};
use crate::oracles::{self, ClosedForm};
use crate::quadrature::gauss_legendre_on;
use crate::scalar::shift;
use crate::wos::{self, splitmix, Estimate, Flag, WosConfig};
use crate::Point;

type P = Point<f64>;

/// Domain description as it appears in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    UnitDisk,
    UpperHalfPlane,
    HorizontalStrip {
        y0: f64,
        y1: f64,
    },
    /// Each slit is `[y, x]`, the half-line `{Im w = y, Re w ≤ x}`.
    SlitStrip {
        height: f64,
        slits: Vec<[f64; 2]>,
    },
    SlitHalfPlane {
        slits: Vec<[f64; 2]>,
    },
    ExpCusp,
}

fn slits(raw: &[[f64; 2]]) -> Vec<Slit<f64>> {
    raw.iter().map(|&[y, x]| Slit { y, x }).collect()
}

impl DomainSpec {
    pub fn build(&self) -> Result<KoenigsDomain<f64>> {
        match self {
            DomainSpec::UnitDisk => Ok(KoenigsDomain::unit_disk()),
            DomainSpec::UpperHalfPlane => Ok(KoenigsDomain::upper_half_plane()),
            DomainSpec::HorizontalStrip { y0, y1 } => KoenigsDomain::strip(*y0, *y1),
            DomainSpec::SlitStrip { height, slits: s } => KoenigsDomain::slit_strip(*height, slits(s)),
            DomainSpec::SlitHalfPlane { slits: s } => KoenigsDomain::slit_half_plane(slits(s)),
            DomainSpec::ExpCusp => Ok(KoenigsDomain::exp_cusp()),
        }
    }
}

/// `K` as a union of disks `[re, im, r]` and polylines of `[re, im]` vertices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompactSpec {
    pub disks: Vec<[f64; 3]>,
    pub polylines: Vec<Vec<[f64; 2]>>,
}

impl CompactSpec {
    pub fn build(&self) -> Result<CompactSet<f64>> {
        let mut pieces: Vec<Piece<f64>> = self
            .disks
            .iter()
            .map(|&[re, im, radius]| Piece::Disk {
                center: P::new(re, im),
                radius,
            })
            .collect();
        pieces.extend(
            self.polylines
                .iter()
                .map(|vs| Piece::Polyline(vs.iter().map(|&[re, im]| P::new(re, im)).collect())),
        );
        CompactSet::new(pieces)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `ω(z, K, Ω − t)`.
    Harmonic,
    /// `λ_{Ω−t}` at every density probe.
    Density,
    /// `d_{Ω−t}(z, w)`.
    Distance,
    /// `g_{Ω−t}(z, w)`.
    Green,
    /// Hyperbolic area of `K`.
    Area,
    /// Hyperbolic `n`-th diameter of `K`.
    NDiameter,
    /// Condenser capacity `Cap(Ω − t, K)`.
    Capacity,
    /// Density quotient against the petal and its upper bound, per probe.
    Minda,
}

/// One flow-time sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub domain: DomainSpec,
    /// Index into the domain's petals, ordered bottom to top.
    #[serde(default)]
    pub petal: usize,
    pub z: [f64; 2],
    pub w: [f64; 2],
    #[serde(default)]
    pub density_probes: Vec<[f64; 2]>,
    pub t_grid: Vec<f64>,
    pub quantities: Vec<Quantity>,
    #[serde(default = "defaults::n_diameter")]
    pub n_diameter: usize,
    /// Boundary nodes for the equilibrium problem.
    #[serde(default = "defaults::m")]
    pub m: usize,
    /// Angular nodes for the area quadrature.
    #[serde(default = "defaults::area_m")]
    pub area_m: usize,
    /// Boundary nodes behind the Fekete candidate grid.
    #[serde(default = "defaults::fekete_m")]
    pub fekete_m: usize,
    /// Boundary nodes for the petal harmonic-measure reference.
    #[serde(default = "defaults::reference_m")]
    pub reference_m: usize,
    /// Walks per Green-kernel row and per area node.
    #[serde(default = "defaults::kernel_walks")]
    pub kernel_walks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub wos: WosConfig,
    #[serde(rename = "K")]
    pub k: CompactSpec,
}

mod defaults {
    pub fn n_diameter() -> usize {
        4
    }
    pub fn m() -> usize {
        32
    }
    pub fn area_m() -> usize {
        16
    }
    pub fn fekete_m() -> usize {
        32
    }
    pub fn reference_m() -> usize {
        256
    }
    pub fn kernel_walks() -> usize {
        2000
    }
}

impl SweepConfig {
    /// Slit strip of height `2π` with the slit `{Im w = π, Re w ≤ 0}`, lower
    /// petal `(0, π)`, `K` the disk of radius 0.3 at `3 + iπ/2`.
    pub fn slit_strip_fixture() -> Self {
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
        let mut probes = Vec::new();
        for re in [4.0, 5.0, 6.0] {
            for im in [FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4] {
                probes.push([re, im]);
            }
        }
        Self {
            domain: DomainSpec::SlitStrip {
                height: 2.0 * PI,
                slits: vec![[PI, 0.0]],
            },
            petal: 0,
            z: [5.0, FRAC_PI_2],
            w: [6.0, FRAC_PI_2],
            density_probes: probes,
            t_grid: (0..16).map(|k| 0.0 - 2.0 * k as f64).collect(),
            quantities: vec![Quantity::Harmonic],
            n_diameter: defaults::n_diameter(),
            m: defaults::m(),
            area_m: defaults::area_m(),
            fekete_m: defaults::fekete_m(),
            reference_m: defaults::reference_m(),
            kernel_walks: defaults::kernel_walks(),
            seed: None,
            wos: WosConfig::default(),
            k: CompactSpec {
                disks: vec![[3.0, FRAC_PI_2, 0.3]],
                polylines: Vec::new(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        Setup::new(self).map(|_| ())
    }

    fn needs(&self, q: Quantity) -> bool {
        self.quantities.contains(&q)
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub t: f64,
    pub quantity: String,
    #[serde(with = "nonfinite")]
    pub value: f64,
    #[serde(with = "nonfinite")]
    pub std_err: f64,
    pub source: KernelSource,
    pub flags: Vec<Flag>,
}

/// Limiting value of a quantity inside the petal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub quantity: String,
    #[serde(with = "nonfinite")]
    pub value: f64,
    pub source: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// Not enough usable samples to decide.
    Inconclusive,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
    /// Smallest slack among the comparisons; negative means violated.
    #[serde(with = "nonfinite")]
    pub margin: f64,
    #[serde(with = "nonfinite::seq")]
    pub margins: Vec<f64>,
    /// Indices into [`SweepReport::rows`].
    pub rows: Vec<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub domain: String,
    pub petal: String,
    pub n_walks: usize,
    pub kernel_walks: usize,
    pub epsilon_shell: f64,
    pub max_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<Row>,
    pub references: Vec<Reference>,
    pub verdicts: Vec<Verdict>,
    pub provenance: Provenance,
}

impl SweepReport {
    /// `Fail` if any verdict fails, else `Inconclusive` if any is, else `Pass`.
    pub fn status(&self) -> Status {
        let has = |s| self.verdicts.iter().any(|v| v.status == s);
        if has(Status::Fail) {
            Status::Fail
        } else if has(Status::Inconclusive) || self.verdicts.is_empty() {
            Status::Inconclusive
        } else {
            Status::Pass
        }
    }

    pub fn series(&self, quantity: &str) -> Vec<&Row> {
        self.rows.iter().filter(|r| r.quantity == quantity).collect()
    }

    pub fn reference(&self, quantity: &str) -> Option<f64> {
        self.references
            .iter()
            .find(|r| r.quantity == quantity)
            .map(|r| r.value)
    }
}

/// JSON has no infinities: non-finite values travel as `"inf"`, `"-inf"`
/// or `"nan"`.
mod nonfinite {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else if v.is_nan() {
            Repr::Text("nan".into())
        } else if v > 0.0 {
            Repr::Text("inf".into())
        } else {
            Repr::Text("-inf".into())
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("expected a number, got {other:?}"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod seq {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|x| to_repr(*x)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
        }
    }
}

/// Validated, built form of a [`SweepConfig`].
struct Setup {
    domain: KoenigsDomain<f64>,
    petal: Petal<f64>,
    k: CompactSet<f64>,
    z: P,
    w: P,
    probes: Vec<P>,
    seed: u64,
    wos: WosConfig,
    kernel: WosConfig,
    n: usize,
    m: usize,
    area_m: usize,
    fekete_m: usize,
    reference_m: usize,
}

fn point(p: [f64; 2]) -> P {
    P::new(p[0], p[1])
}

impl Setup {
    fn new(cfg: &SweepConfig) -> Result<Self> {
        cfg.wos.validate()?;
        if cfg.kernel_walks < 100 {
            return Err(invalid("kernel_walks must be at least 100"));
        }
        if cfg.t_grid.first() != Some(&0.0) {
            return Err(invalid("t_grid must start at 0"));
        }
        if cfg.t_grid.iter().any(|t| !t.is_finite()) || cfg.t_grid.windows(2).any(|p| p[1] >= p[0]) {
            return Err(invalid("t_grid must be finite and strictly decreasing"));
        }
        if cfg.quantities.is_empty() {
            return Err(invalid("quantities must not be empty"));
        }
        for (i, q) in cfg.quantities.iter().enumerate() {
            if cfg.quantities[..i].contains(q) {
                return Err(invalid(format!("quantity {q:?} listed twice")));
            }
        }
        if cfg.n_diameter < 2 {
            return Err(invalid("n_diameter must be at least 2"));
        }
        for (name, v) in [
            ("m", cfg.m),
            ("area_m", cfg.area_m),
            ("fekete_m", cfg.fekete_m),
            ("reference_m", cfg.reference_m),
        ] {
            if v < 16 {
                return Err(invalid(format!("{name} must be at least 16, got {v}")));
            }
        }
        let domain = cfg.domain.build()?;
        let petals = domain.petals();
        let petal = petals.get(cfg.petal).cloned().ok_or_else(|| {
            invalid(format!(
                "petal index {} out of range; the domain has {} petals",
                cfg.petal,
                petals.len()
            ))
        })?;
        let k = cfg.k.build()?;
        let z = point(cfg.z);
        let w = point(cfg.w);
        let probes: Vec<P> = cfg.density_probes.iter().copied().map(point).collect();
        if (cfg.needs(Quantity::Density) || cfg.needs(Quantity::Minda)) && probes.is_empty() {
            return Err(invalid("density and minda need at least one density probe"));
        }
        let strictly_inside = |p: P| petal.contains(p) && (petal.is_degenerate() || petal.clearance(p) > 0.0);
        for (name, p) in [("z", z), ("w", w)]
            .into_iter()
            .chain(probes.iter().map(|p| ("density probe", *p)))
        {
            if !p.re.is_finite() || !strictly_inside(p) {
                return Err(invalid(format!(
                    "{name} = {p} is not inside the petal {}",
                    petal.label()
                )));
            }
        }
        if z == w {
            return Err(invalid("z and w must differ"));
        }
        let k_inside = if petal.is_degenerate() {
            k.pieces().iter().all(|p| match p {
                Piece::Disk { .. } => false,
                Piece::Polyline(vs) => vs.iter().all(|v| petal.contains(*v)),
            })
        } else {
            k.clearance(|p| petal.contains(p), |p| petal.clearance(p))
                .is_some()
        };
        if !k_inside {
            return Err(invalid(format!(
                "K is not strictly inside the petal {}",
                petal.label()
            )));
        }
        if k.distance_to_set(z) <= cfg.wos.epsilon_shell {
            return Err(invalid("z must lie off K"));
        }
        let seed = cfg.seed.unwrap_or(0);
        Ok(Self {
            domain,
            petal,
            k,
            z,
            w,
            probes,
            seed,
            wos: cfg.wos.with_seed(seed),
            kernel: cfg.wos.with_walks(cfg.kernel_walks),
            n: cfg.n_diameter,
            m: cfg.m,
            area_m: cfg.area_m,
            fekete_m: cfg.fekete_m,
            reference_m: cfg.reference_m,
        })
    }

    fn derive(&self, tag: u64) -> u64 {
        splitmix(self.seed, tag)
    }

    fn kernel_src(&self, t: f64, tag: u64) -> GreenSource<f64> {
        GreenSource::for_domain(&self.domain, t, &self.kernel.with_seed(self.derive(tag)))
    }

    fn fekete_cfg(&self) -> FeketeConfig {
        FeketeConfig {
            restarts: 8,
            seed: self.derive(4),
            polish: false,
        }
    }

    fn degenerate(&self) -> bool {
        self.petal.is_degenerate()
    }

    fn provenance(&self, cfg: &SweepConfig) -> Provenance {
        Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            domain: self.domain.name().to_string(),
            petal: self.petal.label(),
            n_walks: cfg.wos.n_walks,
            kernel_walks: cfg.kernel_walks,
            epsilon_shell: cfg.wos.epsilon_shell,
            max_steps: cfg.wos.max_steps,
        }
    }

    fn rows_at(&self, q: Quantity, t: f64) -> Result<Vec<Row>> {
        let form = self.domain.closed_form();
        let rows = match q {
            Quantity::Harmonic => {
                let e = wos::harmonic_measure_mc(self.z, &self.k, &self.domain, t, &self.wos)?;
                vec![mc_row(t, "harmonic".into(), &e)]
            }
            Quantity::Density => self
                .probes
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    if self.degenerate() {
                        let lb = hypgeom::density_bounds(p, &self.domain, t)?.0;
                        return Ok(bound_row(t, format!("density_lower_bound[{i}]"), lb));
                    }
                    match &form {
                        Some(f) => Ok(exact_row(t, format!("density[{i}]"), f.density(shift(p, t))?)),
                        None => {
                            let c = self.wos.with_seed(self.derive(100 + i as u64));
                            let e = wos::robin_density_mc(p, &self.domain, t, &c)?;
                            Ok(mc_row(t, format!("density[{i}]"), &e))
                        }
                    }
                })
                .collect::<Result<_>>()?,
            Quantity::Distance => {
                let row = if self.degenerate() {
                    let d = hypgeom::distance_lower_bound(self.z, self.w, &self.domain, t)?;
                    bound_row(t, "distance_lower_bound".into(), d)
                } else if let Some(f) = &form {
                    exact_row(
                        t,
                        "distance".into(),
                        f.distance(shift(self.z, t), shift(self.w, t))?,
                    )
                } else {
                    let c = self.wos.with_seed(self.derive(2));
                    let e = wos::hyp_distance_mc(self.z, self.w, &self.domain, t, &c)?;
                    mc_row(t, "distance".into(), &e)
                };
                vec![row]
            }
            Quantity::Green => {
                let row = if self.degenerate() {
                    let g = hypgeom::green_upper_bound(self.z, self.w, &self.domain, t)?;
                    bound_row(t, "green_upper_bound".into(), g)
                } else if let Some(f) = &form {
                    exact_row(t, "green".into(), f.green(shift(self.z, t), shift(self.w, t))?)
                } else {
                    let c = self.wos.with_seed(self.derive(2));
                    let e = wos::green_mc(self.z, self.w, &self.domain, t, &c)?;
                    mc_row(t, "green".into(), &e)
                };
                vec![row]
            }
            Quantity::Area => {
                let a = hypgeom::hyp_area_with(&self.k, &self.kernel_src(t, 3), self.area_m)?;
                vec![Row {
                    t,
                    quantity: "area".into(),
                    value: a.value,
                    std_err: a.std_err,
                    source: if self.k.has_area() {
                        a.lambda_source
                    } else {
                        KernelSource::Oracle
                    },
                    flags: Vec::new(),
                }]
            }
            Quantity::NDiameter => {
                let (src, name) = if self.degenerate() {
                    let src = GreenSource::UpperBound {
                        domain: self.domain.clone(),
                        t,
                    };
                    (src, format!("n_diameter_lower_bound[{}]", self.n))
                } else {
                    (self.kernel_src(t, 4), format!("n_diameter[{}]", self.n))
                };
                let r = fekete::n_diameter(
                    &self.k,
                    self.n,
                    &Metric::Hyperbolic(src.clone()),
                    self.fekete_m,
                    &self.fekete_cfg(),
                )?;
                let mut flags = r.flags.clone();
                if src.source() == KernelSource::Bound {
                    flags.push(Flag::Bound);
                }
                vec![Row {
                    t,
                    quantity: name,
                    value: r.diameter,
                    std_err: r.std_err,
                    source: src.source(),
                    flags,
                }]
            }
            Quantity::Capacity => {
                if self.degenerate() {
                    vec![bound_row(
                        t,
                        "capacity_lower_bound".into(),
                        self.capacity_lower_bound(t)?,
                    )]
                } else {
                    let src = self.kernel_src(t, 5);
                    let eq = energy::equilibrium_with(&self.k, &src, self.m)?;
                    vec![Row {
                        t,
                        quantity: "capacity".into(),
                        value: eq.capacity,
                        std_err: eq.capacity_std_err(),
                        source: eq.kernel_source,
                        flags: eq.flags.clone(),
                    }]
                }
            }
            Quantity::Minda => self.minda_rows(t)?,
        };
        Ok(rows)
    }

    /// `2π / ∬ g⁺ dμ dμ` for the arc-length measure `μ` on `K`, where `g⁺`
    /// is the Green upper bound. Bounds the equilibrium capacity from below.
    fn capacity_lower_bound(&self, t: f64) -> Result<f64> {
        let nodes = self.k.discretize(self.m)?.boundary_nodes;
        let src = GreenSource::UpperBound {
            domain: self.domain.clone(),
            t,
        };
        let (g, _) = energy::green_matrix(&nodes, &src)?;
        let total: f64 = nodes.iter().map(|n| n.weight).sum();
        let mut energy = 0.0;
        for (i, a) in nodes.iter().enumerate() {
            for (j, b) in nodes.iter().enumerate() {
                energy += a.weight * b.weight * g[i][j];
            }
        }
        Ok(std::f64::consts::TAU * total * total / energy)
    }

    /// Points of the petal boundary that lie inside `Ω − t`: the free part of
    /// each slit line bounding the petal, sampled geometrically from the tip,
    /// plus the point above or below `p` when it is free.
    fn free_edge(&self, p: P, t: f64) -> Vec<P> {
        let lines = self.petal.boundary_lines();
        let mut out = Vec::new();
        for s in self.domain.slits().iter().filter(|s| lines.contains(&s.y)) {
            let tip = s.x - t;
            for j in 0..64 {
                let gap = 1e-2 * 4000f64.powf(j as f64 / 63.0);
                out.push(P::new(tip + gap, s.y));
            }
            if p.re > tip {
                out.push(P::new(p.re, s.y));
            }
        }
        out
    }

    fn minda_rows(&self, t: f64) -> Result<Vec<Row>> {
        let form = self.petal.closed_form().ok_or_else(|| {
            Error::Precondition("the density quotient needs a strip or half-plane petal".into())
        })?;
        let mut rows = Vec::new();
        for (i, &p) in self.probes.iter().enumerate() {
            let seed = self.derive(200 + i as u64);
            let (exits, truncated) = wos::exit_points(p, &self.domain, t, &self.wos, seed)?;
            if exits.len() < 2 {
                return Err(Error::Precondition("every walk was truncated".into()));
            }
            let (mean, se) = wos::log_mean(&exits, p);
            let ratio = form.density(p)? * mean.exp();
            let radius = self
                .free_edge(p, t)
                .into_iter()
                .map(|zeta| {
                    let g = wos::log_mean(&exits, zeta).0 - (p - zeta).norm().ln();
                    if g > 0.0 {
                        (-g).exp().atanh()
                    } else {
                        f64::INFINITY
                    }
                })
                .fold(f64::INFINITY, f64::min);
            let mut flags = Vec::new();
            if truncated as f64 > 1e-3 * (exits.len() + truncated) as f64 {
                flags.push(Flag::Truncation);
            }
            rows.push(Row {
                t,
                quantity: format!("minda_ratio[{i}]"),
                value: ratio,
                std_err: ratio * se,
                source: KernelSource::MonteCarlo,
                flags: flags.clone(),
            });
            rows.push(Row {
                t,
                quantity: format!("minda_bound[{i}]"),
                value: 1.0 + 2.0 / radius.exp_m1(),
                std_err: 0.0,
                source: KernelSource::MonteCarlo,
                flags,
            });
        }
        Ok(rows)
    }

    fn references(&self, qs: &[Quantity]) -> Result<Vec<Reference>> {
        let mut refs = Vec::new();
        let mut push = |quantity: String, value: f64, source: &str| {
            refs.push(Reference {
                quantity,
                value,
                source: source.to_string(),
            })
        };
        let Some(form) = self.petal.closed_form() else {
            if qs.contains(&Quantity::Harmonic) {
                push("harmonic".into(), 0.0, "limit");
            }
            if qs.contains(&Quantity::NDiameter) {
                push(format!("n_diameter_lower_bound[{}]", self.n), 1.0, "limit");
            }
            return Ok(refs);
        };
        let src = GreenSource::Oracle { form, t: 0.0 };
        let label = format!("petal {}", form.label());
        for q in qs {
            match q {
                Quantity::Harmonic => {
                    let eq = energy::equilibrium_with(&self.k, &src, self.reference_m)?;
                    let u = energy::equilibrium_potential(&eq, &src, self.z)?;
                    push("harmonic".into(), u / eq.energy, &label);
                }
                Quantity::Density => {
                    for (i, &p) in self.probes.iter().enumerate() {
                        push(format!("density[{i}]"), form.density(p)?, &label);
                    }
                }
                Quantity::Distance => push("distance".into(), form.distance(self.z, self.w)?, &label),
                Quantity::Green => push("green".into(), form.green(self.z, self.w)?, &label),
                Quantity::Area => push(
                    "area".into(),
                    hypgeom::hyp_area_with(&self.k, &src, self.area_m)?.value,
                    &label,
                ),
                Quantity::NDiameter => {
                    let r = fekete::n_diameter(
                        &self.k,
                        self.n,
                        &Metric::Hyperbolic(src.clone()),
                        self.fekete_m,
                        &self.fekete_cfg(),
                    )?;
                    push(format!("n_diameter[{}]", self.n), r.diameter, &label);
                }
                Quantity::Capacity => {
                    let eq = energy::equilibrium_with(&self.k, &src, self.m)?;
                    push("capacity".into(), eq.capacity, &label);
                }
                Quantity::Minda => {
                    for i in 0..self.probes.len() {
                        push(format!("minda_ratio[{i}]"), 1.0, "limit");
                    }
                }
            }
        }
        Ok(refs)
    }

    /// The domain is a single strip or half-plane, so translation is an
    /// automorphism and every quantity is constant in `t`.
    fn is_group(&self) -> bool {
        self.domain.closed_form().is_some() && self.domain.petals().len() == 1
    }
}

fn mc_row(t: f64, quantity: String, e: &Estimate<f64>) -> Row {
    Row {
        t,
        quantity,
        value: e.value,
        std_err: e.std_err,
        source: KernelSource::MonteCarlo,
        flags: e.flags.clone(),
    }
}

fn exact_row(t: f64, quantity: String, value: f64) -> Row {
    Row {
        t,
        quantity,
        value,
        std_err: 0.0,
        source: KernelSource::Oracle,
        flags: Vec::new(),
    }
}

fn bound_row(t: f64, quantity: String, value: f64) -> Row {
    Row {
        t,
        quantity,
        value,
        std_err: 0.0,
        source: KernelSource::Bound,
        flags: vec![Flag::Bound],
    }
}

/// Rows of one quantity at a single time `t ≤ 0`, without references or
/// verdicts.
pub fn rows_at(cfg: &SweepConfig, quantity: Quantity, t: f64) -> Result<Vec<Row>> {
    if !(t <= 0.0) || !t.is_finite() {
        return Err(invalid(format!("t must be finite and <= 0, got {t}")));
    }
    Setup::new(cfg)?.rows_at(quantity, t)
}

/// Runs the sweep described by `cfg`.
pub fn t_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    t_sweep_with(cfg, &mut |_, _| {})
}

/// [`t_sweep`], calling `progress(done, total)` after each row group.
pub fn t_sweep_with(cfg: &SweepConfig, progress: &mut dyn FnMut(usize, usize)) -> Result<SweepReport> {
    let setup = Setup::new(cfg)?;
    let total = cfg.t_grid.len() * cfg.quantities.len();
    let mut rows = Vec::new();
    let mut done = 0;
    for &t in &cfg.t_grid {
        for &q in &cfg.quantities {
            rows.extend(setup.rows_at(q, t)?);
            done += 1;
            progress(done, total);
        }
    }
    let references = setup.references(&cfg.quantities)?;
    let verdicts = evaluate(&setup, cfg, &rows, &references);
    Ok(SweepReport {
        rows,
        references,
        verdicts,
        provenance: setup.provenance(cfg),
    })
}

/// Accumulates comparisons for one verdict.
#[derive(Default)]
struct Tally {
    margins: Vec<f64>,
    rows: Vec<usize>,
    failures: usize,
    noisy: bool,
    notes: Vec<String>,
}

impl Tally {
    fn add(&mut self, margin: f64, rows: &[(usize, &Row)]) {
        if !(margin >= 0.0) {
            self.failures += 1;
            self.noisy |= rows.iter().any(|(_, r)| r.flags.contains(&Flag::Truncation));
        }
        self.margins.push(margin);
        for (i, _) in rows {
            if !self.rows.contains(i) {
                self.rows.push(*i);
            }
        }
    }

    /// `|value − reference| ≤ max(3σ, rel·|reference|)`.
    fn limit(&mut self, (i, r): (usize, &Row), reference: f64, rel: f64) {
        let tol = (3.0 * r.std_err).max(rel * reference.abs());
        self.add(tol - (r.value - reference).abs(), &[(i, r)]);
        self.notes.push(format!(
            "{} at t={}: {} vs {reference} (tol {tol:.3e})",
            r.quantity, r.t, r.value
        ));
    }

    fn finish(self, name: &str, allowed: usize) -> Verdict {
        let status = if self.margins.is_empty() {
            Status::Inconclusive
        } else if self.failures <= allowed {
            Status::Pass
        } else if self.noisy {
            Status::Inconclusive
        } else {
            Status::Fail
        };
        let margin = self.margins.iter().copied().fold(f64::INFINITY, f64::min);
        let mut detail = if self.margins.is_empty() {
            "no rows".to_string()
        } else {
            format!(
                "{} of {} comparisons violated (allowed {allowed})",
                self.failures,
                self.margins.len()
            )
        };
        for n in self.notes {
            detail.push_str("; ");
            detail.push_str(&n);
        }
        Verdict {
            name: name.to_string(),
            status,
            margin: if margin.is_finite() { margin } else { 0.0 },
            margins: self.margins,
            rows: self.rows,
            detail,
        }
    }
}

fn series<'a>(rows: &'a [Row], quantity: &str) -> Vec<(usize, &'a Row)> {
    rows.iter()
        .enumerate()
        .filter(|(_, r)| r.quantity == quantity)
        .collect()
}

fn quantity_names(rows: &[Row]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in rows {
        if !names.contains(&r.quantity) {
            names.push(r.quantity.clone());
        }
    }
    names
}

/// Tolerance for a difference of two rows: `k` combined standard errors for
/// Monte Carlo values, 1e−9 relative for deterministic ones.
fn pair_tol(a: &Row, b: &Row, k: f64) -> f64 {
    let s = a.std_err.hypot(b.std_err);
    if s > 0.0 {
        k * s
    } else {
        1e-9 * (1.0 + a.value.abs().max(b.value.abs()))
    }
}

/// Trend along the grid. `rising` means the value should not decrease as
/// `t` decreases. One isolated 2σ violation is tolerated for Monte Carlo
/// series.
fn trend(name: &str, s: &[(usize, &Row)], rising: bool) -> Verdict {
    let mut tally = Tally::default();
    for p in s.windows(2) {
        let (a, b) = (p[0].1, p[1].1);
        let drop = if rising {
            a.value - b.value
        } else {
            b.value - a.value
        };
        tally.add(pair_tol(a, b, 2.0) - drop, p);
    }
    let allowed = usize::from(s.iter().any(|(_, r)| r.std_err > 0.0));
    tally.finish(name, allowed)
}

fn evaluate(setup: &Setup, cfg: &SweepConfig, rows: &[Row], refs: &[Reference]) -> Vec<Verdict> {
    let reference = |q: &str| refs.iter().find(|r| r.quantity == q).map(|r| r.value);
    let last = |q: &str| series(rows, q).last().copied();
    let mut out = Vec::new();
    if setup.degenerate() {
        out.extend(degenerate_verdicts(setup, cfg, rows));
    } else {
        let n_name = format!("n_diameter[{}]", setup.n);
        if cfg.needs(Quantity::Harmonic) {
            let s = series(rows, "harmonic");
            out.push(trend("T1", &s, false));
            let mut tally = Tally::default();
            if let (Some(r), Some(l)) = (reference("harmonic"), last("harmonic")) {
                let tol = (3.0 * l.1.std_err).max(0.02);
                tally.add(tol - (l.1.value - r).abs(), &[l]);
                tally
                    .notes
                    .push(format!("final {} vs petal {r} (tol {tol:.3e})", l.1.value));
                for &(i, row) in &s {
                    tally.add(row.value - (r - 3.0 * row.std_err - 1e-3), &[(i, row)]);
                }
            }
            out.push(tally.finish("T2", 0));
        }
        if cfg.needs(Quantity::Density) {
            let mut tally = Tally::default();
            for i in 0..setup.probes.len() {
                let q = format!("density[{i}]");
                if let (Some(r), Some(l)) = (reference(&q), last(&q)) {
                    tally.limit(l, r, 0.02);
                }
            }
            out.push(tally.finish("T3", 0));
        }
        if cfg.needs(Quantity::NDiameter) {
            out.push(trend("T4", &series(rows, &n_name), true));
        }
        if cfg.needs(Quantity::Area) || cfg.needs(Quantity::NDiameter) {
            let mut tally = Tally::default();
            for (q, rel) in [("area", 0.03), (n_name.as_str(), 0.02)] {
                if let (Some(r), Some(l)) = (reference(q), last(q)) {
                    tally.limit(l, r, rel);
                }
            }
            out.push(tally.finish("T5", 0));
        }
        if cfg.needs(Quantity::Capacity) {
            let mut tally = Tally::default();
            if let (Some(r), Some(l)) = (reference("capacity"), last("capacity")) {
                tally.limit(l, r, 0.05);
                for (i, row) in series(rows, "capacity") {
                    let tol = (3.0 * row.std_err).max(0.05 * r);
                    tally.add(r + tol - row.value, &[(i, row)]);
                }
            }
            out.push(tally.finish("T6", 0));
        }
        if cfg.needs(Quantity::Minda) {
            let mut tally = Tally::default();
            for i in 0..setup.probes.len() {
                let ratio = series(rows, &format!("minda_ratio[{i}]"));
                let bound = series(rows, &format!("minda_bound[{i}]"));
                for (a, b) in ratio.iter().zip(&bound) {
                    let s3 = 3.0 * a.1.std_err;
                    tally.add(a.1.value + s3 - 1.0, &[*a]);
                    tally.add(b.1.value + s3 - a.1.value, &[*a, *b]);
                }
            }
            out.push(tally.finish("MINDA", 0));
        }
    }
    if setup.is_group() {
        let mut tally = Tally::default();
        for q in quantity_names(rows) {
            let s = series(rows, &q);
            for &b in &s[1..] {
                let a = s[0];
                tally.add(pair_tol(a.1, b.1, 2.0) - (b.1.value - a.1.value).abs(), &[a, b]);
            }
        }
        out.push(tally.finish("GROUP", 0));
    }
    out
}

fn degenerate_verdicts(setup: &Setup, cfg: &SweepConfig, rows: &[Row]) -> Vec<Verdict> {
    let mut out = Vec::new();
    let ends = |q: &str| {
        let s = series(rows, q);
        Some((*s.first()?, *s.last()?))
    };
    if cfg.needs(Quantity::Harmonic) {
        let mut tally = Tally::default();
        if let Some((_, l)) = ends("harmonic") {
            tally.add(0.05 - (l.1.value - 3.0 * l.1.std_err), &[l]);
        }
        out.push(tally.finish("T7(i)", 0));
    }
    if cfg.needs(Quantity::Density) {
        let mut tally = Tally::default();
        for i in 0..setup.probes.len() {
            if let Some((f, l)) = ends(&format!("density_lower_bound[{i}]")) {
                tally.add(l.1.value - 10.0 * f.1.value, &[f, l]);
            }
        }
        out.push(tally.finish("T7(ii)", 0));
    }
    if cfg.needs(Quantity::Distance) {
        let mut tally = Tally::default();
        if let Some((_, l)) = ends("distance_lower_bound") {
            tally.add(l.1.value - 3.0, &[l]);
        }
        out.push(tally.finish("T7(iii)", 0));
    }
    if cfg.needs(Quantity::Green) {
        let mut tally = Tally::default();
        if let Some((_, l)) = ends("green_upper_bound") {
            tally.add(0.05 - l.1.value, &[l]);
        }
        out.push(tally.finish("T7(iv)", 0));
    }
    if cfg.needs(Quantity::Area) {
        let mut tally = Tally::default();
        if !setup.k.has_area() {
            for r in series(rows, "area") {
                tally.add(if r.1.value == 0.0 { 0.0 } else { -r.1.value.abs() }, &[r]);
            }
        }
        out.push(tally.finish("T7(v)", 0));
    }
    if cfg.needs(Quantity::NDiameter) {
        let mut tally = Tally::default();
        if let Some((_, l)) = ends(&format!("n_diameter_lower_bound[{}]", setup.n)) {
            tally.add(l.1.value - 0.95, &[l]);
        }
        out.push(tally.finish("T7(vi)", 0));
    }
    if cfg.needs(Quantity::Capacity) {
        let mut tally = Tally::default();
        if let Some((f, l)) = ends("capacity_lower_bound") {
            tally.add(l.1.value - 10.0 * f.1.value, &[f, l]);
        }
        out.push(tally.finish("T7(vii)", 0));
    }
    if !out.is_empty() {
        let status = if out.iter().any(|v| v.status == Status::Fail) {
            Status::Fail
        } else if out.iter().any(|v| v.status == Status::Inconclusive) {
            Status::Inconclusive
        } else {
            Status::Pass
        };
        let mut rows: Vec<usize> = out.iter().flat_map(|v| v.rows.iter().copied()).collect();
        rows.sort_unstable();
        rows.dedup();
        let items: Vec<String> = out
            .iter()
            .map(|v| format!("{} {}", v.name, v.status.as_str()))
            .collect();
        out.push(Verdict {
            name: "T7".into(),
            status,
            margin: out.iter().map(|v| v.margin).fold(f64::INFINITY, f64::min),
            margins: out.iter().map(|v| v.margin).collect(),
            rows,
            detail: items.join(", "),
        });
    }
    out
}

/// Names accepted by [`check`].
pub const CHECKS: [&str; 11] = [
    "T1", "T2", "T3", "T4", "T5", "T6", "T7", "SM-H", "SM-G", "MINDA", "GROUP",
];

/// Runs the sweep needed for one theorem check and keeps its verdicts.
pub fn check(name: &str, cfg: &SweepConfig) -> Result<SweepReport> {
    check_with(name, cfg, &mut |_, _| {})
}

/// [`check`] with a progress callback.
pub fn check_with(
    name: &str,
    cfg: &SweepConfig,
    progress: &mut dyn FnMut(usize, usize),
) -> Result<SweepReport> {
    use Quantity::*;
    let quantities = match name {
        "T1" | "T2" => vec![Harmonic],
        "T3" => vec![Density],
        "T4" => vec![NDiameter],
        "T5" => vec![Area, NDiameter],
        "T6" => vec![Capacity],
        "T7" => vec![Harmonic, Density, Distance, Green, Area, NDiameter, Capacity],
        "MINDA" => vec![Minda],
        "GROUP" => cfg.quantities.clone(),
        "SM-H" | "SM-G" => return strong_markov_check(name, cfg),
        _ => {
            return Err(invalid(format!(
                "unknown check {name:?}; expected one of {}",
                CHECKS.join(", ")
            )))
        }
    };
    let setup = Setup::new(cfg)?;
    let degenerate = setup.degenerate();
    match name {
        "T7" if !degenerate => {
            return Err(Error::Precondition(
                "T7 needs a degenerate petal (exp-cusp)".into(),
            ))
        }
        "GROUP" if !setup.is_group() => {
            return Err(Error::Precondition(
                "GROUP needs a strip or half-plane domain".into(),
            ))
        }
        "T7" | "GROUP" => {}
        _ if degenerate => {
            return Err(Error::Precondition(format!(
                "{name} needs a strip or half-plane petal"
            )))
        }
        _ => {}
    }
    let run = SweepConfig {
        quantities,
        ..cfg.clone()
    };
    let mut report = t_sweep_with(&run, progress)?;
    report
        .verdicts
        .retain(|v| v.name == name || (name == "T7" && v.name.starts_with("T7")));
    Ok(report)
}

const STRONG_MARKOV_HEIGHTS: [f64; 3] = [0.25, 0.5, 0.75];
const STRONG_MARKOV_NODES: usize = 200;

/// Both sides of `ω(z, E, H) = ω(z, E, S) + ∫_A ω(s, E, H) ω(z, ds, S)` for
/// `H` the upper half-plane, `S = {0 < Im < 1}`, `E = [−1, 1]` and
/// `A = {Im = 1}`.
pub fn strong_markov_harmonic(z: P) -> Result<(f64, f64)> {
    let lhs = oracles::halfplane_segment_measure(z, -1.0, 1.0)?;
    let direct = oracles::unit_strip_lower_segment_measure(z, -1.0, 1.0)?;
    let through = crossing_integral(z, |s| oracles::halfplane_segment_measure(s, -1.0, 1.0))?;
    Ok((lhs, direct + through))
}

/// Both sides of `g_H(z, w) = g_S(z, w) + ∫_A g_H(s, w) ω(z, ds, S)` for the
/// same `H`, `S` and `A`.
pub fn strong_markov_green(z: P, w: P) -> Result<(f64, f64)> {
    let lhs = ClosedForm::HalfPlane { y0: 0.0 }.green(z, w)?;
    let direct = ClosedForm::Strip { y0: 0.0, y1: 1.0 }.green(z, w)?;
    let through = crossing_integral(z, |s| ClosedForm::HalfPlane { y0: 0.0 }.green(s, w))?;
    Ok((lhs, direct + through))
}

/// `∫ f(s + i) P(z, s) ds` against the upper Poisson kernel of the unit
/// strip, over `Re z ± 8` where the kernel has decayed below `e^{−8π}`:
/// ten Gauss–Legendre panels sharing the node budget.
fn crossing_integral(z: P, f: impl Fn(P) -> Result<f64>) -> Result<f64> {
    const PANELS: usize = 10;
    let mut total = 0.0;
    for p in 0..PANELS {
        let a = z.re - 8.0 + 16.0 * p as f64 / PANELS as f64;
        let (xs, ws) = gauss_legendre_on(STRONG_MARKOV_NODES / PANELS, a, a + 16.0 / PANELS as f64);
        for (s, wt) in xs.iter().zip(&ws) {
            total += wt * f(P::new(*s, 1.0))? * oracles::unit_strip_upper_poisson(z, *s);
        }
    }
    Ok(total)
}

fn strong_markov_check(name: &str, cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.domain != DomainSpec::UpperHalfPlane {
        return Err(Error::Precondition(format!(
            "{name} needs the upper-half-plane domain"
        )));
    }
    let w = point(cfg.w);
    if name == "SM-G" && !(w.im > 0.0 && w.im < 1.0) {
        return Err(invalid("SM-G needs 0 < Im w < 1"));
    }
    let mut rows = Vec::new();
    let mut tally = Tally::default();
    for (j, y) in STRONG_MARKOV_HEIGHTS.iter().enumerate() {
        let z = P::new(cfg.z[0], *y);
        let (lhs, rhs) = if name == "SM-H" {
            strong_markov_harmonic(z)?
        } else {
            strong_markov_green(z, w)?
        };
        let row = exact_row(0.0, format!("residual[{j}]"), (lhs - rhs).abs());
        tally.add(1e-3 - row.value, &[(rows.len(), &row)]);
        rows.push(row);
    }
    let seed = cfg.seed.unwrap_or(0);
    Ok(SweepReport {
        references: vec![],
        verdicts: vec![tally.finish(name, 0)],
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            domain: "upper-half-plane".into(),
            petal: format!("strip(0, 1) with {STRONG_MARKOV_NODES}-node quadrature"),
            n_walks: 0,
            kernel_walks: 0,
            epsilon_shell: cfg.wos.epsilon_shell,
            max_steps: cfg.wos.max_steps,
        },
        rows,
    })
}
