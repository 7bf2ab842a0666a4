//! Where Green function and density values come from: closed forms, walk-on-
//! spheres, or the deterministic quasi-hyperbolic bounds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::KoenigsDomain;
use crate::error::{Error, Result};
use crate::hypgeom;
use crate::oracles::ClosedForm;
use crate::scalar::shift;
use crate::wos::{self, splitmix, WosConfig};
use crate::{Point, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelSource {
    Oracle,
    MonteCarlo,
    Bound,
}

/// Dense Green values and their entrywise standard errors.
pub type GreenMatrix<T> = (Vec<Vec<T>>, Vec<Vec<T>>);

/// Green function `g_{Ω−t}` of a fixed shifted domain.
#[derive(Clone, Debug)]
pub enum GreenSource<T> {
    /// Closed form of `Ω`, queried at `w + t`.
    Oracle { form: ClosedForm<T>, t: T },
    MonteCarlo {
        domain: KoenigsDomain<T>,
        t: T,
        cfg: WosConfig,
    },
    /// `−log tanh` of the quasi-hyperbolic distance lower bound.
    UpperBound { domain: KoenigsDomain<T>, t: T },
}

impl<T: Real> GreenSource<T> {
    /// Oracle when `Ω` has a closed form, walk-on-spheres otherwise.
    pub fn for_domain(domain: &KoenigsDomain<T>, t: T, cfg: &WosConfig) -> Self {
        match domain.closed_form() {
            Some(form) => GreenSource::Oracle { form, t },
            None => GreenSource::MonteCarlo {
                domain: domain.clone(),
                t,
                cfg: *cfg,
            },
        }
    }

    pub fn source(&self) -> KernelSource {
        match self {
            GreenSource::Oracle { .. } => KernelSource::Oracle,
            GreenSource::MonteCarlo { .. } => KernelSource::MonteCarlo,
            GreenSource::UpperBound { .. } => KernelSource::Bound,
        }
    }

    /// `g(x, y)` for every target `y`, with standard errors. `row` keys the
    /// walk seed so different rows use independent streams.
    pub fn row(&self, x: Point<T>, targets: &[Point<T>], row: u64) -> Result<Vec<(T, T)>> {
        match self {
            GreenSource::Oracle { form, t } => targets
                .iter()
                .map(|y| Ok((form.green(shift(x, *t), shift(*y, *t))?, T::zero())))
                .collect(),
            GreenSource::UpperBound { domain, t } => targets
                .iter()
                .map(|y| {
                    if *y == x {
                        return Ok((T::infinity(), T::zero()));
                    }
                    Ok((hypgeom::green_upper_bound(x, *y, domain, *t)?, T::zero()))
                })
                .collect(),
            GreenSource::MonteCarlo { domain, t, cfg } => {
                let (exits, _) = wos::exit_points(x, domain, *t, cfg, splitmix(cfg.seed, row))?;
                if exits.len() < 2 {
                    return Err(Error::Precondition("every walk was truncated".into()));
                }
                let exits: Vec<Point<f64>> = exits.into_iter().map(to_f64).collect();
                let xf = to_f64(x);
                Ok(targets
                    .iter()
                    .map(|y| {
                        let yf = to_f64(*y);
                        if yf == xf {
                            return (T::infinity(), T::zero());
                        }
                        let (mean, se) = wos::log_mean(&exits, yf);
                        let g = (mean - (xf - yf).norm().ln()).max(0.0);
                        (T::lit(g), T::lit(se))
                    })
                    .collect())
            }
        }
    }

    /// Symmetrized Green matrix over `points` with `+∞` on the diagonal, and
    /// the matching standard errors.
    pub fn matrix(&self, points: &[Point<T>]) -> Result<GreenMatrix<T>> {
        let rows: Vec<Vec<(T, T)>> = points
            .par_iter()
            .enumerate()
            .map(|(i, &x)| self.row(x, points, i as u64))
            .collect::<Result<_>>()?;
        Ok(symmetrize(&rows))
    }

    /// Hyperbolic density at `w` with standard error.
    pub fn density(&self, w: Point<T>, index: u64) -> Result<(T, T)> {
        match self {
            GreenSource::Oracle { form, t } => Ok((form.density(shift(w, *t))?, T::zero())),
            GreenSource::UpperBound { domain, t } => {
                Ok((hypgeom::density_bounds(w, domain, *t)?.0, T::zero()))
            }
            GreenSource::MonteCarlo { domain, t, cfg } => {
                let c = cfg.with_seed(splitmix(cfg.seed, index));
                let e = wos::robin_density_mc(w, domain, *t, &c)?;
                Ok((e.value, e.std_err))
            }
        }
    }
}

/// `(G + Gᵀ)/2` and the matching error `√(σ_ij² + σ_ji²)/2`.
pub(crate) fn symmetrize<T: Real>(rows: &[Vec<(T, T)>]) -> GreenMatrix<T> {
    let n = rows.len();
    let half = T::lit(0.5);
    let mut g = vec![vec![T::zero(); n]; n];
    let mut s = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let (a, sa) = rows[i][j];
            let (b, sb) = rows[j][i];
            g[i][j] = if i == j { a } else { (a + b) * half };
            s[i][j] = (sa * sa + sb * sb).sqrt() * half;
        }
    }
    (g, s)
}

fn to_f64<T: Real>(p: Point<T>) -> Point<f64> {
    Point::new(p.re.as_f64(), p.im.as_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Point;

    fn pt(re: f64, im: f64) -> Point<f64> {
        Point::new(re, im)
    }

    #[test]
    fn oracle_matrix_is_symmetric() {
        let src = GreenSource::Oracle {
            form: ClosedForm::Disk,
            t: 0.0,
        };
        let pts = [pt(0.5, 0.0), pt(-0.5, 0.0), pt(0.1, 0.3)];
        let (g, _) = src.matrix(&pts).unwrap();
        assert!((g[0][1] - 1.25f64.ln()).abs() < 1e-12);
        for i in 0..3 {
            assert!(g[i][i].is_infinite());
            for j in 0..3 {
                assert_eq!(g[i][j], g[j][i]);
            }
        }
    }

    #[test]
    fn monte_carlo_matrix_matches_oracle() {
        let strip = KoenigsDomain::strip(0.0, std::f64::consts::PI).unwrap();
        let cfg = WosConfig {
            n_walks: 4000,
            seed: 3,
            ..WosConfig::default()
        };
        let mc = GreenSource::for_domain(
            &KoenigsDomain::slit_strip(std::f64::consts::PI, vec![]).unwrap(),
            0.0,
            &cfg,
        );
        assert_eq!(mc.source(), KernelSource::Oracle);
        let mc = GreenSource::MonteCarlo {
            domain: strip.clone(),
            t: -4.0,
            cfg,
        };
        let pts = [pt(0.0, 1.0), pt(0.7, 1.8)];
        let (g, s) = mc.matrix(&pts).unwrap();
        let exact = ClosedForm::Strip {
            y0: 0.0,
            y1: std::f64::consts::PI,
        }
        .green(pts[0], pts[1])
        .unwrap();
        assert!(
            (g[0][1] - exact).abs() < 3.0 * s[0][1] + 1e-2,
            "{} vs {exact}",
            g[0][1]
        );
    }
}
