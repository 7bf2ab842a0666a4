//! End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit
//! if any fails. Built with `harness = false`.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use petallab_core::compacts::CompactSet;
use petallab_core::domains::KoenigsDomain;
use petallab_core::energy;
use petallab_core::experiments::{Row, SweepConfig, SweepReport};
use petallab_core::fekete::{self, FeketeConfig, LogKernel};
use petallab_core::hypgeom;
use petallab_core::kernel::GreenSource;
use petallab_core::oracles::ClosedForm;
use petallab_core::report;
use petallab_core::wos::{self, WosConfig};
use petallab_core::Point64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

const BIN: &str = env!("CARGO_BIN_EXE_petallab");

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

fn p(re: f64, im: f64) -> Point64 {
    Point64::new(re, im)
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

#[derive(Deserialize)]
struct FixtureFile {
    sweep: SweepConfig,
}

fn load_fixture(name: &str) -> SweepConfig {
    let text = std::fs::read_to_string(fixture(name)).expect("fixture");
    toml::from_str::<FixtureFile>(&text)
        .expect("fixture parses")
        .sweep
}

struct Run {
    code: i32,
    stdout: String,
    elapsed: Duration,
    report: SweepReport,
    dir: PathBuf,
}

/// Runs `petallab <args> --out <dir>` and loads the written report.
fn petallab(args: &[&str], dir: &Path) -> Result<Run, String> {
    let start = Instant::now();
    let out = Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("PETALLAB_SEED")
        .output()
        .map_err(|e| format!("cannot run petallab: {e}"))?;
    let elapsed = start.elapsed();
    let stdout = String::from_utf8_lossy(&out.stdout).trim().to_owned();
    let json = std::fs::read_to_string(dir.join("report.json")).map_err(|e| {
        format!(
            "no report ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })?;
    Ok(Run {
        code: out.status.code().unwrap_or(-1),
        stdout,
        elapsed,
        report: report::from_json(&json).map_err(|e| e.to_string())?,
        dir: dir.to_path_buf(),
    })
}

fn row<'a>(rep: &'a SweepReport, t: f64, quantity: &str) -> Result<&'a Row, String> {
    rep.rows
        .iter()
        .find(|r| r.t == t && r.quantity == quantity)
        .ok_or_else(|| format!("missing row {quantity} at t={t}"))
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn oracle_agreement() -> Outcome {
    let cfg = WosConfig::default().with_walks(100_000).with_seed(1);
    let start = Instant::now();
    let disk = KoenigsDomain::unit_disk();
    let k = CompactSet::disk(p(0.0, 0.0), 0.5).map_err(|e| e.to_string())?;
    let run = |e: petallab_core::Result<wos::Estimate<f64>>| e.map_err(|e| e.to_string());
    let cases = [
        (
            "omega",
            run(wos::harmonic_measure_mc(p(0.8, 0.0), &k, &disk, 0.0, &cfg))?,
            0.8f64.ln() / 0.5f64.ln(),
        ),
        (
            "g",
            run(wos::green_mc(p(0.5, 0.0), p(0.0, 0.0), &disk, 0.0, &cfg))?,
            2f64.ln(),
        ),
        (
            "lambda_H",
            run(wos::robin_density_mc(
                p(0.0, 1.0),
                &KoenigsDomain::upper_half_plane(),
                0.0,
                &cfg,
            ))?,
            0.5,
        ),
        (
            "lambda_strip",
            run(wos::robin_density_mc(
                p(0.0, PI / 2.0),
                &KoenigsDomain::strip(0.0, PI).map_err(|e| e.to_string())?,
                0.0,
                &cfg,
            ))?,
            0.5,
        ),
    ];
    let elapsed = start.elapsed();
    let mut parts = Vec::new();
    for (name, est, exact) in &cases {
        let err = (est.value - exact).abs();
        // Exit points are snapped to the boundary, so the disk Green estimate
        // is exact up to rounding and its standard error is zero.
        let sigma_ok = err <= 3.0 * est.std_err || err <= 1e-12;
        ensure(
            sigma_ok && err <= 0.01,
            format!("{name}: {} ± {} vs {exact}", est.value, est.std_err),
        )?;
        parts.push(format!("{name} err {err:.1e}"));
    }
    ensure(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("{} in {:.1}s", parts.join(", "), elapsed.as_secs_f64()))
}

fn capacity_oracle() -> Outcome {
    let start = Instant::now();
    let k = CompactSet::disk(p(0.0, 0.0), 0.5).map_err(|e| e.to_string())?;
    let src = GreenSource::Oracle {
        form: ClosedForm::Disk,
        t: 0.0,
    };
    let eq = energy::equilibrium_with(&k, &src, 64).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let exact = 2.0 * PI / 2f64.ln();
    let rel = (eq.capacity / exact - 1.0).abs();
    let spread = eq
        .weights
        .iter()
        .map(|w| (w - 1.0 / 64.0).abs())
        .fold(0.0, f64::max);
    ensure(rel <= 0.02, format!("Cap {} vs {exact}", eq.capacity))?;
    ensure(spread <= 1e-3, format!("weights deviate by {spread}"))?;
    ensure(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!(
        "Cap {:.5} (rel err {rel:.1e}), weight spread {spread:.1e}",
        eq.capacity
    ))
}

fn transfinite_diameter() -> Outcome {
    let k = CompactSet::disk(p(0.0, 0.0), 0.5).map_err(|e| e.to_string())?;
    let src = GreenSource::Oracle {
        form: ClosedForm::Disk,
        t: 0.0,
    };
    let caph =
        fekete::caph_estimate(&k, &src, 12, 64, &FeketeConfig::default()).map_err(|e| e.to_string())?;
    let v = energy::equilibrium_with(&k, &src, 64)
        .map_err(|e| e.to_string())?
        .energy;
    let rel = (caph.value / (-v).exp() - 1.0).abs();
    ensure(
        (0.49..=0.51).contains(&caph.value),
        format!("caph {}", caph.value),
    )?;
    ensure(
        rel <= 0.02,
        format!("caph {} vs exp(-V) {}", caph.value, (-v).exp()),
    )?;
    Ok(format!("caph {:.5}, exp(-V) {:.5}", caph.value, (-v).exp()))
}

fn fekete_brute_force() -> Outcome {
    let mut grids: Vec<(String, LogKernel<f64>)> = Vec::new();
    let interval: Vec<Point64> = (0..=32).map(|i| p(-1.0 + i as f64 / 16.0, 0.0)).collect();
    grids.push(("[-1,1] x33".into(), LogKernel::euclidean(&interval)));
    let circle: Vec<Point64> = (0..64)
        .map(|i| Point64::from_polar(0.5, 2.0 * PI * i as f64 / 64.0))
        .collect();
    grids.push(("circle x64".into(), LogKernel::euclidean(&circle)));
    let k = CompactSet::polyline(vec![p(-1.0, 1.0), p(0.0, 2.0), p(1.5, 1.2)]).map_err(|e| e.to_string())?;
    let cands = k.discretize(32).map_err(|e| e.to_string())?.candidates;
    let src = GreenSource::Oracle {
        form: ClosedForm::HalfPlane { y0: 0.0 },
        t: 0.0,
    };
    grids.push((
        format!("hyperbolic polyline x{}", cands.len()),
        LogKernel::hyperbolic(&cands, &src).map_err(|e| e.to_string())?,
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for g in 0..4 {
        let n = 24 + 10 * g;
        let pts: Vec<Point64> = (0..n)
            .map(|_| p(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
            .collect();
        grids.push((format!("random x{n}"), LogKernel::euclidean(&pts)));
    }
    let mut checked = 0;
    for (name, kernel) in &grids {
        for n in 2..=4 {
            let (s, _) = fekete::exhaustive(kernel, n);
            let exact = fekete::diameter_from_sum(s, n);
            let got =
                fekete::n_diameter_on(kernel, n, &FeketeConfig::default()).map_err(|e| e.to_string())?;
            ensure(
                (got.diameter - exact).abs() <= 1e-12 * exact,
                format!("{name}, n={n}: {} vs {exact}", got.diameter),
            )?;
            checked += 1;
        }
    }
    let d3 = fekete::n_diameter_on(&grids[0].1, 3, &FeketeConfig::default()).map_err(|e| e.to_string())?;
    ensure(
        (d3.diameter - 2f64.powf(1.0 / 3.0)).abs() <= 1e-12,
        format!("d3 = {}", d3.diameter),
    )?;
    Ok(format!(
        "{checked} grid/n pairs agree, d3([-1,1]) = {}",
        d3.diameter
    ))
}

/// At most one adjacent pair may move against `rising` by more than 2σ.
fn trend(rows: &[&Row], rising: bool) -> (usize, f64) {
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for w in rows.windows(2) {
        let step = if rising {
            w[1].value - w[0].value
        } else {
            w[0].value - w[1].value
        };
        let slack = step + 2.0 * w[0].std_err.hypot(w[1].std_err);
        worst = worst.min(slack);
        if slack < 0.0 {
            violations += 1;
        }
    }
    (violations, worst)
}

fn verdict(run: &Run, name: &str) -> Result<(), String> {
    let v = run
        .report
        .verdicts
        .iter()
        .find(|v| v.name == name)
        .ok_or_else(|| format!("no {name} verdict"))?;
    ensure(
        v.status.as_str() == "pass",
        format!("{name}: {} ({})", v.status.as_str(), v.detail),
    )
}

fn theorem_t1(dir: &Path) -> Outcome {
    let cfg = fixture("slitstrip.toml");
    let run = petallab(&["check", "--name", "T1", "--config", cfg.to_str().unwrap()], dir)?;
    ensure(run.code == 0, format!("exit {}: {}", run.code, run.stdout))?;
    verdict(&run, "T1")?;
    let rows = run.report.series("harmonic");
    ensure(rows.len() == 16, format!("{} rows", rows.len()))?;
    // Harmonic measure grows with t, so it falls along the decreasing grid.
    let (violations, worst) = trend(&rows, false);
    ensure(violations <= 1, format!("{violations} violations"))?;
    ensure(
        run.elapsed < Duration::from_secs(600),
        format!("took {:?}", run.elapsed),
    )?;
    Ok(format!(
        "omega {:.4} -> {:.4}, {violations} 2σ violations (worst slack {worst:.1e}), {:.1}s",
        rows[0].value,
        rows[rows.len() - 1].value,
        run.elapsed.as_secs_f64()
    ))
}

/// Polar midpoint quadrature of the squared strip density over a disk.
fn strip_area_of_disk(c: Point64, r: f64, y0: f64, y1: f64) -> f64 {
    let h = y1 - y0;
    let n = 600;
    let mut sum = 0.0;
    for i in 0..n {
        let rho = r * (i as f64 + 0.5) / n as f64;
        for j in 0..n {
            let th = 2.0 * PI * (j as f64 + 0.5) / n as f64;
            let y = c.im + rho * th.sin();
            let lam = PI / (2.0 * h * (PI * (y - y0) / h).sin());
            sum += rho * lam * lam;
        }
    }
    sum * (r / n as f64) * (2.0 * PI / n as f64)
}

fn limits(sweep: &Run, cfg: &SweepConfig) -> Outcome {
    let rep = &sweep.report;
    let t = *cfg.t_grid.last().unwrap();
    let petal = ClosedForm::Strip { y0: 0.0, y1: PI };
    let src = GreenSource::Oracle { form: petal, t: 0.0 };
    let k = cfg.k.build().map_err(|e| e.to_string())?;
    let z = p(cfg.z[0], cfg.z[1]);

    let reference = energy::equilibrium_with(&k, &src, cfg.reference_m).map_err(|e| e.to_string())?;
    let omega_strip =
        energy::equilibrium_potential(&reference, &src, z).map_err(|e| e.to_string())? / reference.energy;
    let h = row(rep, t, "harmonic")?;
    let tol = (3.0 * h.std_err).max(0.02);
    ensure(
        (h.value - omega_strip).abs() <= tol,
        format!("T2: {} vs {omega_strip}", h.value),
    )?;

    let mut worst_density = 0.0f64;
    for (i, q) in cfg.density_probes.iter().enumerate() {
        let exact = 1.0 / (2.0 * q[1].sin());
        let r = row(rep, t, &format!("density[{i}]"))?;
        let rel = (r.value / exact - 1.0).abs();
        ensure(rel <= 0.02, format!("T3 probe {i}: {} vs {exact}", r.value))?;
        worst_density = worst_density.max(rel);
    }
    ensure(cfg.density_probes.len() == 9, "T3 needs 9 probes")?;

    let [cx, cy, cr] = cfg.k.disks[0];
    let area_strip = strip_area_of_disk(p(cx, cy), cr, 0.0, PI);
    let a = row(rep, t, "area")?;
    let area_rel = (a.value / area_strip - 1.0).abs();
    ensure(area_rel <= 0.03, format!("T5: area {} vs {area_strip}", a.value))?;

    let cap_strip = energy::equilibrium_with(&k, &src, cfg.m)
        .map_err(|e| e.to_string())?
        .capacity;
    let c = row(rep, t, "capacity")?;
    let cap_rel = (c.value / cap_strip - 1.0).abs();
    ensure(
        cap_rel <= 0.05,
        format!("T6: capacity {} vs {cap_strip}", c.value),
    )?;

    for name in ["T2", "T3", "T5", "T6"] {
        verdict(sweep, name)?;
    }
    Ok(format!(
        "omega {:.4} vs {omega_strip:.4}; density worst {:.2}%; area {:.2}%; capacity {:.2}%",
        h.value,
        100.0 * worst_density,
        100.0 * area_rel,
        100.0 * cap_rel
    ))
}

fn theorem_t4(sweep: &Run, cfg: &SweepConfig) -> Outcome {
    let name = format!("n_diameter[{}]", cfg.n_diameter);
    let rows = sweep.report.series(&name);
    ensure(rows.len() == cfg.t_grid.len(), format!("{} rows", rows.len()))?;
    // d_{4,h} shrinks with t, so it rises along the decreasing grid.
    let (violations, worst) = trend(&rows, true);
    ensure(violations <= 1, format!("{violations} violations"))?;
    verdict(sweep, "T4")?;
    Ok(format!(
        "d4 {:.4} -> {:.4}, {violations} 2σ violations (worst slack {worst:.1e})",
        rows[0].value,
        rows[rows.len() - 1].value
    ))
}

fn theorem_t7(dir: &Path) -> Outcome {
    let path = fixture("expcusp.toml");
    let cfg = load_fixture("expcusp.toml");
    let run = petallab(
        &["check", "--name", "T7", "--config", path.to_str().unwrap()],
        dir,
    )?;
    ensure(run.code == 0, format!("exit {}: {}", run.code, run.stdout))?;
    let rep = &run.report;
    let (t0, t1) = (cfg.t_grid[0], *cfg.t_grid.last().unwrap());
    ensure(t1 <= -12.0, format!("grid ends at {t1}"))?;

    let h = row(rep, t1, "harmonic")?;
    ensure(
        h.value - 3.0 * h.std_err <= 0.05,
        format!("(i) omega {}", h.value),
    )?;

    let domain = KoenigsDomain::exp_cusp();
    for (i, q) in cfg.density_probes.iter().enumerate() {
        let name = format!("density_lower_bound[{i}]");
        let (a, b) = (row(rep, t0, &name)?.value, row(rep, t1, &name)?.value);
        let exact = hypgeom::density_bounds(p(q[0], q[1]), &domain, t1)
            .map_err(|e| e.to_string())?
            .0;
        ensure(b == exact, format!("(ii) {name} {b} vs {exact}"))?;
        ensure(b >= 10.0 * a, format!("(ii) {name} {a} -> {b}"))?;
    }

    let (z, w) = (p(cfg.z[0], cfg.z[1]), p(cfg.w[0], cfg.w[1]));
    let dist = row(rep, t1, "distance_lower_bound")?.value;
    let exact = hypgeom::distance_lower_bound(z, w, &domain, t1).map_err(|e| e.to_string())?;
    ensure(
        dist == exact && dist > 3.0,
        format!("(iii) {dist} (recomputed {exact})"),
    )?;
    let green = row(rep, t1, "green_upper_bound")?.value;
    let exact = hypgeom::green_upper_bound(z, w, &domain, t1).map_err(|e| e.to_string())?;
    ensure(
        green == exact && green < 0.05,
        format!("(iv) {green} (recomputed {exact})"),
    )?;

    ensure(
        rep.series("area")
            .iter()
            .all(|r| r.value == 0.0 && r.std_err == 0.0),
        "(v) area is not identically zero",
    )?;
    let d4 = row(rep, t1, &format!("n_diameter_lower_bound[{}]", cfg.n_diameter))?.value;
    ensure(d4 >= 0.95, format!("(vi) d4 bound {d4}"))?;
    let (c0, c1) = (
        row(rep, t0, "capacity_lower_bound")?.value,
        row(rep, t1, "capacity_lower_bound")?.value,
    );
    ensure(c1 >= 10.0 * c0, format!("(vii) capacity bound {c0} -> {c1}"))?;
    verdict(&run, "T7")?;
    Ok(format!(
        "omega {:.4}, d >= {dist:.3}, g <= {green:.2e}, d4 >= {d4:.4}, cap bound x{:.0}, {:.1}s",
        h.value,
        c1 / c0,
        run.elapsed.as_secs_f64()
    ))
}

fn strong_markov(dir: &Path) -> Outcome {
    let cfg = fixture("halfplane.toml");
    let mut parts = Vec::new();
    for name in ["SM-H", "SM-G"] {
        let run = petallab(
            &["check", "--name", name, "--config", cfg.to_str().unwrap()],
            &dir.join(name),
        )?;
        ensure(run.code == 0, format!("{name} exit {}: {}", run.code, run.stdout))?;
        ensure(
            run.elapsed < Duration::from_secs(5),
            format!("{name} took {:?}", run.elapsed),
        )?;
        let worst = run.report.rows.iter().map(|r| r.value.abs()).fold(0.0, f64::max);
        ensure(
            !run.report.rows.is_empty() && worst <= 1e-3,
            format!("{name} residual {worst}"),
        )?;
        parts.push(format!(
            "{name} residual {worst:.1e} in {:.2}s",
            run.elapsed.as_secs_f64()
        ));
    }
    Ok(parts.join(", "))
}

fn group(dir: &Path) -> Outcome {
    let cfg = fixture("strip.toml");
    let run = petallab(
        &["check", "--name", "GROUP", "--config", cfg.to_str().unwrap()],
        dir,
    )?;
    ensure(run.code == 0, format!("exit {}: {}", run.code, run.stdout))?;
    let rep = &run.report;
    let names: BTreeSet<&str> = rep.rows.iter().map(|r| r.quantity.as_str()).collect();
    for name in &names {
        let rows = rep.series(name);
        let first = rows[0];
        for r in &rows[1..] {
            let ok = if r.std_err == 0.0 && first.std_err == 0.0 {
                (r.value - first.value).abs() <= 1e-9 * first.value.abs().max(1.0)
            } else {
                (r.value - first.value).abs() <= 2.0 * r.std_err.hypot(first.std_err)
            };
            ensure(ok, format!("{name} at t={}: {} vs {}", r.t, r.value, first.value))?;
        }
    }
    Ok(format!(
        "{} quantities constant over {} times",
        names.len(),
        load_fixture("strip.toml").t_grid.len()
    ))
}

fn determinism(root: &Path) -> Outcome {
    let commands: [(&str, &str); 3] = [
        ("T1", "slitstrip.toml"),
        ("SM-H", "halfplane.toml"),
        ("GROUP", "strip.toml"),
    ];
    for (name, cfg) in commands {
        let cfg = fixture(cfg);
        let args = [
            "check",
            "--name",
            name,
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "42",
        ];
        let a = petallab(&args, &root.join(format!("{name}-a")))?;
        let b = petallab(&args, &root.join(format!("{name}-b")))?;
        for f in ["report.csv", "report.json", "report.svg"] {
            let (x, y) = (std::fs::read(a.dir.join(f)), std::fs::read(b.dir.join(f)));
            ensure(
                matches!((&x, &y), (Ok(x), Ok(y)) if x == y),
                format!("{name}: {f} differs between runs"),
            )?;
        }
    }
    Ok("T1, SM-H and GROUP reports are byte-identical across runs".into())
}

fn main() -> ExitCode {
    // One worker thread, matching the single-threaded runtime budgets.
    std::env::set_var("RAYON_NUM_THREADS", "1");
    let tmp = tempfile::tempdir().expect("tempdir");
    let root = tmp.path();

    let slit = load_fixture("slitstrip.toml");
    let slit_path = fixture("slitstrip.toml");
    let sweep = petallab(
        &["sweep", "--config", slit_path.to_str().unwrap()],
        &root.join("sweep"),
    );

    let criteria: Vec<Criterion> = vec![
        ("walk-on-spheres oracle agreement", Box::new(oracle_agreement)),
        ("capacity oracle", Box::new(capacity_oracle)),
        ("transfinite diameter identity", Box::new(transfinite_diameter)),
        ("Fekete brute-force equivalence", Box::new(fekete_brute_force)),
        (
            "T1 monotone harmonic measure",
            Box::new(|| theorem_t1(&root.join("t1"))),
        ),
        (
            "T2/T3/T5/T6 petal limits",
            Box::new(|| {
                sweep
                    .as_ref()
                    .map_err(Clone::clone)
                    .and_then(|s| limits(s, &slit))
            }),
        ),
        (
            "T4 monotone 4-diameter",
            Box::new(|| {
                sweep
                    .as_ref()
                    .map_err(Clone::clone)
                    .and_then(|s| theorem_t4(s, &slit))
            }),
        ),
        ("T7 degenerate petal", Box::new(|| theorem_t7(&root.join("t7")))),
        (
            "strong Markov identities",
            Box::new(|| strong_markov(&root.join("sm"))),
        ),
        (
            "group fixture invariance",
            Box::new(|| group(&root.join("group"))),
        ),
        ("determinism", Box::new(|| determinism(&root.join("det")))),
    ];

    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
