//! Acceptance suite: one `PASS`/`FAIL` line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the output.
//! Pass criterion numbers as arguments to run a subset.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use danzerlab::cutproject::{self, ModelSetSpec, SearchConfig};
use danzerlab::forest;
use danzerlab::geom::{AxisBox, ConvexPolygon, OrientedBox, Volume};
use danzerlab::layered::{self, LayeredParams, ProbabilisticNets};
use danzerlab::nets::{self, NetParams, RangeSpaceSample, SearchParams};
use danzerlab::pointset::PointSet;
use danzerlab::rng::substream;
use danzerlab::substitution::{self, ChoiceFunction, PointMode, SubstitutionSystem};

type Check = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn constants() -> Check {
    let t = Instant::now();
    let (c2, a2) = layered::constants(2).map_err(err)?;
    let (c3, a3) = layered::constants(3).map_err(err)?;
    let t2 = nets::vc_bounds(2).map_err(err)?.t;
    let elapsed = t.elapsed();
    ensure((c2 - 0.0289224).abs() < 1e-6, format!("C_2 = {c2}"))?;
    ensure((c3 - 0.0169829).abs() < 1e-6, format!("C_3 = {c3}"))?;
    ensure(a2 == 36.0 && a3 == 729.0, format!("alpha = {a2}, {a3}"))?;
    ensure(t2 == 108, format!("t(2) = {t2}"))?;
    ensure(elapsed < Duration::from_millis(1), format!("took {elapsed:?}"))?;
    Ok(format!("C_2={c2:.7} C_3={c3:.7} alpha_2={a2} alpha_3={a3} t={t2} in {elapsed:?}"))
}

fn sauer_shelah() -> Check {
    let mut worst_slack = u64::MAX;
    for k in 0..500u64 {
        let mut rng = substream(11, "range-space", k);
        let g = rng.random_range(1..=10usize);
        let ground: Vec<Vec<f64>> = (0..g).map(|i| vec![i as f64]).collect();
        let m = rng.random_range(0..=(1usize << g).min(300));
        let ranges: Vec<Vec<usize>> = (0..m).map(|_| (0..g).filter(|_| rng.random_bool(rng_p(k))).collect()).collect();
        let rs = RangeSpaceSample::new(ground, ranges).map_err(err)?;
        let vc = nets::brute_force_vc_dim(&rs).map_err(err)?;
        let bound = nets::sauer_shelah_bound(g as u64, vc as u64);
        let count = num_bigint_from(rs.ranges.len());
        ensure(count <= bound, format!("space {k}: {} ranges exceed bound {bound} (vc {vc})", rs.ranges.len()))?;
        let slack: u64 = (bound - count).try_into().unwrap_or(u64::MAX);
        worst_slack = worst_slack.min(slack);
    }
    Ok(format!("500/500 spaces within the bound, tightest slack {worst_slack}"))
}

fn rng_p(k: u64) -> f64 {
    [0.2, 0.5, 0.8][(k % 3) as usize]
}

fn num_bigint_from(n: usize) -> num_bigint::BigUint {
    num_bigint::BigUint::from(n)
}

/// Exact `Vol(Q_t ∩ R) / Vol(R)` for a planar box.
fn exact_fraction(r: &OrientedBox, t: f64) -> f64 {
    let mut p = Some(r.to_polygon());
    for (n, o) in [([1.0, 0.0], t), ([-1.0, 0.0], t), ([0.0, 1.0], t), ([0.0, -1.0], t)] {
        p = p.and_then(|q: ConvexPolygon| q.clip(n, o));
    }
    p.map_or(0.0, |q| q.area()) / r.volume()
}

fn layer_lemmas() -> Check {
    let mut tested = 0usize;
    let mut draws = 0u64;
    while tested < 10_000 {
        let mut rng = substream(5, "half-volume-box", draws);
        draws += 1;
        let t = rng.random_range(1.0..20.0);
        let c = [rng.random_range(-1.5 * t..1.5 * t), rng.random_range(-1.5 * t..1.5 * t)];
        let h = [t * rng.random_range(-3.0f64..1.2).exp(), t * rng.random_range(-3.0f64..1.2).exp()];
        let r = OrientedBox::from_angle(c, rng.random_range(0.0..std::f64::consts::PI), h).map_err(err)?;
        if exact_fraction(&r, t) < 0.5 {
            continue;
        }
        let res = layered::check_box_in_cube(&r, t, 100_000, draws).map_err(err)?;
        if !res.hypothesis {
            continue;
        }
        ensure(res.conclusion, format!("box {r:?} with t = {t} escapes Q_5td"))?;
        tested += 1;
    }
    let cd = layered::c_d(2);
    let mut min_vol = f64::INFINITY;
    for k in 0..10_000u64 {
        let mut rng = substream(6, "unit-box", k);
        let s = 1024.0;
        let rho: f64 = rng.random_range(-4.0..4.0);
        let h = [0.5 * (0.5 * rho).exp(), 0.5 * (-0.5 * rho).exp()];
        let c = [rng.random_range(-s..s), rng.random_range(-s..s)];
        let r = OrientedBox::from_angle(c, rng.random_range(0.0..std::f64::consts::PI), h).map_err(err)?;
        let w = layered::find_layer_witness(&r, k).map_err(|e| format!("box {r:?}: {e}"))?;
        ensure(w.volume >= cd, format!("witness volume {} below C_2", w.volume))?;
        min_vol = min_vol.min(w.volume);
    }
    Ok(format!(
        "containment held for {tested} half-volume boxes; 10000/10000 witnesses, min volume {min_vol:.5} >= C_2 = {cd:.5}"
    ))
}

fn probabilistic_net() -> Check {
    let (n, c) = (32u64, 6.0);
    let r = nets::build_probabilistic_net(&NetParams::new(n, 2, c, 1)).map_err(err)?;
    let bound = 1.5 * c * (n * n) as f64 * (n as f64).ln();
    ensure(r.certified, format!("not certified after {} attempts (worst area {})", r.attempts, r.worst_axis_area))?;
    ensure(r.attempts <= 20, format!("{} attempts", r.attempts))?;
    ensure((r.net.len() as f64) <= bound, format!("size {} above {bound:.0}", r.net.len()))?;
    // Independent re-check with a fresh adversarial seed.
    let region = AxisBox::cube(2, n as f64 / 2.0).map_err(err)?;
    let v = nets::verify_net_2d(&r.net, &region, 1.0, &SearchParams::default(), 99).map_err(err)?;
    ensure(v.certified(1.0), "fresh verification found an empty box")?;
    Ok(format!(
        "certified at attempt {}, {} points <= {bound:.0}, worst axis area {}, best adversarial score {:.3}",
        r.attempts,
        r.net.len(),
        r.worst_axis_area,
        r.adversarial_best_score
    ))
}

fn layered_set() -> Check {
    let params = LayeredParams::new(2, 12, 7);
    let builder = ProbabilisticNets { d: 2, c: 6.0, max_attempts: 20, search: SearchParams::default() };
    let b = layered::assemble_danzer(&params, &builder).map_err(err)?;
    ensure(b.certified, "some layer net is uncertified")?;
    let checks = layered::verify_assembled(&b.assembled, 12, params.convex_volume(), 100_000, ASSEMBLED_ITERATIONS, 3)
        .map_err(err)?;
    let restarts: usize = checks.iter().map(|c| c.restarts).sum();
    ensure(restarts >= 100_000, format!("only {restarts} restarts"))?;
    if let Some(c) = checks.iter().find(|c| c.empty_box.is_some()) {
        return Err(format!("empty box of volume {} in Q_2^{}", params.convex_volume(), c.layer));
    }
    let radii: Vec<f64> = (6..=12).map(|k| 2f64.powi(k)).collect();
    let g = layered::growth_curve(&b.assembled, &radii).map_err(err)?;
    let (lo, hi) = g.iter().fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(r.normalized), h.max(r.normalized)));
    ensure(hi / lo <= 4.0, format!("normalized growth varies by {:.3}", hi / lo))?;
    Ok(format!(
        "{} points, {restarts} restarts at volume {:.0} found nothing, growth ratio {:.3}",
        b.assembled.len(),
        params.convex_volume(),
        hi / lo
    ))
}

/// Nelder–Mead iterations per restart of the assembled-set check.
const ASSEMBLED_ITERATIONS: usize = 300;

fn substitution_witness() -> Check {
    let cases = [
        ("chair centroid", SubstitutionSystem::chair(), PointMode::Choice(ChoiceFunction::Centroid)),
        ("chair boundary", SubstitutionSystem::chair(), PointMode::Choice(ChoiceFunction::Points(vec![[1.0, 0.0]]))),
        ("chair vertex", SubstitutionSystem::chair(), PointMode::Vertices),
        ("penrose centroid", SubstitutionSystem::penrose_robinson(), PointMode::Choice(ChoiceFunction::Centroid)),
    ];
    let mut parts = Vec::new();
    for (label, sys, mode) in &cases {
        let w = substitution::find_empty_cylinder(sys, mode, 14).map_err(|e| format!("{label}: {e}"))?;
        let (a, b, r) = (&w.capsule.a, &w.capsule.b, w.capsule.radius);
        let exact = 2.0 * r * ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt() + std::f64::consts::PI * r * r;
        ensure(w.volume >= 1.0 && (exact - w.volume).abs() < 1e-12, format!("{label}: volume {}", w.volume))?;
        ensure(w.points_inside == 0 && w.reverify_points_inside == 0, format!("{label}: capsule not empty"))?;
        ensure(w.reverify_generation == w.patch_generation + 1, format!("{label}: re-verified at wrong depth"))?;
        parts.push(format!("{label} vol {:.4}", w.volume));
    }
    for sys in [SubstitutionSystem::chair(), SubstitutionSystem::penrose_robinson()] {
        for root in 0..sys.rule.prototiles.len() {
            for m in 0..=6 {
                let got = sys.expand_patch(root, m).map_err(err)?.tiles.len() as u128;
                let want = substitution::predicted_tile_count(&sys.rule, root, m);
                ensure(got == want, format!("{} root {root} m {m}: {got} tiles, predicted {want}", sys.name))?;
            }
        }
    }
    Ok(format!("{}; tile counts match for m <= 6", parts.join(", ")))
}

fn cutproject_falsifier() -> Check {
    let spec = ModelSetSpec::golden();
    let cert = cutproject::search_empty_affine(&spec, 5.0, &SearchConfig::new(100_000, 0)).map_err(err)?;
    ensure(cert.empty, format!("no certificate at T = 5, best radius {}", cert.best_radius))?;
    ensure(cert.evaluations <= 100_000, format!("{} evaluations", cert.evaluations))?;
    let inside = cutproject::verify_certificate(&spec, &cert).map_err(err)?;
    ensure(inside == 0, format!("re-enumeration found {inside} points"))?;
    let grid = ModelSetSpec::lattice(2, vec![0.5, 0.5]).map_err(err)?;
    let small = cutproject::search_empty_affine(&grid, 0.4, &SearchConfig::new(1_000, 0)).map_err(err)?;
    ensure(small.empty, "translated grid at T = 0.4 not certified")?;
    ensure(cutproject::verify_certificate(&grid, &small).map_err(err)? == 0, "translated grid re-check failed")?;
    Ok(format!("golden T=5 certified after {} evaluations; translated grid T=0.4 certified", cert.evaluations))
}

fn forest_metric() -> Check {
    let grid = PointSet::new(
        2,
        (-1010i64..=1020).flat_map(|i| (-1010i64..=1020).flat_map(move |j| [i as f64, j as f64])).collect(),
    )
    .map_err(err)?;
    let window = AxisBox::new(vec![0.0, 0.0], vec![10.0, 10.0]).map_err(err)?;
    let zp = forest::epsilon_of_t(&grid, &[10.0, 100.0, 1000.0], 10_000, &window, 0).map_err(err)?;
    ensure(zp.eps_estimates.iter().all(|&e| e >= 0.49), format!("grid estimates {:?}", zp.eps_estimates))?;
    let golden = cutproject::generate_model_set(&ModelSetSpec::golden(), 330.0).map_err(err)?;
    let ts = [10.0, 30.0, 100.0, 300.0];
    let gp = forest::epsilon_of_t(&golden, &ts, 10_000, &window, 0).map_err(err)?;
    let e = &gp.eps_estimates;
    ensure(e.windows(2).all(|w| w[1] < w[0]), format!("golden estimates not strictly decreasing: {e:?}"))?;
    Ok(format!("grid {:?}; golden {:?}", zp.eps_estimates, e))
}

fn run_cli(dir: &Path, threads: usize, args: &[String]) -> Result<(i32, Vec<u8>), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_danzerlab"))
        .current_dir(dir)
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .output()
        .map_err(err)?;
    Ok((out.status.code().unwrap_or(-1), out.stdout))
}

fn determinism() -> Check {
    let commands: Vec<Vec<&str>> = vec![
        vec!["generate", "net", "--n", "16", "--seed", "5", "--restarts", "60", "--out", "net.dps"],
        vec!["generate", "layered", "--max-layer", "7", "--seed", "2", "--restarts", "40", "--out", "lay.dps"],
        vec!["generate", "substitution", "--system", "penrose-robinson", "--generation", "5", "--out", "pen.dps"],
        vec!["generate", "cutproject", "--spec", "golden", "--radius", "40", "--out", "cut.dps"],
        vec!["verify", "--in", "net.dps", "--region", "Q8", "--volume", "1", "--restarts", "60", "--out", "ver.json"],
        vec!["verify", "--in", "lay.dps", "--region", "Q128", "--volume", "1000", "--restarts", "60", "--no-axis"],
        vec!["witness", "cutproject", "--spec", "golden", "--T", "2", "--budget", "4000", "--out", "wc.json"],
        vec!["witness", "substitution", "--system", "chair", "--out", "ws.json"],
        vec!["measure", "growth", "--in", "lay.dps", "--radii", "8,16,32,64,128", "--out", "g.csv"],
        vec![
            "measure",
            "forest",
            "--in",
            "cut.dps",
            "--T",
            "2,4,8,16",
            "--samples",
            "500",
            "--window",
            "0,0,5,5",
            "--out",
            "f.csv",
        ],
    ];
    let files = [
        "net.dps",
        "net.dps.meta.json",
        "net.dps.report.json",
        "lay.dps",
        "lay.dps.meta.json",
        "lay.dps.manifest.json",
        "pen.dps",
        "pen.dps.meta.json",
        "cut.dps",
        "cut.dps.meta.json",
        "ver.json",
        "wc.json",
        "ws.json",
        "g.csv",
        "f.csv",
    ];
    let dirs =
        [tempfile::tempdir().map_err(err)?, tempfile::tempdir().map_err(err)?, tempfile::tempdir().map_err(err)?];
    let threads = [1usize, 3, 1];
    let mut outputs: Vec<Vec<(i32, Vec<u8>)>> = vec![Vec::new(); 3];
    for cmd in &commands {
        let args: Vec<String> = cmd.iter().map(|s| s.to_string()).collect();
        for k in 0..3 {
            outputs[k].push(run_cli(dirs[k].path(), threads[k], &args)?);
        }
    }
    for (i, cmd) in commands.iter().enumerate() {
        let code = outputs[0][i].0;
        ensure(code == 0 || code == 1, format!("`{}` exited with {code}", cmd.join(" ")))?;
        for k in 1..3 {
            ensure(outputs[k][i] == outputs[0][i], format!("`{}` differs across runs", cmd.join(" ")))?;
        }
    }
    for f in files {
        let a = std::fs::read(dirs[0].path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        for d in &dirs[1..] {
            let b = std::fs::read(d.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
            ensure(a == b, format!("{f} differs across runs"))?;
        }
    }
    Ok(format!("{} commands and {} files byte-identical over 3 runs with 1 and 3 threads", commands.len(), files.len()))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "constants", budget: Duration::from_secs(1), run: constants },
        Criterion { id: 2, name: "Sauer-Shelah bound", budget: Duration::from_secs(30), run: sauer_shelah },
        Criterion { id: 3, name: "layer lemmas", budget: Duration::from_secs(300), run: layer_lemmas },
        Criterion { id: 4, name: "probabilistic net", budget: Duration::from_secs(600), run: probabilistic_net },
        Criterion { id: 5, name: "layered Danzer set", budget: Duration::from_secs(1800), run: layered_set },
        Criterion { id: 6, name: "substitution witness", budget: Duration::from_secs(300), run: substitution_witness },
        Criterion {
            id: 7,
            name: "cut-and-project falsifier",
            budget: Duration::from_secs(900),
            run: cutproject_falsifier,
        },
        Criterion { id: 8, name: "forest metric", budget: Duration::from_secs(600), run: forest_metric },
        Criterion { id: 9, name: "determinism", budget: Duration::from_secs(1800), run: determinism },
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let t = Instant::now();
        let result = (c.run)();
        let elapsed = t.elapsed();
        let result = match result {
            Ok(msg) if elapsed > c.budget => Err(format!("{msg}; over the {:?} budget", c.budget)),
            r => r,
        };
        match result {
            Ok(msg) => println!("criterion {} ({}): PASS in {:.1?}: {msg}", c.id, c.name, elapsed),
            Err(msg) => {
                failed += 1;
                println!("criterion {} ({}): FAIL in {:.1?}: {msg}", c.id, c.name, elapsed);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
