//! `danzerlab`: build Danzer sets and nets, search for empty-set witnesses,
//! and measure growth and visibility of point sets.
//!
//! Exit status: 0 on success, 1 for honest negative results (uncertified
//! builds, failed searches, empty boxes found by `verify`), 2 for usage or
//! input errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use danzerlab::cutproject::{self, ModelSetSpec, SearchConfig};
use danzerlab::forest;
use danzerlab::geom::{AxisBox, Region};
use danzerlab::layered::{self, LayeredParams, ProbabilisticNets};
use danzerlab::nets::{self, NetParams, SearchParams};
use danzerlab::pointset::PointSet;
use danzerlab::substitution::{self, ChoiceFunction, PointMode, SubstitutionRule, SubstitutionSystem};

#[derive(Parser)]
#[command(name = "danzerlab", version, about = "Danzer sets, box nets, and empty-set witnesses")]
struct Cli {
    /// Worker threads (overrides DANZERLAB_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the constants of dimension D as JSON.
    Bounds {
        #[arg(long)]
        d: usize,
    },
    /// Generate a point set.
    #[command(subcommand)]
    Generate(Generate),
    /// Search for a certified empty region.
    #[command(subcommand)]
    Witness(Witness),
    /// Look for empty boxes of a given volume in a planar point set.
    Verify(VerifyArgs),
    /// Growth and visibility measurements.
    #[command(subcommand)]
    Measure(Measure),
}

#[derive(Subcommand)]
enum Generate {
    /// Layered union of box nets.
    Layered(LayeredArgs),
    /// Random subset of the fine grid certified as a box net.
    Net(NetArgs),
    /// Points of a substitution patch.
    Substitution(SubstitutionArgs),
    /// Cut-and-project set inside a ball.
    Cutproject(CutprojectArgs),
}

#[derive(Args)]
struct SearchFlags {
    /// Adversarial restarts per verification.
    #[arg(long, default_value_t = 200)]
    restarts: usize,
    /// Nelder–Mead iterations per restart.
    #[arg(long, default_value_t = 300)]
    iterations: usize,
}

#[derive(Args)]
struct LayeredArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long)]
    max_layer: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6.0)]
    c: f64,
    /// Volume of boxes each layer net must meet.
    #[arg(long, default_value_t = 256.0)]
    box_volume: f64,
    #[arg(long, default_value_t = 20)]
    attempts: u64,
    #[command(flatten)]
    search: SearchFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NetArgs {
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 6.0)]
    c: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    attempts: u64,
    #[command(flatten)]
    search: SearchFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SystemArgs {
    /// Built-in system: chair or penrose-robinson.
    #[arg(long, conflicts_with = "rule")]
    system: Option<String>,
    /// Rule file in JSON.
    #[arg(long)]
    rule: Option<PathBuf>,
    /// centroid, vertex, or one `x,y` per prototile separated by `;`.
    #[arg(long, default_value = "centroid")]
    choice: String,
}

#[derive(Args)]
struct SubstitutionArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long)]
    generation: u32,
    #[arg(long, default_value_t = 0)]
    root: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CutprojectArgs {
    /// Spec file in JSON, or `golden` / `fibonacci`.
    #[arg(long)]
    spec: String,
    #[arg(long)]
    radius: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Witness {
    /// Empty capsule of volume at least 1 in a substitution tiling.
    Substitution {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long, default_value_t = 14)]
        max_generation: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Affine map emptying the ball of radius T for a cut-and-project set.
    Cutproject {
        #[arg(long)]
        spec: String,
        #[arg(long = "T")]
        t: f64,
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// `Q<t>` or `<t>`: the cube `‖x‖∞ ≤ t`.
    #[arg(long)]
    region: String,
    #[arg(long)]
    volume: f64,
    #[arg(long, default_value_t = 200)]
    restarts: usize,
    #[arg(long, default_value_t = 300)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop counting a candidate box after this many points.
    #[arg(long)]
    count_cap: Option<usize>,
    /// Skip the exact axis-parallel check.
    #[arg(long)]
    no_axis: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Measure {
    /// Counts in `Q_T` normalized by `T^d·ln T`.
    Growth {
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated radii.
        #[arg(long)]
        radii: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Visibility estimates `ε̂(T)`.
    Forest {
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated segment lengths.
        #[arg(long = "T")]
        t: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Sampling box `lo₁,…,lo_d,hi₁,…,hi_d`.
        #[arg(long)]
        window: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure modes mapped to exit codes.
enum Failure {
    Negative(String),
    Usage(String),
}

impl From<danzerlab::Error> for Failure {
    fn from(e: danzerlab::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| std::env::var("DANZERLAB_THREADS").ok().and_then(|s| s.trim().parse().ok()));
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("danzerlab: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Negative(msg)) => {
            eprintln!("danzerlab: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("danzerlab: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Bounds { d } => bounds(d),
        Command::Generate(g) => match g {
            Generate::Layered(a) => generate_layered(a),
            Generate::Net(a) => generate_net(a),
            Generate::Substitution(a) => generate_substitution(a),
            Generate::Cutproject(a) => generate_cutproject(a),
        },
        Command::Witness(w) => match w {
            Witness::Substitution { system, max_generation, out } => witness_substitution(system, max_generation, out),
            Witness::Cutproject { spec, t, budget, restarts, seed, out } => {
                witness_cutproject(&spec, t, SearchConfig { budget, restarts, seed }, out)
            }
        },
        Command::Verify(a) => verify(a),
        Command::Measure(m) => match m {
            Measure::Growth { input, radii, out } => measure_growth(&input, &radii, out),
            Measure::Forest { input, t, samples, window, seed, out } => {
                measure_forest(&input, &t, samples, &window, seed, out)
            }
        },
    }
}

/// Pretty JSON to stdout and, when given, to a file.
fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Outcome {
    let text = serde_json::to_string_pretty(value)?;
    if let Some(p) = out {
        fs::write(p, format!("{text}\n"))?;
    }
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{text}")?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, Failure> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("bad number {x:?}")))).collect()
}

#[derive(Serialize)]
struct BoundsReport {
    d: usize,
    c_d: f64,
    alpha_d: f64,
    t: u64,
    j: u32,
    halfspace_vc: u64,
    box_vc_bound: u64,
    /// Sampling constant of the union-bound argument, `4(2dt + 1)`.
    theoretical_c: f64,
}

fn bounds(d: usize) -> Outcome {
    let (c_d, alpha_d) = layered::constants(d)?;
    let vc = nets::vc_bounds(d)?;
    emit(
        &BoundsReport {
            d,
            c_d,
            alpha_d,
            t: vc.t,
            j: layered::j_d(d),
            halfspace_vc: vc.halfspace,
            box_vc_bound: vc.boxes_bound,
            theoretical_c: nets::theoretical_constant(d),
        },
        None,
    )
}

fn generate_layered(a: LayeredArgs) -> Outcome {
    let params = LayeredParams { c: a.c, box_volume: a.box_volume, ..LayeredParams::new(a.d, a.max_layer, a.seed) };
    let builder = ProbabilisticNets {
        d: a.d,
        c: a.c,
        max_attempts: a.attempts,
        search: SearchParams::new(a.search.restarts, a.search.iterations),
    };
    let build = layered::assemble_danzer(&params, &builder)?;
    build.assembled.write_dps(&a.out)?;
    let manifest = build.manifest();
    emit(&manifest, Some(&with_suffix(&a.out, ".manifest.json")))?;
    if build.certified {
        Ok(())
    } else {
        Err(Failure::Negative("some layer net is uncertified".into()))
    }
}

fn generate_net(a: NetArgs) -> Outcome {
    let params = NetParams {
        max_attempts: a.attempts,
        restarts: a.search.restarts,
        iterations: a.search.iterations,
        ..NetParams::new(a.n, a.d, a.c, a.seed)
    };
    let result = nets::build_probabilistic_net(&params)?;
    result.net.write_dps(&a.out)?;
    let report = result.report();
    emit(&report, Some(&with_suffix(&a.out, ".report.json")))?;
    if result.certified {
        Ok(())
    } else {
        Err(Failure::Negative("no attempt produced a certified net".into()))
    }
}

fn load_system(s: &SystemArgs) -> std::result::Result<SubstitutionSystem, Failure> {
    match (&s.system, &s.rule) {
        (Some(name), None) => Ok(SubstitutionSystem::builtin(name)?),
        (None, Some(path)) => {
            let rule = SubstitutionRule::from_json(&fs::read_to_string(path)?)?;
            let name = path.file_stem().map_or("rule".into(), |n| n.to_string_lossy().into_owned());
            Ok(SubstitutionSystem::from_rule(&name, rule))
        }
        _ => Err(Failure::Usage("give exactly one of --system or --rule".into())),
    }
}

fn parse_choice(s: &str) -> std::result::Result<PointMode, Failure> {
    match s {
        "centroid" => Ok(PointMode::Choice(ChoiceFunction::Centroid)),
        "vertex" | "vertices" => Ok(PointMode::Vertices),
        _ => {
            let pts = s
                .split(';')
                .map(|p| {
                    let v = parse_list(p)?;
                    match v[..] {
                        [x, y] => Ok([x, y]),
                        _ => Err(Failure::Usage(format!("choice point {p:?} needs two coordinates"))),
                    }
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(PointMode::Choice(ChoiceFunction::Points(pts)))
        }
    }
}

#[derive(Serialize)]
struct PatchReport {
    system: String,
    root: usize,
    generation: u32,
    tiles: usize,
    predicted_tiles: u128,
    points: usize,
}

fn generate_substitution(a: SubstitutionArgs) -> Outcome {
    let sys = load_system(&a.system)?;
    let mode = parse_choice(&a.system.choice)?;
    let patch = sys.expand_patch(a.root, a.generation)?;
    let y = substitution::extract_points(&sys.rule, &patch, &mode)?
        .with_meta("system", sys.name.as_str())
        .with_meta("generation", a.generation);
    y.write_dps(&a.out)?;
    emit(
        &PatchReport {
            system: sys.name.clone(),
            root: a.root,
            generation: a.generation,
            tiles: patch.tiles.len(),
            predicted_tiles: substitution::predicted_tile_count(&sys.rule, a.root, a.generation),
            points: y.len(),
        },
        None,
    )
}

fn load_spec(s: &str) -> std::result::Result<ModelSetSpec, Failure> {
    match s {
        "golden" => Ok(ModelSetSpec::golden()),
        "fibonacci" => Ok(ModelSetSpec::fibonacci()),
        path => Ok(ModelSetSpec::from_json(&fs::read_to_string(path)?)?),
    }
}

#[derive(Serialize)]
struct SetReport {
    points: usize,
    radius: f64,
    density: f64,
}

fn generate_cutproject(a: CutprojectArgs) -> Outcome {
    let spec = load_spec(&a.spec)?;
    let y = cutproject::generate_model_set(&spec, a.radius)?;
    y.write_dps(&a.out)?;
    emit(&SetReport { points: y.len(), radius: a.radius, density: spec.density() }, None)
}

fn witness_substitution(s: SystemArgs, max_generation: u32, out: Option<PathBuf>) -> Outcome {
    let sys = load_system(&s)?;
    let mode = parse_choice(&s.choice)?;
    match substitution::find_empty_cylinder(&sys, &mode, max_generation) {
        Ok(w) => emit(&w, out.as_deref()),
        Err(danzerlab::Error::VerificationFailed(msg)) => Err(Failure::Negative(msg)),
        Err(e) => Err(e.into()),
    }
}

fn witness_cutproject(spec: &str, t: f64, config: SearchConfig, out: Option<PathBuf>) -> Outcome {
    let spec = load_spec(spec)?;
    let cert = cutproject::search_empty_affine(&spec, t, &config)?;
    emit(&cert, out.as_deref())?;
    if cert.empty {
        Ok(())
    } else {
        Err(Failure::Negative(format!("no empty ball of radius {t} found; best {}", cert.best_radius)))
    }
}

#[derive(Serialize)]
struct VerifyReport {
    region: AxisBox,
    volume: f64,
    points_in_region: usize,
    worst_axis_area: Option<f64>,
    worst_axis_box: Option<AxisBox>,
    adversarial: nets::AdversarialResult,
    certified: bool,
}

fn parse_region(s: &str, d: usize) -> std::result::Result<AxisBox, Failure> {
    let t: f64 = s
        .trim_start_matches(['Q', 'q'])
        .parse()
        .map_err(|_| Failure::Usage(format!("bad region {s:?}; expected Q<t>")))?;
    Ok(AxisBox::cube(d, t)?)
}

fn verify(a: VerifyArgs) -> Outcome {
    let y = PointSet::read_dps(&a.input)?;
    if y.dim() != 2 {
        return Err(Failure::Usage("verify handles planar sets only".into()));
    }
    let region = parse_region(&a.region, 2)?;
    let search = SearchParams { count_cap: a.count_cap, ..SearchParams::new(a.restarts, a.iterations) };
    let (worst_axis_box, worst_axis_area) = if a.no_axis {
        (None, None)
    } else {
        let (b, area) = nets::max_empty_axis_rect_2d(&y, &region)?;
        (Some(b), Some(area))
    };
    let adversarial = nets::adversarial_box_search(&y, &region, a.volume, &search, a.seed)?;
    let certified = worst_axis_area.is_none_or(|w| w <= a.volume * (1.0 + 1e-12)) && adversarial.empty_box.is_none();
    let inside = y.iter().filter(|p| region.contains_unchecked(p)).count();
    emit(
        &VerifyReport {
            region,
            volume: a.volume,
            points_in_region: inside,
            worst_axis_area,
            worst_axis_box,
            adversarial,
            certified,
        },
        a.out.as_deref(),
    )?;
    if certified {
        Ok(())
    } else {
        Err(Failure::Negative("found an empty box of the target volume".into()))
    }
}

fn write_csv<T: Serialize>(rows: &[T], out: Option<&Path>) -> Outcome {
    match out {
        Some(p) => {
            let mut w = csv::Writer::from_path(p)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct GrowthCsv {
    #[serde(rename = "T")]
    t: f64,
    count: usize,
    normalized: f64,
}

fn measure_growth(input: &Path, radii: &str, out: Option<PathBuf>) -> Outcome {
    let y = PointSet::read_dps(input)?;
    let radii = parse_list(radii)?;
    let rows: Vec<GrowthCsv> = layered::growth_curve(&y, &radii)?
        .into_iter()
        .map(|r| GrowthCsv { t: r.t, count: r.count, normalized: r.normalized })
        .collect();
    write_csv(&rows, out.as_deref())
}

#[derive(Serialize)]
struct ForestCsv {
    #[serde(rename = "T")]
    t: f64,
    eps_hat: f64,
    samples: usize,
    seed: u64,
}

#[derive(Serialize)]
struct ForestReport {
    profile: forest::VisibilityProfile,
    fit: Option<forest::ExponentFit>,
}

fn measure_forest(input: &Path, t: &str, samples: usize, window: &str, seed: u64, out: Option<PathBuf>) -> Outcome {
    let y = PointSet::read_dps(input)?;
    let t_values = parse_list(t)?;
    let w = parse_list(window)?;
    let d = y.dim();
    if w.len() != 2 * d {
        return Err(Failure::Usage(format!("window needs {} numbers", 2 * d)));
    }
    let window = AxisBox::new(w[..d].to_vec(), w[d..].to_vec())?;
    let profile = forest::epsilon_of_t(&y, &t_values, samples, &window, seed)?;
    let rows: Vec<ForestCsv> = profile
        .t_values
        .iter()
        .zip(&profile.eps_estimates)
        .map(|(&t, &e)| ForestCsv { t, eps_hat: e, samples, seed })
        .collect();
    match out {
        Some(p) => {
            write_csv(&rows, Some(&p))?;
            let fit = forest::exponent_fit(&profile).ok();
            emit(&ForestReport { profile, fit }, None)
        }
        None => write_csv(&rows, None),
    }
}
