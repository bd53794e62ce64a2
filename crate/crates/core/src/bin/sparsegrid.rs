use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use sparsegrid::adaptive::{adapt, AdaptControls, AdaptFailure, Profit};
use sparsegrid::evalkit::{evaluate_on_grid, quadrature, Domain, EvaluationTable, Interpolant, Model, TryFn};
use sparsegrid::grid::{build_sparse_grid, reduce, SparseGrid};
use sparsegrid::io::{self, GridBundle};
use sparsegrid::knots::KnotFamily;
use sparsegrid::levels::LevelMap;
use sparsegrid::midx::{fast_td_set, generate_rule_set, preset, Preset};
use sparsegrid::pce::{convert_to_modal, pce_variance, sobol_from_pce, PceFamily};
use sparsegrid::uqdemo::{
    forward_uq_on, invert, posterior_forward_uq_on, prior_grid, solution_surrogate, synthetic_data, DiffusionModel,
    InverseProblem, SQRT3,
};
use sparsegrid::{testfns, SgError};

/// Combination-technique sparse grids: build, quadrature, interpolation,
/// adaptivity, polynomial chaos and the diffusion UQ demo.
#[derive(Parser)]
#[command(name = "sparsegrid", version)]
struct Cli {
    /// Worker threads for evaluations (default: all cores).
    #[arg(long, global = true, env = "SPARSEGRID_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build an a-priori sparse grid and save it.
    Build(BuildArgs),
    /// Re-reduce a grid file and report its size.
    Reduce(ReduceArgs),
    /// Sparse quadrature of a function.
    Quad(QuadArgs),
    /// Evaluate the sparse interpolant at points.
    Interp(InterpArgs),
    /// Build a grid adaptively.
    Adapt(AdaptArgs),
    /// Convert the interpolant to a polynomial chaos expansion.
    Pce(PceArgs),
    /// Sobol indices from the polynomial chaos expansion.
    Sobol(SobolArgs),
    /// Export plot data as CSV.
    Export(ExportArgs),
    /// The diffusion forward / inverse UQ demo.
    #[command(subcommand)]
    Demo(DemoCmd),
}

#[derive(Args)]
struct FamilyArgs {
    /// Knot family: cc, leja, leja_sym, leja_pdisk, gauss, gauss_normal, wleja, wleja_sym,
    /// wleja_normal, wleja_normal_sym, trap, midpoint, gk.
    #[arg(long, default_value = "cc")]
    knots: String,
    /// Per-dimension parameters `a,b` (or `mu,sigma`) joined by `x`; a single
    /// pair applies to every dimension.
    #[arg(long, default_value = "0,1", allow_hyphen_values = true)]
    domain: String,
    /// Level-to-knots map: linear, two_step, doubling, tripling, gk.
    #[arg(long)]
    map: Option<LevelMap>,
}

#[derive(Args)]
struct FnArgs {
    /// Function: expsum, linear, runge, or diffusion (the demo QoI).
    #[arg(long = "fn")]
    func: Option<String>,
    /// Mean diffusivity of the diffusion QoI.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Amplitudes of the diffusion QoI, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    sigmas: Option<String>,
    /// Elements of the diffusion FEM mesh.
    #[arg(long, default_value_t = 200)]
    mesh: usize,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    dim: usize,
    /// Index-set preset: TP, TD, HC, SM.
    #[arg(long, default_value = "SM")]
    preset: Preset,
    #[arg(long)]
    w: u32,
    /// Anisotropy weights, comma separated.
    #[arg(long)]
    g: Option<String>,
    #[command(flatten)]
    family: FamilyArgs,
    /// Dedup tolerance of the reduction.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    tol: Option<f64>,
    /// Write the re-reduced grid here (stored values are dropped).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QuadArgs {
    #[arg(long)]
    grid: PathBuf,
    #[command(flatten)]
    func: FnArgs,
    /// Store the evaluations in the grid file.
    #[arg(long)]
    save: bool,
}

#[derive(Args)]
struct InterpArgs {
    #[arg(long)]
    grid: PathBuf,
    #[command(flatten)]
    func: FnArgs,
    /// CSV of query points, one per row (a header row is skipped).
    #[arg(long)]
    points: Option<PathBuf>,
    /// Number of uniform random query points in the grid's box.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AdaptArgs {
    #[arg(long)]
    dim: Option<usize>,
    #[command(flatten)]
    family: FamilyArgs,
    #[command(flatten)]
    func: FnArgs,
    /// Whether knots are nested (default: deduced from family and map).
    #[arg(long)]
    nested: Option<bool>,
    /// Profit: deltaint, deltaint/new_points, Linf, Linf/new_points, weighted Linf, weighted Linf/new_points.
    #[arg(long, default_value = "Linf/new_points")]
    prof: Profit,
    #[arg(long, default_value_t = 1e-14)]
    prof_tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_pts: usize,
    /// Number of buffer dimensions.
    #[arg(long, default_value_t = 0)]
    buffer: usize,
    /// Continue from the adaptive state of this grid file.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct PceArgs {
    #[arg(long)]
    grid: PathBuf,
    #[command(flatten)]
    func: FnArgs,
    /// Polynomial family: legendre, hermite, laguerre, generalized_laguerre, jacobi, chebyshev.
    #[arg(long, default_value = "legendre")]
    family: PceFamily,
    /// Store the expansion in this grid file.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Write the coefficients as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SobolArgs {
    /// Grid file; without it the diffusion QoI uses its prior grid of level `--w`.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[command(flatten)]
    func: FnArgs,
    #[arg(long, default_value = "legendre")]
    family: PceFamily,
    #[arg(long, default_value_t = 4)]
    w: u32,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum What {
    Knots,
    Knots3d,
    InterpSamples,
    Midx,
    Pce,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, value_enum)]
    what: What,
    #[command(flatten)]
    func: FnArgs,
    /// Dimensions of the 3D projection (1-based).
    #[arg(long, default_value = "1,2,3")]
    dims: String,
    /// Two-dimensional cuts as a flat list of 1-based pairs, e.g. 1,2,3,4,1,4.
    #[arg(long)]
    cuts: Option<String>,
    /// Samples per direction of each cut.
    #[arg(long, default_value_t = 30)]
    resolution: usize,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DemoCmd {
    /// Mean, variance, Sobol indices and pdf samples of the QoI.
    Forward(DemoArgs),
    /// MAP estimate, Laplace posterior and posterior forward UQ.
    Inverse(DemoArgs),
}

#[derive(Args)]
struct DemoArgs {
    /// Number of random coefficients.
    #[arg(long = "N", default_value_t = 2)]
    n: usize,
    /// Amplitudes sigma_n, comma separated (default 0.5,0.1 forward, 0.5,0.5 inverse).
    #[arg(long)]
    sigmas: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// FEM elements (default 200 forward, 81 inverse).
    #[arg(long)]
    mesh: Option<usize>,
    /// Level of the grid (default 4 forward, 5 for the inverse surrogate).
    #[arg(long)]
    w: Option<u32>,
    /// Knot family: forward grid on the box (default cc), or posterior grid
    /// in standard normal variables (default gauss_normal).
    #[arg(long)]
    knots: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise standard deviation of the synthetic data.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Surrogate samples written for density plots.
    #[arg(long, default_value_t = 0)]
    samples: usize,
    /// True parameter of the synthetic data.
    #[arg(long, default_value = "0.9,-1.1", allow_hyphen_values = true)]
    y_star: String,
    /// Level of the posterior grid.
    #[arg(long, default_value_t = 3)]
    post_w: u32,
    /// Directory for the report and sample CSV files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

type Res<T> = std::result::Result<T, SgError>;

fn floats(s: &str) -> Res<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| SgError::Config(format!("bad number '{v}' in '{s}'"))))
        .collect()
}

fn families(args: &FamilyArgs, dim: usize) -> Res<Vec<KnotFamily>> {
    let pairs: Vec<&str> = args.domain.split('x').collect();
    if pairs.len() != 1 && pairs.len() != dim {
        return Err(SgError::DimensionMismatch { expected: dim, got: pairs.len() });
    }
    (0..dim)
        .map(|n| {
            let p = floats(pairs[if pairs.len() == 1 { 0 } else { n }])?;
            if p.len() != 2 {
                return Err(SgError::Config(format!("domain entries need two numbers, got {p:?}")));
            }
            KnotFamily::from_name(&args.knots, p[0], p[1])
        })
        .collect()
}

fn function(args: &FnArgs) -> Res<Option<Box<dyn Model>>> {
    let Some(name) = args.func.as_deref() else { return Ok(None) };
    if name == "diffusion" {
        let sigmas = floats(args.sigmas.as_deref().unwrap_or("0.5,0.1"))?;
        let model = DiffusionModel::new(args.mu, sigmas, args.mesh)?;
        return Ok(Some(Box::new(TryFn(move |y: &[f64]| model.qoi(y).map(|v| vec![v]).map_err(|e| e.to_string())))));
    }
    match testfns::by_name(name) {
        Some(f) => Ok(Some(Box::new(f))),
        None => Err(SgError::Config(format!(
            "unknown function '{name}' (expected {} or diffusion)",
            testfns::NAMES.join(", ")
        ))),
    }
}

/// Values on the bundle's grid: from `--fn` if given, else the stored table.
fn values(bundle: &GridBundle, args: &FnArgs) -> Res<(EvaluationTable, usize)> {
    match function(args)? {
        Some(f) => {
            let e = evaluate_on_grid(f.as_ref(), &bundle.reduced, None)?;
            Ok((e.table, e.new_evals))
        }
        None => bundle
            .values
            .clone()
            .map(|t| (t, 0))
            .ok_or_else(|| SgError::Config("the grid file has no values; pass --fn".into())),
    }
}

fn emit(v: &serde_json::Value) {
    stdout(&format!("{}\n", serde_json::to_string_pretty(v).expect("json value")));
}

fn stdout(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn write_out(path: Option<&Path>, text: &str) -> Res<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => stdout(text),
    }
    Ok(())
}

fn build_grid(a: &BuildArgs) -> Res<SparseGrid> {
    let g = a.g.as_deref().map(floats).transpose()?;
    let (rule, pmap) = preset(a.preset, a.dim, g)?;
    let map = a.family.map.unwrap_or(pmap);
    let set = generate_rule_set(a.dim, &|i| rule.eval(i), a.w as f64, 1)?;
    build_sparse_grid(&set, &families(&a.family, a.dim)?, map, None)
}

fn run(cmd: Cmd) -> Res<()> {
    match cmd {
        Cmd::Build(a) => {
            let s = build_grid(&a)?;
            let r = reduce(&s, a.tol)?;
            emit(&json!({ "tensors": s.tensors.len(), "extended": s.extended_size(), "size": r.size }));
            io::save_grid(&a.out, &GridBundle::new(s, r))?;
        }
        Cmd::Reduce(a) => {
            let b = io::load_grid(&a.grid)?;
            let r = reduce(&b.grid, a.tol)?;
            emit(&json!({ "tensors": b.grid.tensors.len(), "extended": b.grid.extended_size(), "size": r.size }));
            if let Some(out) = a.out {
                io::save_grid(&out, &GridBundle::new(b.grid, r))?;
            }
        }
        Cmd::Quad(a) => {
            let mut b = io::load_grid(&a.grid)?;
            let (t, new_evals) = values(&b, &a.func)?;
            let intf = quadrature(&t, &b.reduced)?;
            emit(&json!({ "intf": intf, "points": b.reduced.size, "new_evals": new_evals }));
            if a.save {
                b.values = Some(t);
                io::save_grid(&a.grid, &b)?;
            }
        }
        Cmd::Interp(a) => {
            let b = io::load_grid(&a.grid)?;
            let (t, _) = values(&b, &a.func)?;
            let dim = b.grid.dim;
            let pts = match (&a.points, a.random) {
                (Some(p), None) => read_points(p, dim)?,
                (None, Some(m)) => {
                    let (lo, hi) = io::plot_box(&b.grid, &b.reduced);
                    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
                    (0..m * dim).map(|k| rng.random_range(lo[k % dim]..=hi[k % dim])).collect()
                }
                _ => return Err(SgError::Config("pass exactly one of --points and --random".into())),
            };
            let v = Interpolant::new(&b.grid, &b.reduced, &t)?.eval(&pts)?;
            write_out(a.out.as_deref(), &io::samples_csv(dim, &pts, t.outputs, &v))?;
        }
        Cmd::Adapt(a) => run_adapt(a)?,
        Cmd::Pce(a) => {
            let mut b = io::load_grid(&a.grid)?;
            let (t, _) = values(&b, &a.func)?;
            let domain = Domain::from_families(&b.grid.families);
            let pce = convert_to_modal(&b.grid, &b.reduced, &t, &domain, a.family)?;
            emit(&json!({ "terms": pce.lambda.len(), "variance": pce_variance(&pce) }));
            if let Some(p) = &a.csv {
                fs::write(p, io::pce_csv(&pce))?;
            }
            if let Some(out) = a.out {
                b.values = Some(t);
                b.pce = Some(pce);
                io::save_grid(&out, &b)?;
            }
        }
        Cmd::Sobol(a) => {
            let b = match &a.grid {
                Some(p) => io::load_grid(p)?,
                None if a.func.func.as_deref() == Some("diffusion") => {
                    let dim = floats(a.func.sigmas.as_deref().unwrap_or("0.5,0.1"))?.len();
                    let (s, r) = prior_grid(dim, a.w)?;
                    GridBundle::new(s, r)
                }
                None => return Err(SgError::Config("pass --grid, or --fn diffusion for the demo grid".into())),
            };
            let (t, _) = values(&b, &a.func)?;
            let domain = Domain::from_families(&b.grid.families);
            let pce = convert_to_modal(&b.grid, &b.reduced, &t, &domain, a.family)?;
            let (principal, total) = sobol_from_pce(&pce)?;
            emit(&json!({ "principal": principal, "total": total }));
        }
        Cmd::Export(a) => {
            let b = io::load_grid(&a.grid)?;
            let text = match a.what {
                What::Knots => io::knots_csv(&b.reduced),
                What::Knots3d => {
                    let d: Vec<usize> = one_based(&a.dims)?;
                    if d.len() != 3 {
                        return Err(SgError::Config(format!("--dims needs three entries, got {}", d.len())));
                    }
                    io::knots3d_projection_csv(&b.reduced, [d[0], d[1], d[2]])?
                }
                What::InterpSamples => {
                    let (t, _) = values(&b, &a.func)?;
                    let cuts = match &a.cuts {
                        Some(c) => io::parse_cuts(c)?,
                        None => io::default_cuts(b.grid.dim),
                    };
                    io::interp_samples_csv(&b.grid, &b.reduced, &t, &cuts, a.resolution)?
                }
                What::Midx => io::midx_csv(&b.grid.set),
                What::Pce => io::pce_csv(
                    b.pce
                        .as_ref()
                        .ok_or_else(|| SgError::Config("the grid file has no expansion; run pce -o".into()))?,
                ),
            };
            write_out(a.out.as_deref(), &text)?;
        }
        Cmd::Demo(DemoCmd::Forward(a)) => demo_forward(a)?,
        Cmd::Demo(DemoCmd::Inverse(a)) => demo_inverse(a)?,
    }
    Ok(())
}

fn one_based(s: &str) -> Res<Vec<usize>> {
    s.split(',')
        .map(|v| match v.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k - 1),
            _ => Err(SgError::Config(format!("bad dimension '{v}'"))),
        })
        .collect()
}

fn read_points(path: &Path, dim: usize) -> Res<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut pts = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match floats(line) {
            Ok(row) if row.len() == dim => pts.extend(row),
            Ok(row) => return Err(SgError::DimensionMismatch { expected: dim, got: row.len() }),
            Err(_) if k == 0 => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(pts)
}

fn run_adapt(a: AdaptArgs) -> Res<()> {
    let f = function(&a.func)?.ok_or_else(|| SgError::Config("adapt needs --fn".into()))?;
    let previous = a.resume.as_deref().map(io::load_grid).transpose()?;
    let state = match &previous {
        Some(b) => Some(
            b.adapt_state.as_ref().ok_or_else(|| SgError::Config("the resume file has no adaptive state".into()))?,
        ),
        None => None,
    };
    let (fams, map) = match state {
        Some(s) => (s.families.clone(), s.level_map),
        None => {
            let dim = a.dim.ok_or_else(|| SgError::Config("adapt needs --dim (or --resume)".into()))?;
            let fams = families(&a.family, dim)?;
            let map = a.family.map.unwrap_or_else(|| fams[0].default_level_map());
            (fams, map)
        }
    };
    let mut controls = AdaptControls::new(a.nested.unwrap_or_else(|| fams.iter().all(|f| f.nested_with(map))));
    controls.profit = a.prof;
    controls.prof_tol = a.prof_tol;
    controls.max_pts = a.max_pts;
    controls.var_buffer_size = a.buffer;
    if a.prof.is_weighted() {
        let dists: Vec<_> = fams.iter().map(KnotFamily::distribution).collect();
        controls.pdf_weight = Some(Arc::new(move |y: &[f64]| dists.iter().zip(y).map(|(d, &v)| d.pdf(v)).product()));
    }
    let res = adapt(f.as_ref(), &fams, map, state, &controls).map_err(|e: AdaptFailure| e.error)?;
    emit(&json!({
        "nb_pts": res.nb_pts,
        "nb_pts_visited": res.nb_pts_visited,
        "num_evals": res.num_evals,
        "intf": res.intf,
        "stop": res.stop,
    }));
    let bundle = GridBundle {
        grid: res.extended,
        reduced: res.reduced,
        values: Some(res.values),
        adapt_state: Some(res.state),
        pce: None,
    };
    io::save_grid(&a.out, &bundle)
}

fn demo_model(a: &DemoArgs, default_sigmas: &str, default_mesh: usize) -> Res<DiffusionModel> {
    let sigmas = floats(a.sigmas.as_deref().unwrap_or(default_sigmas))?;
    if sigmas.len() != a.n {
        return Err(SgError::DimensionMismatch { expected: a.n, got: sigmas.len() });
    }
    DiffusionModel::new(a.mu, sigmas, a.mesh.unwrap_or(default_mesh))
}

fn demo_grid(fam: KnotFamily, dim: usize, w: u32) -> Res<(SparseGrid, sparsegrid::grid::ReducedGrid)> {
    let s = build_sparse_grid(&fast_td_set(dim, w)?, &vec![fam; dim], fam.default_level_map(), None)?;
    let r = reduce(&s, None)?;
    Ok((s, r))
}

fn demo_output(a: &DemoArgs, report: &serde_json::Value, samples: &[(&str, &[f64])]) -> Res<()> {
    emit(report);
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(report).expect("json value") + "\n")?;
        for (name, v) in samples {
            if !v.is_empty() {
                fs::write(dir.join(format!("{name}.csv")), io::column_csv("I", v))?;
            }
        }
    }
    Ok(())
}

fn demo_forward(a: DemoArgs) -> Res<()> {
    let model = demo_model(&a, "0.5,0.1", 200)?;
    let fam = KnotFamily::from_name(a.knots.as_deref().unwrap_or("cc"), -SQRT3, SQRT3)?;
    let (s, r) = demo_grid(fam, a.n, a.w.unwrap_or(4))?;
    let rep = forward_uq_on(&model, &s, &r, a.samples, a.seed)?;
    demo_output(&a, &serde_json::to_value(&rep).expect("report"), &[("prior_samples", &rep.samples)])
}

fn demo_inverse(a: DemoArgs) -> Res<()> {
    let model = demo_model(&a, "0.5,0.5", 81)?;
    let y_star = floats(&a.y_star)?;
    if y_star.len() != a.n {
        return Err(SgError::DimensionMismatch { expected: a.n, got: y_star.len() });
    }
    let surrogate = solution_surrogate(&model, a.w.unwrap_or(5))?;
    let data = synthetic_data(&model, &y_star, a.noise, a.seed)?;
    let problem = InverseProblem::new(&surrogate, data)?;
    let inv = invert(&problem, &vec![0.0; a.n])?;
    let (ps, pr) = prior_grid(a.n, 4)?;
    let prior = forward_uq_on(&model, &ps, &pr, a.samples, a.seed)?;
    let fam = KnotFamily::from_name(a.knots.as_deref().unwrap_or("gauss_normal"), 0.0, 1.0)?;
    let (s, r) = demo_grid(fam, a.n, a.post_w)?;
    let post = posterior_forward_uq_on(&model, &inv.y_map, &inv.sigma_post, &s, &r, a.samples, a.seed)?;
    let report = json!({
        "y_star": y_star,
        "k": problem.k(),
        "inverse": inv,
        "prior": { "mean": prior.mean, "variance": prior.variance },
        "posterior": post,
    });
    demo_output(&a, &report, &[("prior_samples", &prior.samples), ("posterior_samples", &post.samples)])
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
