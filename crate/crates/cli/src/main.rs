//! `hopf`: invariant suites, field decomposition, AExp checks, the balanced
//! slice solver and linking numbers.
//!
//! Exit codes: 0 success, 1 check or solver failure, 2 input error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hopf_slice::aligned::{factorization_report, MAP_RADIUS};
use hopf_slice::config::RunConfig;
use hopf_slice::diffeo::DiffeoSpec;
use hopf_slice::fields::{
    is_balanced, is_projectable, l2_inner, project_bvf, project_pvf, BaseGrid, SampledField,
};
use hopf_slice::holonomy::{gauss_linking, mirror_fiber};
use hopf_slice::io::{field_to_string, map_to_string, parse_field};
use hopf_slice::quat::{HopfFiber, S2Point, S3Point, Vec3};
use hopf_slice::slice::{landscape, minimize_traced, IterationRecord, LandscapeSample, TargetCurve};
use hopf_slice::sphere::exp_s3;
use hopf_slice::synth::{random_polynomial, SmoothField};
use hopf_slice::verify::{verify, Check};
use hopf_slice::GeomError;

#[derive(Parser)]
#[command(name = "hopf", version, about = "Numerical checks for the Hopf fibration and the balanced slice")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one invariant suite, or `all`.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
    /// Split a field file into its projectable and balanced parts.
    Decompose { field: PathBuf },
    /// Check AExp(Twist(Rescale V)) = Exp V on a field file, or on a seeded random field.
    AexpCheck { field: Option<PathBuf> },
    /// Run the slice solver.
    Slice {
        #[command(flatten)]
        problem: Problem,
        /// Also write E and vbar over an N×N chart grid as CSV.
        #[arg(long, value_name = "N")]
        landscape: Option<usize>,
    },
    /// Write E and vbar over an N×N chart grid as CSV.
    Landscape {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, value_name = "N", default_value_t = 21)]
        landscape: usize,
    },
    /// Gauss linking number of two fibers.
    Linking {
        /// First base point as colatitude,longitude.
        #[arg(long, value_parser = parse_uv, allow_hyphen_values = true)]
        a: Uv,
        /// Second base point as colatitude,longitude.
        #[arg(long, value_parser = parse_uv, allow_hyphen_values = true)]
        b: Uv,
        #[arg(long, value_enum, default_value_t = Kind::Hopf)]
        kind: Kind,
        #[arg(long, default_value_t = 512)]
        samples: usize,
    },
}

#[derive(Args)]
struct Problem {
    /// Built-in family: identity, u2:ax,ay,az,angle,turn, circle:a,
    /// balanced:seed,amp, projectable:seed,amp or mixed:seed,wb,wp.
    #[arg(long, conflicts_with = "field", required_unless_present = "field")]
    diffeo: Option<DiffeoSpec>,
    /// Field file; the target is its exponential along the grid fiber nearest the source.
    #[arg(long, value_name = "FILE")]
    field: Option<PathBuf>,
    /// Source fiber as colatitude,longitude in radians.
    #[arg(long, value_parser = parse_uv, allow_hyphen_values = true)]
    source: Uv,
}

#[derive(Clone, Copy, Debug)]
struct Uv(f64, f64);

impl Uv {
    fn direction(self) -> Vec3 {
        S2Point::from_spherical(self.0, self.1, 1.0).expect("finite coordinates").unit()
    }
}

fn parse_uv(s: &str) -> Result<Uv, String> {
    let (u, v) = s.split_once(',').ok_or("expected `u,v`")?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("invalid number `{t}`"));
    let (u, v) = (num(u)?, num(v)?);
    if !(u.is_finite() && v.is_finite()) {
        return Err("coordinates must be finite".into());
    }
    Ok(Uv(u, v))
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    /// Orbits of right multiplication by `e^{it}`.
    Hopf,
    /// Orbits of left multiplication by `e^{it}`.
    Mirror,
}

enum Fail {
    Input(anyhow::Error),
    Run(anyhow::Error),
}

trait FailExt<T> {
    fn input(self) -> Result<T, Fail>;
    fn run(self) -> Result<T, Fail>;
}

impl<T, E: Into<anyhow::Error>> FailExt<T> for Result<T, E> {
    fn input(self) -> Result<T, Fail> {
        self.map_err(|e| Fail::Input(e.into()))
    }

    fn run(self) -> Result<T, Fail> {
        self.map_err(|e| Fail::Run(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Fail::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Fail::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Fail> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .input()?;
            RunConfig::from_toml(&text)
                .with_context(|| path.display().to_string())
                .input()?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn header(command: &str, cfg: &RunConfig) -> String {
    format!("# hopf {command}\n{}", cfg.echo())
}

fn write_out(cli: &Cli, name: &str, contents: &str) -> Result<Option<PathBuf>, Fail> {
    let Some(dir) = &cli.out else {
        return Ok(None);
    };
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .run()?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .run()?;
    Ok(Some(path))
}

/// Prints a report and copies it into the output directory.
fn emit(cli: &Cli, name: &str, report: &str) -> Result<(), Fail> {
    print!("{report}");
    write_out(cli, name, report)?;
    Ok(())
}

fn push_checks(report: &mut String, checks: &[Check]) -> bool {
    for c in checks {
        let _ = writeln!(report, "{c}");
    }
    checks.iter().all(|c| c.pass)
}

fn run(cli: &Cli) -> Result<bool, Fail> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Verify { suite } => {
            let rep = verify(suite, &cfg).input()?;
            emit(cli, "verify.txt", &rep.to_string())?;
            Ok(rep.passed())
        }
        Command::Decompose { field } => decompose(cli, &cfg, field),
        Command::AexpCheck { field } => aexp_check(cli, &cfg, field.as_deref()),
        Command::Slice { problem, landscape } => slice(cli, &cfg, problem, *landscape),
        Command::Landscape { problem, landscape } => landscape_csv(cli, &cfg, problem, *landscape),
        Command::Linking { a, b, kind, samples } => linking(cli, &cfg, *a, *b, *kind, *samples),
    }
}

fn read_field(path: &Path) -> Result<SampledField, Fail> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .input()?;
    parse_field(&text)
        .with_context(|| path.display().to_string())
        .input()
}

fn decompose(cli: &Cli, cfg: &RunConfig, path: &Path) -> Result<bool, Fail> {
    let x = read_field(path)?;
    let p = project_pvf(&x);
    let b = project_bvf(&x);
    let (ptxt, btxt) = (field_to_string(&p), field_to_string(&b));
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("field");
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .run()?;
    let (ppath, bpath) = (dir.join(format!("{stem}.pvf.field")), dir.join(format!("{stem}.bvf.field")));
    for (path, text) in [(&ppath, &ptxt), (&bpath, &btxt)] {
        fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .run()?;
    }
    let reread = (|| -> anyhow::Result<f64> {
        let sum = parse_field(&fs::read_to_string(&ppath)?)?.add(&parse_field(&fs::read_to_string(&bpath)?)?)?;
        Ok(sum.sup_distance(&x)?)
    })()
    .run()?;

    let mut report = header("decompose", cfg);
    let _ = writeln!(report, "# input {}", path.display());
    let _ = writeln!(report, "# pvf {}", ppath.display());
    let _ = writeln!(report, "# bvf {}", bpath.display());
    let _ = writeln!(report, "fiber alpha beta vbar_norm");
    for i in 0..x.num_fibers() {
        let m = x.moments(i);
        let _ = writeln!(report, "{i} {:.6e} {:.6e} {:.6e}", m.alpha, m.beta, m.vbar_norm());
    }
    let checks = [
        Check::below("decompose.round_trip", reread, 1e-9),
        Check::below("decompose.pvf_residual", is_projectable(&p).residual(), 1e-9),
        Check::below("decompose.bvf_moments", is_balanced(&b).residual(), 1e-9),
        Check::below("decompose.orthogonality", l2_inner(&p, &b).run()?.abs(), 1e-9),
    ];
    let ok = push_checks(&mut report, &checks);
    emit(cli, "decompose.txt", &report)?;
    Ok(ok)
}

fn aexp_check(cli: &Cli, cfg: &RunConfig, path: Option<&Path>) -> Result<bool, Fail> {
    let (v, label) = match path {
        Some(p) => (read_field(p)?, p.display().to_string()),
        None => {
            let grid = Arc::new(BaseGrid::fibonacci(cfg.base_grid_size).input()?);
            let f = random_polynomial(&mut ChaCha8Rng::seed_from_u64(cfg.seed), 2, 1.0);
            let v = SampledField::from_fn(grid, cfg.n_t, cfg.radius, |x| f.coeffs_at(x)).run()?;
            let v = v.scale(0.9 * cfg.field_bound / v.sup_norm());
            (v, format!("random seed {}", cfg.seed))
        }
    };
    let mut report = header("aexp-check", cfg);
    let _ = writeln!(report, "# field {label}");
    let _ = writeln!(report, "sup_norm {:.6e}", v.sup_norm());
    let ok = match factorization_report(&v, &cfg.regime()) {
        Ok(rep) => {
            if let Some(path) = write_out(cli, "aexp.map", &map_to_string(&rep.map))? {
                let _ = writeln!(report, "# map {}", path.display());
            }
            push_checks(
                &mut report,
                &[
                    Check::below("aexp.unrescale_rescale", rep.rescale_round_trip, 1e-9),
                    Check::below("aexp.untwist_twist", rep.twist_round_trip, 1e-9),
                    Check::below("aexp.factorization", rep.factorization, 1e-8),
                ],
            )
        }
        Err(e @ GeomError::Regime { value, bound, .. }) => {
            let _ = writeln!(report, "NOTE {e}");
            push_checks(
                &mut report,
                &[Check {
                    name: "aexp.regime".into(),
                    residual: value,
                    tolerance: bound,
                    pass: false,
                }],
            )
        }
        Err(e) => return Err(Fail::Run(e.into())),
    };
    emit(cli, "aexp-check.txt", &report)?;
    Ok(ok)
}

/// Target curve, source direction and a description of the problem.
struct Setup {
    target: TargetCurve,
    source: Vec3,
    label: String,
    spec: Option<DiffeoSpec>,
}

fn setup(cfg: &RunConfig, problem: &Problem) -> Result<Setup, Fail> {
    let n = problem.source.direction();
    if let Some(spec) = &problem.diffeo {
        let d = spec.build(&n, cfg.n_t).input()?;
        let target = TargetCurve::image_of(d.as_ref(), &HopfFiber::over(&n), cfg.n_t).input()?;
        return Ok(Setup {
            target,
            source: n,
            label: spec.to_string(),
            spec: Some(spec.clone()),
        });
    }
    let path = problem.field.as_ref().expect("clap requires --diffeo or --field");
    let x = read_field(path)?;
    let i = x.grid().nearest(&n);
    let sup = x.fiber(i).iter().map(|c| c.norm()).fold(0.0, f64::max);
    if sup >= MAP_RADIUS {
        return Err(Fail::Input(
            GeomError::Regime {
                what: "field sup norm on the source fiber",
                value: sup,
                bound: MAP_RADIUS,
            }
            .into(),
        ));
    }
    let images = (0..x.n_t())
        .map(|k| exp_s3(&x.tangent(i, k)))
        .collect::<Result<Vec<S3Point>, _>>()
        .input()?;
    let fiber = x.grid().fiber(i);
    Ok(Setup {
        target: TargetCurve::new(images).input()?,
        source: fiber.project(1.0).unit(),
        label: format!("exp of {} on grid fiber {i}", path.display()),
        spec: None,
    })
}

fn uv_of(n: &Vec3) -> (f64, f64) {
    S2Point::new(*n, 1.0).expect("unit vector").spherical()
}

fn write_trace(report: &mut String, trace: &[IterationRecord]) {
    let _ = writeln!(report, "trace iteration x y z energy vbar_norm step eig_min eig_max");
    for r in trace {
        let (lo, hi) = r.eigenvalues.map_or((f64::NAN, f64::NAN), |e| (e[0], e[1]));
        let _ = writeln!(
            report,
            "{} {:.12e} {:.12e} {:.12e} {:.6e} {:.6e} {:.6e} {:.6e} {:.6e}",
            r.iteration, r.point.x, r.point.y, r.point.z, r.energy, r.vbar_norm, r.step_norm, lo, hi
        );
    }
}

fn csv(samples: &[LandscapeSample]) -> String {
    let mut out = String::from("x,y,E,vbar_x,vbar_y\n");
    for s in samples {
        let _ = writeln!(out, "{:.9e},{:.9e},{:.12e},{:.9e},{:.9e}", s.x, s.y, s.energy, s.vbar[0], s.vbar[1]);
    }
    out
}

fn slice(cli: &Cli, cfg: &RunConfig, problem: &Problem, grid: Option<usize>) -> Result<bool, Fail> {
    let s = setup(cfg, problem)?;
    let opts = cfg.solver_options();
    let mut report = header("slice", cfg);
    let _ = writeln!(report, "# diffeo {}", s.label);
    let (su, sv) = uv_of(&s.source);
    let _ = writeln!(report, "source_uv {su:.12e} {sv:.12e}");
    let res = match minimize_traced(&s.source, &s.target, &opts, None) {
        Ok(r) => r,
        Err(f) => {
            write_trace(&mut report, &f.trace);
            let _ = writeln!(report, "error {}", f.error);
            emit(cli, "slice.txt", &report)?;
            return Err(Fail::Run(anyhow!(f.error).context("slice solver failed")));
        }
    };
    let (wu, wv) = uv_of(&res.winner);
    let wc = res.winner_coords();
    let _ = writeln!(report, "winner {:.12e} {:.12e} {:.12e}", res.winner.x, res.winner.y, res.winner.z);
    let _ = writeln!(report, "winner_uv {wu:.12e} {wv:.12e}");
    let _ = writeln!(report, "winner_chart {:.12e} {:.12e}", wc[0], wc[1]);
    let _ = writeln!(report, "energy {:.12e}", res.energy);
    let _ = writeln!(report, "vbar_norm {:.6e}", res.vbar_norm);
    let _ = writeln!(report, "iterations {}", res.iterations);
    let [lo, hi] = res.hessian_eigenvalues;
    let _ = writeln!(report, "hessian_eigenvalues {lo:.9e} {hi:.9e}");
    write_trace(&mut report, &res.trace);

    let mut checks = vec![Check::below("slice.vbar", res.vbar_norm, 1e-8)];
    if let Some(known) = s.spec.as_ref().and_then(|sp| sp.known_balanced(&s.source, opts.n_t)) {
        let err = known
            .iter()
            .zip(&res.balanced_field)
            .map(|(a, b)| (*a - *b).norm())
            .fold(0.0, f64::max);
        checks.push(Check::below("slice.recovery", err, 1e-6));
    }
    if let Some(n) = grid {
        let samples = landscape(&s.source, &s.target, &opts, n, cfg.landscape_half_width).run()?;
        if let Some(path) = write_out(cli, "landscape.csv", &csv(&samples))? {
            let _ = writeln!(report, "# landscape {}", path.display());
        }
        let best = samples
            .iter()
            .min_by(|a, b| a.energy.total_cmp(&b.energy))
            .expect("nonempty grid");
        let cell = if n > 1 { 2.0 * cfg.landscape_half_width / (n - 1) as f64 } else { f64::INFINITY };
        let cells = (best.x - wc[0]).abs().max((best.y - wc[1]).abs()) / cell;
        let _ = writeln!(report, "landscape_min {:.9e} {:.9e}", best.x, best.y);
        checks.push(Check::below("slice.landscape_min_cells", cells, 1.0));
    }
    let ok = push_checks(&mut report, &checks);
    emit(cli, "slice.txt", &report)?;
    Ok(ok)
}

fn landscape_csv(cli: &Cli, cfg: &RunConfig, problem: &Problem, n: usize) -> Result<bool, Fail> {
    if n == 0 {
        return Err(Fail::Input(anyhow!("--landscape must be positive")));
    }
    let s = setup(cfg, problem)?;
    let samples = landscape(&s.source, &s.target, &cfg.solver_options(), n, cfg.landscape_half_width).run()?;
    let text = csv(&samples);
    match write_out(cli, "landscape.csv", &text)? {
        Some(path) => println!("{}", path.display()),
        None => print!("{text}"),
    }
    Ok(true)
}

fn linking(cli: &Cli, cfg: &RunConfig, a: Uv, b: Uv, kind: Kind, samples: usize) -> Result<bool, Fail> {
    if samples < 16 {
        return Err(Fail::Input(anyhow!("--samples must be at least 16")));
    }
    let curve = |uv: Uv| {
        let fiber = HopfFiber::over(&uv.direction());
        match kind {
            Kind::Hopf => fiber.samples(samples),
            Kind::Mirror => mirror_fiber(fiber.basepoint(), samples),
        }
    };
    let l = gauss_linking(&curve(a), &curve(b)).run()?;
    let mut report = header("linking", cfg);
    let _ = writeln!(report, "# kind {kind:?} samples {samples}");
    let _ = writeln!(report, "a_uv {:.12e} {:.12e}", a.0, a.1);
    let _ = writeln!(report, "b_uv {:.12e} {:.12e}", b.0, b.1);
    let _ = writeln!(report, "value {:.12e}", l.value);
    let _ = writeln!(report, "rounded {}", l.rounded);
    let q = l.pole.q();
    let _ = writeln!(report, "pole {:.9e} {:.9e} {:.9e} {:.9e}", q.w, q.x, q.y, q.z);
    let ok = push_checks(&mut report, &[Check::below("linking.integer", l.residual, 0.01)]);
    emit(cli, "linking.txt", &report)?;
    Ok(ok)
}
