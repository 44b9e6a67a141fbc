//! Invariant suites with plain-text reports.
//!
//! Every check prints one line `CHECK <name> <residual> <tolerance> <PASS|FAIL>`.
//! Names ending in `.min` pass when the measured value exceeds the
//! tolerance; all others pass when it is below.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::aligned::{aexp, factorization_report};
use crate::config::RunConfig;
use crate::diffeo::{FieldExp, Identity, U2Motion};
use crate::error::{GeomError, Result};
use crate::fields::{is_balanced, is_projectable, l2_inner, project_bvf, project_pvf, winding_number, BaseGrid, SampledField};
use crate::holonomy::{
    gauss_linking, gauss_linking_from, horizontal_triangle, mirror_fiber, projected_area, triangle_gap,
};
use crate::quat::{
    flow_commutator, flow_commutator_symmetric, frame_at, hopf_project, horizontal_lift, lie_bracket_frame, pushforward_horizontal, FrameCoeffs,
    FrameIndex, HopfFiber, Quaternion, S3Point, TangentS3, Vec3,
};
use crate::slice::{
    coset_check, energy, gradient_check, minimize, minimize_diffeo, winner_jacobian, LocalChart, SolverOptions,
    TargetCurve,
};
use crate::sphere::{fiber_distance, shooter_derivative, amplification};
use crate::synth::{
    random_balanced, random_mix, random_polynomial, random_projectable, random_s3, random_unit, Polynomial,
    SmoothField,
};

pub const SUITES: [&str; 9] = [
    "brackets",
    "decomposition",
    "pushforward",
    "aexp",
    "gradient",
    "hessian",
    "slice",
    "holonomy",
    "linking",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown suite `{0}`; expected `all` or one of: brackets, decomposition, pushforward, aexp, gradient, hessian, slice, holonomy, linking")]
pub struct UnknownSuite(pub String);

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
            pass: residual < tolerance,
        }
    }

    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: format!("{name}.min"),
            residual: value,
            tolerance: threshold,
            pass: value > threshold,
        }
    }

    fn failed(name: String, err: &GeomError) -> Self {
        let (residual, tolerance) = match err {
            GeomError::Regime { value, bound, .. } => (*value, *bound),
            _ => (f64::NAN, 0.0),
        };
        Self {
            name,
            residual,
            tolerance,
            pass: false,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "CHECK {} {:.3e} {:.3e} {verdict}", self.name, self.residual, self.tolerance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Check(Check),
    Note(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub entries: Vec<Entry>,
}

impl SuiteReport {
    fn new(suite: &'static str) -> Self {
        Self {
            suite,
            entries: Vec::new(),
        }
    }

    pub fn checks(&self) -> impl Iterator<Item = &Check> {
        self.entries.iter().filter_map(|e| match e {
            Entry::Check(c) => Some(c),
            Entry::Note(_) => None,
        })
    }

    pub fn passed(&self) -> bool {
        self.checks().all(|c| c.pass)
    }

    fn check(&mut self, c: Check) {
        self.entries.push(Entry::Check(c));
    }

    fn note(&mut self, s: String) {
        self.entries.push(Entry::Note(s));
    }

    /// Runs one part of a suite; an error becomes a failed check.
    fn part(&mut self, label: &str, f: impl FnOnce(&mut Self) -> Result<()>) {
        if let Err(e) = f(self) {
            self.note(format!("{}.{label}: {e}", self.suite));
            self.check(Check::failed(format!("{}.{label}", self.suite), &e));
        }
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "== {}", self.suite)?;
        for e in &self.entries {
            match e {
                Entry::Check(c) => writeln!(f, "{c}")?,
                Entry::Note(s) => writeln!(f, "NOTE {s}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub config: RunConfig,
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }

    pub fn checks(&self) -> impl Iterator<Item = &Check> {
        self.suites.iter().flat_map(SuiteReport::checks)
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteReport> {
        self.suites.iter().find(|s| s.suite == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# hopf verify")?;
        write!(f, "{}", self.config.echo())?;
        for s in &self.suites {
            write!(f, "{s}")?;
        }
        let total = self.checks().count();
        let failed = self.checks().filter(|c| !c.pass).count();
        writeln!(f, "SUMMARY {total} checks, {failed} failed")
    }
}

/// Suite names selected by `name`, which may be `all`.
pub fn resolve(name: &str) -> std::result::Result<Vec<&'static str>, UnknownSuite> {
    if name == "all" {
        return Ok(SUITES.to_vec());
    }
    SUITES
        .iter()
        .find(|s| **s == name)
        .map(|s| vec![*s])
        .ok_or_else(|| UnknownSuite(name.to_string()))
}

pub fn verify(name: &str, cfg: &RunConfig) -> std::result::Result<VerifyReport, UnknownSuite> {
    let suites = resolve(name)?.into_iter().map(|s| run_suite(s, cfg)).collect();
    Ok(VerifyReport {
        config: cfg.clone(),
        suites,
    })
}

fn run_suite(name: &'static str, cfg: &RunConfig) -> SuiteReport {
    let index = SUITES.iter().position(|s| *s == name).expect("known suite") as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((index + 1) << 40));
    let mut r = SuiteReport::new(name);
    match name {
        "brackets" => brackets(&mut rng, &mut r),
        "decomposition" => decomposition(cfg, &mut rng, &mut r),
        "pushforward" => pushforward(cfg, &mut rng, &mut r),
        "aexp" => aexp_suite(cfg, &mut rng, &mut r),
        "gradient" => gradient(cfg, &mut rng, &mut r),
        "hessian" => hessian(cfg, &mut rng, &mut r),
        "slice" => slice(cfg, &mut rng, &mut r),
        "holonomy" => holonomy(cfg, &mut rng, &mut r),
        "linking" => linking(&mut rng, &mut r),
        _ => unreachable!(),
    }
    r
}

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

fn disc_point(rng: &mut impl Rng, lo: f64, hi: f64) -> [f64; 2] {
    let (r, a) = (rng.random_range(lo..=hi), rng.random_range(0.0..TAU));
    [r * a.cos(), r * a.sin()]
}

fn brackets(rng: &mut ChaCha8Rng, r: &mut SuiteReport) {
    use FrameIndex::{A, B, C};
    let pairs = [(A, B, C, "AB"), (B, C, A, "BC"), (C, A, B, "CA")];
    let closed = max_of(pairs.iter().flat_map(|&(a, b, c, _)| {
        [
            (lie_bracket_frame(a, b) - c.unit().scale(2.0)).norm(),
            (lie_bracket_frame(a, b) + lie_bracket_frame(b, a)).norm(),
        ]
    }));
    r.check(Check::below("brackets.closed_form", closed, 1e-12));

    // The fields x ↦ xu, x ↦ xv are linear on R4 with bracket x(uv - vu).
    let points: Vec<S3Point> = (0..200).map(|_| random_s3(rng)).collect();
    let ambient = max_of(points.iter().flat_map(|x| {
        pairs.iter().map(move |&(a, b, _, _)| {
            let (u, v) = (a.generator(), b.generator());
            let w = x.q() * (u * v) - x.q() * (v * u);
            (TangentS3::project(*x, w).frame_coeffs() - lie_bracket_frame(a, b)).norm()
        })
    }));
    r.check(Check::below("brackets.ambient", ambient, 1e-12));

    let steps = [0.1, 0.05, 0.025, 0.0125, 0.00625];
    let order = |e: &[f64]| e.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
    for (a, b, c, label) in pairs {
        let errs = |est: fn(S3Point, FrameIndex, FrameIndex, f64) -> FrameCoeffs| -> Vec<f64> {
            steps
                .iter()
                .map(|&eps| max_of(points[..20].iter().map(|x| (est(*x, a, b, eps) - c.unit().scale(2.0)).norm())))
                .collect()
        };
        let plain = errs(flow_commutator);
        r.note(format!("brackets.one_sided_order_{label}: {:.4}", order(&plain)));
        let sym = errs(flow_commutator_symmetric);
        r.check(Check::above(&format!("brackets.flow_order_{label}"), order(&sym), 1.0));
        r.check(Check::below(format!("brackets.flow_error_{label}"), sym[sym.len() - 1], 1e-3));
    }
}

fn decomposition(cfg: &RunConfig, rng: &mut ChaCha8Rng, r: &mut SuiteReport) {
    r.part("fields", |r| {
        let grid = Arc::new(BaseGrid::fibonacci(cfg.base_grid_size)?);
        let mut worst = [0.0f64; 5];
        for _ in 0..100 {
            let f = random_polynomial(rng, 3, 1.0);
            let x = SampledField::from_fn(grid.clone(), cfg.n_t, cfg.radius, |p| f.coeffs_at(p))?;
            let p = project_pvf(&x);
            let b = project_bvf(&x);
            let idem = [
                project_pvf(&p).sup_distance(&p)?,
                project_bvf(&b).sup_distance(&b)?,
                project_pvf(&b).sup_norm(),
                project_bvf(&p).sup_norm(),
            ];
            let row = [
                p.add(&b)?.sup_distance(&x)?,
                max_of(idem),
                is_projectable(&p).residual(),
                is_balanced(&b).residual(),
                l2_inner(&p, &b)?.abs(),
            ];
            for (w, v) in worst.iter_mut().zip(row) {
                *w = w.max(v);
            }
        }
        r.check(Check::below("decomposition.sum", worst[0], cfg.spectral_tol));
        r.check(Check::below("decomposition.idempotent", worst[1], cfg.spectral_tol));
        r.check(Check::below("decomposition.pvf_residual", worst[2], 1e-9));
        r.check(Check::below("decomposition.bvf_moments", worst[3], 1e-9));
        r.check(Check::below("decomposition.orthogonality", worst[4], 1e-9));

        for (idx, balanced, label) in [
            (FrameIndex::A, false, "A"),
            (FrameIndex::B, true, "B"),
            (FrameIndex::C, true, "C"),
        ] {
            let x = SampledField::constant(grid.clone(), cfg.n_t, cfg.radius, idx.unit())?;
            let (keep, drop) = if balanced {
                (project_bvf(&x), project_pvf(&x))
            } else {
                (project_pvf(&x), project_bvf(&x))
            };
            let res = keep.sup_distance(&x)? + drop.sup_norm();
            r.check(Check::below(format!("decomposition.frame_{label}"), res, cfg.spectral_tol));
        }
        Ok(())
    });
}

fn pushforward(cfg: &RunConfig, rng: &mut ChaCha8Rng, r: &mut SuiteReport) {
    let radius = cfg.radius;
    r.part("horizontal", |r| {
        let (mut norm, mut lift) = (0.0f64, 0.0f64);
        for _ in 0..1000 {
            let x = random_s3(rng);
            let c = FrameCoeffs::new(0.0, rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
            let v = TangentS3::from_frame(x, c);
            let u = pushforward_horizontal(&v, radius)?;
            norm = norm.max((u.norm() - 2.0 * radius * c.norm()).abs());
            let back = horizontal_lift(&u, &hopf_project(x, radius), x)?;
            lift = lift.max((back.ambient() - v.ambient()).norm());
        }
        r.check(Check::below("pushforward.norm", norm, 1e-12));
        r.check(Check::below("pushforward.lift_inverse", lift, 1e-12));
        Ok(())
    });
    r.part("double_wrap", |r| {
        let (mut wrap, mut wind) = (0.0f64, 0.0f64);
        for _ in 0..20 {
            let fiber = HopfFiber::over(&random_unit(rng));
            let (ex, ey) = fiber.chart_axes();
            let mut curve = Vec::with_capacity(cfg.n_t);
            for k in 0..cfg.n_t {
                let t = TAU * k as f64 / cfg.n_t as f64;
                let pb = pushforward_horizontal(&frame_at(fiber.point(t))[1], radius)?;
                let xy = [pb.dot(&ex), pb.dot(&ey)];
                let (s2, c2) = (2.0 * t).sin_cos();
                wrap = wrap.max((xy[0] - 2.0 * radius * c2).hypot(xy[1] - 2.0 * radius * s2));
                curve.push(xy);
            }
            wind = wind.max((winding_number(&curve) - 2.0).abs());
        }
        r.check(Check::below("pushforward.double_wrap", wrap, 1e-12));
        r.check(Check::below("pushforward.winding", wind, 1e-9));
        Ok(())
    });
}

fn scaled_field(grid: &Arc<BaseGrid>, cfg: &RunConfig, f: &dyn SmoothField, sup: f64) -> Result<SampledField> {
    let x = SampledField::from_fn(grid.clone(), cfg.n_t, cfg.radius, |p| f.coeffs_at(p))?;
    Ok(x.scale(sup / x.sup_norm()))
}

fn aexp_suite(cfg: &RunConfig, rng: &mut ChaCha8Rng, r: &mut SuiteReport) {
    let regime = cfg.regime();
    let grid = match BaseGrid::fibonacci(cfg.base_grid_size) {
        Ok(g) => Arc::new(g),
        Err(e) => return r.part("grid", |_| Err(e)),
    };
    let fields = 200;
    let mut worst = [f64::NAN; 3];
    let mut rejected: Vec<GeomError> = Vec::new();
    for _ in 0..fields {
        let f = random_polynomial(rng, 2, 1.0);
        let sup = cfg.field_bound * rng.random_range(0.2..=0.999);
        let run = || -> Result<[f64; 3]> {
            let rep = factorization_report(&scaled_field(&grid, cfg, &f, sup)?, &regime)?;
            Ok([rep.rescale_round_trip, rep.twist_round_trip, rep.factorization])
        };
        match run() {
            Ok(row) => {
                for (w, v) in worst.iter_mut().zip(row) {
                    *w = if w.is_nan() { v } else { w.max(v) };
                }
            }
            Err(e) => rejected.push(e),
        }
    }
    if let Some(first) = rejected.first() {
        r.note(format!("aexp.regime: {} of {fields} fields rejected; first: {first}", rejected.len()));
        let worst_regime = rejected
            .iter()
            .filter_map(|e| match e {
                GeomError::Regime { value, bound, .. } => Some((*value, *bound)),
                _ => None,
            })
            .fold((f64::NAN, 0.0), |a, b| if a.0.is_nan() || b.0 > a.0 { b } else { a });
        r.check(Check {
            name: "aexp.regime".into(),
            residual: worst_regime.0,
            tolerance: worst_regime.1,
            pass: false,
        });
    }
    r.check(Check::below("aexp.unrescale_rescale", worst[0], 1e-9));
    r.check(Check::below("aexp.untwist_twist", worst[1], 1e-9));
    r.check(Check::below("aexp.factorization", worst[2], 1e-8));

    r.part("fibers", |r| {
        let amp = 0.8 * cfg.field_bound.min(0.3);
        let (mut keep, mut broken) = (0.0f64, f64::INFINITY);
        for _ in 0..10 {
            let p = random_projectable(rng, 1.0);
            let b = random_balanced(rng, 1.0);
            let x = scaled_field(&grid, cfg, &p, amp)?;
            keep = keep.max(aexp(&x, &regime)?.fiber_preservation_residual());
            let bal = scaled_field(&grid, cfg, &b, amp / 5.0)?;
            let perturbed = x.scale(0.75).add(&bal)?;
            broken = broken.min(aexp(&perturbed, &regime)?.fiber_preservation_residual());
        }
        r.check(Check::below("aexp.projectable_fibers", keep, 1e-9));
        r.check(Check::above("aexp.balanced_breaks_fibers", broken, 1e-3));
        Ok(())
    });
}

fn gradient(cfg: &RunConfig, rng: &mut ChaCha8Rng, r: &mut SuiteReport) {
    let opts = cfg.solver_options();
    r.part("minus_vbar", |r| {
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let n = random_unit(rng);
            let target = TargetCurve::hopf_fiber(&HopfFiber::over(&n), opts.n_t)?;
            let at = LocalChart::at(&n).point(disc_point(rng, 0.02, 0.2));
            worst = worst.max(gradient_check(&LocalChart::at(&at), &target, &opts)?);
        }
        r.check(Check::below("gradient.minus_vbar", worst, 1e-4));
        Ok(())
    });
    r.part("shooter_derivative", |r| {
        let h = 1e-5;
        let mut worst = 0.0f64;
        for k in 1..=30 {
            let alpha = 1.5 * k as f64 / 30.0;
            let fd = (shooter_derivative(alpha, h)?.w - shooter_derivative(alpha, -h)?.w) / (2.0 * h);
            worst = worst.max((fd - shooter_derivative(alpha, 0.0)?.dw_dbeta_at_zero).norm());
        }
        r.check(Check::below("gradient.shooter_derivative", worst, 1e-6));
        Ok(())
    });
    let lambdas: Vec<f64> = (1..=10_000).map(|k| amplification(FRAC_PI_2 * k as f64 / 10_000.0)).collect();
    r.check(Check::above("gradient.lambda_lower", lambdas.iter().copied().fold(f64::INFINITY, f64::min), 1.0));
    r.check(Check::below("gradient.lambda_upper", max_of(lambdas), 1.6));
}

fn mixed_target(rng: &mut ChaCha8Rng, n_t: usize, weights: (f64, f64)) -> Result<(Vec3, TargetCurve)> {
    let field = random_mix(rng, weights);
    let n = random_unit(rng);
    let target = TargetCurve::image_of(&FieldExp { field, scale: 1.0 }, &HopfFiber::over(&n), n_t)?;
    Ok((n, target))
}

fn hessian(cfg: &RunConfig, rng: &mut ChaCha8Rng, r: &mut SuiteReport) {
    let opts = cfg.solver_options();
    r.part("vertical", |r| {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..20 {
            let n = random_unit(rng);
            let target = TargetCurve::hopf_fiber(&HopfFiber::over(&n), opts.n_t)?;
            let rec = energy(&LocalChart::at(&n), disc_point(rng, 0.0, 0.2), &target, &opts, true)?;
            let [a, b] = rec.hessian_eigenvalues().expect("requested");
            lo = lo.min(a);
            hi = hi.max(b);
        }
        r.check(Check::above("hessian.vertical_lower", lo, 0.9));
        r.check(Check::below("hessian.vertical_upper", hi, 1.7));
        Ok(())
    });
    r.part("newton_iterates", |r| {
        let mut lo = f64::INFINITY;
        for _ in 0..10 {
            let (n, target) = mixed_target(rng, opts.n_t, (0.05, 0.1))?;
            let start = LocalChart::at(&n).point(disc_point(rng, 0.1, 0.25));
            let res = minimize(&n, &target, &opts, Some(&start))?;
            for rec in &res.trace {
                if let Some([a, _]) = rec.eigenvalues {
                    lo = lo.min(a);
                }
            }
            lo = lo.min(res.hessian_eigenvalues[0]);
        }
        r.check(Check::above("hessian.newton_iterates", lo, 0.0));
        Ok(())
    });
    let note = breakdown(rng, &opts);
    r.note(format!("hessian.breakdown: {note}"));
}

/// Scans the amplitude of a generic horizontal perturbation of a vertical
/// target until the Newton solve meets a non-positive Hessian or fails.
fn breakdown(rng: &mut ChaCha8Rng, opts: &SolverOptions) -> String {
    let poly = random_polynomial(rng, 3, 1.0);
    let field = move |x: S3Point| poly.coeffs_at(x).horizontal();
    let n = random_unit(rng);
    let fiber = HopfFiber::over(&n);
    let sup = max_of(fiber.samples(opts.n_t).into_iter().map(|x| field.coeffs_at(x).norm()));
    let unbounded = SolverOptions {
        verticality_bound: FRAC_PI_2,
        ..*opts
    };
    let mut last = (0.0, 0.0, 0.0);
    for k in 1..=15 {
        let amp = 0.05 * k as f64;
        let d = FieldExp {
            field: &field,
            scale: amp / sup,
        };
        let outcome = TargetCurve::image_of(&d, &fiber, opts.n_t).and_then(|t| {
            let res = minimize(&n, &t, &unbounded, None)?;
            let lo = res
                .trace
                .iter()
                .filter_map(|r| r.eigenvalues.map(|e| e[0]))
                .fold(res.hessian_eigenvalues[0], f64::min);
            Ok((t.verticality(), lo))
        });
        match outcome {
            Ok((v, lo)) if lo > 0.0 => last = (amp, v, lo),
            Ok((v, lo)) => {
                return format!("min eigenvalue {lo:.3e} <= 0 at amplitude {amp:.2} (verticality {v:.3})");
            }
            Err(e) => return format!("solve fails at amplitude {amp:.2}: {e}"),
        }
    }
    format!(
        "positive definite up to amplitude {:.2} (verticality {:.3}, min eigenvalue {:.3e})",
        last.0, last.1, last.2
    )
}

fn slice(cfg: &RunConfig, rng: &mut ChaCha8Rng, r: &mut SuiteReport) {
    let opts = cfg.solver_options();
    r.part("identity", |r| {
        let n = random_unit(rng);
        let res = minimize_diffeo(&Identity, &n, &opts)?;
        r.check(Check::below("slice.identity", (res.winner - n).norm() + res.energy, 1e-12));
        Ok(())
    });
    r.part("balanced", |r| {
        let (mut rec, mut vbar) = (0.0f64, 0.0f64);
        for _ in 0..3 {
            let field = random_balanced(rng, 1.0);
            let n = random_unit(rng);
            let fiber = HopfFiber::over(&n);
            let sup = max_of(fiber.samples(opts.n_t).into_iter().map(|x| field.coeffs_at(x).norm()));
            let d = FieldExp {
                field: field.clone(),
                scale: 0.1 / sup,
            };
            let res = minimize_diffeo(&d, &n, &opts)?;
            rec = rec.max((res.winner - n).norm());
            for (x, c) in fiber.samples(opts.n_t).into_iter().zip(&res.balanced_field) {
                rec = rec.max((field.coeffs_at(x).scale(d.scale) - *c).norm());
            }
            vbar = vbar.max(res.moments.vbar_norm());
        }
        r.check(Check::below("slice.balanced_recovery", rec, 1e-6));
        r.check(Check::below("slice.balanced_vbar", vbar, 1e-8));
        Ok(())
    });
    r.part("projectable", |r| {
        let mut worst = 0.0f64;
        for _ in 0..3 {
            let mut p = random_projectable(rng, 1.0);
            p.vertical = Polynomial::zero();
            let n = random_unit(rng);
            let base = p.base_field(&n);
            let scale = 0.15 / base.norm().max(1e-3);
            let u = base * scale;
            let expected = (n * u.norm().cos() + u * (u.norm().sin() / u.norm())).normalize();
            let res = minimize_diffeo(&FieldExp { field: p, scale }, &n, &opts)?;
            worst = worst.max((res.winner - expected).norm());
            worst = worst.max(max_of(res.balanced_field.iter().map(|c| c.norm())));
        }
        r.check(Check::below("slice.projectable", worst, 1e-8));
        Ok(())
    });
    r.part("u2", |r| {
        let m = U2Motion::from_axis_angle(&random_unit(rng), 0.2, rng.random_range(0.0..TAU));
        let n = random_unit(rng);
        let res = minimize_diffeo(&m, &n, &opts)?;
        r.check(Check::below("slice.u2_rigid", (res.winner - m.base_rotation(&n)).norm(), 1e-9));
        Ok(())
    });
    r.part("fixtures", |r| {
        let (mut coset, mut balanced, mut steps, mut multi, mut quad) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..20 {
            let (n, target) = mixed_target(rng, opts.n_t, (0.04, 0.08))?;
            let res = minimize(&n, &target, &opts, None)?;
            coset = coset.max(coset_check(target.samples(), &res)?);
            let m = res.moments;
            balanced = balanced.max(m.alpha.abs().max(m.beta.abs()).max(m.vbar_norm()));
            steps = steps.max(minimize(&n, &target, &opts, Some(&res.winner))?.iterations as f64);
            if i < 3 {
                let chart = LocalChart::at(&n);
                for k in 0..8 {
                    let a = TAU * k as f64 / 8.0;
                    let other = minimize(&n, &target, &opts, Some(&chart.point([0.1 * a.cos(), 0.1 * a.sin()])))?;
                    multi = multi.max((other.winner - res.winner).norm());
                }
            }
            if i < 5 {
                let start = LocalChart::at(&n).point(disc_point(rng, 0.2, 0.25));
                let far = minimize(&n, &target, &opts, Some(&start))?;
                quad = quad.max(quadratic_constant(&far.trace.iter().map(|t| t.vbar_norm).collect::<Vec<_>>()));
            }
        }
        r.check(Check::below("slice.coset", coset, 1e-6));
        r.check(Check::below("slice.minimizer_balanced", balanced, 1e-8));
        r.check(Check::below("slice.balanced_is_stationary", steps, 1.0));
        r.check(Check::below("slice.multistart", multi, 1e-8));
        r.check(Check::below("slice.quadratic_constant", quad, 10.0));
        Ok(())
    });
    r.part("separation", |r| {
        let (n, target) = mixed_target(rng, opts.n_t, (0.04, 0.08))?;
        let far = TargetCurve::hopf_fiber(&HopfFiber::over(&LocalChart::at(&n).point([0.2, 0.0])), opts.n_t)?;
        let res = minimize(&n, &far, &opts, None)?;
        r.check(Check::above("slice.coset_separation", coset_check(target.samples(), &res)?, 0.05));
        Ok(())
    });
    r.part("dependence", |r| {
        let p = random_projectable(rng, 1.0);
        let field = move |x: S3Point| p.coeffs_at(x).horizontal().scale(0.1);
        let d = FieldExp { field, scale: 1.0 };
        let n = random_unit(rng);
        let j1 = winner_jacobian(&d, &n, 0.02, &opts)?;
        let j2 = winner_jacobian(&d, &n, 0.01, &opts)?;
        r.check(Check::below("slice.dependence_refinement", (j1 - j2).norm() / j2.norm(), 0.1));
        Ok(())
    });
}

/// Largest `r_k / r_{k-1}²` over the last two Newton steps, ignoring
/// residuals at the round-off floor.
fn quadratic_constant(res: &[f64]) -> f64 {
    const FLOOR: f64 = 1e-15;
    if res.len() < 4 {
        return f64::NAN;
    }
    let k = res.len() - 1;
    max_of([k - 1, k].map(|j| (res[j] - FLOOR).max(0.0) / (res[j - 1] * res[j - 1])))
}

fn small_triangle(rng: &mut ChaCha8Rng, size: f64) -> [HopfFiber; 3] {
    let c = random_unit(rng);
    let (e1, e2) = HopfFiber::over(&c).chart_axes();
    [0, 1, 2].map(|_| {
        let (x, y) = (rng.random_range(-size..size), rng.random_range(-size..size));
        HopfFiber::over(&(c + e1 * x + e2 * y))
    })
}

fn holonomy(cfg: &RunConfig, rng: &mut ChaCha8Rng, r: &mut SuiteReport) {
    let run = cfg.run_bound;
    r.part("triangles", |r| {
        let mut worst = [0.0f64; 5];
        for _ in 0..100 {
            let f = small_triangle(rng, 0.2);
            let t = horizontal_triangle(f, run)?;
            let area = projected_area(&f[0], &f[1], &f[2]);
            let shifted = HopfFiber::through(f[0].basepoint().along_fiber(rng.random_range(0.0..TAU)));
            let row = [
                (t.gap - area).abs(),
                (t.gap - 2.0 * area).abs(),
                t.horizontality(),
                (triangle_gap(&f[0], &f[2], &f[1], run)? + t.gap).abs(),
                (triangle_gap(&shifted, &f[1], &f[2], run)? - t.gap).abs(),
            ];
            for (w, v) in worst.iter_mut().zip(row) {
                *w = w.max(v);
            }
        }
        r.check(Check::below("holonomy.gap_vs_area", worst[0], 1e-6));
        r.check(Check::below("holonomy.gap_vs_twice_area", worst[1], 1e-6));
        r.check(Check::below("holonomy.horizontality", worst[2], 1e-10));
        r.check(Check::below("holonomy.reversal", worst[3], 1e-12));
        r.check(Check::below("holonomy.start_independence", worst[4], 1e-12));
        Ok(())
    });
    r.part("refinement", |r| {
        let c = random_unit(rng);
        let (e1, e2) = HopfFiber::over(&c).chart_axes();
        let (mut literal, mut flat) = (Vec::new(), Vec::new());
        for side in [0.04, 0.02, 0.01, 0.005] {
            // Side `side` on S2(1/2) subtends the angle `2 side` at the center.
            let rho = 2.0 * side / 3f64.sqrt();
            let f = [0.0, TAU / 3.0, 2.0 * TAU / 3.0].map(|a: f64| {
                HopfFiber::over(&(c * rho.cos() + (e1 * a.cos() + e2 * a.sin()) * rho.sin()))
            });
            let gap = triangle_gap(&f[0], &f[1], &f[2], run)?;
            let s = f[0].project(0.5).distance(&f[1].project(0.5));
            literal.push((gap - projected_area(&f[0], &f[1], &f[2])).abs());
            flat.push((gap / 2.0 - 3f64.sqrt() / 4.0 * s * s).abs());
        }
        let order = |e: &[f64]| e.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
        r.check(Check::above("holonomy.gap_vs_area_order", order(&literal), 3.5));
        r.check(Check::above("holonomy.flat_area_order", order(&flat), 3.5));
        Ok(())
    });
    let octant = [Vec3::x(), Vec3::y(), Vec3::z()].map(|n| HopfFiber::over(&n));
    r.check(Check::below(
        "holonomy.octant_area",
        (projected_area(&octant[0], &octant[1], &octant[2]) - PI / 8.0).abs(),
        1e-12,
    ));
}

const LINK_SAMPLES: usize = 512;

/// Two random points whose orbits stay at least `gap` apart.
fn separated_pair(rng: &mut ChaCha8Rng, gap: f64, mirror: bool) -> (S3Point, S3Point) {
    let flip = |p: S3Point| if mirror { S3Point::normalize(p.q().conj()) } else { p };
    loop {
        let (p, q) = (random_s3(rng), random_s3(rng));
        if fiber_distance(flip(p), flip(q)) >= gap {
            return (p, q);
        }
    }
}

fn linking(rng: &mut ChaCha8Rng, r: &mut SuiteReport) {
    r.part("fixed_pairs", |r| {
        let j = S3Point::normalize(Quaternion::J);
        let f = gauss_linking(
            &HopfFiber::through(S3Point::IDENTITY).samples(LINK_SAMPLES),
            &HopfFiber::through(j).samples(LINK_SAMPLES),
        )?;
        r.check(Check::below("linking.hopf_pair", (f.value + 1.0).abs(), 0.01));
        let h = gauss_linking(&mirror_fiber(S3Point::IDENTITY, LINK_SAMPLES), &mirror_fiber(j, LINK_SAMPLES))?;
        r.check(Check::below("linking.mirror_pair", (h.value - 1.0).abs(), 0.01));
        Ok(())
    });
    r.part("random_pairs", |r| {
        let (mut hopf, mut mirror, mut pole) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..50 {
            let (p, q) = separated_pair(rng, 0.5, false);
            let (c1, c2) = (HopfFiber::through(p).samples(LINK_SAMPLES), HopfFiber::through(q).samples(LINK_SAMPLES));
            let l = gauss_linking(&c1, &c2)?;
            hopf = hopf.max((l.value + 1.0).abs());
            if i < 10 {
                let other = loop {
                    let cand = random_s3(rng);
                    if c1.iter().chain(&c2).all(|x| x.distance(cand) > 0.8) {
                        break cand;
                    }
                };
                pole = pole.max((gauss_linking_from(&c1, &c2, other)?.value - l.value).abs());
            }
            let (p, q) = separated_pair(rng, 0.5, true);
            let l = gauss_linking(&mirror_fiber(p, LINK_SAMPLES), &mirror_fiber(q, LINK_SAMPLES))?;
            mirror = mirror.max((l.value - 1.0).abs());
        }
        r.check(Check::below("linking.random_hopf_pairs", hopf, 0.01));
        r.check(Check::below("linking.random_mirror_pairs", mirror, 0.01));
        r.check(Check::below("linking.pole_invariance", pole, 0.01));
        Ok(())
    });
    r.part("unlinked", |r| {
        let circle = |center: Quaternion| -> Vec<S3Point> {
            (0..LINK_SAMPLES / 2)
                .map(|k| {
                    let t = TAU * k as f64 / (LINK_SAMPLES / 2) as f64;
                    S3Point::normalize(center + Quaternion::new(0.0, 0.1 * t.cos(), 0.1 * t.sin(), 0.0))
                })
                .collect()
        };
        let l = gauss_linking(&circle(Quaternion::ONE), &circle(Quaternion::new(0.0, 0.0, 0.0, 1.0)))?;
        r.check(Check::below("linking.unlinked", l.value.abs(), 0.01));
        Ok(())
    });
}
