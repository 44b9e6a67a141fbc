//! Energy-minimizing slice: shoot horizontal fields from candidate fibers at
//! the image of a source fiber and pick the fiber whose shooting field is
//! balanced.
//!
//! Candidate fibers are located on S2(1/2), where the Hopf projection is a
//! Riemannian submersion: horizontal lengths in S3 equal base lengths. Chart
//! coordinates are normal coordinates on S2(1/2) around a center.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use nalgebra::{Matrix2, SymmetricEigen, Vector2};

use crate::diffeo::Diffeo;
use crate::error::{GeomError, Result};
use crate::fields::{fiber_moments, winding_number, FiberMoments};
use crate::quat::{pushforward_coeffs, FrameCoeffs, HopfFiber, Quaternion, S2Point, S3Point, TangentS3, Vec3};
use crate::spectral::{SpectralPlan, TrigInterpolant, MIN_SAMPLES};
use crate::sphere::{log_s3, transport_s2};

/// Radius of the base sphere carrying the slice chart.
pub const SLICE_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Shooting samples per candidate fiber.
    pub n_t: usize,
    /// Convergence threshold on `‖vbar‖`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Largest Newton step in chart units.
    pub max_step: f64,
    /// Step of the finite-difference Hessian of `E`.
    pub hessian_step: f64,
    /// Step of the finite-difference Jacobian of `vbar`.
    pub jacobian_step: f64,
    /// Largest accepted shot length.
    pub run_bound: f64,
    /// Largest accepted angle between the target tangent and `A`.
    pub verticality_bound: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            n_t: 64,
            tolerance: 1e-10,
            max_iterations: 50,
            max_step: 0.2,
            hessian_step: 1e-4,
            jacobian_step: 1e-5,
            run_bound: FRAC_PI_4,
            verticality_bound: 0.5,
        }
    }
}

/// A closed curve in S3 sampled uniformly in its parameter.
#[derive(Debug, Clone)]
pub struct TargetCurve {
    samples: Vec<S3Point>,
    components: [TrigInterpolant; 4],
}

impl TargetCurve {
    pub fn new(samples: Vec<S3Point>) -> Result<Self> {
        let n = samples.len();
        let plan = SpectralPlan::new(n)?;
        let comp = |c: usize| {
            let v: Vec<f64> = samples.iter().map(|p| p.q().to_array()[c]).collect();
            TrigInterpolant::new(&plan, &v)
        };
        let components = [comp(0), comp(1), comp(2), comp(3)];
        Ok(Self { samples, components })
    }

    pub fn hopf_fiber(fiber: &HopfFiber, n: usize) -> Result<Self> {
        Self::new(fiber.samples(n))
    }

    /// Image of the fiber over `n` under a diffeomorphism.
    pub fn image_of(d: &dyn Diffeo, fiber: &HopfFiber, n: usize) -> Result<Self> {
        Self::new(d.fiber_image(fiber, n))
    }

    pub fn samples(&self) -> &[S3Point] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Unnormalized interpolant and its derivative at `tau`.
    fn raw(&self, tau: f64) -> (Quaternion, Quaternion) {
        let mut v = [0.0; 4];
        let mut d = [0.0; 4];
        for c in 0..4 {
            (v[c], d[c]) = self.components[c].eval(tau);
        }
        (Quaternion::from_array(v), Quaternion::from_array(d))
    }

    /// Point on the curve and its velocity.
    pub fn eval(&self, tau: f64) -> (S3Point, Quaternion) {
        let (c, dc) = self.raw(tau);
        let r = c.norm();
        let u = c.scale(1.0 / r);
        let du = (dc - u.scale(u.dot(dc))).scale(1.0 / r);
        (S3Point::normalize(c), du)
    }

    pub fn point(&self, tau: f64) -> S3Point {
        self.eval(tau).0
    }

    /// Largest angle between the velocity and `A`, over a dense sampling.
    pub fn verticality(&self) -> f64 {
        let m = 4 * self.len();
        (0..m)
            .map(|k| {
                let (c, dc) = self.eval(TAU * k as f64 / m as f64);
                let along = dc.dot(c.q() * Quaternion::I);
                (along.abs() / dc.norm()).clamp(-1.0, 1.0).acos()
            })
            .fold(0.0, f64::max)
    }

    pub fn check_vertical(&self, bound: f64) -> Result<()> {
        let v = self.verticality();
        if v >= bound {
            return Err(GeomError::Regime {
                what: "target verticality",
                value: v,
                bound,
            });
        }
        Ok(())
    }

    /// Geodesic distance from `y` to the curve.
    pub fn distance_to(&self, y: S3Point) -> f64 {
        let m = 8 * self.len();
        let h = TAU / m as f64;
        let score = |tau: f64| self.point(tau).q().dot(y.q());
        let best = (0..m)
            .max_by(|&a, &b| score(h * a as f64).total_cmp(&score(h * b as f64)))
            .expect("curve has samples");
        let (mut a, mut b) = (h * (best as f64 - 1.0), h * (best as f64 + 1.0));
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
        let (mut f1, mut f2) = (score(x1), score(x2));
        for _ in 0..80 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = score(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = score(x1);
            }
        }
        let mut tau = 0.5 * (a + b);
        let slope = |t: f64| self.eval(t).1.dot(y.q());
        for _ in 0..8 {
            let d = 1e-6;
            let curvature = (slope(tau + d) - slope(tau - d)) / (2.0 * d);
            if curvature == 0.0 {
                break;
            }
            let step = (slope(tau) / curvature).clamp(-h, h);
            tau -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        self.point(tau).distance(y)
    }
}

/// A horizontal shot from a point to a target curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shot {
    pub v: TangentS3,
    /// Parameter of the hit point on the target.
    pub tau: f64,
    /// `|⟨c(τ), p i⟩|`: the vertical part of the landing direction.
    pub residual: f64,
}

impl Shot {
    pub fn landing(&self) -> S3Point {
        crate::sphere::exp_s3(&self.v).expect("shots are shorter than π")
    }
}

const SHOOT_TOL: f64 = 1e-14;
const SHOOT_MAX_ITER: usize = 60;

/// `φ(τ) = ⟨c(τ), p i⟩` and its derivative. A horizontal geodesic from `p`
/// hits `c(τ)` exactly when `φ(τ) = 0`.
fn shot_condition(p: S3Point, target: &TargetCurve, tau: f64) -> (f64, f64) {
    let (c, dc) = target.eval(tau);
    let pi = p.q() * Quaternion::I;
    (c.q().dot(pi), dc.dot(pi))
}

fn shot_at(p: S3Point, target: &TargetCurve, tau: f64) -> Result<Shot> {
    let c = target.point(tau);
    let residual = shot_condition(p, target, tau).0.abs();
    let v = log_s3(p, c)?;
    let coeffs = v.frame_coeffs();
    Ok(Shot {
        v: TangentS3::from_frame(p, coeffs.horizontal()),
        tau: tau.rem_euclid(TAU),
        residual,
    })
}

/// Safeguarded Newton on a bracket `[a, b]` with a sign change.
fn bracketed_root(phi: impl Fn(f64) -> (f64, f64), mut a: f64, mut b: f64) -> Option<f64> {
    let (fa, _) = phi(a);
    if fa.abs() < SHOOT_TOL {
        return Some(a);
    }
    let sa = fa.signum();
    let mut x = 0.5 * (a + b);
    for _ in 0..SHOOT_MAX_ITER {
        let (f, df) = phi(x);
        if f.abs() < SHOOT_TOL {
            return Some(x);
        }
        if f.signum() == sa {
            a = x;
        } else {
            b = x;
        }
        let newton = x - f / df;
        x = if df != 0.0 && newton > a.min(b) && newton < a.max(b) {
            newton
        } else {
            0.5 * (a + b)
        };
        if (b - a).abs() < 1e-15 {
            return Some(x);
        }
    }
    None
}

fn newton_from(phi: impl Fn(f64) -> (f64, f64), mut x: f64) -> Option<f64> {
    for _ in 0..SHOOT_MAX_ITER {
        let (f, df) = phi(x);
        if f.abs() < SHOOT_TOL {
            return Some(x);
        }
        if df.abs() < 1e-12 {
            return None;
        }
        let step = (f / df).clamp(-0.2, 0.2);
        x -= step;
    }
    None
}

/// Shortest horizontal shot from `p` to the target.
///
/// With a hint, Newton continues from that parameter and the result is
/// accepted when it lands within `0.5` of it; otherwise every root is
/// located by a scan and the shortest wins.
pub fn shoot(p: S3Point, target: &TargetCurve, hint: Option<f64>, run_bound: f64) -> Result<Shot> {
    let phi = |tau: f64| shot_condition(p, target, tau);
    if let Some(h) = hint {
        if let Some(tau) = newton_from(phi, h) {
            if (tau - h).abs() < 0.5 {
                let shot = shot_at(p, target, tau)?;
                if shot.v.norm() < run_bound {
                    return Ok(shot);
                }
            }
        }
    }
    let m = 4 * target.len();
    let h = TAU / m as f64;
    let mut values: Vec<f64> = (0..m).map(|k| phi(h * k as f64).0).collect();
    values.push(values[0]);
    let mut shots = Vec::new();
    for k in 0..m {
        let (a, b) = (values[k], values[k + 1]);
        if a.abs() < SHOOT_TOL || a.signum() != b.signum() {
            if let Some(tau) = bracketed_root(phi, h * k as f64, h * (k + 1) as f64) {
                match shot_at(p, target, tau) {
                    Ok(shot) => shots.push(shot),
                    Err(GeomError::Antipodal) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    shots.sort_by(|a, b| a.v.norm().total_cmp(&b.v.norm()));
    // Touching roots at a bracket boundary can appear twice.
    shots.dedup_by(|a, b| ((a.tau - b.tau + PI).rem_euclid(TAU) - PI).abs() < 1e-9);
    let Some(first) = shots.first().copied() else {
        return Err(GeomError::ShootFailed {
            t: f64::NAN,
            residual: values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min),
        });
    };
    if first.v.norm() >= run_bound {
        return Err(GeomError::Regime {
            what: "shot length",
            value: first.v.norm(),
            bound: run_bound,
        });
    }
    if let Some(second) = shots.get(1) {
        if second.v.norm() < run_bound {
            return Err(GeomError::AmbiguousShot {
                first: first.v.norm(),
                second: second.v.norm(),
            });
        }
    }
    Ok(first)
}

/// Horizontal shots from `n_t` uniform samples of a fiber to a target.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingField {
    pub fiber: HopfFiber,
    pub shots: Vec<Shot>,
}

impl ShootingField {
    pub fn n_t(&self) -> usize {
        self.shots.len()
    }

    pub fn coeffs(&self) -> Vec<FrameCoeffs> {
        self.shots.iter().map(|s| s.v.frame_coeffs()).collect()
    }

    pub fn images(&self) -> Vec<S3Point> {
        self.shots.iter().map(|s| s.landing()).collect()
    }

    /// `(1/2π) ∫ ½‖V‖² dt`.
    pub fn energy(&self) -> f64 {
        self.shots.iter().map(|s| 0.5 * s.v.norm().powi(2)).sum::<f64>() / self.n_t() as f64
    }

    /// Average pushforward on S2(1/2), as a tangent vector of R3.
    pub fn vbar(&self) -> Vec3 {
        self.shots
            .iter()
            .map(|s| pushforward_coeffs(s.v.base(), s.v.frame_coeffs(), SLICE_RADIUS))
            .sum::<Vec3>()
            / self.n_t() as f64
    }

    pub fn moments(&self) -> FiberMoments {
        fiber_moments(&self.coeffs(), SLICE_RADIUS).expect("shooting fields have at least four samples")
    }

    /// Net number of times the impact parameter runs around the target.
    pub fn tau_winding(&self) -> f64 {
        let n = self.n_t();
        let mut total = 0.0;
        for k in 0..n {
            let d = self.shots[(k + 1) % n].tau - self.shots[k].tau;
            total += (d + PI).rem_euclid(TAU) - PI;
        }
        total / TAU
    }

    /// Winding of the shot direction in the `(B, C)` frame.
    pub fn direction_winding(&self) -> f64 {
        let curve: Vec<[f64; 2]> = self.coeffs().iter().map(|c| [c.g, c.h]).collect();
        winding_number(&curve)
    }
}

/// Shoots from every sample of `fiber`, continuing each shot from the last.
pub fn shooting_field(fiber: &HopfFiber, target: &TargetCurve, n_t: usize, run_bound: f64) -> Result<ShootingField> {
    if n_t < MIN_SAMPLES {
        return Err(GeomError::GridTooSmall { n: n_t, min: MIN_SAMPLES });
    }
    let mut shots: Vec<Shot> = Vec::with_capacity(n_t);
    for k in 0..n_t {
        let t = TAU * k as f64 / n_t as f64;
        let hint = match shots.len() {
            0 => None,
            1 => Some(shots[0].tau + TAU / n_t as f64),
            l => {
                let (a, b) = (shots[l - 2].tau, shots[l - 1].tau);
                let d = (b - a + PI).rem_euclid(TAU) - PI;
                Some(b + d)
            }
        };
        let shot = shoot(fiber.point(t), target, hint, run_bound).map_err(|e| match e {
            GeomError::ShootFailed { residual, .. } => GeomError::ShootFailed { t, residual },
            other => other,
        })?;
        shots.push(shot);
    }
    Ok(ShootingField { fiber: *fiber, shots })
}

/// Normal coordinates on S2(1/2) around `center` with axes `(e1, e2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalChart {
    center: Vec3,
    e1: Vec3,
    e2: Vec3,
}

impl LocalChart {
    /// Chart at a unit direction with the Hopf chart axes of its fiber.
    pub fn at(n: &Vec3) -> Self {
        let center = n / n.norm();
        let (e1, e2) = HopfFiber::over(&center).chart_axes();
        Self { center, e1, e2 }
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn axes(&self) -> (Vec3, Vec3) {
        (self.e1, self.e2)
    }

    fn direction(&self, xy: [f64; 2]) -> Vec3 {
        self.e1 * xy[0] + self.e2 * xy[1]
    }

    /// Unit direction of the point at chart coordinates `xy`.
    pub fn point(&self, xy: [f64; 2]) -> Vec3 {
        let d = self.direction(xy);
        let r = d.norm();
        if r == 0.0 {
            return self.center;
        }
        let angle = r / SLICE_RADIUS;
        (self.center * angle.cos() + d * (angle.sin() / r)).normalize()
    }

    pub fn coords(&self, n: &Vec3) -> [f64; 2] {
        let n = n / n.norm();
        let c = self.center.dot(&n);
        let w = n - self.center * c;
        let s = w.norm();
        if s < 1e-300 {
            return [0.0, 0.0];
        }
        let r = SLICE_RADIUS * s.atan2(c);
        [r * w.dot(&self.e1) / s, r * w.dot(&self.e2) / s]
    }

    /// Chart re-centered at `point(xy)` with parallel-transported axes.
    pub fn moved(&self, xy: [f64; 2]) -> Self {
        let to = self.point(xy);
        let (a, b) = (
            S2Point::new(self.center, 1.0).expect("unit center"),
            S2Point::new(to, 1.0).expect("unit point"),
        );
        let e1 = transport_s2(&a, &b, &self.e1);
        let e1 = (e1 - to * to.dot(&e1)).normalize();
        let e2 = to.cross(&e1);
        // Keep the handedness of the original axes.
        let e2 = if e2.dot(&transport_s2(&a, &b, &self.e2)) < 0.0 { -e2 } else { e2 };
        Self { center: to, e1, e2 }
    }

    fn local(&self, v: &Vec3) -> Vector2<f64> {
        Vector2::new(v.dot(&self.e1), v.dot(&self.e2))
    }
}

fn evaluate(n: &Vec3, target: &TargetCurve, opts: &SolverOptions) -> Result<ShootingField> {
    shooting_field(&HopfFiber::over(n), target, opts.n_t, opts.run_bound)
}

/// Energy data of the candidate fiber at one chart location.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRecord {
    /// Chart coordinates of the location.
    pub location: [f64; 2],
    /// Unit direction of the location.
    pub point: Vec3,
    pub energy: f64,
    /// `vbar` in the chart axes transported to the location.
    pub vbar: [f64; 2],
    /// Finite-difference Hessian of `E` in normal coordinates at the location.
    pub hessian: Option<Matrix2<f64>>,
}

impl EnergyRecord {
    pub fn vbar_norm(&self) -> f64 {
        self.vbar[0].hypot(self.vbar[1])
    }

    pub fn hessian_eigenvalues(&self) -> Option<[f64; 2]> {
        self.hessian.map(|h| sorted_eigenvalues(&h))
    }
}

fn sorted_eigenvalues(h: &Matrix2<f64>) -> [f64; 2] {
    let sym = (h + h.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym).eigenvalues;
    [e[0].min(e[1]), e[0].max(e[1])]
}

/// Energy, `vbar` and optionally the Hessian at chart coordinates `xy`.
pub fn energy(
    chart: &LocalChart,
    xy: [f64; 2],
    target: &TargetCurve,
    opts: &SolverOptions,
    with_hessian: bool,
) -> Result<EnergyRecord> {
    let local = chart.moved(xy);
    let sf = evaluate(&local.center, target, opts)?;
    let v = local.local(&sf.vbar());
    let hessian = if with_hessian {
        Some(energy_hessian(&local, target, opts)?)
    } else {
        None
    };
    Ok(EnergyRecord {
        location: xy,
        point: local.center,
        energy: sf.energy(),
        vbar: [v.x, v.y],
        hessian,
    })
}

fn energy_at(chart: &LocalChart, xy: [f64; 2], target: &TargetCurve, opts: &SolverOptions) -> Result<f64> {
    Ok(evaluate(&chart.point(xy), target, opts)?.energy())
}

/// Central-difference Hessian of `E` at the chart center.
pub fn energy_hessian(chart: &LocalChart, target: &TargetCurve, opts: &SolverOptions) -> Result<Matrix2<f64>> {
    let h = opts.hessian_step;
    let e = |x: f64, y: f64| energy_at(chart, [x, y], target, opts);
    let e0 = e(0.0, 0.0)?;
    let hxx = (e(h, 0.0)? - 2.0 * e0 + e(-h, 0.0)?) / (h * h);
    let hyy = (e(0.0, h)? - 2.0 * e0 + e(0.0, -h)?) / (h * h);
    let hxy = (e(h, h)? - e(h, -h)? - e(-h, h)? + e(-h, -h)?) / (4.0 * h * h);
    Ok(Matrix2::new(hxx, hxy, hxy, hyy))
}

/// Central-difference gradient of `E` at the chart center.
pub fn energy_gradient(chart: &LocalChart, target: &TargetCurve, opts: &SolverOptions, h: f64) -> Result<[f64; 2]> {
    let e = |x: f64, y: f64| energy_at(chart, [x, y], target, opts);
    Ok([(e(h, 0.0)? - e(-h, 0.0)?) / (2.0 * h), (e(0.0, h)? - e(0.0, -h)?) / (2.0 * h)])
}

/// `|∇E + vbar| / |vbar|` at the center of `chart`.
pub fn gradient_check(chart: &LocalChart, target: &TargetCurve, opts: &SolverOptions) -> Result<f64> {
    let sf = evaluate(&chart.center, target, opts)?;
    let v = chart.local(&sf.vbar());
    let g = energy_gradient(chart, target, opts, 1e-5)?;
    Ok((Vector2::new(g[0], g[1]) + v).norm() / v.norm())
}

/// Jacobian of `vbar` in transported axes, i.e. minus the Hessian of `E`.
fn vbar_jacobian(chart: &LocalChart, target: &TargetCurve, opts: &SolverOptions) -> Result<Matrix2<f64>> {
    let h = opts.jacobian_step;
    let vb = |xy: [f64; 2]| -> Result<Vector2<f64>> {
        let local = chart.moved(xy);
        Ok(local.local(&evaluate(&local.center, target, opts)?.vbar()))
    };
    let dx = (vb([h, 0.0])? - vb([-h, 0.0])?) / (2.0 * h);
    let dy = (vb([0.0, h])? - vb([0.0, -h])?) / (2.0 * h);
    Ok(Matrix2::from_columns(&[dx, dy]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub point: Vec3,
    pub energy: f64,
    pub vbar_norm: f64,
    pub step_norm: f64,
    /// Eigenvalues of the Newton matrix; absent for the identity-seeded step.
    pub eigenvalues: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceResult {
    pub source: Vec3,
    /// Unit direction of the minimizing fiber.
    pub winner: Vec3,
    pub winner_fiber: HopfFiber,
    /// Shooting field along the winning fiber: the balanced field.
    pub balanced_field: Vec<FrameCoeffs>,
    /// `exp` of the balanced field at the winner's samples.
    pub f_bal: Vec<S3Point>,
    pub energy: f64,
    pub vbar_norm: f64,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    /// Eigenvalues of the finite-difference Hessian of `E` at the winner.
    pub hessian_eigenvalues: [f64; 2],
    pub moments: FiberMoments,
}

impl SliceResult {
    /// Winner in the source chart.
    pub fn winner_coords(&self) -> [f64; 2] {
        LocalChart::at(&self.source).coords(&self.winner)
    }
}

/// A failed solve with the iterations completed before the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceFailure {
    pub error: GeomError,
    pub trace: Vec<IterationRecord>,
}

/// Newton iteration for the balanced candidate fiber, starting at `start`
/// or at the source.
pub fn minimize(source: &Vec3, target: &TargetCurve, opts: &SolverOptions, start: Option<&Vec3>) -> Result<SliceResult> {
    minimize_traced(source, target, opts, start).map_err(|f| f.error)
}

/// [`minimize`], keeping the iteration trace on failure.
pub fn minimize_traced(
    source: &Vec3,
    target: &TargetCurve,
    opts: &SolverOptions,
    start: Option<&Vec3>,
) -> std::result::Result<SliceResult, SliceFailure> {
    let mut trace = Vec::new();
    match newton(source, target, opts, start, &mut trace) {
        Ok(r) => Ok(r),
        Err(error) => Err(SliceFailure { error, trace }),
    }
}

fn newton(
    source: &Vec3,
    target: &TargetCurve,
    opts: &SolverOptions,
    start: Option<&Vec3>,
    trace: &mut Vec<IterationRecord>,
) -> Result<SliceResult> {
    target.check_vertical(opts.verticality_bound)?;
    let source = source / source.norm();
    let mut chart = LocalChart::at(start.unwrap_or(&source));
    for iteration in 0..=opts.max_iterations {
        let sf = evaluate(&chart.center, target, opts)?;
        let vbar = chart.local(&sf.vbar());
        let mut record = IterationRecord {
            iteration,
            point: chart.center,
            energy: sf.energy(),
            vbar_norm: vbar.norm(),
            step_norm: 0.0,
            eigenvalues: None,
        };
        if vbar.norm() < opts.tolerance {
            trace.push(record);
            let hessian = energy_hessian(&chart, target, opts)?;
            return Ok(SliceResult {
                source,
                winner: chart.center,
                winner_fiber: sf.fiber,
                balanced_field: sf.coeffs(),
                f_bal: sf.images(),
                energy: sf.energy(),
                vbar_norm: vbar.norm(),
                iterations: iteration,
                trace: std::mem::take(trace),
                hessian_eigenvalues: sorted_eigenvalues(&hessian),
                moments: sf.moments(),
            });
        }
        if iteration == opts.max_iterations {
            trace.push(record);
            break;
        }
        let matrix = if iteration == 0 {
            Matrix2::identity()
        } else {
            let m = -vbar_jacobian(&chart, target, opts)?;
            let m = (m + m.transpose()) * 0.5;
            let eig = sorted_eigenvalues(&m);
            record.eigenvalues = Some(eig);
            if eig[0] <= 0.0 {
                trace.push(record);
                return Err(GeomError::IndefiniteHessian {
                    iteration,
                    min: eig[0],
                    max: eig[1],
                });
            }
            m
        };
        let mut step = matrix.lu().solve(&vbar).ok_or(GeomError::IndefiniteHessian {
            iteration,
            min: 0.0,
            max: 0.0,
        })?;
        if step.norm() > opts.max_step {
            step *= opts.max_step / step.norm();
        }
        record.step_norm = step.norm();
        trace.push(record);
        chart = chart.moved([step.x, step.y]);
    }
    Err(GeomError::NonConvergence {
        iterations: opts.max_iterations,
        residual: trace.last().map_or(f64::NAN, |r| r.vbar_norm),
    })
}

/// Slice for the image of the fiber over `source` under `d`.
pub fn minimize_diffeo(d: &dyn Diffeo, source: &Vec3, opts: &SolverOptions) -> Result<SliceResult> {
    let target = TargetCurve::image_of(d, &HopfFiber::over(source), opts.n_t)?;
    minimize(source, &target, opts, None)
}

/// Discrete Hausdorff distance between the image curve `f_images` of a
/// fiber and the slice result's image curve.
pub fn coset_check(f_images: &[S3Point], result: &SliceResult) -> Result<f64> {
    let f_curve = TargetCurve::new(f_images.to_vec())?;
    let bal_curve = TargetCurve::new(result.f_bal.clone())?;
    let a = result.f_bal.iter().map(|y| f_curve.distance_to(*y)).fold(0.0, f64::max);
    let b = f_images.iter().map(|y| bal_curve.distance_to(*y)).fold(0.0, f64::max);
    Ok(a.max(b))
}

/// Landscape row: chart location, energy and `vbar` in the chart axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandscapeSample {
    pub x: f64,
    pub y: f64,
    pub energy: f64,
    pub vbar: [f64; 2],
}

/// `E` and `vbar` over an `n × n` grid covering `[-half_width, half_width]²`
/// in the chart around `source`.
pub fn landscape(
    source: &Vec3,
    target: &TargetCurve,
    opts: &SolverOptions,
    n: usize,
    half_width: f64,
) -> Result<Vec<LandscapeSample>> {
    let chart = LocalChart::at(source);
    let coord = |k: usize| {
        if n == 1 {
            0.0
        } else {
            -half_width + 2.0 * half_width * k as f64 / (n - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(n * n);
    for iy in 0..n {
        for ix in 0..n {
            let xy = [coord(ix), coord(iy)];
            let r = energy(&chart, xy, target, opts, false)?;
            out.push(LandscapeSample {
                x: xy[0],
                y: xy[1],
                energy: r.energy,
                vbar: r.vbar,
            });
        }
    }
    Ok(out)
}

/// Winners over an `n × n` grid of sources around `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceTable {
    pub spacing: f64,
    pub sources: Vec<Vec3>,
    pub winners: Vec<Result<Vec3>>,
}

pub fn smooth_dependence_probe(
    d: &dyn Diffeo,
    center: &Vec3,
    n: usize,
    spacing: f64,
    opts: &SolverOptions,
) -> DependenceTable {
    let chart = LocalChart::at(center);
    let off = (n as f64 - 1.0) / 2.0;
    let mut sources = Vec::with_capacity(n * n);
    for iy in 0..n {
        for ix in 0..n {
            sources.push(chart.point([(ix as f64 - off) * spacing, (iy as f64 - off) * spacing]));
        }
    }
    let winners = sources.iter().map(|s| minimize_diffeo(d, s, opts).map(|r| r.winner)).collect();
    DependenceTable {
        spacing,
        sources,
        winners,
    }
}

/// Central-difference derivative of the winner map at `center`, in the
/// source chart and the chart at the winner.
pub fn winner_jacobian(d: &dyn Diffeo, center: &Vec3, h: f64, opts: &SolverOptions) -> Result<Matrix2<f64>> {
    let src = LocalChart::at(center);
    let w0 = minimize_diffeo(d, center, opts)?.winner;
    let out = LocalChart::at(&w0);
    let w = |xy: [f64; 2]| -> Result<Vector2<f64>> {
        let c = out.coords(&minimize_diffeo(d, &src.point(xy), opts)?.winner);
        Ok(Vector2::new(c[0], c[1]))
    };
    let dx = (w([h, 0.0])? - w([-h, 0.0])?) / (2.0 * h);
    let dy = (w([0.0, h])? - w([0.0, -h])?) / (2.0 * h);
    Ok(Matrix2::from_columns(&[dx, dy]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::{CircleAction, FieldExp, Identity, U2Motion};
    use crate::quat::hopf_project;
    use crate::sphere::{exp_s3, fiber_distance};
    use crate::synth::{random_balanced, random_projectable, SmoothField};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(rng: &mut impl Rng) -> Vec3 {
        loop {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm() > 0.2 && v.norm() < 1.0 {
                return v.normalize();
            }
        }
    }

    fn vertical_target(n: &Vec3) -> TargetCurve {
        TargetCurve::hopf_fiber(&HopfFiber::over(n), 64).unwrap()
    }

    #[test]
    fn target_curve_interpolates_fibers_exactly() {
        let fiber = HopfFiber::over(&Vec3::new(0.2, 0.5, -0.8));
        let curve = vertical_target(&Vec3::new(0.2, 0.5, -0.8));
        for k in 0..50 {
            let t = 0.1 + 0.37 * k as f64;
            let (c, dc) = curve.eval(t);
            assert!(c.distance(fiber.point(t)) < 1e-13);
            assert!((dc - fiber.tangent(t).ambient()).norm() < 1e-12);
        }
        assert!(curve.verticality() < 1e-6);
    }

    #[test]
    fn shot_matches_fiber_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let n = unit(&mut rng);
            let target = vertical_target(&n);
            let chart = LocalChart::at(&n);
            let m = chart.point([rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)]);
            let p = HopfFiber::over(&m).point(rng.random_range(0.0..TAU));
            let shot = shoot(p, &target, None, FRAC_PI_4).unwrap();
            assert_abs_diff_eq!(shot.v.norm(), fiber_distance(p, target.point(0.0)), epsilon = 1e-9);
            assert!(shot.v.frame_coeffs().f.abs() < 1e-10);
            assert!(target.distance_to(shot.landing()) < 1e-9);
        }
        let p = HopfFiber::over(&Vec3::new(0.0, 0.0, 1.0)).point(0.4);
        let shot = shoot(p, &vertical_target(&Vec3::new(0.0, 0.0, 1.0)), None, FRAC_PI_4).unwrap();
        assert!(shot.v.norm() < 1e-12);
    }

    #[test]
    fn shooting_field_on_fiber_is_equidistant_and_winds() {
        let n = Vec3::new(0.3, -0.2, 0.9).normalize();
        let target = vertical_target(&n);
        let src = LocalChart::at(&n).point([0.15, -0.1]);
        let sf = shooting_field(&HopfFiber::over(&src), &target, 64, FRAC_PI_4).unwrap();
        let d = sf.shots[0].v.norm();
        // Brute-force distance between the two fibers.
        let a = HopfFiber::over(&src).samples(400);
        let b = target.samples().to_vec();
        let brute = a
            .iter()
            .flat_map(|x| b.iter().map(move |y| x.distance(*y)))
            .fold(f64::INFINITY, f64::min);
        assert!((d - brute).abs() < 1e-3);
        for s in &sf.shots {
            assert_abs_diff_eq!(s.v.norm(), d, epsilon = 1e-9);
            assert!(target.distance_to(s.landing()) < 1e-9);
        }
        assert_abs_diff_eq!(sf.tau_winding(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sf.direction_winding(), -2.0, epsilon = 1e-9);
    }

    #[test]
    fn vertical_target_energy_and_restoring_vbar() {
        let n = Vec3::new(-0.4, 0.7, 0.2).normalize();
        let target = vertical_target(&n);
        let chart = LocalChart::at(&n);
        let opts = SolverOptions::default();
        let r0 = energy(&chart, [0.0, 0.0], &target, &opts, false).unwrap();
        assert!(r0.energy < 1e-28 && r0.vbar_norm() < 1e-14);
        let dir = [0.6, 0.8];
        let mut ratios = Vec::new();
        for s in [0.02, 0.05, 0.1, 0.15] {
            let r = energy(&chart, [s * dir[0], s * dir[1]], &target, &opts, false).unwrap();
            assert_abs_diff_eq!(r.energy, 0.5 * s * s, epsilon = 1e-12);
            // vbar points back toward the source.
            let along = r.vbar[0] * dir[0] + r.vbar[1] * dir[1];
            assert_abs_diff_eq!(along, -s, epsilon = 1e-10);
            ratios.push(r.energy / (s * s));
        }
        assert!(ratios.iter().all(|r| (r - 0.5).abs() < 1e-9));
    }

    #[test]
    fn gradient_is_minus_vbar_for_vertical_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let opts = SolverOptions::default();
        for _ in 0..10 {
            let n = unit(&mut rng);
            let target = vertical_target(&n);
            let at = LocalChart::at(&n).point([rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)]);
            let err = gradient_check(&LocalChart::at(&at), &target, &opts).unwrap();
            assert!(err < 1e-4, "{err}");
        }
    }

    #[test]
    fn hessian_window_for_vertical_targets() {
        let opts = SolverOptions::default();
        let n = Vec3::new(0.1, 0.9, -0.3).normalize();
        let target = vertical_target(&n);
        let chart = LocalChart::at(&n);
        for d in [0.05, 0.1, 0.2] {
            let r = energy(&chart, [d, 0.0], &target, &opts, true).unwrap();
            let [lo, hi] = r.hessian_eigenvalues().unwrap();
            // Radial 1, tangential 2d cot 2d on S2(1/2).
            assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-5);
            assert_abs_diff_eq!(lo, 2.0 * d / (2.0 * d).tan(), epsilon = 1e-5);
            assert!(lo >= 0.9 && hi <= 1.7);
        }
    }

    #[test]
    fn identity_slice_is_trivial() {
        let opts = SolverOptions::default();
        let n = Vec3::new(0.3, 0.3, 0.9).normalize();
        let r = minimize_diffeo(&Identity, &n, &opts).unwrap();
        assert_eq!(r.iterations, 0);
        assert!((r.winner - n).norm() < 1e-14);
        assert!(r.energy < 1e-28);
        assert!(r.balanced_field.iter().all(|c| c.norm() < 1e-13));
        let target = TargetCurve::image_of(&Identity, &HopfFiber::over(&n), 64).unwrap();
        assert!(coset_check(target.samples(), &r).unwrap() < 1e-12);
    }

    #[test]
    fn minimize_converges_quadratically() {
        let opts = SolverOptions::default();
        let n = Vec3::new(0.5, -0.5, 0.7).normalize();
        let target = vertical_target(&LocalChart::at(&n).point([0.12, 0.07]));
        let r = minimize(&n, &target, &opts, None).unwrap();
        assert!(r.vbar_norm < 1e-10);
        assert!(r.energy < 1e-20);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bal = random_balanced(&mut rng, 1.0);
        let proj = random_projectable(&mut rng, 1.0);
        let field = move |x: S3Point| bal.coeffs_at(x).scale(0.05) + proj.coeffs_at(x).horizontal().scale(0.1);
        let d = FieldExp { field, scale: 1.0 };
        let target = TargetCurve::image_of(&d, &HopfFiber::over(&n), 64).unwrap();
        let start = LocalChart::at(&n).point([0.25, -0.1]);
        let r = minimize(&n, &target, &opts, Some(&start)).unwrap();
        let res: Vec<f64> = r.trace.iter().map(|t| t.vbar_norm).collect();
        assert!(res.len() >= 4, "{res:?}");
        let k = res.len() - 1;
        for j in [k - 1, k] {
            assert!(res[j] <= 10.0 * res[j - 1].powi(2) + 1e-15, "{res:?}");
        }
        for rec in &r.trace {
            if let Some([lo, _]) = rec.eigenvalues {
                assert!(lo > 0.0);
            }
        }
        assert!(r.hessian_eigenvalues[0] > 0.0);
    }

    #[test]
    fn balanced_field_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let opts = SolverOptions::default();
        for _ in 0..3 {
            let bal = random_balanced(&mut rng, 1.0);
            let n = unit(&mut rng);
            let fiber = HopfFiber::over(&n);
            let sup = fiber.samples(64).into_iter().map(|x| bal.coeffs_at(x).norm()).fold(0.0, f64::max);
            let d = FieldExp {
                field: bal,
                scale: 0.1 / sup,
            };
            let r = minimize_diffeo(&d, &n, &opts).unwrap();
            assert!((r.winner - n).norm() < 1e-9);
            for (x, c) in fiber.samples(64).into_iter().zip(&r.balanced_field) {
                let v0 = d.field.coeffs_at(x).scale(d.scale);
                assert!((v0 - *c).norm() < 1e-6);
            }
            assert!(r.moments.vbar_norm() < 1e-8);
        }
    }

    #[test]
    fn projectable_motion_moves_winner() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let opts = SolverOptions::default();
        for _ in 0..3 {
            let mut p = random_projectable(&mut rng, 1.0);
            p.vertical = crate::synth::Polynomial::zero();
            let n = unit(&mut rng);
            let base = p.base_field(&n);
            let scale = 0.15 / base.norm().max(1e-3);
            let expected = {
                let u = base * scale;
                let a = u.norm();
                (n * a.cos() + u * (a.sin() / a)).normalize()
            };
            let d = FieldExp { field: p, scale };
            let r = minimize_diffeo(&d, &n, &opts).unwrap();
            assert!((r.winner - expected).norm() < 1e-8, "{}", (r.winner - expected).norm());
            assert!(r.balanced_field.iter().all(|c| c.norm() < 1e-8));
        }
    }

    #[test]
    fn u2_rotation_moves_winner_rigidly() {
        let opts = SolverOptions::default();
        let m = U2Motion::from_axis_angle(&Vec3::new(1.0, 2.0, -0.5), 0.2, 0.4);
        let n = Vec3::new(0.0, 0.6, 0.8);
        let r = minimize_diffeo(&m, &n, &opts).unwrap();
        assert!((r.winner - m.base_rotation(&n)).norm() < 1e-9);
        let c = minimize_diffeo(&CircleAction(0.5), &n, &opts).unwrap();
        assert!((c.winner - n).norm() < 1e-12);
        assert_abs_diff_eq!(hopf_project(r.f_bal[0], 1.0).unit().dot(&r.winner), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn multistart_agrees_and_coset_separates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let opts = SolverOptions::default();
        let bal = random_balanced(&mut rng, 1.0);
        let proj = random_projectable(&mut rng, 1.0);
        let n = Vec3::new(0.4, 0.1, -0.9).normalize();
        let field = move |x: S3Point| bal.coeffs_at(x).scale(0.04) + proj.coeffs_at(x).horizontal().scale(0.08);
        let d = FieldExp { field, scale: 1.0 };
        let target = TargetCurve::image_of(&d, &HopfFiber::over(&n), 64).unwrap();
        let r = minimize(&n, &target, &opts, None).unwrap();
        let chart = LocalChart::at(&n);
        for k in 0..8 {
            let a = TAU * k as f64 / 8.0;
            let start = chart.point([0.1 * a.cos(), 0.1 * a.sin()]);
            let other = minimize(&n, &target, &opts, Some(&start)).unwrap();
            assert!((other.winner - r.winner).norm() < 1e-8);
        }
        assert!(coset_check(target.samples(), &r).unwrap() < 1e-6);

        let far = vertical_target(&chart.point([0.2, 0.0]));
        let r_far = minimize(&n, &far, &opts, None).unwrap();
        let sep = coset_check(target.samples(), &r_far).unwrap();
        assert!(sep > 0.05, "{sep}");
    }

    #[test]
    fn shots_from_exp_images_land_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let bal = random_balanced(&mut rng, 1.0);
        let fiber = HopfFiber::over(&Vec3::new(0.0, 0.0, 1.0));
        let images: Vec<S3Point> = fiber
            .samples(64)
            .into_iter()
            .map(|x| exp_s3(&TangentS3::from_frame(x, bal.coeffs_at(x).scale(0.05))).unwrap())
            .collect();
        let target = TargetCurve::new(images.clone()).unwrap();
        let sf = shooting_field(&fiber, &target, 64, FRAC_PI_4).unwrap();
        for (k, s) in sf.shots.iter().enumerate() {
            let d = s.tau - TAU * k as f64 / 64.0;
            assert!(((d + PI).rem_euclid(TAU) - PI).abs() < 1e-9);
            assert!(s.landing().distance(images[k]) < 1e-9);
        }
    }

    #[test]
    fn chart_round_trip() {
        let chart = LocalChart::at(&Vec3::new(0.2, -0.3, 0.9));
        for xy in [[0.1, 0.2], [-0.3, 0.05], [0.0, 0.0]] {
            let c = chart.coords(&chart.point(xy));
            assert_abs_diff_eq!(c[0], xy[0], epsilon = 1e-13);
            assert_abs_diff_eq!(c[1], xy[1], epsilon = 1e-13);
            let m = chart.moved(xy);
            assert!(m.e1.dot(&m.e2).abs() < 1e-13);
            assert!((m.e1.cross(&m.e2) - m.center).norm() < 1e-12);
        }
    }

    #[test]
    fn smooth_dependence_refines() {
        let opts = SolverOptions {
            n_t: 32,
            ..SolverOptions::default()
        };
        let n = Vec3::new(0.3, 0.5, 0.8).normalize();
        let table = smooth_dependence_probe(&Identity, &n, 3, 0.05, &opts);
        for (s, w) in table.sources.iter().zip(&table.winners) {
            assert!((w.as_ref().unwrap() - s).norm() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_projectable(&mut rng, 1.0);
        let field = move |x: S3Point| p.coeffs_at(x).horizontal().scale(0.1);
        let d = FieldExp { field, scale: 1.0 };
        let j1 = winner_jacobian(&d, &n, 0.02, &opts).unwrap();
        let j2 = winner_jacobian(&d, &n, 0.01, &opts).unwrap();
        assert!((j1 - j2).norm() / j2.norm() < 0.1);
    }
}
