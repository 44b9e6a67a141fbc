//! Vector fields on S3 sampled along Hopf fibers, and the splitting into
//! projectable and balanced parts.
//!
//! A field is stored per fiber: fiber `i` of the base grid carries samples
//! at `F_i(t_k) = q_i · e^{i t_k}`, `t_k = 2πk/n_t`, as frame coefficients
//! `(f, g, h)`. All fiber integrals are trapezoidal, which is spectrally
//! accurate for periodic data.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use crate::error::{GeomError, Result};
use crate::quat::{FrameCoeffs, HopfFiber, Quaternion, S3Point, TangentS3, Vec3};
use crate::spectral::{SpectralPlan, MIN_SAMPLES};

/// Labels of the fibers a field is sampled on.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseGrid {
    kind: GridKind,
    fibers: Vec<HopfFiber>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// Equal-weight Fibonacci lattice; rebuilt from its size alone.
    Fibonacci,
    /// Arbitrary base points with canonical fiber basepoints.
    Explicit,
}

impl BaseGrid {
    /// Fibonacci lattice of `n` points in the imaginary span `(i, j, k)`.
    pub fn fibonacci(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(GeomError::GridTooSmall { n, min: 1 });
        }
        let golden = PI * (3.0 - 5f64.sqrt());
        let fibers = (0..n)
            .map(|k| {
                let z = 1.0 - (2 * k + 1) as f64 / n as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = golden * k as f64;
                HopfFiber::over(&Vec3::new(r * phi.cos(), r * phi.sin(), z))
            })
            .collect();
        Ok(Self {
            kind: GridKind::Fibonacci,
            fibers,
        })
    }

    /// Grid over the given unit directions, each with its canonical basepoint.
    pub fn from_points(points: &[Vec3]) -> Result<Self> {
        if points.is_empty() {
            return Err(GeomError::GridTooSmall { n: 0, min: 1 });
        }
        Ok(Self {
            kind: GridKind::Explicit,
            fibers: points.iter().map(HopfFiber::over).collect(),
        })
    }

    /// Grid over explicitly chosen fibers.
    pub fn from_fibers(fibers: Vec<HopfFiber>) -> Self {
        Self {
            kind: GridKind::Explicit,
            fibers,
        }
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.fibers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fibers.is_empty()
    }

    pub fn fiber(&self, i: usize) -> &HopfFiber {
        &self.fibers[i]
    }

    pub fn fibers(&self) -> &[HopfFiber] {
        &self.fibers
    }

    /// Unit base direction of fiber `i`.
    pub fn point(&self, i: usize) -> Vec3 {
        self.fibers[i].project(1.0).unit()
    }

    /// Quadrature weight of one sample: `vol(S3) / (N n_t)`, i.e. the area of
    /// S2(1/2) per fiber times the fiber length per sample.
    pub fn sample_weight(&self, n_t: usize) -> f64 {
        (PI / self.len() as f64) * (TAU / n_t as f64)
    }

    /// Index of the grid fiber whose base point is nearest to `n`.
    pub fn nearest(&self, n: &Vec3) -> usize {
        let n = n / n.norm();
        (0..self.len())
            .max_by(|&a, &b| self.point(a).dot(&n).total_cmp(&self.point(b).dot(&n)))
            .expect("grid is nonempty")
    }
}

/// A vector field sampled on a fiber-adapted grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: Arc<BaseGrid>,
    n_t: usize,
    radius: f64,
    coeffs: Vec<FrameCoeffs>,
}

impl SampledField {
    pub fn new(grid: Arc<BaseGrid>, n_t: usize, radius: f64, coeffs: Vec<FrameCoeffs>) -> Result<Self> {
        if n_t < MIN_SAMPLES {
            return Err(GeomError::GridTooSmall { n: n_t, min: MIN_SAMPLES });
        }
        if coeffs.len() != grid.len() * n_t {
            return Err(GeomError::GridMismatch);
        }
        if !coeffs.iter().all(|c| c.is_finite()) {
            return Err(GeomError::NotFinite("field coefficients"));
        }
        if radius.is_nan() || radius <= 0.0 {
            return Err(GeomError::Config(format!("radius {radius} must be positive")));
        }
        Ok(Self {
            grid,
            n_t,
            radius,
            coeffs,
        })
    }

    /// Samples a field given pointwise in frame coefficients.
    pub fn from_fn(
        grid: Arc<BaseGrid>,
        n_t: usize,
        radius: f64,
        field: impl Fn(S3Point) -> FrameCoeffs,
    ) -> Result<Self> {
        let coeffs = grid
            .fibers()
            .iter()
            .flat_map(|fiber| {
                (0..n_t).map(|k| field(fiber.point(TAU * k as f64 / n_t as f64))).collect::<Vec<_>>()
            })
            .collect();
        Self::new(grid, n_t, radius, coeffs)
    }

    pub fn zeros(grid: Arc<BaseGrid>, n_t: usize, radius: f64) -> Result<Self> {
        let len = grid.len() * n_t;
        Self::new(grid, n_t, radius, vec![FrameCoeffs::ZERO; len])
    }

    /// The left-invariant field with constant coefficients.
    pub fn constant(grid: Arc<BaseGrid>, n_t: usize, radius: f64, c: FrameCoeffs) -> Result<Self> {
        let len = grid.len() * n_t;
        Self::new(grid, n_t, radius, vec![c; len])
    }

    pub fn grid(&self) -> &Arc<BaseGrid> {
        &self.grid
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn num_fibers(&self) -> usize {
        self.grid.len()
    }

    pub fn coeffs(&self) -> &[FrameCoeffs] {
        &self.coeffs
    }

    pub fn fiber(&self, i: usize) -> &[FrameCoeffs] {
        &self.coeffs[i * self.n_t..(i + 1) * self.n_t]
    }

    pub fn t(&self, k: usize) -> f64 {
        TAU * k as f64 / self.n_t as f64
    }

    pub fn point(&self, i: usize, k: usize) -> S3Point {
        self.grid.fiber(i).point(self.t(k))
    }

    pub fn tangent(&self, i: usize, k: usize) -> TangentS3 {
        TangentS3::from_frame(self.point(i, k), self.fiber(i)[k])
    }

    /// Same grid and sample layout, new coefficients.
    pub fn with_coeffs(&self, coeffs: Vec<FrameCoeffs>) -> Result<Self> {
        Self::new(self.grid.clone(), self.n_t, self.radius, coeffs)
    }

    pub fn same_grid(&self, o: &SampledField) -> bool {
        self.n_t == o.n_t && (Arc::ptr_eq(&self.grid, &o.grid) || self.grid == o.grid)
    }

    fn check_grid(&self, o: &SampledField) -> Result<()> {
        if self.same_grid(o) {
            Ok(())
        } else {
            Err(GeomError::GridMismatch)
        }
    }

    pub fn add(&self, o: &SampledField) -> Result<Self> {
        self.check_grid(o)?;
        self.with_coeffs(self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| *a + *b).collect())
    }

    pub fn sub(&self, o: &SampledField) -> Result<Self> {
        self.check_grid(o)?;
        self.with_coeffs(self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| *a - *b).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c.scale(s)).collect(),
            ..self.clone()
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest coefficient difference to another field on the same grid.
    pub fn sup_distance(&self, o: &SampledField) -> Result<f64> {
        self.check_grid(o)?;
        Ok(self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| (*a - *b).norm()).fold(0.0, f64::max))
    }

    pub fn moments(&self, i: usize) -> FiberMoments {
        fiber_moments(self.fiber(i), self.radius).expect("field grids hold at least four samples")
    }

    fn map_fibers(&self, mut op: impl FnMut(&[FrameCoeffs]) -> Vec<FrameCoeffs>) -> Self {
        let coeffs = (0..self.num_fibers()).flat_map(|i| op(self.fiber(i))).collect();
        Self {
            coeffs,
            ..self.clone()
        }
    }
}

/// Per-fiber integrals of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberMoments {
    /// `∫ (g cos 2t - h sin 2t) dt`.
    pub alpha: f64,
    /// `∫ (g sin 2t + h cos 2t) dt`.
    pub beta: f64,
    /// `(1/2π) ∫ f dt`.
    pub mean_f: f64,
    /// Average pushforward of the horizontal part, in the fiber's chart axes.
    pub vbar: [f64; 2],
    /// `(1/2π) ∫ ½‖V‖² dt`.
    pub energy: f64,
}

impl FiberMoments {
    pub fn vbar_norm(&self) -> f64 {
        self.vbar[0].hypot(self.vbar[1])
    }

    /// `vbar` as a tangent vector in R3 at the fiber's base point.
    pub fn vbar_ambient(&self, fiber: &HopfFiber) -> Vec3 {
        let (ex, ey) = fiber.chart_axes();
        ex * self.vbar[0] + ey * self.vbar[1]
    }
}

/// Moments of one fiber's samples at `t_k = 2πk/n`.
///
/// `(alpha, beta)` depend on the fiber's basepoint: moving it by `a` along the
/// fiber rotates them through `2a`. `‖vbar‖` and `energy` do not.
pub fn fiber_moments(samples: &[FrameCoeffs], radius: f64) -> Result<FiberMoments> {
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(GeomError::GridTooSmall { n, min: MIN_SAMPLES });
    }
    let dt = TAU / n as f64;
    let (mut alpha, mut beta, mut mean_f, mut energy) = (0.0, 0.0, 0.0, 0.0);
    for (k, c) in samples.iter().enumerate() {
        let (s2, c2) = (2.0 * dt * k as f64).sin_cos();
        alpha += c.g * c2 - c.h * s2;
        beta += c.g * s2 + c.h * c2;
        mean_f += c.f;
        energy += 0.5 * c.norm().powi(2);
    }
    alpha *= dt;
    beta *= dt;
    // p_*(gB + hC) = 2R (g cos 2t - h sin 2t, g sin 2t + h cos 2t) in the chart.
    let scale = 2.0 * radius / TAU;
    Ok(FiberMoments {
        alpha,
        beta,
        mean_f: mean_f / n as f64,
        vbar: [alpha * scale, beta * scale],
        energy: energy / n as f64,
    })
}

/// `Y = cos 2t B - sin 2t C` and `Z = sin 2t B + cos 2t C` on the fiber grid.
fn pvf_basis(n: usize, k: usize) -> (FrameCoeffs, FrameCoeffs) {
    let (s2, c2) = (2.0 * TAU * k as f64 / n as f64).sin_cos();
    (FrameCoeffs::new(0.0, c2, -s2), FrameCoeffs::new(0.0, s2, c2))
}

fn pvf_fiber(samples: &[FrameCoeffs]) -> Vec<FrameCoeffs> {
    let n = samples.len();
    let m = fiber_moments(samples, 1.0).expect("validated grid");
    let (a, b) = (m.alpha / TAU, m.beta / TAU);
    samples
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let (y, z) = pvf_basis(n, k);
            FrameCoeffs::new(c.f, 0.0, 0.0) + y.scale(a) + z.scale(b)
        })
        .collect()
}

/// Projectable part `fA + (α/2π) Y + (β/2π) Z`, fiber by fiber.
pub fn project_pvf(x: &SampledField) -> SampledField {
    x.map_fibers(pvf_fiber)
}

/// Balanced part `X - project_pvf(X)`.
pub fn project_bvf(x: &SampledField) -> SampledField {
    x.map_fibers(|s| s.iter().zip(pvf_fiber(s)).map(|(c, p)| *c - p).collect())
}

/// Sup-norm residuals of the projectability conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectabilityReport {
    /// `sup |g + ½ A h|`.
    pub residual_g: f64,
    /// `sup |h - ½ A g|`.
    pub residual_h: f64,
    /// `λ = -A f`, the multiplier in `L_X A = λ A`, per sample.
    pub lambda: Vec<f64>,
}

impl ProjectabilityReport {
    pub fn residual(&self) -> f64 {
        self.residual_g.max(self.residual_h)
    }
}

fn fiber_derivatives(plan: &SpectralPlan, s: &[FrameCoeffs]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let col = |sel: fn(&FrameCoeffs) -> f64| plan.derivative(&s.iter().map(sel).collect::<Vec<_>>());
    (col(|c| c.f), col(|c| c.g), col(|c| c.h))
}

pub fn is_projectable(x: &SampledField) -> ProjectabilityReport {
    let plan = SpectralPlan::new(x.n_t()).expect("validated grid");
    let mut report = ProjectabilityReport {
        residual_g: 0.0,
        residual_h: 0.0,
        lambda: Vec::with_capacity(x.coeffs().len()),
    };
    for i in 0..x.num_fibers() {
        let s = x.fiber(i);
        let (af, ag, ah) = fiber_derivatives(&plan, s);
        for k in 0..s.len() {
            report.residual_g = report.residual_g.max((s[k].g + 0.5 * ah[k]).abs());
            report.residual_h = report.residual_h.max((s[k].h - 0.5 * ag[k]).abs());
            report.lambda.push(-af[k]);
        }
    }
    report
}

/// Residuals of the balance conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceReport {
    /// `sup |f|`: horizontality.
    pub max_vertical: f64,
    /// `sup` over fibers of `|(α, β)|`.
    pub max_moment: f64,
    /// `sup` over fibers of `‖vbar‖`.
    pub max_vbar: f64,
}

impl BalanceReport {
    pub fn residual(&self) -> f64 {
        self.max_vertical.max(self.max_moment)
    }
}

pub fn is_balanced(x: &SampledField) -> BalanceReport {
    let mut r = BalanceReport {
        max_vertical: 0.0,
        max_moment: 0.0,
        max_vbar: 0.0,
    };
    for i in 0..x.num_fibers() {
        let m = x.moments(i);
        r.max_moment = r.max_moment.max(m.alpha.hypot(m.beta));
        r.max_vbar = r.max_vbar.max(m.vbar_norm());
        r.max_vertical = x.fiber(i).iter().map(|c| c.f.abs()).fold(r.max_vertical, f64::max);
    }
    r
}

/// `L_X A` in frame coefficients, sample by sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LieDerivativeReport {
    /// `(-Af, 2h - Ag, -(2g + Ah))` per sample.
    pub components: Vec<FrameCoeffs>,
    /// `sup` of the `(B, C)` part, which vanishes exactly for projectable fields.
    pub residual: f64,
}

pub fn lie_derivative_check(x: &SampledField) -> LieDerivativeReport {
    let plan = SpectralPlan::new(x.n_t()).expect("validated grid");
    let mut components = Vec::with_capacity(x.coeffs().len());
    let mut residual: f64 = 0.0;
    for i in 0..x.num_fibers() {
        let s = x.fiber(i);
        let (af, ag, ah) = fiber_derivatives(&plan, s);
        for k in 0..s.len() {
            let c = FrameCoeffs::new(-af[k], 2.0 * s[k].h - ag[k], -(2.0 * s[k].g + ah[k]));
            residual = residual.max(c.g.hypot(c.h));
            components.push(c);
        }
    }
    LieDerivativeReport { components, residual }
}

/// `⟨X, Y⟩ = ∫_{S3} X · Y dVol` with equal base weights.
pub fn l2_inner(x: &SampledField, y: &SampledField) -> Result<f64> {
    x.check_grid(y)?;
    let sum: f64 = x.coeffs().iter().zip(y.coeffs()).map(|(a, b)| a.dot(*b)).sum();
    Ok(sum * x.grid().sample_weight(x.n_t()))
}

/// Flow-based estimate of `L_X A = [X, A]` at `x` for a field given pointwise.
///
/// Uses `L_X A = d/ds (Φ_{-s})_* A(Φ_s x)` with RK4 flows, a central
/// difference of step `s` in the flow time and of step `eps` along the fiber.
pub fn flow_lie_derivative(field: &dyn Fn(S3Point) -> FrameCoeffs, x: S3Point, s: f64, eps: f64) -> FrameCoeffs {
    let flow = |start: S3Point, time: f64| -> S3Point {
        let steps = 8;
        let h = time / steps as f64;
        let rhs = |q: Quaternion| -> Quaternion {
            let p = S3Point::normalize(q);
            p.q() * field(p).as_imag()
        };
        let mut q = start.q();
        for _ in 0..steps {
            let k1 = rhs(q);
            let k2 = rhs(q + k1.scale(h / 2.0));
            let k3 = rhs(q + k2.scale(h / 2.0));
            let k4 = rhs(q + k3.scale(h));
            q = q + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);
        }
        S3Point::normalize(q)
    };
    let pulled_back_a = |time: f64| -> Quaternion {
        let y = flow(x, time);
        let plus = flow(y.along_fiber(eps), -time).q();
        let minus = flow(y.along_fiber(-eps), -time).q();
        (plus - minus).scale(0.5 / eps)
    };
    let d = (pulled_back_a(s) - pulled_back_a(-s)).scale(0.5 / s);
    TangentS3::project(x, d).frame_coeffs()
}

/// Winding number about the origin of a closed planar curve.
pub fn winding_number(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    let mut total = 0.0;
    for k in 0..n {
        let [x0, y0] = points[k];
        let [x1, y1] = points[(k + 1) % n];
        total += (x0 * y1 - y0 * x1).atan2(x0 * x1 + y0 * y1);
    }
    total / TAU
}
