//! Holonomy of the horizontal distribution around fiber triangles, and Gauss
//! linking numbers of closed curves in S3.

use std::f64::consts::{PI, TAU};

use crate::error::{GeomError, Result};
use crate::quat::{FrameCoeffs, HopfFiber, Quaternion, S3Point, Vec3};
use crate::spectral::SpectralPlan;
use crate::sphere::{fiber_gap, fiber_offset};

/// Three fibers joined by minimizing horizontal connectors.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalTriangle {
    pub fibers: [HopfFiber; 3],
    /// `(start, end)` of the connectors F1→F2, F2→F3, F3→F1.
    pub connectors: [(S3Point, S3Point); 3],
    /// Signed fiber arc on F1 from the start of the first connector to the
    /// end of the last.
    pub gap: f64,
}

impl HorizontalTriangle {
    /// Largest `|f|/‖v‖` over the connector directions.
    pub fn horizontality(&self) -> f64 {
        self.connectors
            .iter()
            .map(|(a, b)| {
                let c: FrameCoeffs = crate::sphere::log_s3(*a, *b).expect("short connector").frame_coeffs();
                c.f.abs() / c.norm().max(1e-300)
            })
            .fold(0.0, f64::max)
    }
}

pub fn horizontal_triangle(fibers: [HopfFiber; 3], run_bound: f64) -> Result<HorizontalTriangle> {
    let [f1, f2, f3] = fibers;
    let start = fiber_gap(f1.basepoint(), f2.basepoint(), run_bound)?.foot_on_p;
    let mut connectors = [(start, start); 3];
    let mut at = start;
    for (k, next) in [f2, f3, f1].iter().enumerate() {
        let end = fiber_gap(at, next.basepoint(), run_bound)?.foot_on_q;
        connectors[k] = (at, end);
        at = end;
    }
    let gap = fiber_offset(start, at)?;
    Ok(HorizontalTriangle {
        fibers,
        connectors,
        gap,
    })
}

/// Signed fiber gap after running once around the triangle of fibers.
pub fn triangle_gap(f1: &HopfFiber, f2: &HopfFiber, f3: &HopfFiber, run_bound: f64) -> Result<f64> {
    Ok(horizontal_triangle([*f1, *f2, *f3], run_bound)?.gap)
}

/// Signed solid angle of the spherical triangle with unit vertices `a, b, c`,
/// positive when they run counterclockwise seen from outside.
pub fn solid_angle(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let det = a.dot(&b.cross(c));
    let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * det.atan2(den)
}

/// Signed area of the projected triangle on S2(1/2).
pub fn projected_area(f1: &HopfFiber, f2: &HopfFiber, f3: &HopfFiber) -> f64 {
    let [a, b, c] = [f1, f2, f3].map(|f| f.project(1.0).unit());
    solid_angle(&a, &b, &c) / 4.0
}

/// Stereographic projection from `pole`: rotate `pole` to `-1` by left
/// multiplication, then `(x, y, z) / (1 + w)`.
pub fn stereographic(x: S3Point, pole: S3Point) -> Vec3 {
    let y = -(pole.q().conj() * x.q());
    Vec3::new(y.x, y.y, y.z) / (1.0 + y.w)
}

/// Result of the Gauss linking integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linking {
    pub value: f64,
    pub rounded: i64,
    /// `|value - rounded|`.
    pub residual: f64,
    pub pole: S3Point,
}

/// Candidate pole farthest from every sample of both curves.
fn far_pole(c1: &[S3Point], c2: &[S3Point]) -> S3Point {
    let n = 2000;
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut best = (S3Point::IDENTITY, f64::NEG_INFINITY);
    for k in 0..n {
        // Deterministic quasi-uniform points of S3 via Hopf coordinates.
        let u = (k as f64 + 0.5) / n as f64;
        let (a, b) = (u.sqrt(), (1.0 - u).sqrt());
        let (p1, p2) = (golden * k as f64, TAU * ((k as f64 * 0.754_877_666_246_692_7) % 1.0));
        let cand = S3Point::normalize(Quaternion::new(a * p1.cos(), a * p1.sin(), b * p2.cos(), b * p2.sin()));
        // Largest distance to the curves is the smallest largest inner product.
        let d = -c1.iter().chain(c2).map(|x| x.q().dot(cand.q())).fold(f64::NEG_INFINITY, f64::max);
        if d > best.1 {
            best = (cand, d);
        }
    }
    best.0
}

/// Gauss linking number of two closed sampled curves in S3.
///
/// Both curves are uniformly sampled in their parameter; velocities come
/// from spectral derivatives of the projected coordinates.
pub fn gauss_linking(c1: &[S3Point], c2: &[S3Point]) -> Result<Linking> {
    gauss_linking_from(c1, c2, far_pole(c1, c2))
}

/// Gauss linking number computed in the stereographic chart from `pole`.
pub fn gauss_linking_from(c1: &[S3Point], c2: &[S3Point], pole: S3Point) -> Result<Linking> {
    let project = |c: &[S3Point]| -> Result<(Vec<Vec3>, Vec<Vec3>)> {
        let plan = SpectralPlan::new(c.len())?;
        let r: Vec<Vec3> = c.iter().map(|x| stereographic(*x, pole)).collect();
        let d: Vec<Vec<f64>> = (0..3)
            .map(|i| plan.derivative(&r.iter().map(|v| v[i]).collect::<Vec<_>>()))
            .collect();
        let dr = (0..c.len()).map(|k| Vec3::new(d[0][k], d[1][k], d[2][k])).collect();
        Ok((r, dr))
    };
    let (r1, d1) = project(c1)?;
    let (r2, d2) = project(c2)?;
    let spacing = |r: &[Vec3]| {
        (0..r.len())
            .map(|k| (r[(k + 1) % r.len()] - r[k]).norm())
            .fold(0.0, f64::max)
    };
    let h = spacing(&r1).max(spacing(&r2));
    let mut closest = f64::INFINITY;
    let mut sum = 0.0;
    for (a, da) in r1.iter().zip(&d1) {
        for (b, db) in r2.iter().zip(&d2) {
            let diff = a - b;
            let dist = diff.norm();
            closest = closest.min(dist);
            sum += diff.dot(&da.cross(db)) / dist.powi(3);
        }
    }
    if closest < 2.0 * h {
        return Err(GeomError::CurvesTooClose { distance: closest });
    }
    let value = sum * (TAU / r1.len() as f64) * (TAU / r2.len() as f64) / (4.0 * PI);
    let rounded = value.round() as i64;
    Ok(Linking {
        value,
        rounded,
        residual: (value - value.round()).abs(),
        pole,
    })
}

/// `n` samples of the orbit of `q` under left multiplication by `e^{it}`.
pub fn mirror_fiber(q: S3Point, n: usize) -> Vec<S3Point> {
    (0..n)
        .map(|k| S3Point::normalize(Quaternion::exp_i(TAU * k as f64 / n as f64) * q.q()))
        .collect()
}
