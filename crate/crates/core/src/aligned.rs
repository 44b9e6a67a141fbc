//! The aligned exponential and the Rescale / Twist transformations that
//! conjugate it into the Riemannian exponential.
//!
//! Everything is pointwise on the sample grid of a [`SampledField`]; maps are
//! stored as their images at the grid points and never interpolated.

use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use crate::error::{GeomError, Result};
use crate::fields::{BaseGrid, SampledField};
use crate::quat::{hopf_project, FrameCoeffs, S3Point, TangentS3};
use crate::sphere::{exp_s3, fiber_gap_raw, log_s3, transport_by, DEFAULT_RUN_BOUND, SAME_FIBER_TOL};

/// Hard limit on the sup norm of fields that are exponentiated.
pub const MAP_RADIUS: f64 = FRAC_PI_4;

/// Near-identity regime bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime {
    /// Largest sup norm accepted for a field.
    pub field_bound: f64,
    /// Largest horizontal run accepted between a point and its image.
    pub run_bound: f64,
}

impl Default for Regime {
    fn default() -> Self {
        Self {
            field_bound: 0.3,
            run_bound: DEFAULT_RUN_BOUND,
        }
    }
}

impl Regime {
    /// Checks `sup ‖X‖` against the configured bound and the hard limit.
    pub fn check_field(&self, x: &SampledField) -> Result<()> {
        let sup = x.sup_norm();
        let bound = self.field_bound.min(MAP_RADIUS);
        if sup >= bound {
            return Err(GeomError::Regime {
                what: "field sup norm",
                value: sup,
                bound,
            });
        }
        Ok(())
    }
}

/// Images of the grid points of a field under a map close to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseMapSample {
    grid: Arc<BaseGrid>,
    n_t: usize,
    images: Vec<S3Point>,
}

impl PointwiseMapSample {
    /// Rejects maps that move some point by `π/4` or more.
    pub fn new(grid: Arc<BaseGrid>, n_t: usize, images: Vec<S3Point>) -> Result<Self> {
        if images.len() != grid.len() * n_t {
            return Err(GeomError::GridMismatch);
        }
        let map = Self { grid, n_t, images };
        let sup = map.displacement();
        if sup >= MAP_RADIUS {
            return Err(GeomError::Regime {
                what: "map displacement",
                value: sup,
                bound: MAP_RADIUS,
            });
        }
        Ok(map)
    }

    pub fn identity(grid: Arc<BaseGrid>, n_t: usize) -> Self {
        let images = grid
            .fibers()
            .iter()
            .flat_map(|f| f.samples(n_t))
            .collect();
        Self { grid, n_t, images }
    }

    pub fn grid(&self) -> &Arc<BaseGrid> {
        &self.grid
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn images(&self) -> &[S3Point] {
        &self.images
    }

    pub fn point(&self, i: usize, k: usize) -> S3Point {
        self.grid.fiber(i).point(std::f64::consts::TAU * k as f64 / self.n_t as f64)
    }

    pub fn image(&self, i: usize, k: usize) -> S3Point {
        self.images[i * self.n_t + k]
    }

    pub fn fiber_images(&self, i: usize) -> &[S3Point] {
        &self.images[i * self.n_t..(i + 1) * self.n_t]
    }

    /// `sup distance(p, q(p))`.
    pub fn displacement(&self) -> f64 {
        (0..self.grid.len())
            .flat_map(|i| (0..self.n_t).map(move |k| (i, k)))
            .map(|(i, k)| self.point(i, k).distance(self.image(i, k)))
            .fold(0.0, f64::max)
    }

    /// `sup distance` between the images of two maps on the same grid.
    pub fn sup_distance(&self, o: &PointwiseMapSample) -> Result<f64> {
        if self.n_t != o.n_t || *self.grid != *o.grid {
            return Err(GeomError::GridMismatch);
        }
        Ok(self.images.iter().zip(&o.images).map(|(a, b)| a.distance(*b)).fold(0.0, f64::max))
    }

    /// Largest spread of the projected images of one fiber's samples: zero
    /// when every sampled fiber is carried into a single fiber.
    pub fn fiber_preservation_residual(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| {
                let images = self.fiber_images(i);
                let n0 = hopf_project(images[0], 1.0).unit();
                images
                    .iter()
                    .map(|q| (hopf_project(*q, 1.0).unit() - n0).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

fn map_points(
    x: &SampledField,
    op: impl Fn(S3Point, FrameCoeffs) -> Result<S3Point>,
) -> Result<PointwiseMapSample> {
    let mut images = Vec::with_capacity(x.coeffs().len());
    for i in 0..x.num_fibers() {
        for (k, c) in x.fiber(i).iter().enumerate() {
            images.push(op(x.point(i, k), *c)?);
        }
    }
    PointwiseMapSample::new(x.grid().clone(), x.n_t(), images)
}

fn map_coeffs(x: &SampledField, op: impl Fn(S3Point, FrameCoeffs) -> Result<FrameCoeffs>) -> Result<SampledField> {
    let mut coeffs = Vec::with_capacity(x.coeffs().len());
    for i in 0..x.num_fibers() {
        for (k, c) in x.fiber(i).iter().enumerate() {
            coeffs.push(op(x.point(i, k), *c)?);
        }
    }
    x.with_coeffs(coeffs)
}

/// `p ↦ exp_p V(p)` at every grid point.
pub fn exp_field(v: &SampledField, regime: &Regime) -> Result<PointwiseMapSample> {
    regime.check_field(v)?;
    map_points(v, |p, c| exp_s3(&TangentS3::from_frame(p, c)))
}

/// `W(p) = Log_p(s) + P(Log_s(q))` for `q = exp_p V`, with `s` the foot of
/// `q` on the fiber of `p` and `P` transport back along that fiber.
pub fn rescale_point(p: S3Point, v: FrameCoeffs, run_bound: f64) -> Result<FrameCoeffs> {
    let q = exp_s3(&TangentS3::from_frame(p, v))?;
    let gap = fiber_gap_raw(p, q)?;
    if gap.run < SAME_FIBER_TOL {
        return Ok(FrameCoeffs::new(gap.rise, 0.0, 0.0));
    }
    if gap.run >= run_bound {
        return Err(GeomError::Regime {
            what: "horizontal run",
            value: gap.run,
            bound: run_bound,
        });
    }
    let shot = log_s3(gap.foot_on_p, q)?;
    let back = transport_by(&shot, -gap.rise).frame_coeffs();
    Ok(FrameCoeffs::new(gap.rise, back.g, back.h))
}

/// Inverse of [`rescale_point`]: rise along the fiber, shoot the transported
/// horizontal part, and read off the log from `p`.
pub fn unrescale_point(p: S3Point, w: FrameCoeffs) -> Result<FrameCoeffs> {
    let up = transport_by(&TangentS3::from_frame(p, w.horizontal()), w.f);
    let q = exp_s3(&up)?;
    Ok(log_s3(p, q)?.frame_coeffs())
}

/// Turns `(g, h)` through the vertical component `f`.
pub fn twist_point(w: FrameCoeffs) -> FrameCoeffs {
    w.rotate_horizontal(w.f)
}

pub fn untwist_point(x: FrameCoeffs) -> FrameCoeffs {
    x.rotate_horizontal(-x.f)
}

/// Vertical motion by `f`, then a horizontal shot whose pushforward equals
/// that of `X⊥(p)`.
pub fn aexp_point(p: S3Point, x: FrameCoeffs) -> Result<S3Point> {
    let s = p.along_fiber(x.f);
    let moved = x.horizontal().rotate_horizontal(-2.0 * x.f);
    exp_s3(&TangentS3::from_frame(s, moved))
}

pub fn rescale(v: &SampledField, regime: &Regime) -> Result<SampledField> {
    regime.check_field(v)?;
    map_coeffs(v, |p, c| rescale_point(p, c, regime.run_bound))
}

pub fn unrescale(w: &SampledField, regime: &Regime) -> Result<SampledField> {
    if w.sup_norm() >= MAP_RADIUS {
        return Err(GeomError::Regime {
            what: "field sup norm",
            value: w.sup_norm(),
            bound: MAP_RADIUS,
        });
    }
    let v = map_coeffs(w, unrescale_point)?;
    regime.check_field(&v)?;
    Ok(v)
}

pub fn twist(w: &SampledField) -> SampledField {
    w.with_coeffs(w.coeffs().iter().map(|c| twist_point(*c)).collect())
        .expect("rotation keeps coefficients finite")
}

pub fn untwist(x: &SampledField) -> SampledField {
    x.with_coeffs(x.coeffs().iter().map(|c| untwist_point(*c)).collect())
        .expect("rotation keeps coefficients finite")
}

pub fn aexp(x: &SampledField, regime: &Regime) -> Result<PointwiseMapSample> {
    if x.sup_norm() >= MAP_RADIUS {
        return Err(GeomError::Regime {
            what: "field sup norm",
            value: x.sup_norm(),
            bound: MAP_RADIUS,
        });
    }
    let run = x.coeffs().iter().map(|c| c.horizontal().norm()).fold(0.0, f64::max);
    if run >= regime.run_bound {
        return Err(GeomError::Regime {
            what: "horizontal run",
            value: run,
            bound: regime.run_bound,
        });
    }
    map_points(x, aexp_point)
}

/// `sup_p distance(AExp(Twist(Rescale V))(p), Exp V(p))`.
pub fn factorization_check(v: &SampledField, regime: &Regime) -> Result<f64> {
    let left = aexp(&twist(&rescale(v, regime)?), regime)?;
    let right = exp_field(v, regime)?;
    left.sup_distance(&right)
}

/// Round-trip and factorization residuals of one field.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationReport {
    /// `sup |Unrescale(Rescale V) - V|`.
    pub rescale_round_trip: f64,
    /// `sup |Untwist(Twist W) - W|`.
    pub twist_round_trip: f64,
    /// `sup_p distance(AExp(Twist(Rescale V))(p), Exp V(p))`.
    pub factorization: f64,
    /// `AExp(Twist(Rescale V))`.
    pub map: PointwiseMapSample,
}

pub fn factorization_report(v: &SampledField, regime: &Regime) -> Result<FactorizationReport> {
    let w = rescale(v, regime)?;
    let rescale_round_trip = unrescale(&w, regime)?.sup_distance(v)?;
    let tw = twist(&w);
    let twist_round_trip = untwist(&tw).sup_distance(&w)?;
    let map = aexp(&tw, regime)?;
    let factorization = map.sup_distance(&exp_field(v, regime)?)?;
    Ok(FactorizationReport {
        rescale_round_trip,
        twist_round_trip,
        factorization,
        map,
    })
}
