//! Diffeomorphisms of S3 used as slice-solver inputs.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aligned::MAP_RADIUS;
use crate::error::GeomError;
use crate::quat::{FrameCoeffs, HopfFiber, Quaternion, S3Point, TangentS3, Vec3};
use crate::sphere::exp_s3;
use crate::synth::{random_balanced, random_mix, random_projectable, Polynomial, SmoothField};

pub trait Diffeo {
    fn apply(&self, x: S3Point) -> S3Point;

    /// Images of `n` uniform samples of a fiber.
    fn fiber_image(&self, fiber: &HopfFiber, n: usize) -> Vec<S3Point> {
        fiber.samples(n).into_iter().map(|x| self.apply(x)).collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Diffeo for Identity {
    fn apply(&self, x: S3Point) -> S3Point {
        x
    }
}

/// `x ↦ g x e^{ia}`: permutes the Hopf fibers by the rotation `n ↦ g n ḡ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct U2Motion {
    g: Quaternion,
    a: f64,
}

impl U2Motion {
    pub fn new(g: Quaternion, a: f64) -> Self {
        Self {
            g: S3Point::normalize(g).q(),
            a,
        }
    }

    /// Rotation by `angle` about the unit `axis` of R3 on the base, with a
    /// fiber turn `a`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64, a: f64) -> Self {
        let axis = axis / axis.norm();
        let (s, c) = (angle / 2.0).sin_cos();
        Self::new(Quaternion::new(c, s * axis.x, s * axis.y, s * axis.z), a)
    }

    pub fn base_rotation(&self, n: &Vec3) -> Vec3 {
        (self.g * Quaternion::from_imag(n) * self.g.conj()).imag()
    }
}

impl Diffeo for U2Motion {
    fn apply(&self, x: S3Point) -> S3Point {
        S3Point::normalize(self.g * x.q() * Quaternion::exp_i(self.a))
    }
}

/// `x ↦ x e^{ia}`: turns every fiber within itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleAction(pub f64);

impl Diffeo for CircleAction {
    fn apply(&self, x: S3Point) -> S3Point {
        x.along_fiber(self.0)
    }
}

/// `x ↦ exp_x(s X(x))`.
pub struct FieldExp<F> {
    pub field: F,
    pub scale: f64,
}

impl<F: SmoothField> Diffeo for FieldExp<F> {
    fn apply(&self, x: S3Point) -> S3Point {
        let c: FrameCoeffs = self.field.coeffs_at(x).scale(self.scale);
        exp_s3(&TangentS3::from_frame(x, c)).expect("field exponential stays within injectivity radius")
    }
}

/// Built-in diffeomorphism families.
///
/// Text forms: `identity`, `u2:ax,ay,az,angle,turn`, `circle:a`,
/// `balanced:seed,amp`, `projectable:seed,amp`, `mixed:seed,wb,wp`.
/// The random families are exponentials of seeded fields; `amp` is the sup
/// norm of the field along the source fiber.
#[derive(Debug, Clone, PartialEq)]
pub enum DiffeoSpec {
    Identity,
    U2 { axis: Vec3, angle: f64, turn: f64 },
    Circle(f64),
    Balanced { seed: u64, amplitude: f64 },
    Projectable { seed: u64, amplitude: f64 },
    Mixed { seed: u64, balanced: f64, projectable: f64 },
}

fn sup_on_fiber(field: &dyn SmoothField, source: &Vec3, n: usize) -> f64 {
    HopfFiber::over(source)
        .samples(n)
        .into_iter()
        .map(|x| field.coeffs_at(x).norm())
        .fold(0.0, f64::max)
        .max(1e-300)
}

impl DiffeoSpec {
    /// The diffeomorphism, with amplitudes normalized on the fiber over
    /// `source`. Field families must stay below the map radius there.
    pub fn build(&self, source: &Vec3, n: usize) -> Result<Box<dyn Diffeo>, GeomError> {
        fn field_exp<F: SmoothField + 'static>(
            field: F,
            scale: f64,
            source: &Vec3,
            n: usize,
        ) -> Result<Box<dyn Diffeo>, GeomError> {
            let sup = sup_on_fiber(&field, source, n) * scale.abs();
            if sup.is_nan() || sup >= MAP_RADIUS {
                return Err(GeomError::Regime {
                    what: "field sup norm on the source fiber",
                    value: sup,
                    bound: MAP_RADIUS,
                });
            }
            Ok(Box::new(FieldExp { field, scale }))
        }
        match *self {
            DiffeoSpec::Identity => Ok(Box::new(Identity)),
            DiffeoSpec::U2 { axis, angle, turn } => Ok(Box::new(U2Motion::from_axis_angle(&axis, angle, turn))),
            DiffeoSpec::Circle(a) => Ok(Box::new(CircleAction(a))),
            DiffeoSpec::Balanced { seed, amplitude } => {
                let field = random_balanced(&mut ChaCha8Rng::seed_from_u64(seed), 1.0);
                let scale = amplitude / sup_on_fiber(&field, source, n);
                field_exp(field, scale, source, n)
            }
            DiffeoSpec::Projectable { seed, amplitude } => {
                let mut field = random_projectable(&mut ChaCha8Rng::seed_from_u64(seed), 1.0);
                field.vertical = Polynomial::zero();
                let scale = amplitude / sup_on_fiber(&field, source, n);
                field_exp(field, scale, source, n)
            }
            DiffeoSpec::Mixed {
                seed,
                balanced,
                projectable,
            } => field_exp(
                random_mix(&mut ChaCha8Rng::seed_from_u64(seed), (balanced, projectable)),
                1.0,
                source,
                n,
            ),
        }
    }

    /// For the balanced family, the generating field at `n` samples of the
    /// fiber over `source`.
    pub fn known_balanced(&self, source: &Vec3, n: usize) -> Option<Vec<FrameCoeffs>> {
        let DiffeoSpec::Balanced { seed, amplitude } = *self else {
            return None;
        };
        let field = random_balanced(&mut ChaCha8Rng::seed_from_u64(seed), 1.0);
        let scale = amplitude / sup_on_fiber(&field, source, n);
        Some(
            HopfFiber::over(source)
                .samples(n)
                .into_iter()
                .map(|x| field.coeffs_at(x).scale(scale))
                .collect(),
        )
    }
}

impl FromStr for DiffeoSpec {
    type Err = GeomError;

    fn from_str(s: &str) -> Result<Self, GeomError> {
        let bad = |why: &str| GeomError::Config(format!("diffeo `{s}`: {why}"));
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|_| bad("parameters must be numbers")))
                .collect::<Result<_, _>>()?
        };
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(bad("parameters must be finite"));
        }
        let want = |k: usize| {
            if nums.len() == k {
                Ok(())
            } else {
                Err(bad(&format!("expected {k} parameters")))
            }
        };
        let seed = |v: f64| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as u64)
            } else {
                Err(bad("seed must be a non-negative integer"))
            }
        };
        match name {
            "identity" => want(0).map(|_| DiffeoSpec::Identity),
            "u2" => {
                want(5)?;
                let axis = Vec3::new(nums[0], nums[1], nums[2]);
                if axis.norm() == 0.0 {
                    return Err(bad("axis must be nonzero"));
                }
                Ok(DiffeoSpec::U2 {
                    axis,
                    angle: nums[3],
                    turn: nums[4],
                })
            }
            "circle" => want(1).map(|_| DiffeoSpec::Circle(nums[0])),
            "balanced" => {
                want(2)?;
                Ok(DiffeoSpec::Balanced {
                    seed: seed(nums[0])?,
                    amplitude: nums[1],
                })
            }
            "projectable" => {
                want(2)?;
                Ok(DiffeoSpec::Projectable {
                    seed: seed(nums[0])?,
                    amplitude: nums[1],
                })
            }
            "mixed" => {
                want(3)?;
                Ok(DiffeoSpec::Mixed {
                    seed: seed(nums[0])?,
                    balanced: nums[1],
                    projectable: nums[2],
                })
            }
            _ => Err(bad("unknown family; expected identity, u2, circle, balanced, projectable or mixed")),
        }
    }
}

impl fmt::Display for DiffeoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiffeoSpec::Identity => write!(f, "identity"),
            DiffeoSpec::U2 { axis, angle, turn } => {
                write!(f, "u2:{},{},{},{angle},{turn}", axis.x, axis.y, axis.z)
            }
            DiffeoSpec::Circle(a) => write!(f, "circle:{a}"),
            DiffeoSpec::Balanced { seed, amplitude } => write!(f, "balanced:{seed},{amplitude}"),
            DiffeoSpec::Projectable { seed, amplitude } => write!(f, "projectable:{seed},{amplitude}"),
            DiffeoSpec::Mixed {
                seed,
                balanced,
                projectable,
            } => write!(f, "mixed:{seed},{balanced},{projectable}"),
        }
    }
}
