//! Quaternions, points and tangent vectors of S3, the invariant frames and
//! the Hopf projection `p(q) = q i q̄`.
//!
//! Pole convention: `p` sends the fiber through `1` (the unit circle in the
//! `(1, i)`-plane) to `+i` and the fiber through `j` to `-i`. When the two
//! are called "south" and "north" poles, south is `+i`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Vector3;

use crate::error::{GeomError, Result};

pub type Vec3 = Vector3<f64>;

/// Tolerance for tangency of an ambient vector to S3.
pub const TANGENT_TOL: f64 = 1e-10;
/// Tolerance on the vertical coefficient of a vector declared horizontal.
pub const HORIZONTAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// Pure imaginary quaternion `v.x i + v.y j + v.z k`.
    #[inline]
    pub fn from_imag(v: &Vec3) -> Self {
        Self::new(0.0, v.x, v.y, v.z)
    }

    #[inline]
    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    #[inline]
    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    #[inline]
    pub fn imag(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    /// `cos t + i sin t`.
    #[inline]
    pub fn exp_i(t: f64) -> Self {
        let (s, c) = t.sin_cos();
        Self::new(c, s, 0.0, 0.0)
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Euclidean inner product in R4.
    #[inline]
    pub fn dot(self, o: Self) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

/// A unit quaternion. Every constructor renormalizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct S3Point(Quaternion);

impl S3Point {
    pub const IDENTITY: S3Point = S3Point(Quaternion::ONE);

    pub fn new(q: Quaternion) -> Result<Self> {
        if !q.is_finite() {
            return Err(GeomError::NotFinite("quaternion"));
        }
        let n = q.norm();
        if n < 1e-300 {
            return Err(GeomError::ZeroQuaternion);
        }
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(Self(q));
        }
        Ok(Self(q.scale(1.0 / n)))
    }

    /// Renormalizing constructor for quaternions known to be near the sphere.
    ///
    /// Panics on zero or non-finite input.
    pub fn normalize(q: Quaternion) -> Self {
        Self::new(q).expect("quaternion must be finite and nonzero")
    }

    #[inline]
    pub fn q(self) -> Quaternion {
        self.0
    }

    /// Right multiplication by a unit quaternion.
    #[inline]
    pub fn mul_right(self, u: Quaternion) -> Self {
        Self::normalize(self.0 * u)
    }

    /// Left multiplication by a unit quaternion.
    #[inline]
    pub fn mul_left(self, u: Quaternion) -> Self {
        Self::normalize(u * self.0)
    }

    /// `self · (cos t + i sin t)`: motion by `t` along the oriented Hopf fiber.
    #[inline]
    pub fn along_fiber(self, t: f64) -> Self {
        self.mul_right(Quaternion::exp_i(t))
    }

    /// Great-circle distance.
    pub fn distance(self, o: S3Point) -> f64 {
        2.0 * (self.0 - o.0).norm().atan2((self.0 + o.0).norm())
    }

    #[inline]
    pub fn antipode(self) -> Self {
        Self(-self.0)
    }
}

/// Coefficients of a tangent vector in the left-invariant frame `(A, B, C)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameCoeffs {
    pub f: f64,
    pub g: f64,
    pub h: f64,
}

impl FrameCoeffs {
    pub const ZERO: FrameCoeffs = FrameCoeffs::new(0.0, 0.0, 0.0);

    #[inline]
    pub const fn new(f: f64, g: f64, h: f64) -> Self {
        Self { f, g, h }
    }

    #[inline]
    pub fn norm(self) -> f64 {
        (self.f * self.f + self.g * self.g + self.h * self.h).sqrt()
    }

    #[inline]
    pub fn dot(self, o: Self) -> f64 {
        self.f * o.f + self.g * o.g + self.h * o.h
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        Self::new(self.f * s, self.g * s, self.h * s)
    }

    /// Horizontal part `gB + hC`.
    #[inline]
    pub fn horizontal(self) -> Self {
        Self::new(0.0, self.g, self.h)
    }

    /// Vertical part `fA`.
    #[inline]
    pub fn vertical(self) -> Self {
        Self::new(self.f, 0.0, 0.0)
    }

    /// Rotates `(g, h)` by `angle`, right-handed about `A`.
    #[inline]
    pub fn rotate_horizontal(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(self.f, c * self.g - s * self.h, s * self.g + c * self.h)
    }

    /// The pure imaginary quaternion `f i + g j + h k`.
    #[inline]
    pub fn as_imag(self) -> Quaternion {
        Quaternion::new(0.0, self.f, self.g, self.h)
    }

    pub fn is_finite(self) -> bool {
        self.f.is_finite() && self.g.is_finite() && self.h.is_finite()
    }
}

impl Add for FrameCoeffs {
    type Output = FrameCoeffs;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.f + o.f, self.g + o.g, self.h + o.h)
    }
}

impl Sub for FrameCoeffs {
    type Output = FrameCoeffs;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.f - o.f, self.g - o.g, self.h - o.h)
    }
}

impl Neg for FrameCoeffs {
    type Output = FrameCoeffs;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.f, -self.g, -self.h)
    }
}

/// A tangent vector to S3, stored in ambient R4 coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentS3 {
    base: S3Point,
    v: Quaternion,
}

impl TangentS3 {
    /// Checks tangency `v · base = 0`; the check is relative to `|v|` for large vectors.
    pub fn new(base: S3Point, v: Quaternion) -> Result<Self> {
        if !v.is_finite() {
            return Err(GeomError::NotFinite("tangent vector"));
        }
        let residual = base.q().dot(v).abs();
        if residual > TANGENT_TOL * v.norm().max(1.0) {
            return Err(GeomError::NotTangent { residual });
        }
        Ok(Self { base, v })
    }

    /// Projects an arbitrary ambient vector onto the tangent space at `base`.
    pub fn project(base: S3Point, v: Quaternion) -> Self {
        let q = base.q();
        Self {
            base,
            v: v - q.scale(q.dot(v)),
        }
    }

    pub fn zero(base: S3Point) -> Self {
        Self {
            base,
            v: Quaternion::ZERO,
        }
    }

    /// `f A + g B + h C` at `base`.
    #[inline]
    pub fn from_frame(base: S3Point, c: FrameCoeffs) -> Self {
        Self {
            base,
            v: base.q() * c.as_imag(),
        }
    }

    #[inline]
    pub fn base(&self) -> S3Point {
        self.base
    }

    #[inline]
    pub fn ambient(&self) -> Quaternion {
        self.v
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.v.norm()
    }

    /// Frame coefficients: the imaginary part of `basē · v`.
    #[inline]
    pub fn frame_coeffs(&self) -> FrameCoeffs {
        let u = self.base.q().conj() * self.v;
        FrameCoeffs::new(u.x, u.y, u.z)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            base: self.base,
            v: self.v.scale(s),
        }
    }
}

/// Index into the left-invariant frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameIndex {
    A,
    B,
    C,
}

impl FrameIndex {
    pub const ALL: [FrameIndex; 3] = [FrameIndex::A, FrameIndex::B, FrameIndex::C];

    /// The unit imaginary quaternion generating this frame field.
    pub fn generator(self) -> Quaternion {
        match self {
            FrameIndex::A => Quaternion::I,
            FrameIndex::B => Quaternion::J,
            FrameIndex::C => Quaternion::K,
        }
    }

    pub fn unit(self) -> FrameCoeffs {
        match self {
            FrameIndex::A => FrameCoeffs::new(1.0, 0.0, 0.0),
            FrameIndex::B => FrameCoeffs::new(0.0, 1.0, 0.0),
            FrameIndex::C => FrameCoeffs::new(0.0, 0.0, 1.0),
        }
    }
}

/// Left-invariant frame `(x i, x j, x k)`.
pub fn frame_at(x: S3Point) -> [TangentS3; 3] {
    let q = x.q();
    [
        TangentS3 { base: x, v: q * Quaternion::I },
        TangentS3 { base: x, v: q * Quaternion::J },
        TangentS3 { base: x, v: q * Quaternion::K },
    ]
}

/// Right-invariant frame `(i x, j x, k x)`.
pub fn frame_star_at(x: S3Point) -> [TangentS3; 3] {
    let q = x.q();
    [
        TangentS3 { base: x, v: Quaternion::I * q },
        TangentS3 { base: x, v: Quaternion::J * q },
        TangentS3 { base: x, v: Quaternion::K * q },
    ]
}

/// Bracket of two frame fields as constant frame coefficients:
/// `[A,B] = 2C`, `[B,C] = 2A`, `[C,A] = 2B`.
pub fn lie_bracket_frame(a: FrameIndex, b: FrameIndex) -> FrameCoeffs {
    // For left-invariant fields the bracket is the commutator uv - vu.
    let u = a.generator();
    let v = b.generator();
    let c = u * v - v * u;
    FrameCoeffs::new(c.x, c.y, c.z)
}

/// Flow-commutator estimate of `[X_a, X_b]` at `x` with flow step `eps`.
///
/// Follows the flows of `a`, `b`, `-a`, `-b` in turn; the displacement is
/// `eps² [X_a, X_b] + O(eps³)`.
pub fn flow_commutator(x: S3Point, a: FrameIndex, b: FrameIndex, eps: f64) -> FrameCoeffs {
    let flow = |u: Quaternion, s: f64| {
        let (sn, cs) = s.sin_cos();
        Quaternion::ONE.scale(cs) + u.scale(sn)
    };
    let (u, v) = (a.generator(), b.generator());
    let y = x.q() * flow(u, eps) * flow(v, eps) * flow(u, -eps) * flow(v, -eps);
    let d = x.q().conj() * (y - x.q());
    FrameCoeffs::new(d.x, d.y, d.z).scale(1.0 / (eps * eps))
}

/// Average of the flow-commutator estimates with steps `eps` and `-eps`;
/// the `O(eps³)` terms cancel.
pub fn flow_commutator_symmetric(x: S3Point, a: FrameIndex, b: FrameIndex, eps: f64) -> FrameCoeffs {
    (flow_commutator(x, a, b, eps) + flow_commutator(x, a, b, -eps)).scale(0.5)
}

/// A point of S2 stored as a unit vector in the imaginary span of `(i, j, k)`,
/// together with the radius of the sphere it is considered on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct S2Point {
    n: Vec3,
    radius: f64,
}

impl S2Point {
    pub fn new(n: Vec3, radius: f64) -> Result<Self> {
        if !(n.iter().all(|c| c.is_finite()) && radius.is_finite()) {
            return Err(GeomError::NotFinite("S2 point"));
        }
        if radius <= 0.0 {
            return Err(GeomError::Config(format!("radius {radius} must be positive")));
        }
        let len = n.norm();
        if len < 1e-300 {
            return Err(GeomError::ZeroQuaternion);
        }
        Ok(Self { n: n / len, radius })
    }

    /// Spherical coordinates: colatitude `u` from the `k` axis and longitude
    /// `v` measured from `i` toward `j`.
    pub fn from_spherical(u: f64, v: f64, radius: f64) -> Result<Self> {
        Self::new(
            Vec3::new(u.sin() * v.cos(), u.sin() * v.sin(), u.cos()),
            radius,
        )
    }

    pub fn spherical(&self) -> (f64, f64) {
        let u = self.n.z.clamp(-1.0, 1.0).acos();
        let v = self.n.y.atan2(self.n.x);
        (u, v)
    }

    /// Unit direction.
    #[inline]
    pub fn unit(&self) -> Vec3 {
        self.n
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Position in R3 on the sphere of this radius.
    #[inline]
    pub fn position(&self) -> Vec3 {
        self.n * self.radius
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        Self { n: self.n, radius }
    }

    /// Geodesic distance on the sphere of this point's radius.
    pub fn distance(&self, o: &S2Point) -> f64 {
        self.radius * self.n.cross(&o.n).norm().atan2(self.n.dot(&o.n))
    }
}

/// Hopf projection `q i q̄` onto the sphere of the given radius.
pub fn hopf_project(x: S3Point, radius: f64) -> S2Point {
    let q = x.q();
    let n = (q * Quaternion::I * q.conj()).imag();
    S2Point { n: n / n.norm(), radius }
}

/// Differential of the Hopf projection on a horizontal vector.
///
/// At radius 1 lengths double; at radius 1/2 they are preserved.
pub fn pushforward_horizontal(v: &TangentS3, radius: f64) -> Result<Vec3> {
    let c = v.frame_coeffs();
    if c.f.abs() > HORIZONTAL_TOL * v.norm().max(1.0) {
        return Err(GeomError::NotHorizontal { vertical: c.f });
    }
    Ok(pushforward_coeffs(v.base(), c, radius))
}

/// `dp(x (g j + h k)) = 2 x (h j - g k) x̄`, scaled by the radius. Ignores `f`.
pub(crate) fn pushforward_coeffs(x: S3Point, c: FrameCoeffs, radius: f64) -> Vec3 {
    let q = x.q();
    let u = Quaternion::new(0.0, 0.0, c.h, -c.g);
    (q * u * q.conj()).imag() * (2.0 * radius)
}

/// Unique horizontal vector at `x` whose pushforward is `u`.
///
/// `u` is a tangent vector at `base`; its component along the normal is discarded.
pub fn horizontal_lift(u: &Vec3, base: &S2Point, x: S3Point) -> Result<TangentS3> {
    let here = hopf_project(x, base.radius());
    let distance = here.unit().cross(&base.unit()).norm();
    if distance > 1e-9 || here.unit().dot(&base.unit()) < 0.0 {
        return Err(GeomError::BasePointMismatch { distance });
    }
    Ok(TangentS3::from_frame(x, lift_coeffs(u, x, base.radius())))
}

pub(crate) fn lift_coeffs(u: &Vec3, x: S3Point, radius: f64) -> FrameCoeffs {
    let q = x.q();
    let w = q.conj() * Quaternion::from_imag(u) * q;
    // w = 2 R (h j - g k); the i-component is the discarded normal part.
    let s = 1.0 / (2.0 * radius);
    FrameCoeffs::new(0.0, -w.z * s, w.y * s)
}

/// An oriented Hopf fiber `F(t) = q₀ · (cos t + i sin t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfFiber {
    base: S3Point,
}

impl HopfFiber {
    pub fn through(base: S3Point) -> Self {
        Self { base }
    }

    /// Fiber over the unit direction `n` with the canonical basepoint
    /// `normalize(1 - n i)`, the rotation carrying `i` to `n`. Over `-i` the
    /// basepoint is `j`.
    pub fn over(n: &Vec3) -> Self {
        let nq = Quaternion::from_imag(&(n / n.norm()));
        let q = Quaternion::ONE - nq * Quaternion::I;
        let base = if q.norm() < 1e-8 {
            S3Point(Quaternion::J)
        } else {
            S3Point::normalize(q)
        };
        Self { base }
    }

    #[inline]
    pub fn basepoint(&self) -> S3Point {
        self.base
    }

    #[inline]
    pub fn point(&self, t: f64) -> S3Point {
        self.base.along_fiber(t)
    }

    /// `F'(t) = F(t) i = A(F(t))`.
    pub fn tangent(&self, t: f64) -> TangentS3 {
        let x = self.point(t);
        TangentS3 {
            base: x,
            v: x.q() * Quaternion::I,
        }
    }

    pub fn project(&self, radius: f64) -> S2Point {
        hopf_project(self.base, radius)
    }

    /// Orthonormal axes `(e_x, e_y) = (-q₀ k q̄₀, q₀ j q̄₀)` of the tangent plane
    /// at the base point. In this chart `p_* B(F(t)) = 2 (cos 2t, sin 2t)` at radius 1.
    pub fn chart_axes(&self) -> (Vec3, Vec3) {
        let q = self.base.q();
        let ex = -(q * Quaternion::K * q.conj()).imag();
        let ey = (q * Quaternion::J * q.conj()).imag();
        (ex, ey)
    }

    /// Samples `F(2πk/n)` for `k = 0..n`.
    pub fn samples(&self, n: usize) -> Vec<S3Point> {
        (0..n)
            .map(|k| self.point(std::f64::consts::TAU * k as f64 / n as f64))
            .collect()
    }

    /// Fiber parameter of a point `y` on this fiber, in `(-π, π]`, with the
    /// off-fiber residual.
    pub fn parameter_of(&self, y: S3Point) -> (f64, f64) {
        let z = self.base.q().conj() * y.q();
        (z.x.atan2(z.w), z.y.hypot(z.z))
    }
}
