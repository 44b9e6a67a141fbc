//! Exponential and logarithm on S3 and S2, transport along Hopf fibers and
//! the distance geometry between two nearby fibers.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::error::{GeomError, Result};
use crate::quat::{lift_coeffs, pushforward_coeffs, FrameCoeffs, Quaternion, S2Point, S3Point, TangentS3, Vec3, HORIZONTAL_TOL};

/// Default bound on the horizontal run for [`fiber_gap`].
pub const DEFAULT_RUN_BOUND: f64 = FRAC_PI_4;

/// Runs below this are treated as "same fiber".
pub const SAME_FIBER_TOL: f64 = 1e-12;

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Riemannian exponential on S3. Rejects `‖v‖ ≥ π`.
pub fn exp_s3(v: &TangentS3) -> Result<S3Point> {
    let len = v.norm();
    if len >= PI {
        return Err(GeomError::OutsideInjectivity { norm: len });
    }
    let p = v.base().q();
    S3Point::new(p.scale(len.cos()) + v.ambient().scale(sinc(len)))
}

/// Riemannian logarithm on S3; the unique `v` with `‖v‖ < π` and `exp(v) = q`.
pub fn log_s3(p: S3Point, q: S3Point) -> Result<TangentS3> {
    let (pq, qq) = (p.q(), q.q());
    let c = pq.dot(qq);
    let w = qq - pq.scale(c);
    let s = w.norm();
    if c < 0.0 && s < 1e-12 {
        return Err(GeomError::Antipodal);
    }
    let theta = s.atan2(c);
    let v = if s < 1e-300 { Quaternion::ZERO } else { w.scale(theta / s) };
    Ok(TangentS3::project(p, v))
}

/// Levi-Civita parallel transport of `v` along the fiber arc from its base to `b`.
///
/// The fiber is a great circle in the plane `span{a, a i}`; the normal plane
/// `span{a j, a k}` is carried by constant ambient vectors and the `A`
/// component follows the velocity.
pub fn transport_along_fiber(v: &TangentS3, b: S3Point) -> Result<TangentS3> {
    let a = v.base();
    let s = fiber_offset(a, b)?;
    Ok(transport_by(v, s))
}

/// Signed fiber arc from `a` to `b` when both lie on one fiber.
pub fn fiber_offset(a: S3Point, b: S3Point) -> Result<f64> {
    let z = a.q().conj() * b.q();
    let residual = z.y.hypot(z.z);
    if residual > 1e-9 {
        return Err(GeomError::DifferentFibers { residual });
    }
    Ok(z.x.atan2(z.w))
}

pub(crate) fn transport_by(v: &TangentS3, s: f64) -> TangentS3 {
    let a = v.base();
    let b = a.along_fiber(s);
    let c = v.frame_coeffs();
    let normal = v.ambient() - (a.q() * Quaternion::I).scale(c.f);
    TangentS3::project(b, (b.q() * Quaternion::I).scale(c.f) + normal)
}

/// Moves a horizontal vector along its fiber to `b`, keeping its pushforward fixed.
///
/// Along an arc of length `s` the frame coefficients turn by `-2s`, twice
/// as fast as under Levi-Civita transport.
pub fn lift_transport(v: &TangentS3, b: S3Point) -> Result<TangentS3> {
    let c = v.frame_coeffs();
    if c.f.abs() > HORIZONTAL_TOL * v.norm().max(1.0) {
        return Err(GeomError::NotHorizontal { vertical: c.f });
    }
    let s = fiber_offset(v.base(), b)?;
    Ok(TangentS3::from_frame(b, c.horizontal().rotate_horizontal(-2.0 * s)))
}

/// Oracle form of [`lift_transport`]: lift of the pushforward at `b`.
pub fn lift_transport_via_base(v: &TangentS3, b: S3Point) -> TangentS3 {
    let u = pushforward_coeffs(v.base(), v.frame_coeffs(), 1.0);
    TangentS3::from_frame(b, lift_coeffs(&u, b, 1.0))
}

/// Distance data between the Hopf fibers through `p` and `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberGap {
    /// Horizontal run `m`: the distance between the two fibers.
    pub run: f64,
    /// Signed vertical rise from `p` to `s` along the oriented fiber of `p`.
    pub rise: f64,
    /// Foot `s` on the fiber of `p`, nearest to `q`.
    pub foot_on_p: S3Point,
    /// Foot `r` on the fiber of `q`, nearest to `p`.
    pub foot_on_q: S3Point,
}

/// Fiber gap for nearby fibers. Rejects same-fiber input, runs at or above
/// `run_bound` and fibers at maximal distance.
pub fn fiber_gap(p: S3Point, q: S3Point, run_bound: f64) -> Result<FiberGap> {
    let gap = fiber_gap_raw(p, q)?;
    if gap.run < SAME_FIBER_TOL {
        return Err(GeomError::SameFiber);
    }
    if gap.run >= run_bound {
        return Err(GeomError::Regime {
            what: "horizontal run",
            value: gap.run,
            bound: run_bound,
        });
    }
    Ok(gap)
}

/// Closed-form gap valid whenever the fibers are not at distance π/2,
/// including the degenerate same-fiber case.
///
/// With `z = p̄ q = (w + x i) + (y j + z k)` the fiber distance is
/// `atan2(|y j + z k|, |w + x i|)` and the rise is `arg(w + x i)`.
pub(crate) fn fiber_gap_raw(p: S3Point, q: S3Point) -> Result<FiberGap> {
    let z = p.q().conj() * q.q();
    let c = z.w.hypot(z.x);
    let s = z.y.hypot(z.z);
    if c < 1e-12 {
        return Err(GeomError::OrthogonalFibers);
    }
    let run = s.atan2(c);
    let rise = z.x.atan2(z.w);
    Ok(FiberGap {
        run,
        rise,
        foot_on_p: p.along_fiber(rise),
        foot_on_q: q.along_fiber(-rise),
    })
}

/// Distance between the Hopf fibers through two points.
pub fn fiber_distance(p: S3Point, q: S3Point) -> f64 {
    let z = p.q().conj() * q.q();
    z.y.hypot(z.z).atan2(z.w.hypot(z.x))
}

/// Exponential on the sphere of `a`'s radius; `u` is tangent at `a`.
pub fn exp_s2(a: &S2Point, u: &Vec3) -> S2Point {
    let n = a.unit();
    let u = u - n * n.dot(u);
    let len = u.norm();
    let angle = len / a.radius();
    let out = n * angle.cos() + u * (sinc(angle) / a.radius());
    S2Point::new(out, a.radius()).expect("exp of finite data stays on the sphere")
}

/// Logarithm on the sphere of `a`'s radius. Rejects antipodal input.
pub fn log_s2(a: &S2Point, b: &S2Point) -> Result<Vec3> {
    let (n, m) = (a.unit(), b.unit());
    let c = n.dot(&m);
    let w = m - n * c;
    let s = w.norm();
    if c < 0.0 && s < 1e-12 {
        return Err(GeomError::Antipodal);
    }
    if s < 1e-300 {
        return Ok(Vec3::zeros());
    }
    Ok(w * (a.radius() * s.atan2(c) / s))
}

/// Parallel transport on S2 along the minimizing geodesic from `a` to `b`.
pub fn transport_s2(a: &S2Point, b: &S2Point, u: &Vec3) -> Vec3 {
    let (n, m) = (a.unit(), b.unit());
    let axis = n.cross(&m);
    let s = axis.norm();
    let c = n.dot(&m);
    if s < 1e-15 {
        return u - m * m.dot(u);
    }
    // Rotation about n × m carrying n to m.
    let k = axis / s;
    u * c + k.cross(u) * s + k * (k.dot(u) * (1.0 - c))
}

/// The right spherical triangle with legs `alpha`, `beta` and hypotenuse `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalTriangle {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl SphericalTriangle {
    /// Hypotenuse from `cos α cos β = cos γ`.
    pub fn right(alpha: f64, beta: f64) -> Self {
        let gamma = (alpha.cos() * beta.cos()).clamp(-1.0, 1.0).acos();
        Self { alpha, beta, gamma }
    }

    pub fn pythagorean_residual(&self) -> f64 {
        (self.alpha.cos() * self.beta.cos() - self.gamma.cos()).abs()
    }
}

/// `α / sin α`, the sideways amplification of the target-based shooting vector.
pub fn amplification(alpha: f64) -> f64 {
    if alpha.abs() < 1e-8 {
        1.0
    } else {
        alpha / alpha.sin()
    }
}

/// Shooting geometry on the unit S2 near the north pole.
///
/// The target sits at `(sin α, 0, cos α)`, the hunter is moved from the
/// pole to `(0, sin β, cos β)`, and `w` is the target-to-hunter logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShooterSample {
    pub w: Vec3,
    pub triangle: SphericalTriangle,
    /// `dw/dβ` at `β = 0`: `(α / sin α) (0, 1, 0)`.
    pub dw_dbeta_at_zero: Vec3,
}

/// Closed form
/// `W = (γ / sin γ) (-sin α cos α cos β, sin β, sin² α cos β)`.
pub fn shooter_derivative(alpha: f64, beta: f64) -> Result<ShooterSample> {
    if !(alpha > 0.0 && alpha < FRAC_PI_2) || beta.abs() >= FRAC_PI_2 {
        return Err(GeomError::OutOfHemisphere { alpha });
    }
    let triangle = SphericalTriangle::right(alpha, beta);
    let g = amplification(triangle.gamma);
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let w = Vec3::new(-sa * ca * cb, sb, sa * sa * cb) * g;
    Ok(ShooterSample {
        w,
        triangle,
        dw_dbeta_at_zero: Vec3::new(0.0, amplification(alpha), 0.0),
    })
}

/// Frame coefficients of a horizontal unit vector at angle `theta` from `B` toward `C`.
#[inline]
pub fn horizontal_direction(theta: f64) -> FrameCoeffs {
    let (s, c) = theta.sin_cos();
    FrameCoeffs::new(0.0, c, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::{frame_at, hopf_project, HopfFiber};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut impl Rng) -> S3Point {
        loop {
            let q = Quaternion::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if q.norm() > 0.1 && q.norm() < 1.0 {
                return S3Point::normalize(q);
            }
        }
    }

    fn random_tangent(rng: &mut impl Rng, x: S3Point, max_len: f64) -> TangentS3 {
        let c = FrameCoeffs::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let len = rng.random_range(0.0..max_len);
        TangentS3::from_frame(x, c.scale(len / c.norm()))
    }

    #[test]
    fn quarter_circle() {
        let v = TangentS3::from_frame(S3Point::IDENTITY, FrameCoeffs::new(FRAC_PI_2, 0.0, 0.0));
        let q = exp_s3(&v).unwrap();
        assert!((q.q() - Quaternion::I).norm() < 1e-15);
        let back = log_s3(S3Point::IDENTITY, q).unwrap();
        assert!((back.ambient() - Quaternion::I.scale(FRAC_PI_2)).norm() < 1e-14);
    }

    #[test]
    fn exp_of_eps_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let q = random_point(&mut rng);
            let eps = rng.random_range(0.0..1.0);
            let v = TangentS3::from_frame(q, FrameCoeffs::new(0.0, eps, 0.0));
            let expect = q.q() * Quaternion::new(eps.cos(), 0.0, eps.sin(), 0.0);
            assert!((exp_s3(&v).unwrap().q() - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn exp_rejects_long_vectors_and_log_rejects_antipodes() {
        let v = TangentS3::from_frame(S3Point::IDENTITY, FrameCoeffs::new(0.0, PI, 0.0));
        assert!(matches!(exp_s3(&v), Err(GeomError::OutsideInjectivity { .. })));
        let p = S3Point::normalize(Quaternion::new(0.2, 0.3, -0.4, 0.5));
        assert_eq!(log_s3(p, p.antipode()), Err(GeomError::Antipodal));
        assert_eq!(log_s3(p, p).unwrap().norm(), 0.0);
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let p = random_point(&mut rng);
            let v = random_tangent(&mut rng, p, 3.0);
            let q = exp_s3(&v).unwrap();
            let back = log_s3(p, q).unwrap();
            assert!((back.ambient() - v.ambient()).norm() < 1e-12);
            assert_abs_diff_eq!(p.distance(q), v.norm(), epsilon = 1e-12);
        }
    }

    #[test]
    fn geodesic_has_constant_speed() {
        let p = S3Point::normalize(Quaternion::new(0.1, 0.7, -0.3, 0.2));
        let v = TangentS3::from_frame(p, FrameCoeffs::new(0.3, -0.8, 0.5));
        let steps: Vec<S3Point> = (0..=10).map(|k| exp_s3(&v.scale(k as f64 / 10.0)).unwrap()).collect();
        for w in steps.windows(2) {
            assert_abs_diff_eq!(w[0].distance(w[1]), v.norm() / 10.0, epsilon = 1e-13);
        }
    }

    /// Integrates the covariant ODE `V' = -<V, γ'> γ` along `γ(t) = a e^{it}` with RK4.
    fn transport_ode(v: Quaternion, a: S3Point, s: f64, steps: usize) -> Quaternion {
        let gamma = |t: f64| a.along_fiber(t).q();
        let vel = |t: f64| a.along_fiber(t).q() * Quaternion::I;
        let rhs = |t: f64, w: Quaternion| gamma(t).scale(-w.dot(vel(t)));
        let h = s / steps as f64;
        let mut w = v;
        for n in 0..steps {
            let t = n as f64 * h;
            let k1 = rhs(t, w);
            let k2 = rhs(t + h / 2.0, w + k1.scale(h / 2.0));
            let k3 = rhs(t + h / 2.0, w + k2.scale(h / 2.0));
            let k4 = rhs(t + h, w + k3.scale(h));
            w = w + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);
        }
        w
    }

    #[test]
    fn transport_of_b_matches_ode() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let a = random_point(&mut rng);
            let s = rng.random_range(-2.0..2.0);
            let b = a.along_fiber(s);
            let ode = transport_ode(frame_at(a)[1].ambient(), a, s, 400);
            let closed = transport_along_fiber(&frame_at(a)[1], b).unwrap();
            assert!((ode - closed.ambient()).norm() < 1e-10);
            // Frozen sign: B(a) arrives as cos(s) B(b) - sin(s) C(b).
            let c = closed.frame_coeffs();
            assert!((c - FrameCoeffs::new(0.0, s.cos(), -s.sin())).norm() < 1e-12);
        }
    }

    #[test]
    fn transport_is_isometric_and_keeps_a() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let a = random_point(&mut rng);
            let v = random_tangent(&mut rng, a, 2.0);
            let s = rng.random_range(-PI..PI);
            let out = transport_along_fiber(&v, a.along_fiber(s)).unwrap();
            assert_abs_diff_eq!(out.norm(), v.norm(), epsilon = 1e-12);
            assert_abs_diff_eq!(out.frame_coeffs().f, v.frame_coeffs().f, epsilon = 1e-12);
        }
        let a = S3Point::IDENTITY;
        let v = frame_at(a)[2];
        assert_eq!(transport_along_fiber(&v, a).unwrap().ambient(), v.ambient());
        let other = S3Point::normalize(Quaternion::new(0.0, 0.0, 1.0, 0.0));
        assert!(matches!(transport_along_fiber(&v, other), Err(GeomError::DifferentFibers { .. })));
    }

    #[test]
    fn lift_transport_keeps_pushforward() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..500 {
            let a = random_point(&mut rng);
            let c = FrameCoeffs::new(0.0, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let v = TangentS3::from_frame(a, c);
            let b = a.along_fiber(rng.random_range(-PI..PI));
            let moved = lift_transport(&v, b).unwrap();
            let oracle = lift_transport_via_base(&v, b);
            assert!((moved.ambient() - oracle.ambient()).norm() < 1e-12);
            let before = pushforward_coeffs(a, c, 1.0);
            let after = pushforward_coeffs(b, moved.frame_coeffs(), 1.0);
            assert!((before - after).norm() < 1e-10);
        }
        let f0 = HopfFiber::through(S3Point::IDENTITY);
        for k in 0..16 {
            let t = k as f64 * 0.4;
            let moved = lift_transport(&frame_at(f0.point(0.0))[1], f0.point(t)).unwrap();
            let c = moved.frame_coeffs();
            assert!((c - FrameCoeffs::new(0.0, (2.0 * t).cos(), -(2.0 * t).sin())).norm() < 1e-12);
        }
        assert!(matches!(
            lift_transport(&frame_at(S3Point::IDENTITY)[0], S3Point::IDENTITY),
            Err(GeomError::NotHorizontal { .. })
        ));
    }

    fn brute_force_fiber_distance(x: S3Point, q: S3Point, samples: usize) -> f64 {
        // Coarse scan over the fiber of q, then golden-section refinement.
        let f = |t: f64| x.distance(q.along_fiber(t));
        let (mut best, mut best_t) = (f64::INFINITY, 0.0);
        for k in 0..samples {
            let t = std::f64::consts::TAU * k as f64 / samples as f64;
            let d = f(t);
            if d < best {
                best = d;
                best_t = t;
            }
        }
        let h = std::f64::consts::TAU / samples as f64;
        let (mut lo, mut hi) = (best_t - h, best_t + h);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..100 {
            let m1 = hi - r * (hi - lo);
            let m2 = lo + r * (hi - lo);
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        f(0.5 * (lo + hi))
    }

    #[test]
    fn fibers_are_equidistant() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..10 {
            let p = random_point(&mut rng);
            let q = exp_s3(&random_tangent(&mut rng, p, 0.7)).unwrap();
            let gap = fiber_gap_raw(p, q).unwrap();
            for k in 0..64 {
                let x = p.along_fiber(k as f64 * PI / 32.0);
                let d = brute_force_fiber_distance(x, q, 256);
                assert_abs_diff_eq!(d, gap.run, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn gap_feet_and_rise() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..200 {
            let p = random_point(&mut rng);
            let q = exp_s3(&random_tangent(&mut rng, p, 0.7)).unwrap();
            let gap = fiber_gap(p, q, DEFAULT_RUN_BOUND).unwrap();
            assert!(gap.rise.abs() <= PI);
            // Horizontal shot from p of length m lands on r, and from s on q.
            let to_r = log_s3(p, gap.foot_on_q).unwrap();
            assert!(to_r.frame_coeffs().f.abs() < 1e-12);
            assert_abs_diff_eq!(to_r.norm(), gap.run, epsilon = 1e-12);
            assert!((exp_s3(&to_r).unwrap().q() - gap.foot_on_q.q()).norm() < 1e-10);
            let s_to_q = log_s3(gap.foot_on_p, q).unwrap();
            assert!(s_to_q.frame_coeffs().f.abs() < 1e-12);
            assert_abs_diff_eq!(s_to_q.norm(), gap.run, epsilon = 1e-12);
            // Rise from r to q along the fiber of q matches the rise from p to s.
            assert_abs_diff_eq!(fiber_offset(gap.foot_on_q, q).unwrap(), gap.rise, epsilon = 1e-12);
        }
    }

    #[test]
    fn rise_equals_turn_angle() {
        // The open book with binding H_p: a page through y is determined by the
        // component of p̄ y in span{j, k}. The signed angle from the page of r to
        // the page of q, measured from j toward -k, is the rise.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let p = random_point(&mut rng);
            let q = exp_s3(&random_tangent(&mut rng, p, 0.7)).unwrap();
            let gap = fiber_gap(p, q, DEFAULT_RUN_BOUND).unwrap();
            let page = |y: S3Point| {
                let z = p.q().conj() * y.q();
                (z.y, -z.z)
            };
            let (ry, rz) = page(gap.foot_on_q);
            let (qy, qz) = page(q);
            let unsigned = ((ry * qy + rz * qz) / (ry.hypot(rz) * qy.hypot(qz))).clamp(-1.0, 1.0).acos();
            let signed = (ry * qz - rz * qy).atan2(ry * qy + rz * qz);
            assert_abs_diff_eq!(unsigned, gap.rise.abs(), epsilon = 1e-8);
            assert_abs_diff_eq!(signed, gap.rise, epsilon = 1e-8);
        }
    }

    #[test]
    fn gap_errors() {
        let p = S3Point::normalize(Quaternion::new(0.5, 0.1, 0.2, 0.3));
        assert_eq!(fiber_gap(p, p.along_fiber(0.4), DEFAULT_RUN_BOUND), Err(GeomError::SameFiber));
        let far = exp_s3(&TangentS3::from_frame(p, FrameCoeffs::new(0.0, 1.2, 0.0))).unwrap();
        assert!(matches!(fiber_gap(p, far, DEFAULT_RUN_BOUND), Err(GeomError::Regime { .. })));
        let orth = exp_s3(&TangentS3::from_frame(p, FrameCoeffs::new(0.0, FRAC_PI_2, 0.0))).unwrap();
        assert_eq!(fiber_gap(p, orth, 2.0), Err(GeomError::OrthogonalFibers));
    }

    #[test]
    fn fiber_distance_is_half_base_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..200 {
            let p = random_point(&mut rng);
            let q = random_point(&mut rng);
            let d = fiber_distance(p, q);
            let base = hopf_project(p, 1.0).distance(&hopf_project(q, 1.0));
            assert_abs_diff_eq!(2.0 * d, base, epsilon = 1e-10);
        }
    }

    #[test]
    fn s2_exp_log() {
        let north = S2Point::new(Vec3::z(), 1.0).unwrap();
        for alpha in [0.1, 0.5, 1.0, 1.5] {
            let b = exp_s2(&north, &Vec3::new(alpha, 0.0, 0.0));
            assert!((b.unit() - Vec3::new(alpha.sin(), 0.0, alpha.cos())).norm() < 1e-15);
        }
        assert_eq!(log_s2(&north, &north).unwrap(), Vec3::zeros());
        let south = S2Point::new(-Vec3::z(), 1.0).unwrap();
        assert_eq!(log_s2(&north, &south), Err(GeomError::Antipodal));

        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..1000 {
            let radius = if rng.random_bool(0.5) { 1.0 } else { 0.5 };
            let a = S2Point::new(random_point(&mut rng).q().imag(), radius).unwrap();
            let b = S2Point::new(random_point(&mut rng).q().imag(), radius).unwrap();
            if a.unit().dot(&b.unit()) < -0.999 {
                continue;
            }
            let u = log_s2(&a, &b).unwrap();
            assert_abs_diff_eq!(u.norm(), a.distance(&b), epsilon = 1e-12);
            assert!((exp_s2(&a, &u).unit() - b.unit()).norm() < 1e-12);
        }
    }

    #[test]
    fn s2_transport_is_isometric_and_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..200 {
            let a = S2Point::new(random_point(&mut rng).q().imag(), 1.0).unwrap();
            let b = S2Point::new(random_point(&mut rng).q().imag(), 1.0).unwrap();
            let u = Vec3::new(rng.random(), rng.random(), rng.random());
            let u = u - a.unit() * a.unit().dot(&u);
            let out = transport_s2(&a, &b, &u);
            assert_abs_diff_eq!(out.norm(), u.norm(), epsilon = 1e-12);
            assert!(out.dot(&b.unit()).abs() < 1e-12);
        }
    }

    /// Independent construction from explicit points on the unit sphere.
    fn shooter_oracle(alpha: f64, beta: f64) -> Vec3 {
        let a = S2Point::new(Vec3::new(alpha.sin(), 0.0, alpha.cos()), 1.0).unwrap();
        let b = S2Point::new(Vec3::new(0.0, beta.sin(), beta.cos()), 1.0).unwrap();
        log_s2(&a, &b).unwrap()
    }

    #[test]
    fn shooter_closed_form_matches_log() {
        for ia in 1..15 {
            let alpha = ia as f64 * 0.1;
            for ib in -10..=10 {
                let beta = ib as f64 * 0.05;
                let s = shooter_derivative(alpha, beta).unwrap();
                assert!((s.w - shooter_oracle(alpha, beta)).norm() < 1e-12);
                assert_abs_diff_eq!(s.w.norm(), s.triangle.gamma, epsilon = 1e-12);
                assert!(s.triangle.pythagorean_residual() < 1e-12);
            }
        }
    }

    #[test]
    fn shooter_at_zero_and_derivative() {
        for alpha in [0.05, 0.3, 0.8, 1.2, 1.5] {
            let s = shooter_derivative(alpha, 0.0).unwrap();
            let v = Vec3::new(-alpha.cos(), 0.0, alpha.sin()) * alpha;
            assert!((s.w - v).norm() < 1e-14);
            let h = 1e-5;
            let fd = (shooter_derivative(alpha, h).unwrap().w - shooter_derivative(alpha, -h).unwrap().w) / (2.0 * h);
            assert!((fd - s.dw_dbeta_at_zero).norm() < 1e-6);
        }
        assert!(shooter_derivative(0.0, 0.1).is_err());
        assert!(shooter_derivative(1.6, 0.1).is_err());
    }

    #[test]
    fn amplification_window() {
        for k in 1..=10_000 {
            let alpha = FRAC_PI_2 * k as f64 / 10_000.0;
            let l = amplification(alpha);
            assert!((1.0..=1.6).contains(&l), "lambda({alpha}) = {l}");
        }
    }
}
