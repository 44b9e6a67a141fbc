//! Smooth synthetic vector fields on S3, given pointwise in frame coefficients.
//!
//! Polynomials in the ambient coordinates restrict to trigonometric
//! polynomials of the same degree on every fiber, so fiber samples of these
//! fields are resolved exactly once `n_t` exceeds twice the degree.

use rand::Rng;

use crate::quat::{hopf_project, lift_coeffs, FrameCoeffs, Quaternion, S3Point, Vec3};

/// A vector field on S3 that can be evaluated anywhere.
pub trait SmoothField {
    fn coeffs_at(&self, x: S3Point) -> FrameCoeffs;
}

impl<F: Fn(S3Point) -> FrameCoeffs> SmoothField for F {
    fn coeffs_at(&self, x: S3Point) -> FrameCoeffs {
        self(x)
    }
}

/// Real polynomial in `(w, x, y, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    terms: Vec<([u8; 4], f64)>,
}

impl Polynomial {
    pub fn new(terms: Vec<([u8; 4], f64)>) -> Self {
        Self { terms }
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    /// Random coefficients in `[-scale, scale]` for every monomial whose
    /// degree is in `degrees`.
    pub fn random(rng: &mut impl Rng, degrees: &[u8], scale: f64) -> Self {
        let mut terms = Vec::new();
        for &d in degrees {
            for a in 0..=d {
                for b in 0..=d - a {
                    for c in 0..=d - a - b {
                        let e = [a, b, c, d - a - b - c];
                        terms.push((e, rng.random_range(-scale..=scale)));
                    }
                }
            }
        }
        Self { terms }
    }

    pub fn degree(&self) -> u8 {
        self.terms.iter().map(|(e, _)| e.iter().sum::<u8>()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: S3Point) -> f64 {
        const TABLE: usize = 16;
        let c = x.q().to_array();
        let top = self.terms.iter().flat_map(|(e, _)| e.iter()).copied().max().unwrap_or(0) as usize;
        if top >= TABLE {
            return self
                .terms
                .iter()
                .map(|(e, k)| k * (0..4).map(|i| c[i].powi(e[i] as i32)).product::<f64>())
                .sum();
        }
        let mut pow = [[1.0; TABLE]; 4];
        for (row, ci) in pow.iter_mut().zip(c) {
            for d in 1..=top {
                row[d] = row[d - 1] * ci;
            }
        }
        self.terms
            .iter()
            .map(|(e, k)| k * pow[0][e[0] as usize] * pow[1][e[1] as usize] * pow[2][e[2] as usize] * pow[3][e[3] as usize])
            .sum()
    }
}

/// `f A + g B + h C` with polynomial coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialField {
    pub f: Polynomial,
    pub g: Polynomial,
    pub h: Polynomial,
}

impl SmoothField for PolynomialField {
    fn coeffs_at(&self, x: S3Point) -> FrameCoeffs {
        FrameCoeffs::new(self.f.eval(x), self.g.eval(x), self.h.eval(x))
    }
}

/// Random field with coefficient polynomials of degree at most `degree`.
pub fn random_polynomial(rng: &mut impl Rng, degree: u8, scale: f64) -> PolynomialField {
    let degrees: Vec<u8> = (0..=degree).collect();
    PolynomialField {
        f: Polynomial::random(rng, &degrees, scale),
        g: Polynomial::random(rng, &degrees, scale),
        h: Polynomial::random(rng, &degrees, scale),
    }
}

/// Horizontal field with no second fiber harmonic.
///
/// The `B` and `C` coefficients are an affine function of the base point plus
/// an odd polynomial; odd polynomials carry only odd modes along fibers.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedField {
    pub base_g: (f64, Vec3),
    pub base_h: (f64, Vec3),
    pub odd_g: Polynomial,
    pub odd_h: Polynomial,
}

impl SmoothField for BalancedField {
    fn coeffs_at(&self, x: S3Point) -> FrameCoeffs {
        let n = hopf_project(x, 1.0).unit();
        let g = self.base_g.0 + self.base_g.1.dot(&n) + self.odd_g.eval(x);
        let h = self.base_h.0 + self.base_h.1.dot(&n) + self.odd_h.eval(x);
        FrameCoeffs::new(0.0, g, h)
    }
}

fn random_vec(rng: &mut impl Rng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-scale..=scale),
        rng.random_range(-scale..=scale),
        rng.random_range(-scale..=scale),
    )
}

pub fn random_balanced(rng: &mut impl Rng, scale: f64) -> BalancedField {
    BalancedField {
        base_g: (rng.random_range(-scale..=scale), random_vec(rng, scale)),
        base_h: (rng.random_range(-scale..=scale), random_vec(rng, scale)),
        odd_g: Polynomial::random(rng, &[1, 3], scale),
        odd_h: Polynomial::random(rng, &[1, 3], scale),
    }
}

/// Horizontal lift of the base field `n ↦ a × n + (b - (b·n) n)` plus `f A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectableField {
    pub rotation: Vec3,
    pub gradient: Vec3,
    pub vertical: Polynomial,
}

impl ProjectableField {
    /// The base field on the unit sphere.
    pub fn base_field(&self, n: &Vec3) -> Vec3 {
        self.rotation.cross(n) + (self.gradient - n * self.gradient.dot(n))
    }
}

impl SmoothField for ProjectableField {
    fn coeffs_at(&self, x: S3Point) -> FrameCoeffs {
        let n = hopf_project(x, 1.0).unit();
        let mut c = lift_coeffs(&self.base_field(&n), x, 1.0);
        c.f = self.vertical.eval(x);
        c
    }
}

pub fn random_projectable(rng: &mut impl Rng, scale: f64) -> ProjectableField {
    ProjectableField {
        rotation: random_vec(rng, scale),
        gradient: random_vec(rng, scale),
        vertical: Polynomial::random(rng, &[0, 1, 2], scale),
    }
}

/// Uniform random unit vector of R3.
pub fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = random_vec(rng, 1.0);
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Uniform random point of S3.
pub fn random_s3(rng: &mut impl Rng) -> S3Point {
    loop {
        let q = Quaternion::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        );
        let n = q.norm();
        if n > 0.1 && n <= 1.0 {
            return S3Point::normalize(q);
        }
    }
}

/// Horizontal mix `a · balanced + b · horizontal(projectable)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalMix {
    pub balanced: BalancedField,
    pub projectable: ProjectableField,
    pub weights: (f64, f64),
}

impl SmoothField for HorizontalMix {
    fn coeffs_at(&self, x: S3Point) -> FrameCoeffs {
        self.balanced.coeffs_at(x).scale(self.weights.0)
            + self.projectable.coeffs_at(x).horizontal().scale(self.weights.1)
    }
}

pub fn random_mix(rng: &mut impl Rng, weights: (f64, f64)) -> HorizontalMix {
    HorizontalMix {
        balanced: random_balanced(rng, 1.0),
        projectable: random_projectable(rng, 1.0),
        weights,
    }
}

/// Sum of two smooth fields.
pub struct Sum<'a>(pub &'a dyn SmoothField, pub &'a dyn SmoothField);

impl SmoothField for Sum<'_> {
    fn coeffs_at(&self, x: S3Point) -> FrameCoeffs {
        self.0.coeffs_at(x) + self.1.coeffs_at(x)
    }
}

/// A smooth field multiplied by a constant.
pub struct Scaled<'a>(pub f64, pub &'a dyn SmoothField);

impl SmoothField for Scaled<'_> {
    fn coeffs_at(&self, x: S3Point) -> FrameCoeffs {
        self.1.coeffs_at(x).scale(self.0)
    }
}
