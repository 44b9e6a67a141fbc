//! Browser bindings for the demo page in `www/`.
//!
//! Every export returns a flat `Float64Array`. The plain functions in
//! [`demo`] do the work and are usable from native code.

use wasm_bindgen::prelude::*;

pub mod demo {
    use std::f64::consts::TAU;

    use hopf_slice::config::RunConfig;
    use hopf_slice::diffeo::DiffeoSpec;
    use hopf_slice::holonomy::stereographic;
    use hopf_slice::quat::{frame_at, pushforward_horizontal, HopfFiber, Quaternion, S2Point, S3Point, Vec3};
    use hopf_slice::slice::{landscape, minimize, TargetCurve};
    use hopf_slice::{GeomError, Result};

    fn direction(u: f64, v: f64) -> Result<Vec3> {
        Ok(S2Point::from_spherical(u, v, 1.0)?.unit())
    }

    /// Stereographic images of the fibers over `(u, v)` pairs, `samples`
    /// points each, as consecutive `x y z` triples.
    pub fn fibers(uv: &[f64], samples: usize) -> Result<Vec<f64>> {
        if !uv.len().is_multiple_of(2) || samples == 0 {
            return Err(GeomError::Config("expected (u, v) pairs and a positive sample count".into()));
        }
        let pole = S3Point::new(Quaternion::new(0.0, 0.0, 0.0, 1.0))?;
        let mut out = Vec::with_capacity(uv.len() / 2 * samples * 3);
        for p in uv.chunks(2) {
            let fiber = HopfFiber::over(&direction(p[0], p[1])?);
            for x in fiber.samples(samples) {
                let y = stereographic(x, pole);
                out.extend([y.x, y.y, y.z]);
            }
        }
        Ok(out)
    }

    /// Energy over an `n × n` chart grid around the source fiber, row-major
    /// from `(-w, -w)`, followed by the solver winner's chart coordinates,
    /// its energy and the Newton iteration count.
    pub fn energy_landscape(diffeo: &str, u: f64, v: f64, n: usize, half_width: f64) -> Result<Vec<f64>> {
        if n == 0 || half_width.is_nan() || half_width <= 0.0 {
            return Err(GeomError::Config("grid size and half width must be positive".into()));
        }
        let spec: DiffeoSpec = diffeo.parse()?;
        let cfg = RunConfig::default();
        let opts = cfg.solver_options();
        let source = direction(u, v)?;
        let d = spec.build(&source, cfg.n_t)?;
        let target = TargetCurve::image_of(d.as_ref(), &HopfFiber::over(&source), cfg.n_t)?;
        let mut out: Vec<f64> = landscape(&source, &target, &opts, n, half_width)?
            .iter()
            .map(|s| s.energy)
            .collect();
        let res = minimize(&source, &target, &opts, None)?;
        let w = res.winner_coords();
        out.extend([w[0], w[1], res.energy, res.iterations as f64]);
        Ok(out)
    }

    /// `p_*B` along the fiber over `(u, v)` in the fiber's chart axes, as
    /// `samples` consecutive `x y` pairs for `t` in `[0, 2π)`.
    pub fn double_wrap(u: f64, v: f64, radius: f64, samples: usize) -> Result<Vec<f64>> {
        let fiber = HopfFiber::over(&direction(u, v)?);
        let (ex, ey) = fiber.chart_axes();
        let mut out = Vec::with_capacity(2 * samples);
        for k in 0..samples {
            let t = TAU * k as f64 / samples as f64;
            let pb = pushforward_horizontal(&frame_at(fiber.point(t))[1], radius)?;
            out.extend([pb.dot(&ex), pb.dot(&ey)]);
        }
        Ok(out)
    }
}

fn js(e: hopf_slice::GeomError) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn fibers(uv: &[f64], samples: usize) -> Result<Vec<f64>, JsError> {
    demo::fibers(uv, samples).map_err(js)
}

#[wasm_bindgen(js_name = energyLandscape)]
pub fn energy_landscape(diffeo: &str, u: f64, v: f64, n: usize, half_width: f64) -> Result<Vec<f64>, JsError> {
    demo::energy_landscape(diffeo, u, v, n, half_width).map_err(js)
}

#[wasm_bindgen(js_name = doubleWrap)]
pub fn double_wrap(u: f64, v: f64, radius: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    demo::double_wrap(u, v, radius, samples).map_err(js)
}
