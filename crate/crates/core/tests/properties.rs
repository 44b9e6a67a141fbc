use std::sync::Arc;

use hopf_slice::config::RunConfig;
use hopf_slice::fields::{l2_inner, project_bvf, project_pvf, BaseGrid, SampledField};
use hopf_slice::holonomy::{gauss_linking, mirror_fiber};
use hopf_slice::io::{field_to_string, parse_field};
use hopf_slice::quat::{hopf_project, pushforward_horizontal, FrameCoeffs, HopfFiber, Quaternion, S3Point, TangentS3, Vec3};
use hopf_slice::sphere::{exp_s3, log_s3};
use hopf_slice::synth::{random_polynomial, SmoothField};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn s3() -> impl Strategy<Value = S3Point> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("away from zero", |a| a.iter().map(|x| x * x).sum::<f64>() > 0.01)
        .prop_map(|a| S3Point::normalize(Quaternion::new(a[0], a[1], a[2], a[3])))
}

fn unit() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1.0f64..1.0)
        .prop_filter("away from zero", |a| a.iter().map(|x| x * x).sum::<f64>() > 0.01)
        .prop_map(|a| Vec3::new(a[0], a[1], a[2]).normalize())
}

fn field(seed: u64, sup: f64) -> SampledField {
    let f = random_polynomial(&mut ChaCha8Rng::seed_from_u64(seed), 3, 1.0);
    let grid = Arc::new(BaseGrid::fibonacci(24).unwrap());
    let x = SampledField::from_fn(grid, 16, 1.0, |p| f.coeffs_at(p)).unwrap();
    x.scale(sup / x.sup_norm())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, rng_seed: RngSeed::Fixed(11), ..ProptestConfig::default() })]

    #[test]
    fn log_inverts_exp(x in s3(), c in prop::array::uniform3(-1.5f64..1.5)) {
        let v = TangentS3::from_frame(x, FrameCoeffs::new(c[0], c[1], c[2]));
        let back = log_s3(x, exp_s3(&v).unwrap()).unwrap();
        prop_assert!((back.ambient() - v.ambient()).norm() < 1e-10);
    }

    #[test]
    fn projection_is_constant_on_fibers(x in s3(), t in -7.0f64..7.0) {
        for radius in [1.0, 0.5] {
            let a = hopf_project(x, radius).position();
            let b = hopf_project(x.along_fiber(t), radius).position();
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn horizontal_pushforward_doubles_length(x in s3(), g in -2.0f64..2.0, h in -2.0f64..2.0) {
        let v = TangentS3::from_frame(x, FrameCoeffs::new(0.0, g, h));
        let u = pushforward_horizontal(&v, 1.0).unwrap();
        prop_assert!((u.norm() - 2.0 * g.hypot(h)).abs() < 1e-12);
    }

    #[test]
    fn fibers_link_with_fixed_screw_sense(a in unit(), b in unit()) {
        prop_assume!((a - b).norm() > 0.3 && (a + b).norm() > 0.3);
        let (fa, fb) = (HopfFiber::over(&a), HopfFiber::over(&b));
        let l = gauss_linking(&fa.samples(256), &fb.samples(256)).unwrap();
        prop_assert_eq!(l.rounded, -1);
        prop_assert!(l.residual < 0.01);
        // Conjugation carries the Hopf pair onto a mirror pair at the same distance.
        let bar = |f: &HopfFiber| S3Point::normalize(f.basepoint().q().conj());
        let m = gauss_linking(&mirror_fiber(bar(&fa), 256), &mirror_fiber(bar(&fb), 256)).unwrap();
        prop_assert_eq!(m.rounded, 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, rng_seed: RngSeed::Fixed(12), ..ProptestConfig::default() })]

    #[test]
    fn decomposition_splits_orthogonally(seed in any::<u64>()) {
        let x = field(seed, 0.3);
        let (p, b) = (project_pvf(&x), project_bvf(&x));
        prop_assert!(p.add(&b).unwrap().sup_distance(&x).unwrap() < 1e-10);
        prop_assert!(l2_inner(&p, &b).unwrap().abs() < 1e-9);
        prop_assert!(project_pvf(&p).sup_distance(&p).unwrap() < 1e-10);
    }

    #[test]
    fn field_files_round_trip_exactly(seed in any::<u64>(), sup in 0.01f64..2.0) {
        let x = field(seed, sup);
        prop_assert_eq!(parse_field(&field_to_string(&x)).unwrap(), x);
    }
}

#[test]
fn config_echo_reparses_to_the_same_config() {
    let cfg = RunConfig::from_toml("seed = 7\nn_t = 32\nradius = 0.5\n").unwrap();
    let echo: String = cfg
        .echo()
        .lines()
        .map(|l| format!("{}\n", l.trim_start_matches("# ")))
        .collect();
    assert_eq!(RunConfig::from_toml(&echo).unwrap(), cfg);
}
