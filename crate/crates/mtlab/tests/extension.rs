use std::f64::consts::PI;

use mtlab::extension::*;
use mtlab::geometry::CurveSpec;
use mtlab::wavepacket::FieldGrid;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn trig(xi: f64) -> Complex64 {
    Complex64::new((3.0 * xi).cos(), (5.0 * xi).sin()) + 0.5
}

#[test]
fn modulation_translates_the_extension() {
    for n in [2usize, 3] {
        let c = CurveSpec::<f64>::moment(n);
        let r = 32.0;
        let g = CurveDensity::from_fn(&c, 2.0 * r, trig);
        let x0: Vec<f64> = (0..n).map(|i| 3.0 - 2.0 * i as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..n).map(|_| rng.gen_range(-r / 2.0..r / 2.0)).collect())
            .collect();
        let shifted: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| p.iter().zip(&x0).map(|(a, b)| a - b).collect())
            .collect();
        let lhs = extend_points(&g.modulate(&x0), &pts).unwrap();
        let rhs = extend_points(&g, &shifted).unwrap();
        let worst = lhs
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-8, "n={n}: {worst:e}");
    }
}

#[test]
fn extension_is_linear() {
    let c = CurveSpec::<f64>::moment(2);
    let r = 24.0;
    let g = CurveDensity::from_fn(&c, r, trig);
    let h = CurveDensity::from_fn(&c, r, |xi| Complex64::from_polar(1.0, 7.0 * xi));
    let (a, b) = (Complex64::new(2.0, -1.0), Complex64::new(0.0, 0.5));
    let grid = FieldGrid::cube(2, r, 16);
    let combo = extend(&g.scale(a).add(&h.scale(b)).unwrap(), &grid).unwrap();
    let eg = extend(&g, &grid).unwrap();
    let eh = extend(&h, &grid).unwrap();
    for i in 0..grid.len() {
        let want = a * eg.data[i] + b * eh.data[i];
        assert!((combo.data[i] - want).norm() <= 1e-10 * (1.0 + want.norm()));
    }
}

#[test]
fn quadrature_norm_is_converged() {
    for n in [2usize, 3] {
        let c = CurveSpec::<f64>::moment(n);
        for r in [32.0, 256.0] {
            let coarse = CurveDensity::from_fn(&c, r, trig).norm_sq();
            let fine = CurveDensity::from_fn(&c, 2.0 * r, trig).norm_sq();
            assert!((coarse - fine).abs() <= 1e-3 * fine, "n={n} R={r}");
        }
    }
}

#[test]
fn planar_ball_transform_matches_polar_quadrature() {
    let r = 5.0;
    for t in [0.0, 0.03, 0.11, 0.4] {
        let (nr, na) = (800, 256);
        let mut s = 0.0;
        for i in 0..nr {
            let rho = (i as f64 + 0.5) * r / nr as f64;
            for j in 0..na {
                let phi = (j as f64 + 0.5) * 2.0 * PI / na as f64;
                s += (2.0 * PI * t * rho * phi.cos()).cos() * rho;
            }
        }
        s *= (r / nr as f64) * (2.0 * PI / na as f64);
        let exact = ball_fourier(2, r, &[t, 0.0]);
        assert!(
            (s - exact).abs() <= 1e-4 * (PI * r * r),
            "t={t}: {s} vs {exact}"
        );
    }
}

#[test]
fn ball_energy_matches_a_lattice_sum_for_a_narrow_band() {
    // one short arc: Eg is nearly constant on unit cells, so the lattice sum approximates the integral
    let c = CurveSpec::<f64>::moment(2);
    let r = 40.0;
    let g = CurveDensity::on_arcs(
        &c,
        2.0 * r,
        &[(0.4, 0.41, Complex64::new(1.0, 0.0))],
        |_| Complex64::new(1.0, 0.0),
    );
    let exact = ball_energy(&g, r).unwrap();
    let grid = FieldGrid::ball_box(2, r);
    let eg = extend(&g, &grid).unwrap();
    let lattice = eg.norm_sq_in_ball();
    assert!(
        (lattice - exact).abs() <= 0.05 * exact,
        "{lattice} vs {exact}"
    );
}

#[test]
fn unresolved_panels_are_rejected() {
    let c = CurveSpec::<f64>::moment(2);
    let g = CurveDensity::from_fn(&c, 16.0, trig);
    assert!(ball_energy(&g, 256.0).is_err());
}

#[test]
fn agmon_hormander_ratio_is_stable_in_the_plane() {
    let c = CurveSpec::<f64>::moment(2);
    let ratios: Vec<f64> = [32.0, 64.0, 128.0]
        .iter()
        .map(|&r| {
            let g = CurveDensity::from_fn(&c, r, |_| Complex64::new(1.0, 0.0));
            agmon_hormander_ratio(&g, r).unwrap()
        })
        .collect();
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi / lo < 1.5, "{ratios:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scaling_the_density_scales_the_energy(re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let c = CurveSpec::<f64>::moment(2);
        let r = 16.0;
        let g = CurveDensity::from_fn(&c, r, trig);
        let a = Complex64::new(re, im);
        let e1 = ball_energy(&g, r).unwrap();
        let e2 = ball_energy(&g.scale(a), r).unwrap();
        prop_assert!((e2 - a.norm_sqr() * e1).abs() <= 1e-9 * (1.0 + e2.abs()));
    }
}
