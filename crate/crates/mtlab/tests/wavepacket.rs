use mtlab::geometry::{curvature_boxes, AnisotropicBox, CurveSpec};
use mtlab::wavepacket::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const R: f64 = 256.0;

fn boxes(n: usize, r: f64) -> Vec<AnisotropicBox<f64>> {
    curvature_boxes(&CurveSpec::<f64>::moment(n), r)
        .unwrap()
        .boxes
}

fn sample_field(theta: &AnisotropicBox<f64>, seed: u64) -> (GaussianPacketSum, Field) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = GaussianPacketSum::random(theta, 1.0 / 24.0, 2, &mut rng);
    let f = g.sample(FieldGrid::for_plank(theta, R, 29.0));
    (g, f)
}

#[test]
fn recovered_coefficients_match_the_synthesis() {
    let bs = boxes(2, R);
    let theta = &bs[5];
    let (g, f) = sample_field(theta, 3);
    let d = decompose(&f, theta, 28, DecomposeMode::Strict).unwrap();
    let worst = d
        .coeffs
        .iter()
        .map(|c| (c.a() - g.coefficient(&c.m)).norm())
        .fold(0.0, f64::max);
    let scale = d.coeffs.iter().map(|c| c.a().norm()).fold(0.0, f64::max);
    assert!(worst <= 1e-6 * scale, "{worst:e} vs {scale:e}");
    assert!(d.leakage < 1e-6);
}

#[test]
fn decomposition_is_linear() {
    let bs = boxes(2, R);
    let theta = &bs[2];
    let (_, f) = sample_field(theta, 1);
    let (_, h) = sample_field(theta, 2);
    let (alpha, beta) = (Complex64::new(0.3, -1.2), Complex64::new(-2.0, 0.5));
    let mut combo = f.clone();
    combo.scale(alpha);
    let mut hb = h.clone();
    hb.scale(beta);
    combo.add_assign(&hb).unwrap();
    let df = decompose(&f, theta, 28, DecomposeMode::Strict).unwrap();
    let dh = decompose(&h, theta, 28, DecomposeMode::Strict).unwrap();
    let dc = decompose(&combo, theta, 28, DecomposeMode::Strict).unwrap();
    assert_eq!(dc.coeffs.len(), df.coeffs.len());
    for ((c, a), b) in dc.coeffs.iter().zip(&df.coeffs).zip(&dh.coeffs) {
        assert_eq!(c.m, a.m);
        let want = alpha * a.a() + beta * b.a();
        assert!((c.a() - want).norm() <= 1e-8, "{:?}", c.m);
    }
}

#[test]
fn reconstruction_of_a_sum_over_boxes() {
    let bs = boxes(2, R);
    let mut coeffs = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for t in [1usize, 4] {
        for _ in 0..3 {
            let m = vec![rng.gen_range(-3..=3), rng.gen_range(-3..=3)];
            coeffs.push(WavePacketCoeff::new(
                t,
                m,
                Complex64::from_polar(1.0, rng.gen_range(0.0..6.0)),
            ));
        }
    }
    let grid = FieldGrid::cube(2, 24.0, 1);
    let field = reconstruct(&coeffs, &bs, &grid);
    for flat in (0..grid.len()).step_by(37) {
        let x = grid.point(flat);
        let direct: Complex64 = coeffs
            .iter()
            .map(|c| packet_value(&bs[c.theta_index], &c.m, c.a(), &x))
            .sum();
        assert!((field.data[flat] - direct).norm() <= 1e-10 * (1.0 + direct.norm()));
    }
}

#[test]
fn norm_relation_holds_across_boxes_and_exponents() {
    for n in [2usize, 3] {
        let p_crit = (n * (n + 1)) as f64;
        for p in [2.0, 6.0, p_crit] {
            let mut ratios = Vec::new();
            for r in [64.0, 512.0] {
                for theta in boxes(n, r) {
                    let a = Complex64::new(0.7, 0.2);
                    let lp = packet_lp_norm(&theta, a, p);
                    let l2 = packet_l2_sq(&theta, a).sqrt();
                    let vol = theta.plank_volume();
                    ratios.push(lp / (vol.powf(1.0 / p - 0.5) * l2));
                }
            }
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().cloned().fold(0.0, f64::max);
            assert!(
                lo > 0.0 && hi / lo < 1.0 + 1e-9,
                "n={n} p={p}: [{lo}, {hi}]"
            );
        }
    }
}

/// |f_T| ≤ C w_{θ,N} with one C for every θ: both sides are functions of T_θ x.
#[test]
fn packet_weight_constant_is_uniform_over_boxes() {
    let bs = boxes(2, R);
    let a = Complex64::new(1.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ys: Vec<[f64; 2]> = (0..2000)
        .map(|_| [rng.gen_range(-40.0..40.0), rng.gen_range(-40.0..40.0)])
        .collect();
    let constant = |theta: &AnisotropicBox<f64>| {
        let w = PacketWeight::default_for(theta);
        let tinv = theta.t_mat.inverse().unwrap();
        ys.iter()
            .map(|y| {
                let x = tinv.mul_vec(y);
                packet_value(theta, &[0, 0], a, &x).norm() / w.eval(&x)
            })
            .fold(0.0, f64::max)
    };
    let c0 = constant(&bs[0]);
    assert!(c0.is_finite() && c0 > 0.0);
    for theta in &bs[1..] {
        let c = constant(theta);
        assert!((c / c0 - 1.0).abs() <= 1e-6, "{c} vs {c0}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn packet_modulus_is_translation_covariant(
        t in 0usize..8, m0 in -5i64..5, m1 in -5i64..5, y0 in -3.0f64..3.0, y1 in -3.0f64..3.0
    ) {
        let bs = boxes(2, 64.0);
        let theta = &bs[t];
        let a = Complex64::new(1.0, 0.0);
        let base = mtlab::geometry::Plank::new(theta, vec![0, 0]).center();
        let shifted = mtlab::geometry::Plank::new(theta, vec![m0, m1]).center();
        let tinv = theta.t_mat.inverse().unwrap();
        let off = tinv.mul_vec(&[y0, y1]);
        let x0: Vec<f64> = base.iter().zip(&off).map(|(b, o)| b + o).collect();
        let x1: Vec<f64> = shifted.iter().zip(&off).map(|(b, o)| b + o).collect();
        let v0 = packet_value(theta, &[0, 0], a, &x0).norm();
        let v1 = packet_value(theta, &[m0, m1], a, &x1).norm();
        prop_assert!((v0 - v1).abs() <= 1e-9 * (1.0 + v0));
    }
}
