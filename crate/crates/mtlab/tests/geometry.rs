use mtlab::geometry::{
    curvature_boxes, derived_family, frenet_frame, plank_index, CurveSpec, FamilyKind, Plank, Scale,
};
use mtlab::linalg::Mat;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn curve_for(which: usize) -> CurveSpec<f64> {
    match which {
        0 => CurveSpec::moment(2),
        1 => CurveSpec::moment(3),
        2 => CurveSpec::moment(4),
        _ => CurveSpec::helix(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn frames_are_orthonormal(which in 0usize..4, u in 0.0f64..1.0) {
        let c = curve_for(which);
        let (a, b) = c.interval;
        let f = frenet_frame(&c, a + u * (b - a)).unwrap();
        prop_assert!(f.orthonormality_residual() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn planks_tile_space(which in 0usize..4, k in 4i32..10, seed in any::<u64>()) {
        let c = curve_for(which);
        let r = 2f64.powi(k);
        let s = curvature_boxes::<f64>(&c, r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..150 {
            let x: Vec<f64> = (0..c.n).map(|_| rng.gen_range(-r..r)).collect();
            let theta = &s.boxes[rng.gen_range(0..s.boxes.len())];
            let m = plank_index(theta, &x);
            prop_assert!(Plank::new(theta, m.clone()).contains(&x));
            for j in 0..c.n {
                for d in [-1, 1] {
                    let mut m2 = m.clone();
                    m2[j] += d;
                    prop_assert!(!Plank::new(theta, m2).contains(&x));
                }
            }
        }
    }
}

#[test]
fn plank_volume_law_is_uniform_over_directions() {
    for which in 0..4 {
        let c = curve_for(which);
        let n = c.n as i32;
        for k in [6, 9] {
            let r = 2f64.powi(k);
            let s = curvature_boxes::<f64>(&c, r).unwrap();
            let ratios: Vec<f64> = s
                .boxes
                .iter()
                .map(|t| t.plank_volume() / r.powf((n + 1) as f64 / 2.0))
                .collect();
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().cloned().fold(0.0, f64::max);
            assert!(lo > 0.0 && hi / lo < 1.0 + 1e-9, "curve {which}: {lo} {hi}");
        }
    }
}

/// Every box holds a Euclidean ball of radius about δⁿ/10 around the curve, with δⁿ ∈ (2⁻ⁿ/R, 1/R].
const SLEEVE_REACH: f64 = 0.08;

#[test]
fn sleeve_covers_the_curve_neighbourhood() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for which in 0..4 {
        let c = curve_for(which);
        for r in [64.0, 256.0, 512.0] {
            let s = curvature_boxes::<f64>(&c, r).unwrap();
            let reach = SLEEVE_REACH * s.scale.delta.powi(c.n as i32);
            let (a, b) = c.interval;
            for _ in 0..2000 {
                let xi = rng.gen_range(a..b);
                assert!(!s.boxes_containing(&c.point(xi)).is_empty());
                let mut p = c.point(xi);
                let dir: Vec<f64> = (0..c.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                let rad = rng.gen_range(0.0..reach);
                for (pi, d) in p.iter_mut().zip(&dir) {
                    *pi += d / len * rad;
                }
                assert!(
                    !s.boxes_containing(&p).is_empty(),
                    "curve {which}, R = {r}: uncovered at xi = {xi}"
                );
            }
        }
    }
}

#[test]
fn slab_slices_partition_their_plank() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [2usize, 3] {
        let c = CurveSpec::<f64>::moment(n);
        let r = 512.0;
        let scale = Scale::new(r, n).unwrap();
        let s = curvature_boxes::<f64>(&c, r).unwrap();
        let theta = &s.boxes[s.boxes.len() / 3];
        let plank = Plank::new(theta, vec![1; n]);
        let slabs = derived_family(&plank, FamilyKind::Slab, 0.05, &scale);
        assert_eq!(slabs.len() as f64, 1.0 / scale.delta);
        let tinv = theta.t_mat.inverse().unwrap();
        let mut bad = 0usize;
        let trials = 20_000;
        for _ in 0..trials {
            // y in the doubled index cube, mapped back to x
            let y: Vec<f64> = (0..n).map(|_| 1.0 + rng.gen_range(-1.0..1.0)).collect();
            let x = Mat::mul_vec(&tinv, &y);
            let inside = plank.contains(&x);
            let hits = slabs.iter().filter(|l| l.contains(&x)).count();
            if hits != usize::from(inside) {
                bad += 1;
            }
        }
        assert!(
            bad as f64 / trials as f64 <= 1e-9,
            "{bad} mismatches at n = {n}"
        );
    }
}
