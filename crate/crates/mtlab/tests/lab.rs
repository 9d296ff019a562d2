use mtlab::extremal::{
    bump_weight_instance, bush_instance, sharpness_sweep, single_packet_instance,
};
use mtlab::geometry::CurveSpec;
use mtlab::lab::corpus::random_packet_field;
use mtlab::lab::*;
use mtlab::wavepacket::FieldGrid;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn hyperplane_transfer_carries_the_lift_factor() {
    for n in [2usize, 3] {
        let r = if n == 2 { 128.0 } else { 64.0 };
        let ext = corpus_instance(
            IneqId::Thm41,
            n,
            r,
            4,
            WeightKind::Sparse,
            Params::default(),
        )
        .unwrap();
        let pk = corpus_instance(
            IneqId::Cor35,
            n,
            r,
            4,
            WeightKind::Sparse,
            Params::default(),
        )
        .unwrap();
        let pk = InequalityInstance::new(
            IneqId::Cor35,
            &pk.curve,
            pk.radius(),
            pk.params,
            pk.source.clone(),
            ext.weight.clone(),
        )
        .unwrap();
        let lifted = q_factor(&ext).unwrap();
        let base = q_factor(&pk).unwrap();
        let want = r.powi(n as i32 - 1) * base;
        assert!(
            (lifted - want).abs() <= 1e-12 * want,
            "n={n}: {lifted} vs {want}"
        );
    }
}

#[test]
fn sweep_csv_is_deterministic_and_well_formed() {
    let radii = [32.0, 64.0, 128.0];
    let run = || {
        let res = exponent_sweep(
            IneqId::Cor33,
            |r| {
                corpus_instance(
                    IneqId::Cor33,
                    2,
                    r,
                    11,
                    WeightKind::Clustered,
                    Params::default(),
                )
            },
            &radii,
        )
        .unwrap();
        let mut buf = Vec::new();
        res.write_csv(&mut buf, true).unwrap();
        (res, String::from_utf8(buf).unwrap())
    };
    let (res, a) = run();
    let (_, b) = run();
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), radii.len() + 1);
    for (line, row) in lines[1..].iter().zip(&res.rows) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0], "cor33");
        assert_eq!(cells[1], "2");
        assert_eq!(cells[2].parse::<f64>().unwrap(), row.radius);
        assert_eq!(cells[5].parse::<f64>().unwrap(), row.ratio);
    }
    let side = res.sidecar("abc", 11);
    let fit = res.fit.unwrap();
    assert_eq!(side.slope, Some(fit.slope));
}

#[test]
fn sweeps_reject_short_scale_lists() {
    let err = exponent_sweep(
        IneqId::Cor35,
        |r| {
            corpus_instance(
                IneqId::Cor35,
                2,
                r,
                1,
                WeightKind::Sparse,
                Params::default(),
            )
        },
        &[32.0, 64.0],
    )
    .unwrap_err();
    assert!(matches!(err, mtlab::LabError::ConfigError(_)));
}

#[test]
fn bump_weight_ratio_does_not_grow() {
    let radii: Vec<f64> = (5..=9).map(|k| 2f64.powi(k)).collect();
    for seed in 1..=2 {
        let res =
            exponent_sweep(IneqId::Cor31a, |r| bump_weight_instance(2, r, seed), &radii).unwrap();
        let slope = res.fit.unwrap().slope;
        assert!(slope.abs() <= 0.2, "seed {seed}: {slope}");
    }
}

#[test]
fn bush_ratio_does_not_grow() {
    let radii: Vec<f64> = (5..=9).map(|k| 2f64.powi(k)).collect();
    let res = exponent_sweep(IneqId::Cor31a, |r| bush_instance(2, r), &radii).unwrap();
    assert!(res.fit.unwrap().slope <= 0.2);
}

#[test]
fn single_packet_sweep_reaches_the_hyperplane_exponent() {
    let sweep = sharpness_sweep(|r| single_packet_instance(3, r), &[8.0, 64.0, 512.0]).unwrap();
    let bound = mtlab::extremal::Variant::S.target_exponent(3);
    assert!(
        sweep.fit.slope >= bound - 0.2,
        "{} vs {bound}",
        sweep.fit.slope
    );
}

#[test]
fn refined_check_modes_order_the_incidences() {
    let curve = CurveSpec::<f64>::moment(2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let f = random_packet_field(&curve, 128.0, &mut rng).unwrap();
    let c = refined_decoupling_check(&f, 6.0, 0.05, mtlab::geometry::IncidenceMode::Containment)
        .unwrap();
    let i = refined_decoupling_check(&f, 6.0, 0.05, mtlab::geometry::IncidenceMode::Intersection)
        .unwrap();
    assert!(i.m >= c.m);
    assert!(c.ratio > 0.0 && c.ratio.is_finite());
    assert!(
        refined_decoupling_check(&f, 7.0, 0.05, mtlab::geometry::IncidenceMode::Containment)
            .is_err()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weighted_energy_is_quadratic(re in -4.0f64..4.0, im in -4.0f64..4.0, seed in any::<u64>()) {
        let inst = corpus_instance(IneqId::Cor35, 2, 32.0, seed, WeightKind::Clustered, Params::default()).unwrap();
        let Source::Packets(src) = &inst.source else { unreachable!() };
        let mut f = src.field.sample(&FieldGrid::ball_box(2, 32.0));
        let e1 = weighted_energy(&f, &inst.weight).unwrap();
        let a = Complex64::new(re, im);
        f.scale(a);
        let e2 = weighted_energy(&f, &inst.weight).unwrap();
        prop_assert!((e2 - a.norm_sqr() * e1).abs() <= 1e-12 * (1.0 + e2));
    }

    #[test]
    fn corpus_ratios_are_finite(seed in 0u64..1000) {
        let inst = corpus_instance(IneqId::Cor34, 2, 64.0, seed, WeightKind::PlankAligned, Params::default()).unwrap();
        let ev = evaluate(&inst).unwrap();
        prop_assert!(ev.lhs >= 0.0 && ev.rhs > 0.0);
        prop_assert!(ev.ratio.is_finite());
    }
}
