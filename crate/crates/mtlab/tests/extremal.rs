use std::sync::Arc;

use mtlab::extremal::*;
use mtlab::geometry::CurveSpec;
use mtlab::lab::corpus::random_packet_field;
use mtlab::LabError;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check_witness(variant: Variant, n: usize, r: f64) {
    let (s, w, plan) = build_multibush(variant, n, r, 3).unwrap();
    let shape = multibush_shape(variant, n, r).unwrap();
    assert!(plan.balls.len() >= shape.ball_target);
    let rep = multibush_report(&s, &w, &plan, 1 << 15).unwrap();
    assert!(
        rep.containment && rep.avoidance && rep.unimodular,
        "{rep:?}"
    );
    assert!(rep.min_alignment >= 0.1, "{}", rep.min_alignment);
    assert!(rep.c_prime > 0.0 && rep.c_prime.is_finite());
    let ax = axiom_check(&s, &AxiomOptions::default());
    assert!(ax.da0.pass && ax.da1.pass && ax.da2.pass, "{ax:?}");

    let back = MultibushPlan::from_json(&plan.to_json()).unwrap();
    assert_eq!(back, plan);
    let (s2, w2) = replay(&back).unwrap();
    assert_eq!(w2.points, w.points);
    for b in &plan.balls {
        let x: Vec<f64> = b.iter().map(|&v| v as f64).collect();
        let (a, b) = (s.value(&x), s2.value(&x));
        assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()), "{a} vs {b}");
    }
}

#[test]
fn hyperplane_witness_in_three_dimensions() {
    check_witness(Variant::S, 3, 64.0);
}

#[test]
fn hyperplane_witness_in_the_plane() {
    check_witness(Variant::S, 2, 128.0);
}

#[test]
fn slab_witness() {
    check_witness(Variant::L, 3, 128.0);
}

#[test]
fn tube_witness() {
    check_witness(Variant::P, 3, 512.0);
}

#[test]
fn witness_shapes_reject_bad_configurations() {
    assert!(matches!(
        multibush_shape(Variant::L, 2, 512.0),
        Err(LabError::ConfigError(_))
    ));
    assert!(matches!(
        multibush_shape(Variant::P, 3, 16.0),
        Err(LabError::ConfigError(_))
    ));
    assert!(matches!(
        multibush_shape(Variant::S, 5, 1024.0),
        Err(LabError::ConfigError(_))
    ));
    assert!("Q".parse::<Variant>().is_err());
}

#[test]
fn phase_alignment_survives_a_new_scan_order() {
    let (s, _, plan) = build_multibush(Variant::S, 3, 64.0, 5).unwrap();
    let o = order_robustness(&s, &plan, 8).unwrap();
    assert!(o.median_ratio >= 0.5 && o.median_ratio <= 2.0, "{o:?}");
    assert!(o.permuted_min_alignment >= 0.1);
}

#[test]
fn selected_tubes_avoid_earlier_balls() {
    let (s, _, plan) = build_multibush(Variant::S, 2, 128.0, 9).unwrap();
    let sys = s.tubes().unwrap();
    for (j, tubes) in plan.tubes.iter().enumerate() {
        let c: Vec<f64> = plan.balls[j].iter().map(|&v| v as f64).collect();
        for t in tubes {
            assert!(sys.contains_ball(t.tau, &t.h, &c, 0.5));
            assert!((sys.coefficient(t.tau, &t.h).norm() - 1.0).abs() <= 1e-12);
            for earlier in &plan.balls[..j] {
                let e: Vec<f64> = earlier.iter().map(|&v| v as f64).collect();
                assert!(!sys.touching(t.tau, &e, 0.5).contains(&t.h));
            }
        }
    }
}

#[test]
fn vanishing_structure_passes_trivially() {
    let curve = CurveSpec::<f64>::moment(2);
    let levels = admissible_levels(256.0, 2, 0.05).unwrap();
    let s = AxiomaticStructure::custom(
        &curve,
        256.0,
        levels,
        256.0,
        Arc::new(|_, _, _| Complex64::new(0.0, 0.0)),
    );
    let ax = axiom_check(&s, &AxiomOptions::default());
    assert!(ax.da0.pass && ax.da2.pass);
    assert_eq!(ax.da0.constant, 0.0);
    assert_eq!(ax.da2.constant, 0.0);
}

#[test]
fn packet_hierarchies_satisfy_the_axioms() {
    let curve = CurveSpec::<f64>::moment(2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let field = random_packet_field(&curve, 128.0, &mut rng).unwrap();
    let s = AxiomaticStructure::from_packets(Arc::new(field), 0.05).unwrap();
    assert!(s.packet_realizable);
    let ax = axiom_check(&s, &AxiomOptions::default());
    for a in [ax.da0, ax.da1, ax.da2] {
        assert!(a.pass && a.constant <= 4.0, "{a:?}");
    }
    let b =
        AxiomaticStructure::from_packets(Arc::new(bush_field(2, 128.0).unwrap()), 0.05).unwrap();
    let ax = axiom_check(&b, &AxiomOptions::default());
    assert!(ax.da0.pass && ax.da1.pass && ax.da2.pass, "{ax:?}");
}

#[test]
fn bush_concentrates_at_the_origin() {
    let f = bush_field(2, 256.0).unwrap();
    let rep = bush_report(&f);
    let q = rep.value_at_origin / rep.energy;
    assert!((0.25..=4.0).contains(&q), "{q}");
    let e = rep.energy / rep.prediction;
    assert!((0.25..=4.0).contains(&e), "{e}");
    let scale = 256f64.powf(0.5) * 256f64.powf(-1.5);
    assert!((0.25..=4.0).contains(&(rep.energy / scale)));
}

#[test]
fn single_packet_keeps_a_fixed_share_on_its_plank() {
    for n in [2usize, 3] {
        let p = sharpness_point(&single_packet_instance(n, 64.0).unwrap()).unwrap();
        let share = p.lhs / p.input_norm_sq;
        assert!((0.3..=1.0).contains(&share), "n={n}: {share}");
    }
}

#[test]
fn arc_sums() {
    let zero = vec![Complex64::new(0.0, 0.0); 8];
    assert_eq!(arc_sum_energy(2, 64.0, &zero).unwrap(), 0.0);
    let crowded = vec![Complex64::new(1.0, 0.0); 200];
    assert!(matches!(
        arc_sum_energy(2, 64.0, &crowded),
        Err(LabError::ConfigError(_))
    ));
    assert!(matches!(
        arc_sum_energy(2, 64.0, &[]),
        Err(LabError::ConfigError(_))
    ));
    let a = arc_sum_energy(2, 64.0, &arc_coefficients(64.0, 2)).unwrap();
    let b = arc_sum_energy(2, 256.0, &arc_coefficients(256.0, 2)).unwrap();
    assert!((a / b - 1.0).abs() < 0.25, "{a} {b}");
}
