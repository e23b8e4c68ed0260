use boxcast::assemblages::{
    assemblage_kl, cq_state, is_broadcast_assemblage, is_unsteerable, is_urns, lhs_feasibility, piani_check,
    product, random_assemblage, random_lhs_assemblage, random_urns_losr, steering_ub_lhs, werner_assemblage,
    Assemblage, FeasibilityConfig, FeasibilityStatus, FwConfig, ResponseCatalogue,
};
use boxcast::quantum::{quantum_relative_entropy, random_density, sic_povm_qubit, CMatrix};
use boxcast::sampling::dirichlet;
use boxcast::tensor::ProbVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn assemblage_divergence_is_the_sup_over_sampled_input_distributions() {
    let mut r = rng(1);
    for _ in 0..3 {
        let p = random_assemblage::<f64, _>(&mut r, 2, 2, 2).unwrap();
        let q = random_assemblage::<f64, _>(&mut r, 2, 2, 2).unwrap();
        let max_form = assemblage_kl(&p, &q).unwrap().value;
        let mut sup = f64::NEG_INFINITY;
        for k in 0..1000 {
            let pi = match k {
                0 => vec![1.0, 0.0],
                1 => vec![0.0, 1.0],
                _ => dirichlet(&mut r, 2, 1.0),
            };
            let pi = ProbVector::new(pi).unwrap();
            let v = quantum_relative_entropy(&cq_state(&p, &pi).unwrap().matrix, &cq_state(&q, &pi).unwrap().matrix)
                .unwrap();
            assert!(v <= max_form + 1e-9);
            sup = sup.max(v);
        }
        assert!((sup - max_form).abs() < 1e-9, "{sup} vs {max_form}");
    }
}

#[test]
fn cq_divergence_splits_over_blocks() {
    let mut r = rng(2);
    let p = random_assemblage::<f64, _>(&mut r, 3, 2, 2).unwrap();
    let q = random_assemblage::<f64, _>(&mut r, 3, 2, 2).unwrap();
    let pi = ProbVector::new(vec![0.2, 0.5, 0.3]).unwrap();
    let whole = quantum_relative_entropy(&cq_state(&p, &pi).unwrap().matrix, &cq_state(&q, &pi).unwrap().matrix).unwrap();
    let per = assemblage_kl(&p, &q).unwrap().per_input;
    let split: f64 = pi.weights().iter().zip(&per).map(|(w, v)| w * v).sum();
    assert!((whole - split).abs() < 1e-10);
}

#[test]
fn assemblage_divergence_vanishes_only_on_equal_assemblages() {
    let mut r = rng(3);
    let p = random_assemblage::<f64, _>(&mut r, 2, 3, 2).unwrap();
    assert!(assemblage_kl(&p, &p).unwrap().value < 1e-9);
    let q = random_assemblage::<f64, _>(&mut r, 2, 3, 2).unwrap();
    let near = p.mix(&q, 1.0 - 1e-4).unwrap();
    assert!(p.max_abs_diff(&near).unwrap() > 1e-9);
    assert!(assemblage_kl(&p, &near).unwrap().value > 0.0);
}

#[test]
fn broadcast_relation() {
    let a = werner_assemblage::<f64>(0.8).unwrap();
    let b = werner_assemblage::<f64>(0.6).unwrap();
    assert!(is_broadcast_assemblage(&product(&a, &a), &a).unwrap());
    assert!(!is_broadcast_assemblage(&product(&a, &b), &a).unwrap());
    // 1e-3 perturbation that keeps the assemblage valid
    let noisy = product(&a, &a).mix(&product(&b, &b), 1.0 - 1e-3).unwrap();
    assert!(!is_broadcast_assemblage(&noisy, &a).unwrap());
}

#[test]
fn losr_image_matches_nested_summation() {
    let mut r = rng(4);
    let asm = random_assemblage::<f64, _>(&mut r, 2, 2, 2).unwrap();
    let map = random_urns_losr::<f64>(9, 2, 3).unwrap();
    let out = map.apply(&asm).unwrap();
    let r_l = map.lambda_weights().weights();
    for xw in 0..4 {
        for aw in 0..4 {
            let mut acc = CMatrix::<f64>::zeros(4, 4);
            for (l, t) in map.alice().iter().enumerate() {
                for x in 0..2 {
                    for a in 0..2 {
                        let w = r_l[l] * t.pre[xw * 2 + x] * t.post[((xw * 2 + x) * 2 + a) * 4 + aw];
                        for k in map.channels()[l].kraus_ops() {
                            let term = &(k * asm.element(x, a)) * &k.adjoint();
                            acc.add_scaled(w, &term);
                        }
                    }
                }
            }
            assert!(out.element(xw, aw).max_abs_diff(&acc) < 1e-13);
        }
    }
}

#[test]
fn unsteerable_assemblages_stay_unsteerable_under_losr() {
    let mut r = rng(5);
    let cfg = FeasibilityConfig::default();
    for i in 0..50 {
        let asm = random_lhs_assemblage::<f64, _>(&mut r, 2, 2).unwrap();
        let map = random_urns_losr::<f64>(100 + i, 2, 1 + (i as usize % 4)).unwrap();
        let rep = is_urns(&map.apply(&asm).unwrap(), &cfg).unwrap();
        assert_eq!(rep.status, FeasibilityStatus::ModelFound, "instance {i}");
        assert!(rep.residual <= 1e-6);
    }
}

#[test]
fn unsteerable_assemblages_have_a_vanishing_bound() {
    let mut r = rng(6);
    for _ in 0..5 {
        let asm = random_lhs_assemblage::<f64, _>(&mut r, 2, 2).unwrap();
        let b = steering_ub_lhs(&asm, &FwConfig::default()).unwrap();
        assert!(b.upper_bound <= 1e-4);
        let w = b.witness_assemblage(&asm).unwrap();
        let rep = lhs_feasibility(&w, &ResponseCatalogue::deterministic(2, 2), &FeasibilityConfig::default()).unwrap();
        assert!(rep.residual <= 1e-6);
    }
}

#[test]
fn steering_functional_separates_the_steerable_werner_assemblage() {
    let asm = werner_assemblage::<f64>(0.9).unwrap();
    let rep = is_unsteerable(&asm, &FeasibilityConfig::default()).unwrap();
    let f = rep.functional.expect("functional for a steerable input");
    assert!(rep.corroborated);
    assert!(f.evaluate(asm.elements()) > f.bound);
    // the bound holds on every LHS assemblage
    let mut r = rng(7);
    for _ in 0..20 {
        let lhs = random_lhs_assemblage::<f64, _>(&mut r, 2, 2).unwrap();
        assert!(f.evaluate(lhs.elements()) <= f.bound + 1e-9);
    }
}

#[test]
fn piani_inequality_on_random_states() {
    let mut r = rng(8);
    let sic = sic_povm_qubit::<f64>();
    for i in 0..100 {
        let rho = random_density::<f64, _>(&mut r, 4, 1 + i % 4);
        let sigma = random_density::<f64, _>(&mut r, 4, 4);
        let rep = piani_check(&rho, &sigma, &sic).unwrap();
        assert!(rep.holds, "instance {i}: {rep:?}");
    }
}

#[test]
fn json_round_trip() {
    let mut r = rng(9);
    let a = random_assemblage::<f64, _>(&mut r, 2, 2, 2).unwrap();
    let b = product(&a, &a);
    for asm in [a, b] {
        let text = serde_json::to_string(&asm).unwrap();
        let back: Assemblage<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, asm);
    }
    let bad = r#"{"r": 1, "s": 2, "dim": 2, "elements": {"0,0": {"dim": 2, "re": [[1,0],[0,0]], "im": [[0,0],[0,0]]}}}"#;
    assert!(serde_json::from_str::<Assemblage<f64>>(bad).is_err());
}
