use boxcast::behaviors::{
    condition_on_pair0, marginal_pair, pair0_probability, pr_box, product, Behavior, Scenario,
};
use boxcast::divergence::{box_kl, box_kl_pi_grid, verify_chain_rule_box};
use boxcast::losr::{contractivity_check, random_losr, LosrMap, LosrSizes};
use boxcast::polytopes::{
    local_deterministic_vertices, lrns_vertices_broadcast_222, membership, ns_vertices_222,
};
use boxcast::sampling::{dirichlet, random_mixture, random_ns_222, random_ns_broadcast};
use boxcast::tensor::{chain_rule_split, kl_divergence, JointTable, ProbVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Direct `Σ p log2(p/q)` with the usual conventions.
fn kl_oracle(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b == 0.0 {
                return f64::INFINITY;
            }
            s += a * (a / b).log2();
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kl_is_nonnegative_and_matches_the_direct_sum(seed in any::<u64>(), n in 2usize..12) {
        let mut r = rng(seed);
        let p: Vec<f64> = dirichlet(&mut r, n, 0.7);
        let q: Vec<f64> = dirichlet(&mut r, n, 0.7);
        let v = kl_divergence(&ProbVector::new(p.clone()).unwrap(), &ProbVector::new(q.clone()).unwrap()).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert!((v - kl_oracle(&p, &q)).abs() < 1e-12);
        let same = kl_divergence(&ProbVector::new(p.clone()).unwrap(), &ProbVector::new(p).unwrap()).unwrap();
        prop_assert!(same.abs() < 1e-12);
    }

    #[test]
    fn chain_rule_on_random_joints(seed in any::<u64>(), na in 1usize..5, nb in 1usize..5) {
        let mut r = rng(seed);
        let p = JointTable::<f64>::new(vec![na, nb], dirichlet(&mut r, na * nb, 1.0)).unwrap();
        let q = JointTable::new(vec![na, nb], dirichlet(&mut r, na * nb, 1.0)).unwrap();
        let split = chain_rule_split(&p, &q).unwrap();
        let flat = kl_divergence(&p.flatten(), &q.flatten()).unwrap();
        prop_assert!((split.total() - flat).abs() < 1e-10);
    }

    #[test]
    fn pair_marginals_of_a_product_recover_the_factors(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_ns_222::<f64, _>(&mut r);
        let q = random_ns_222::<f64, _>(&mut r);
        let b4 = product(&p, &q);
        prop_assert!(marginal_pair(&b4, 0).unwrap().max_abs_diff(&p).unwrap() < 1e-12);
        prop_assert!(marginal_pair(&b4, 1).unwrap().max_abs_diff(&q).unwrap() < 1e-12);
    }

    #[test]
    fn conditioning_reconstructs_the_joint(seed in any::<u64>()) {
        let lrns = lrns_vertices_broadcast_222::<f64>();
        let mut r = rng(seed);
        let b4 = random_ns_broadcast(&mut r, &lrns);
        for x in 0..16usize {
            let (x0, x1, y0, y1) = (x >> 3 & 1, x >> 2 & 1, x >> 1 & 1, x & 1);
            for o in 0..16usize {
                let (a0, a1, b0, b1) = (o >> 3 & 1, o >> 2 & 1, o >> 1 & 1, o & 1);
                let w = pair0_probability(&b4, (a0, b0), (x0, y0), (x1, y1));
                if w <= 1e-12 {
                    continue;
                }
                let c = condition_on_pair0(&b4, (a0, b0), (x0, y0), (x1, y1)).unwrap();
                let v = b4.value(&[x0, x1, y0, y1], &[a0, a1, b0, b1]);
                prop_assert!((w * c[a1 * 2 + b1] - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn box_chain_rule_holds_on_random_pairs(seed in any::<u64>()) {
        let lrns = lrns_vertices_broadcast_222::<f64>();
        let mut r = rng(seed);
        let p = random_ns_broadcast(&mut r, &lrns);
        let q = random_ns_broadcast(&mut r, &lrns);
        for s in 0..16usize {
            let res = verify_chain_rule_box(&p, &q, [s >> 3 & 1, s >> 2 & 1, s >> 1 & 1, s & 1]).unwrap();
            prop_assert!(res.residual < 1e-10, "{:?}", res);
        }
    }

    #[test]
    fn random_mixtures_are_inside_with_small_residual(seed in any::<u64>(), k in 1usize..8) {
        let cat = ns_vertices_222::<f64>();
        let (b, _) = random_mixture(&mut rng(seed), &cat, k);
        let m = membership(&b, &cat, 1e-9).unwrap();
        prop_assert!(m.inside);
        let w = m.weights.unwrap();
        prop_assert!(cat.combine(&w).unwrap().max_abs_diff(&b).unwrap() <= 1e-7);
    }

    #[test]
    fn nonlocal_mixtures_are_strictly_separated(seed in any::<u64>()) {
        let local = local_deterministic_vertices::<f64>(&Scenario::chsh()).unwrap();
        let mut r = rng(seed);
        // CHSH value of v·PR + (1−v)·uniform is 2 + 2v, local above v = 1/2
        let v = 0.55 + 0.45 * rand::Rng::random::<f64>(&mut r);
        let b = pr_box::<f64>().mix(&Behavior::uniform(Scenario::chsh()), v).unwrap();
        let m = membership(&b, &local, 1e-9).unwrap();
        prop_assert!(!m.inside);
        let sep = m.separation.unwrap();
        prop_assert!(sep.evaluate(&b) - sep.threshold >= 0.5e-9);
        for vert in local.vertices() {
            prop_assert!(sep.evaluate(vert) <= sep.threshold + 1e-9);
        }
    }

    #[test]
    fn losr_maps_are_linear(seed in any::<u64>(), t in 0.0f64..1.0) {
        let mut r = rng(seed);
        let m = random_losr::<f64>(seed, &LosrSizes::default()).unwrap();
        let p = random_ns_222::<f64, _>(&mut r);
        let q = random_ns_222::<f64, _>(&mut r);
        let lhs = m.apply(&p.mix(&q, t).unwrap()).unwrap();
        let rhs = m.apply(&p).unwrap().mix(&m.apply(&q).unwrap(), t).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-12);
    }

    #[test]
    fn box_divergence_contracts_under_losr(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_losr::<f64>(seed ^ 0x5eed, &LosrSizes::default()).unwrap();
        let p = random_ns_222::<f64, _>(&mut r);
        let q = random_ns_222::<f64, _>(&mut r);
        let rep = contractivity_check(&m, &p, &q).unwrap();
        prop_assert!(rep.holds, "{:?}", rep);
    }
}

#[test]
fn kl_is_asymmetric() {
    let p = ProbVector::new(vec![0.9, 0.1]).unwrap();
    let q = ProbVector::new(vec![0.5, 0.5]).unwrap();
    let (a, b) = (kl_divergence(&p, &q).unwrap(), kl_divergence(&q, &p).unwrap());
    assert!((a - kl_oracle(&[0.9, 0.1], &[0.5, 0.5])).abs() < 1e-15);
    assert!((a - b).abs() > 0.1);
}

#[test]
fn box_divergence_is_zero_exactly_on_equal_boxes() {
    let mut r = rng(3);
    let p = random_ns_222::<f64, _>(&mut r);
    assert!(box_kl(&p, &p).unwrap().value.abs() < 1e-12);
    let q = p.mix(&Behavior::uniform(Scenario::chsh()), 1.0 - 1e-6).unwrap();
    assert!(box_kl(&p, &q).unwrap().value > 0.0);
}

#[test]
fn box_divergence_max_form_agrees_with_the_pi_grid() {
    let mut r = rng(11);
    let p = random_ns_222::<f64, _>(&mut r);
    let q = random_ns_222::<f64, _>(&mut r);
    let max_form = box_kl(&p, &q).unwrap().value;
    let grid = box_kl_pi_grid(&p, &q, 12).unwrap();
    // vertices of the simplex are on the grid
    assert!((max_form - grid).abs() < 1e-12);
}

#[test]
fn pr_wiring_of_the_inputs_is_rejected() {
    // I(x, y | x_A, x_B) given by a PR box: shared nonlocal pre-processing
    let pr = pr_box::<f64>();
    let mut pre = vec![0.0; 16];
    for xa in 0..2 {
        for xb in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    pre[((xa * 2 + xb) * 2 + x) * 2 + y] = pr.value(&[xa, xb], &[x, y]);
                }
            }
        }
    }
    let post: Vec<f64> = (0..16 * 4 * 4).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect();
    let r = LosrMap::<f64>::from_joint_tables(Scenario::chsh(), Scenario::chsh(), ProbVector::point(1, 0), &[pre], &[post]);
    let msg = r.unwrap_err().to_string();
    assert!(msg.contains("correlates the wings"), "{msg}");
}
