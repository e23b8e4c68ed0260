use boxcast::behaviors::{pr_box, Behavior, Scenario};
use boxcast::divergence::{relative_entropy_nl, ElrConfig};
use boxcast::polytopes::local_deterministic_vertices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};

/// `max_s Σ_o p log2(p/q)` straight from the tables.
fn objective(p: &[f64], q: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (s, (ps, qs)) in p.chunks(4).zip(q.chunks(4)).enumerate() {
        let v: f64 = ps.iter().zip(qs).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).log2()).sum();
        if v > best.0 {
            best = (v, s);
        }
    }
    best
}

fn mix(verts: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; verts[0].len()];
    for (v, &wv) in verts.iter().zip(w) {
        for (qi, vi) in q.iter_mut().zip(v) {
            *qi += wv * vi;
        }
    }
    q
}

/// Euclidean projection onto the probability simplex.
fn project(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let (mut css, mut theta) = (0.0, 0.0);
    for (j, &uj) in u.iter().enumerate() {
        css += uj;
        let t = (css - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|&x| (x - theta).max(0.0)).collect()
}

const STEP: f64 = 0.1;

/// Best of 10^5 sampled weight vectors, refined by normalised projected subgradient descent.
fn coarse_oracle(p: &Behavior<f64>, verts: &[Vec<f64>]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let dir = Dirichlet::new([1.0; 16]).unwrap();
    let (mut best, mut w) = (f64::INFINITY, vec![0.0; verts.len()]);
    for _ in 0..100_000 {
        let cand = dir.sample(&mut rng).to_vec();
        let v = objective(p.table(), &mix(verts, &cand)).0;
        if v < best {
            best = v;
            w = cand;
        }
    }
    for t in 1..=100_000 {
        let q = mix(verts, &w);
        let (v, s) = objective(p.table(), &q);
        best = best.min(v);
        let lo = s * 4;
        let g: Vec<f64> = verts
            .iter()
            .map(|vert| {
                -(lo..lo + 4).filter(|&i| p.table()[i] > 0.0).map(|i| p.table()[i] * vert[i] / q[i]).sum::<f64>()
                    / std::f64::consts::LN_2
            })
            .collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let step = STEP / (t as f64).sqrt() / norm;
        let y: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        w = project(&y);
    }
    best
}

#[test]
fn pr_box_matches_a_coarse_independent_oracle() {
    let cat = local_deterministic_vertices::<f64>(&Scenario::chsh()).unwrap();
    let verts: Vec<Vec<f64>> = cat.vertices().iter().map(|v| v.table().to_vec()).collect();
    let pr = pr_box::<f64>();
    let oracle = coarse_oracle(&pr, &verts);
    let value = relative_entropy_nl(&pr, &cat, &ElrConfig::default()).unwrap().value;
    assert!(value > 0.1);
    assert!((value - oracle).abs() <= 1e-3, "{value} vs oracle {oracle}");
}

#[test]
fn pr_box_value_is_stable_across_seeds() {
    let cat = local_deterministic_vertices::<f64>(&Scenario::chsh()).unwrap();
    let values: Vec<f64> = (0..4)
        .map(|s| relative_entropy_nl(&pr_box(), &cat, &ElrConfig { seed: Some(s), ..ElrConfig::default() }).unwrap().value)
        .collect();
    let spread = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) - values.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(spread <= 1e-3, "{values:?}");
}
