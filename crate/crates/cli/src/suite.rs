//! The verification suite: every invariant of the toolkit plus the
//! no-broadcasting demos, each run as a named check with metrics.

use boxcast::assemblages::{
    self as asm, assemblage_kl, assemblage_kl_grid, is_broadcast_assemblage, is_unsteerable, is_urns, piani_check,
    prop3_check, random_assemblage, random_lhs_assemblage, random_urns_losr, steering_ub_lhs, thm2_demo,
    verify_appendix_c_lemmas, werner_assemblage, AppendixCConfig, FeasibilityConfig, FeasibilityStatus, FwConfig,
    Thm2Config,
};
use boxcast::behaviors::{
    condition_on_pair0, marginal_pair, pair0_probability, pr_box, product, Behavior, Scenario,
};
use boxcast::divergence::{
    box_kl, box_kl_pi_grid, cross_check_elr, lemma_b2_conditionals, prop2_gap, relative_entropy_nl,
    verify_chain_rule_box, verify_lemma_conditionals, ElrConfig, LemmaStatus,
};
use boxcast::losr::{contractivity_check, preserves_lrns, random_losr, random_lrns_losr, LosrSizes};
use boxcast::polytopes::{
    local_deterministic_vertices, lrns_vertices_broadcast_222, membership, ns_vertices_222, VertexCatalogue,
};
use boxcast::quantum::{measurement_map, quantum_relative_entropy, random_cptp_rng, random_density, sic_povm_qubit, Povm};
use boxcast::sampling::{dirichlet, random_mixture, random_ns_222, random_ns_broadcast};
use boxcast::tensor::{chain_rule_split, kl_divergence, JointTable, ProbVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Boxes,
    Assemblages,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteParams {
    pub seed: u64,
    /// Divide every instance count by ten.
    pub quick: bool,
    /// Name of a check to tamper with (negative control).
    pub inject: Option<String>,
}

impl SuiteParams {
    pub fn new(seed: u64) -> Self {
        SuiteParams { seed, quick: false, inject: None }
    }

    fn count(&self, full: usize) -> usize {
        if self.quick {
            (full / 10).max(1)
        } else {
            full
        }
    }

    fn sub_seed(&self, tag: u64) -> u64 {
        self.seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }

    fn rng(&self, tag: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.sub_seed(tag))
    }

    fn tampered(&self, name: &str) -> bool {
        self.inject.as_deref() == Some(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub metrics: Map<String, Value>,
    pub failures: Vec<String>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Check { name, passed: true, metrics: Map::new(), failures: Vec::new() }
    }

    fn metric(&mut self, key: &str, v: impl Into<Value>) {
        self.metrics.insert(key.to_string(), v.into());
    }

    fn fail(&mut self, msg: impl Into<String>) {
        self.passed = false;
        self.failures.push(msg.into());
    }

    fn require(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.fail(msg());
        }
    }

    /// Numeric metric by name; NaN when absent or non-numeric.
    pub fn value(&self, key: &str) -> f64 {
        self.metrics.get(key).and_then(Value::as_f64).unwrap_or(f64::NAN)
    }
}

fn run(name: &'static str, f: impl FnOnce(&mut Check) -> boxcast::Result<()>) -> Check {
    let mut c = Check::new(name);
    if let Err(e) = f(&mut c) {
        c.fail(format!("error: {e}"));
    }
    c
}

pub fn run_suite(scope: Scope, p: &SuiteParams) -> Vec<Check> {
    let mut out = Vec::new();
    if scope != Scope::Assemblages {
        out.extend([
            kl_chain_rule(p),
            behavior_structure(p),
            membership_checks(p),
            box_chain_rule(p),
            box_kl_checks(p),
            box_contractivity(p),
            losr_structure(p),
            elr_zero_on_free_boxes(p),
            elr_restarts(p),
            prop1(p),
            prop2(p),
            lemma_conditionals(p),
        ]);
    }
    if scope != Scope::Boxes {
        out.extend([
            sq_monotonicity(p),
            piani(p),
            assemblage_divergence(p),
            broadcast_relation(p),
            steering_classification(p),
            urns_closure(p),
            unsteerable_bound(p),
            appendix_c(p),
            prop3(p),
            thm2(p),
        ]);
    }
    out
}

fn kl_oracle(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).log2()).sum()
}

pub fn kl_chain_rule(p: &SuiteParams) -> Check {
    run("kl_chain_rule", |c| {
        let mut rng = p.rng(1);
        let n = p.count(200);
        let (mut worst, mut worst_direct, mut min_kl) = (0.0f64, 0.0f64, f64::INFINITY);
        for _ in 0..n {
            let (na, nb) = (rng.random_range(1..5), rng.random_range(1..5));
            let pj = JointTable::<f64>::new(vec![na, nb], dirichlet(&mut rng, na * nb, 0.8))?;
            let qj = JointTable::<f64>::new(vec![na, nb], dirichlet(&mut rng, na * nb, 0.8))?;
            let flat = kl_divergence(&pj.flatten(), &qj.flatten())?;
            worst = worst.max((chain_rule_split(&pj, &qj)?.total() - flat).abs());
            worst_direct = worst_direct.max((flat - kl_oracle(pj.weights(), qj.weights())).abs());
            min_kl = min_kl.min(flat);
        }
        let a = ProbVector::<f64>::new(vec![0.9, 0.1])?;
        let b = ProbVector::new(vec![0.5, 0.5])?;
        let asym = (kl_divergence(&a, &b)? - kl_divergence(&b, &a)?).abs();
        c.metric("instances", n);
        c.metric("worst_residual", worst);
        c.metric("worst_direct_sum_diff", worst_direct);
        c.metric("asymmetry", asym);
        c.require(worst <= 1e-10, || format!("chain rule residual {worst:e}"));
        c.require(worst_direct <= 1e-12, || format!("direct sum differs by {worst_direct:e}"));
        c.require(min_kl >= 0.0, || format!("negative divergence {min_kl:e}"));
        c.require(asym > 0.0, || "divergence is symmetric on the asymmetry witness".into());
        Ok(())
    })
}

pub fn behavior_structure(p: &SuiteParams) -> Check {
    run("behavior_structure", |c| {
        let mut rng = p.rng(2);
        let lrns = lrns_vertices_broadcast_222::<f64>();
        let n = p.count(100);
        let (mut norm, mut factor, mut recon) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..n {
            let a = random_ns_222::<f64, _>(&mut rng);
            let b = random_ns_222::<f64, _>(&mut rng);
            let b4 = product(&a, &b);
            factor = factor
                .max(marginal_pair(&b4, 0)?.max_abs_diff(&a)?)
                .max(marginal_pair(&b4, 1)?.max_abs_diff(&b)?);
            let q4 = random_ns_broadcast(&mut rng, &lrns);
            for bx in [&a, &b4, &q4] {
                for s in 0..bx.num_settings() {
                    norm = norm.max((bx.setting(s).iter().sum::<f64>() - 1.0).abs());
                }
            }
            for x in 0..16usize {
                let (x0, x1, y0, y1) = (x >> 3 & 1, x >> 2 & 1, x >> 1 & 1, x & 1);
                for o in 0..16usize {
                    let (a0, a1, b0, b1) = (o >> 3 & 1, o >> 2 & 1, o >> 1 & 1, o & 1);
                    let w = pair0_probability(&q4, (a0, b0), (x0, y0), (x1, y1));
                    if w <= 1e-12 {
                        continue;
                    }
                    let cond = condition_on_pair0(&q4, (a0, b0), (x0, y0), (x1, y1))?;
                    let v = q4.value(&[x0, x1, y0, y1], &[a0, a1, b0, b1]);
                    recon = recon.max((w * cond.weights()[a1 * 2 + b1] - v).abs());
                }
            }
        }
        c.metric("instances", n);
        c.metric("worst_normalization", norm);
        c.metric("worst_factor_recovery", factor);
        c.metric("worst_conditioning_reconstruction", recon);
        c.require(norm <= 1e-10, || format!("normalization off by {norm:e}"));
        c.require(factor <= 1e-12, || format!("pair marginal of a product off by {factor:e}"));
        c.require(recon <= 1e-10, || format!("conditioning reconstruction off by {recon:e}"));
        Ok(())
    })
}

pub fn membership_checks(p: &SuiteParams) -> Check {
    run("membership", |c| {
        let mut rng = p.rng(3);
        let ns = ns_vertices_222::<f64>();
        let local = local_deterministic_vertices::<f64>(&Scenario::chsh())?;
        let n = p.count(500);
        let mut residual = 0.0f64;
        let mut outside = 0;
        for _ in 0..n {
            let k = rng.random_range(1..8);
            let (b, _) = random_mixture(&mut rng, &ns, k);
            let m = membership(&b, &ns, 1e-9)?;
            match m.weights {
                Some(w) if m.inside => residual = residual.max(ns.combine(&w)?.max_abs_diff(&b)?),
                _ => outside += 1,
            }
        }
        let uniform = Behavior::uniform(Scenario::chsh());
        let mut min_margin = f64::INFINITY;
        let mut invalid_bound = 0.0f64;
        let m_sep = p.count(50);
        for _ in 0..m_sep {
            let v = 0.55 + 0.45 * rng.random::<f64>();
            let b = pr_box::<f64>().mix(&uniform, v)?;
            let m = membership(&b, &local, 1e-9)?;
            let Some(sep) = m.separation.filter(|_| !m.inside) else {
                outside += 1;
                continue;
            };
            min_margin = min_margin.min(sep.evaluate(&b) - sep.threshold);
            for vert in local.vertices() {
                invalid_bound = invalid_bound.max(sep.evaluate(vert) - sep.threshold);
            }
        }
        c.metric("mixtures", n);
        c.metric("worst_reconstruction", residual);
        c.metric("nonlocal_queries", m_sep);
        c.metric("min_separation_margin", min_margin);
        c.metric("misclassified", outside);
        c.require(outside == 0, || format!("{outside} queries misclassified"));
        c.require(residual <= 1e-7, || format!("reconstruction residual {residual:e}"));
        c.require(min_margin >= 0.5e-9, || format!("separation margin {min_margin:e}"));
        c.require(invalid_bound <= 1e-9, || format!("functional exceeds its bound by {invalid_bound:e} on a vertex"));
        Ok(())
    })
}

/// Offset added to one side of the chain rule under `--inject chain-rule`.
const CHAIN_RULE_TAMPER: f64 = 1e-6;

pub fn box_chain_rule(p: &SuiteParams) -> Check {
    run("box_chain_rule", |c| {
        let mut rng = p.rng(4);
        let lrns = lrns_vertices_broadcast_222::<f64>();
        let tamper = if p.tampered("chain-rule") { CHAIN_RULE_TAMPER } else { 0.0 };
        let n = p.count(500);
        let (mut worst, mut finite, mut total) = (0.0f64, 0usize, 0usize);
        for i in 0..n {
            let a = random_ns_broadcast(&mut rng, &lrns);
            let b = random_ns_broadcast(&mut rng, &lrns);
            for s in 0..16usize {
                let r = verify_chain_rule_box(&a, &b, [s >> 3 & 1, s >> 2 & 1, s >> 1 & 1, s & 1])?;
                total += 1;
                if !r.finite {
                    continue;
                }
                finite += 1;
                let res = (r.lhs - (r.marginal_term + tamper + r.conditional_term)).abs();
                if res > 1e-10 && c.failures.len() < 5 {
                    c.fail(format!("pair {i} setting {s}: residual {res:e}"));
                }
                worst = worst.max(res);
            }
        }
        c.metric("pairs", n);
        c.metric("settings", total);
        c.metric("finite_cases", finite);
        c.metric("worst_residual", worst);
        c.require(worst <= 1e-10, || format!("worst residual {worst:e}"));
        Ok(())
    })
}

pub fn box_kl_checks(p: &SuiteParams) -> Check {
    run("box_kl", |c| {
        let mut rng = p.rng(5);
        let n = p.count(20);
        let (mut self_kl, mut grid_diff, mut min_distinct) = (0.0f64, 0.0f64, f64::INFINITY);
        for _ in 0..n {
            let a = random_ns_222::<f64, _>(&mut rng);
            let b = random_ns_222::<f64, _>(&mut rng);
            self_kl = self_kl.max(box_kl(&a, &a)?.value.abs());
            let near = a.mix(&b, 1.0 - 1e-4)?;
            min_distinct = min_distinct.min(box_kl(&a, &near)?.value);
            grid_diff = grid_diff.max((box_kl(&a, &b)?.value - box_kl_pi_grid(&a, &b, 12)?).abs());
        }
        c.metric("instances", n);
        c.metric("worst_self_divergence", self_kl);
        c.metric("min_divergence_of_distinct", min_distinct);
        c.metric("worst_grid_difference", grid_diff);
        c.require(self_kl <= 1e-9, || format!("S(p||p) = {self_kl:e}"));
        c.require(min_distinct > 0.0, || "distinct boxes at zero divergence".into());
        c.require(grid_diff <= 1e-9, || format!("max form and grid differ by {grid_diff:e}"));
        Ok(())
    })
}

pub fn box_contractivity(p: &SuiteParams) -> Check {
    run("box_contractivity", |c| {
        let mut rng = p.rng(6);
        let n = p.count(200);
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            let m = random_losr::<f64>(p.sub_seed(6).wrapping_add(i as u64), &LosrSizes::default())?;
            let a = random_ns_222::<f64, _>(&mut rng);
            let b = random_ns_222::<f64, _>(&mut rng);
            let r = contractivity_check(&m, &a, &b)?;
            if r.before.is_finite() {
                worst = worst.max(r.after - r.before);
            }
            if !r.holds {
                c.fail(format!("triple {i}: {} before, {} after", r.before, r.after));
            }
        }
        c.metric("triples", n);
        c.metric("worst_increase", worst);
        c.require(worst <= 1e-9, || format!("divergence grew by {worst:e}"));
        Ok(())
    })
}

pub fn losr_structure(p: &SuiteParams) -> Check {
    run("losr_structure", |c| {
        let mut rng = p.rng(7);
        let local = local_deterministic_vertices::<f64>(&Scenario::chsh())?;
        let n = p.count(50);
        let mut linearity = 0.0f64;
        let mut not_local = 0;
        for i in 0..n {
            let seed = p.sub_seed(7).wrapping_add(i as u64);
            let m = random_losr::<f64>(seed, &LosrSizes::default())?;
            let a = random_ns_222::<f64, _>(&mut rng);
            let b = random_ns_222::<f64, _>(&mut rng);
            let t = rng.random::<f64>();
            let lhs = m.apply(&a.mix(&b, t)?)?;
            let rhs = m.apply(&a)?.mix(&m.apply(&b)?, t)?;
            linearity = linearity.max(lhs.max_abs_diff(&rhs)?);
            let sizes = LosrSizes { output: Scenario::chsh(), ..LosrSizes::default() };
            let m2 = random_losr::<f64>(seed, &sizes)?;
            if !preserves_lrns(&m2, &local, &local)?.preserved {
                not_local += 1;
            }
        }
        c.metric("maps", n);
        c.metric("worst_linearity_residual", linearity);
        c.metric("local_images_outside", not_local);
        c.require(linearity <= 1e-12, || format!("linearity residual {linearity:e}"));
        c.require(not_local == 0, || format!("{not_local} maps send a local box outside the local set"));
        Ok(())
    })
}

pub fn elr_zero_on_free_boxes(p: &SuiteParams) -> Check {
    run("elr_zero_on_free_boxes", |c| {
        let mut rng = p.rng(9);
        let local = local_deterministic_vertices::<f64>(&Scenario::chsh())?;
        let lrns = lrns_vertices_broadcast_222::<f64>();
        let cfg = ElrConfig::default();
        let n = p.count(10).div_ceil(2);
        let mut worst = 0.0f64;
        for cat in [&local, &lrns] {
            for _ in 0..n {
                let k = rng.random_range(1..6);
                let (b, _) = random_mixture(&mut rng, cat, k);
                let inside = membership(&b, cat, 1e-9)?.inside;
                c.require(inside, || "catalogue mixture failed membership".into());
                worst = worst.max(relative_entropy_nl(&b, cat, &cfg)?.value);
            }
        }
        c.metric("boxes", 2 * n);
        c.metric("worst_value", worst);
        c.require(worst <= 1e-6, || format!("free box at relative entropy {worst:e}"));
        Ok(())
    })
}

pub fn elr_restarts(p: &SuiteParams) -> Check {
    run("elr_restarts", |c| {
        let local = local_deterministic_vertices::<f64>(&Scenario::chsh())?;
        let pr = pr_box::<f64>();
        let mut values = Vec::new();
        for i in 0..10u64 {
            let cfg = ElrConfig { seed: Some(p.sub_seed(10).wrapping_add(i)), ..ElrConfig::default() };
            values.push(relative_entropy_nl(&pr, &local, &cfg)?.value);
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        c.metric("restarts", values.len());
        c.metric("min_value", lo);
        c.metric("spread", hi - lo);
        c.require(hi - lo <= 1e-4, || format!("restart spread {:e}", hi - lo));
        Ok(())
    })
}

/// A noisy nonlocal vertex of the (2,2,2) NS polytope.
fn noisy_nonlocal_box(rng: &mut ChaCha8Rng, ns: &VertexCatalogue<f64>) -> boxcast::Result<Behavior<f64>> {
    let v = 16 + rng.random_range(0..8);
    let w = 0.5 + 0.5 * rng.random::<f64>();
    ns.vertices()[v].mix(&random_ns_222(rng), w)
}

pub fn prop1(p: &SuiteParams) -> Check {
    run("prop1_elr_monotone", |c| {
        let mut rng = p.rng(8);
        let local = local_deterministic_vertices::<f64>(&Scenario::chsh())?;
        let lrns = lrns_vertices_broadcast_222::<f64>();
        let ns = ns_vertices_222::<f64>();
        let cfg = ElrConfig::default();
        let n = p.count(50);
        let (mut worst, mut nontrivial) = (f64::NEG_INFINITY, 0);
        for i in 0..n {
            let m = random_lrns_losr::<f64>(p.sub_seed(8).wrapping_add(i as u64), 4)?;
            let pres = preserves_lrns(&m, &local, &lrns)?;
            if !pres.preserved {
                c.fail(format!("map {i} does not preserve LR_ns (margin {:e})", pres.worst_margin));
                continue;
            }
            let b = noisy_nonlocal_box(&mut rng, &ns)?;
            let before = relative_entropy_nl(&b, &local, &cfg)?.value;
            let after = relative_entropy_nl(&m.apply(&b)?, &lrns, &cfg)?.value;
            if after > 1e-6 {
                nontrivial += 1;
            }
            if after > before + 2e-3 {
                c.fail(format!("instance {i}: {after} after, {before} before"));
            }
            worst = worst.max(after - before);
        }
        c.metric("instances", n);
        c.metric("nonlocal_images", nontrivial);
        c.metric("worst_increase", worst);
        c.require(worst <= 2e-3, || format!("relative entropy grew by {worst:e}"));
        Ok(())
    })
}

pub fn prop2(p: &SuiteParams) -> Check {
    run("prop2_broadcast_gap", |c| {
        let pr = pr_box::<f64>();
        let p4 = product(&pr, &pr);
        let local = local_deterministic_vertices::<f64>(&Scenario::chsh())?;
        let lrns = lrns_vertices_broadcast_222::<f64>();
        let cfg = ElrConfig { seed: Some(p.sub_seed(11)), ..ElrConfig::default() };
        let r = prop2_gap(&p4, &pr, &cfg)?;
        let x4 = cross_check_elr(&p4, &lrns, 4000, 5)?.value;
        let x2 = cross_check_elr(&pr, &local, 4000, 5)?.value;
        let (d4, d2) = ((r.elr_p4.value - x4).abs(), (r.elr_p2.value - x2).abs());
        c.metric("elr_broadcast", r.elr_p4.value);
        c.metric("elr_box", r.elr_p2.value);
        c.metric("gap", r.gap);
        c.metric("gap_tolerance", r.tolerance);
        c.metric("cross_check_broadcast", x4);
        c.metric("cross_check_box", x2);
        c.metric("optimizer_disagreement", d4.max(d2));
        c.require(r.p2_nonlocal, || "PR box classified local".into());
        c.require(r.gap > 2e-3, || format!("gap {} not above 2e-3", r.gap));
        c.require(r.strict, || format!("gap {} within the bound gaps {}", r.gap, r.tolerance));
        c.require(d4.max(d2) <= 1e-3, || format!("optimizers disagree by {:e}", d4.max(d2)));
        // a local box and its product broadcast sit at zero
        let l = local.vertices()[5].clone();
        let z = prop2_gap(&product(&l, &l), &l, &ElrConfig::default())?;
        c.metric("local_gap", z.gap);
        c.require(z.gap.abs() <= 2e-3 && z.elr_p4.value <= 2e-3, || format!("local box gap {}", z.gap));
        Ok(())
    })
}

pub fn lemma_conditionals(p: &SuiteParams) -> Check {
    run("lemma_conditionals", |c| {
        let mut rng = p.rng(12);
        let lrns = lrns_vertices_broadcast_222::<f64>();
        let n = p.count(20);
        let mut boxes = 0;
        let mut mixtures = Vec::with_capacity(n);
        // the uniform component keeps every conditioning event possible
        let uniform = Behavior::uniform(lrns.scenario().clone());
        for i in 0..n {
            let k = rng.random_range(2..9);
            let (q4, _) = random_mixture(&mut rng, &lrns, k);
            let q4 = q4.mix(&uniform, 0.9)?;
            let (status, checked) = lemma_b2_conditionals(&q4)?;
            boxes += checked;
            if let LemmaStatus::Fails(why) = status {
                c.fail(format!("mixture {i}: {why}"));
            }
            mixtures.push(q4);
        }
        let pr = pr_box::<f64>();
        let p4 = product(&pr, &pr);
        let r = verify_lemma_conditionals(&p4, &mixtures[0])?;
        c.metric("mixtures", n);
        c.metric("conditional_boxes", boxes);
        c.metric("conditional_entries", boxes * 16);
        c.metric("b1_witnesses", r.b1_witnesses.len());
        c.metric("min_b3_value", r.b3_values.iter().copied().fold(f64::INFINITY, f64::min));
        c.require(r.b1 == LemmaStatus::Holds && r.b1_witnesses.len() == 4, || format!("B1: {:?}", r.b1));
        c.require(r.b3 == LemmaStatus::Holds, || format!("B3: {:?}", r.b3));
        Ok(())
    })
}

pub fn sq_monotonicity(p: &SuiteParams) -> Check {
    run("sq_monotonicity", |c| {
        let mut rng = p.rng(20);
        let n = p.count(200);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..n {
            let din: usize = rng.random_range(2..5);
            let dout = rng.random_range(2..5);
            let rank = rng.random_range(din.div_ceil(dout)..=din * dout);
            let ch = random_cptp_rng::<f64, _>(&mut rng, din, dout, rank)?;
            let r1 = rng.random_range(1..=din);
            let rho = random_density::<f64, _>(&mut rng, din, r1);
            let sigma = random_density::<f64, _>(&mut rng, din, din);
            let before = quantum_relative_entropy(&rho, &sigma)?;
            let after = quantum_relative_entropy(&ch.apply(&rho)?, &ch.apply(&sigma)?)?;
            worst = worst.max(after - before);
        }
        let povms = [sic_povm_qubit::<f64>(), Povm::computational(2), Povm::qubit_axis([0.6, 0.0, 0.8])];
        let mut worst_meas = f64::NEG_INFINITY;
        for _ in 0..p.count(50) {
            let rho = random_density::<f64, _>(&mut rng, 2, 2);
            let sigma = random_density::<f64, _>(&mut rng, 2, 2);
            let before = quantum_relative_entropy(&rho, &sigma)?;
            for m in &povms {
                let after = quantum_relative_entropy(&measurement_map(m, &rho)?, &measurement_map(m, &sigma)?)?;
                worst_meas = worst_meas.max(after - before);
            }
        }
        c.metric("channels", n);
        c.metric("worst_violation", worst);
        c.metric("worst_measurement_violation", worst_meas);
        c.require(worst <= 1e-8, || format!("channel increased S_Q by {worst:e}"));
        c.require(worst_meas <= 1e-8, || format!("measurement increased S_Q by {worst_meas:e}"));
        Ok(())
    })
}

pub fn piani(p: &SuiteParams) -> Check {
    run("piani_inequality", |c| {
        let mut rng = p.rng(21);
        let sic = sic_povm_qubit::<f64>();
        let n = p.count(100);
        let mut worst_slack = f64::INFINITY;
        for i in 0..n {
            let rho = random_density::<f64, _>(&mut rng, 4, 1 + i % 4);
            let sigma = random_density::<f64, _>(&mut rng, 4, 4);
            let r = piani_check(&rho, &sigma, &sic)?;
            worst_slack = worst_slack.min(r.lhs - r.term1 - r.term2);
            if !r.holds {
                c.fail(format!("instance {i}: {} < {} + {}", r.lhs, r.term1, r.term2));
            }
        }
        c.metric("instances", n);
        c.metric("min_slack", worst_slack);
        c.require(worst_slack >= -1e-8, || format!("slack {worst_slack:e}"));
        Ok(())
    })
}

pub fn assemblage_divergence(p: &SuiteParams) -> Check {
    run("assemblage_divergence", |c| {
        let mut rng = p.rng(23);
        let n = p.count(20);
        let (mut self_kl, mut grid_diff, mut min_distinct) = (0.0f64, 0.0f64, f64::INFINITY);
        for _ in 0..n {
            let a = random_assemblage::<f64, _>(&mut rng, 2, 2, 2)?;
            let b = random_assemblage::<f64, _>(&mut rng, 2, 2, 2)?;
            self_kl = self_kl.max(assemblage_kl(&a, &a)?.value.abs());
            min_distinct = min_distinct.min(assemblage_kl(&a, &a.mix(&b, 1.0 - 1e-4)?)?.value);
            grid_diff = grid_diff.max((assemblage_kl(&a, &b)?.value - assemblage_kl_grid(&a, &b, 10)?).abs());
        }
        c.metric("instances", n);
        c.metric("worst_self_divergence", self_kl);
        c.metric("min_divergence_of_distinct", min_distinct);
        c.metric("worst_grid_difference", grid_diff);
        c.require(self_kl <= 1e-9, || format!("S_A(a||a) = {self_kl:e}"));
        c.require(min_distinct > 0.0, || "distinct assemblages at zero divergence".into());
        c.require(grid_diff <= 1e-9, || format!("max form and grid differ by {grid_diff:e}"));
        Ok(())
    })
}

pub fn broadcast_relation(_p: &SuiteParams) -> Check {
    run("assemblage_broadcast_relation", |c| {
        let a = werner_assemblage::<f64>(0.8)?;
        let b = werner_assemblage::<f64>(0.6)?;
        let own = is_broadcast_assemblage(&asm::product(&a, &a), &a)?;
        let mixed = is_broadcast_assemblage(&asm::product(&a, &b), &a)?;
        let noisy = asm::product(&a, &a).mix(&asm::product(&b, &b), 1.0 - 1e-3)?;
        let perturbed = is_broadcast_assemblage(&noisy, &a)?;
        c.metric("product_is_broadcast", own);
        c.require(own, || "a ⊗ a is not a broadcast of a".into());
        c.require(!mixed, || "a ⊗ b accepted as a broadcast of a".into());
        c.require(!perturbed, || "1e-3 perturbation accepted as a broadcast".into());
        Ok(())
    })
}

pub fn steering_classification(_p: &SuiteParams) -> Check {
    run("steering_classification", |c| {
        let cfg = FeasibilityConfig::default();
        let low = is_unsteerable(&werner_assemblage::<f64>(0.3)?, &cfg)?;
        c.metric("low_visibility_residual", low.residual);
        c.require(low.status == FeasibilityStatus::ModelFound && low.residual <= 1e-6, || {
            format!("visibility 0.3: {:?}, residual {:e}", low.status, low.residual)
        });
        let high_asm = werner_assemblage::<f64>(0.9)?;
        let high = is_unsteerable(&high_asm, &cfg)?;
        let violation = match &high.functional {
            Some(f) => f.evaluate(high_asm.elements()) - f.bound,
            None => f64::NAN,
        };
        c.metric("high_visibility_status", serde_json::to_value(high.status).unwrap_or(Value::Null));
        c.metric("high_visibility_violation", violation);
        c.require(high.status == FeasibilityStatus::NoModelWithinBudget, || "visibility 0.9 has a model".into());
        c.require(violation > 0.0 && high.corroborated, || format!("functional violation {violation:e}"));

        let mut first_steerable = None;
        let mut last_unsteerable = None;
        for k in 0..=20 {
            let v = k as f64 * 0.05;
            let r = is_unsteerable(&werner_assemblage::<f64>(v)?, &cfg)?;
            match r.status {
                FeasibilityStatus::ModelFound => {
                    last_unsteerable = Some(v);
                    if first_steerable.is_some() {
                        c.fail(format!("model found at {v:.2} above a steerable visibility"));
                    }
                }
                FeasibilityStatus::NoModelWithinBudget => {
                    first_steerable.get_or_insert(v);
                }
            }
        }
        let oracle = std::f64::consts::FRAC_1_SQRT_2;
        let first = first_steerable.unwrap_or(f64::NAN);
        let last = last_unsteerable.unwrap_or(f64::NAN);
        c.metric("first_steerable_visibility", first);
        c.metric("last_unsteerable_visibility", last);
        c.require((first - oracle).abs() <= 0.05 && (last - oracle).abs() <= 0.05, || {
            format!("scan threshold between {last} and {first}, expected {oracle:.4}")
        });
        Ok(())
    })
}

pub fn urns_closure(p: &SuiteParams) -> Check {
    run("urns_closure", |c| {
        let mut rng = p.rng(25);
        let cfg = FeasibilityConfig::default();
        let n = p.count(50);
        let mut worst = 0.0f64;
        for i in 0..n {
            let a = random_lhs_assemblage::<f64, _>(&mut rng, 2, 2)?;
            let map = random_urns_losr::<f64>(p.sub_seed(25).wrapping_add(i as u64), 2, 1 + i % 4)?;
            let r = is_urns(&map.apply(&a)?, &cfg)?;
            if r.status != FeasibilityStatus::ModelFound {
                c.fail(format!("instance {i}: residual {:e}", r.residual));
            }
            worst = worst.max(r.residual);
        }
        c.metric("instances", n);
        c.metric("worst_residual", worst);
        Ok(())
    })
}

pub fn unsteerable_bound(p: &SuiteParams) -> Check {
    run("unsteerable_bound", |c| {
        let mut rng = p.rng(26);
        let n = p.count(10);
        let mut worst = 0.0f64;
        for _ in 0..n {
            let a = random_lhs_assemblage::<f64, _>(&mut rng, 2, 2)?;
            worst = worst.max(steering_ub_lhs(&a, &FwConfig::default())?.upper_bound);
        }
        c.metric("instances", n);
        c.metric("worst_bound", worst);
        c.require(worst <= 1e-4, || format!("unsteerable assemblage bounded at {worst:e}"));
        Ok(())
    })
}

pub fn appendix_c(p: &SuiteParams) -> Check {
    run("appendix_c_lemmas", |c| {
        let cfg = AppendixCConfig { instances: p.count(100), seed: p.sub_seed(27), ..AppendixCConfig::default() };
        let r = verify_appendix_c_lemmas::<f64>(&cfg)?;
        for (name, l) in [
            ("c1", &r.c1_reduced_cq),
            ("c2", &r.c2_post_measurement),
            ("c3", &r.c3_convex_sum),
            ("c4", &r.c4_injectivity),
        ] {
            c.metric(&format!("{name}_instances"), l.instances);
            c.metric(&format!("{name}_skipped"), l.skipped);
            c.metric(&format!("{name}_worst"), l.worst);
            for f in &l.failures {
                c.fail(format!("{name} {f}"));
            }
        }
        c.require(r.all_passed, || "lemma verifier reported a failure".into());
        let sep = r.c4_injectivity.worst;
        c.require(sep >= 1e-9, || format!("distinct assemblages measured {sep:e} apart"));
        Ok(())
    })
}

pub fn prop3(p: &SuiteParams) -> Check {
    run("prop3_steering_monotone", |c| {
        let n = p.count(30);
        let cfg = FwConfig::default();
        let (mut worst, mut max_after) = (f64::NEG_INFINITY, 0.0f64);
        for i in 0..n {
            let v = 0.75 + 0.25 * i as f64 / n as f64;
            let a = werner_assemblage::<f64>(v)?;
            let map = random_urns_losr::<f64>(p.sub_seed(28).wrapping_add(i as u64), 2, 3)?;
            let r = prop3_check(&map, &a, &cfg, 2e-3)?;
            if !r.holds {
                c.fail(format!("instance {i}: {} after, {} before", r.after, r.before));
            }
            worst = worst.max(r.after - r.before);
            max_after = max_after.max(r.after);
        }
        c.metric("instances", n);
        c.metric("worst_increase", worst);
        c.metric("largest_image_bound", max_after);
        c.require(worst <= 2e-3, || format!("bound grew by {worst:e}"));
        Ok(())
    })
}

pub fn thm2(p: &SuiteParams) -> Check {
    run("thm2_no_broadcast", |c| {
        let a = werner_assemblage::<f64>(0.9)?;
        let cfg = Thm2Config { fw: FwConfig { seed: Some(p.sub_seed(29)), ..FwConfig::default() }, ..Thm2Config::default() };
        let r = thm2_demo(&a, &cfg)?;
        c.metric("original_bound", r.original_ub);
        c.metric("broadcast_bound", r.broadcast_ub);
        c.metric("first_term", r.first_term);
        c.metric("second_term", r.second_term);
        c.metric("chain_lhs", r.chain_lhs);
        c.metric("pi0", r.pi0);
        c.metric("pi1", r.pi1);
        c.require(r.steering_violation > 0.0, || "fixture is not steerable".into());
        c.require(r.first_term > 1e-3, || format!("first term {:e}", r.first_term));
        c.require(r.broadcast_ub >= r.original_ub - 1e-3 && r.ordering_holds, || {
            format!("broadcast bound {} below original {}", r.broadcast_ub, r.original_ub)
        });
        c.require(r.piani_holds, || "chain inequality fails at the witness".into());
        let other = thm2_demo(&a, &Thm2Config { fw: FwConfig { seed: Some(p.sub_seed(29) ^ 1), ..cfg.fw }, ..cfg })?;
        let drift = (other.first_term - r.first_term).abs().max((other.broadcast_ub - r.broadcast_ub).abs());
        c.metric("seed_drift", drift);
        c.require(drift <= 1e-3, || format!("results move by {drift:e} with the seed"));
        Ok(())
    })
}
