//! Acceptance criteria 1-10, one line per criterion.

use boxcast_cli::suite::{self, Check, SuiteParams};
use std::process::Command;
use std::time::{Duration, Instant};

struct Line {
    id: u32,
    title: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn timed<F: FnOnce() -> (bool, String)>(id: u32, title: &'static str, limit_s: u64, f: F) -> Line {
    let t = Instant::now();
    let (ok, mut detail) = f();
    let elapsed = t.elapsed();
    let in_time = elapsed <= Duration::from_secs(limit_s);
    if !in_time {
        detail.push_str(&format!("; over the {limit_s} s budget"));
    }
    let line = Line { id, title, passed: ok && in_time, detail, elapsed };
    println!(
        "criterion {:>2} {} {:<34} {:>8.1}s  {}",
        line.id,
        if line.passed { "PASS" } else { "FAIL" },
        line.title,
        line.elapsed.as_secs_f64(),
        line.detail
    );
    line
}

fn failures(c: &Check) -> String {
    if c.failures.is_empty() {
        String::new()
    } else {
        format!("; {}: {}", c.name, c.failures.join(" | "))
    }
}

fn main() {
    let p = SuiteParams::new(0);
    let mut lines = Vec::new();

    lines.push(timed(1, "box chain rule", 10, || {
        let c = suite::box_chain_rule(&p);
        let ok = c.passed && c.value("pairs") == 500.0 && c.value("worst_residual") <= 1e-10;
        (ok, format!("500 pairs, {} finite cases, worst {:e}{}", c.value("finite_cases"), c.value("worst_residual"), failures(&c)))
    }));

    lines.push(timed(2, "box KL contractivity", 30, || {
        let c = suite::box_contractivity(&p);
        let ok = c.passed && c.value("triples") == 200.0 && c.value("worst_increase") <= 1e-9;
        (ok, format!("200 triples, worst increase {:e}{}", c.value("worst_increase"), failures(&c)))
    }));

    lines.push(timed(3, "E_LR monotone under LR_ns-LOSR", 600, || {
        let c = suite::prop1(&p);
        let ok = c.passed && c.value("instances") == 50.0 && c.value("worst_increase") <= 2e-3;
        (
            ok,
            format!(
                "50 maps, {} nonlocal images, worst increase {:e}{}",
                c.value("nonlocal_images"),
                c.value("worst_increase"),
                failures(&c)
            ),
        )
    }));

    lines.push(timed(4, "broadcast gap E_LR(PR x PR) - E_LR(PR)", 600, || {
        let c = suite::prop2(&p);
        let gap = c.value("gap");
        let agree = c.value("optimizer_disagreement");
        let ok = c.passed && gap > 2e-3 && agree <= 1e-3;
        (
            ok,
            format!(
                "{:.6} - {:.6} = {:.6}, optimizers agree within {:e}{}",
                c.value("elr_broadcast"),
                c.value("elr_box"),
                gap,
                agree,
                failures(&c)
            ),
        )
    }));

    lines.push(timed(5, "conditional box lemmas", 300, || {
        let c = suite::lemma_conditionals(&p);
        let n = c.value("mixtures");
        let ok = c.passed
            && n == 20.0
            && c.value("conditional_boxes") == 16.0 * n
            && c.value("conditional_entries") == 256.0 * n
            && c.value("b1_witnesses") == 4.0;
        (
            ok,
            format!(
                "{} conditional boxes local, B1 witnesses at {} of 4 inputs, min B3 {:.4}{}",
                c.value("conditional_boxes"),
                c.value("b1_witnesses"),
                c.value("min_b3_value"),
                failures(&c)
            ),
        )
    }));

    lines.push(timed(6, "S_Q monotonicity and chain inequality", 120, || {
        let m = suite::sq_monotonicity(&p);
        let pi = suite::piani(&p);
        let ok = m.passed
            && pi.passed
            && m.value("channels") == 200.0
            && m.value("worst_violation") <= 1e-8
            && pi.value("instances") == 100.0
            && pi.value("min_slack") >= -1e-8;
        (
            ok,
            format!(
                "worst channel violation {:e}, min slack {:e}{}{}",
                m.value("worst_violation"),
                pi.value("min_slack"),
                failures(&m),
                failures(&pi)
            ),
        )
    }));

    lines.push(timed(7, "steering classification", 300, || {
        let c = suite::steering_classification(&p);
        let oracle = std::f64::consts::FRAC_1_SQRT_2;
        let first = c.value("first_steerable_visibility");
        let ok = c.passed
            && c.value("low_visibility_residual") <= 1e-6
            && c.value("high_visibility_violation") > 0.0
            && (first - oracle).abs() <= 0.05;
        (
            ok,
            format!(
                "v=0.3 residual {:e}, v=0.9 violation {:.4}, threshold in ({}, {}]{}",
                c.value("low_visibility_residual"),
                c.value("high_visibility_violation"),
                c.value("last_unsteerable_visibility"),
                first,
                failures(&c)
            ),
        )
    }));

    lines.push(timed(8, "measurement lemmas C1-C4", 300, || {
        let c = suite::appendix_c(&p);
        let counts = ["c1", "c2", "c3", "c4"].iter().all(|k| c.value(&format!("{k}_instances")) == 100.0);
        let ok = c.passed && counts && c.value("c4_worst") >= 1e-9;
        (
            ok,
            format!(
                "worst residuals {:e} {:e} {:e}, min image separation {:e}{}",
                c.value("c1_worst"),
                c.value("c2_worst"),
                c.value("c3_worst"),
                c.value("c4_worst"),
                failures(&c)
            ),
        )
    }));

    lines.push(timed(9, "steering bounds under LOSR, no broadcast", 900, || {
        let c = suite::prop3(&p);
        let t = suite::thm2(&p);
        let ok = c.passed
            && t.passed
            && c.value("instances") == 30.0
            && c.value("worst_increase") <= 2e-3
            && t.value("first_term") > 1e-3
            && t.value("seed_drift") <= 1e-3
            && t.value("broadcast_bound") >= t.value("original_bound") - 1e-3;
        (
            ok,
            format!(
                "30 maps, worst increase {:e}; first term {:.5}, bounds {:.6} / {:.6}{}{}",
                c.value("worst_increase"),
                t.value("first_term"),
                t.value("original_bound"),
                t.value("broadcast_bound"),
                failures(&c),
                failures(&t)
            ),
        )
    }));

    lines.push(timed(10, "deterministic suite reports", 900, || {
        let run = || {
            Command::new(env!("CARGO_BIN_EXE_boxcast"))
                .args(["verify-suite", "--quick", "--seed", "7"])
                .env("BOXCAST_THREADS", "1")
                .output()
                .expect("binary runs")
        };
        let (a, b) = (run(), run());
        let parsed = serde_json::from_slice::<serde_json::Value>(&a.stdout).is_ok();
        let ok = parsed && !a.stdout.is_empty() && a.stdout == b.stdout;
        (ok, format!("{} bytes, identical: {}, exit {:?}", a.stdout.len(), a.stdout == b.stdout, a.status.code()))
    }));

    let failed: Vec<u32> = lines.iter().filter(|l| !l.passed).map(|l| l.id).collect();
    println!("acceptance: {} passed, {} failed", lines.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
