//! Deterministic input files shipped in `fixtures/`.

use boxcast::assemblages::{product as asm_product, werner_assemblage};
use boxcast::behaviors::{pr_box, product, Behavior, Scenario};
use boxcast::polytopes::{local_deterministic_vertices, lrns_vertices_broadcast_222};
use serde_json::Value;
use std::path::Path;

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("fixture serializes") + "\n"
}

fn behavior(b: &Behavior<f64>) -> String {
    pretty(&serde_json::to_value(b).expect("behavior serializes"))
}

/// `(file name, contents)` for every fixture.
pub fn generate() -> Vec<(&'static str, String)> {
    let pr = pr_box::<f64>();
    let local = local_deterministic_vertices::<f64>(&Scenario::chsh()).expect("16 vertices");
    let werner = |v: f64| werner_assemblage::<f64>(v).expect("valid visibility");
    let w9 = werner(0.9);
    vec![
        ("pr_box.json", behavior(&pr)),
        ("uniform.json", behavior(&Behavior::uniform(Scenario::chsh()))),
        ("local_vertex.json", behavior(&local.vertices()[5])),
        ("pr_squared.json", behavior(&product(&pr, &pr))),
        ("lrns_vertices.json", lrns_vertices_broadcast_222::<f64>().to_json().expect("catalogue serializes") + "\n"),
        ("werner_0.3.json", pretty(&werner(0.3).to_json())),
        ("werner_0.9.json", pretty(&w9.to_json())),
        ("werner_0.9_broadcast.json", pretty(&asm_product(&w9, &w9).to_json())),
    ]
}

/// Writes every fixture into `dir`; returns the file names.
pub fn write_all(dir: &Path) -> std::io::Result<Vec<&'static str>> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for (name, text) in generate() {
        std::fs::write(dir.join(name), text)?;
        names.push(name);
    }
    Ok(names)
}
