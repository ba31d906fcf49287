//! Loads a scenario file, changes a parameter and prints the canonical form.
//!
//! Usage: `cargo run --example scenario_file -- [path.cfg]`

use std::path::PathBuf;

use gfmlab::config::RunConfig;

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/fig7.cfg"));
    let mut cfg = RunConfig::from_path(&path).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(1);
    });
    cfg.set_param("scr", 10.0).unwrap();
    print!("{}", cfg.dump());
    let reparsed = RunConfig::parse(&cfg.dump()).unwrap();
    assert_eq!(reparsed.dump(), cfg.dump());
}
