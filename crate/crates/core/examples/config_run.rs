//! The full pipeline driven from a TOML manifest, as `gelfand all --config`.
//!
//!     cargo run --release --example config_run

use std::fs;

use gelfand::cli::{parse_config_file, run, Mode};

const MANIFEST: &str = r#"
[domain]
kind = "ball"
dim = 2
radius = 1.0
resolution = 401

[run]
lambda = [0.1, 0.4]
format = ["json"]

[flow]
convexity_stride = 10
"#;

fn main() -> gelfand::Result<()> {
    let dir = std::env::temp_dir().join("gelfand_config_run");
    fs::create_dir_all(&dir)?;
    let path = dir.join("run.toml");
    fs::write(&path, MANIFEST)?;
    let mut cfg = parse_config_file(&path, Mode::All)?;
    cfg.out = dir.join("out");
    let outcome = run(&cfg)?;
    for c in &outcome.claims {
        println!("{:<28} lambda {:<22} {}", c.name, format!("{:?}", c.lambda), if c.holds { "ok" } else { "VIOLATED" });
    }
    println!("artifacts in {}", cfg.out.display());
    Ok(())
}
