#![allow(dead_code)]

pub mod oracle;

use std::sync::Arc;

use gelfand::domain::{build_grid, DomainSpec, Grid};

pub fn grid(spec: DomainSpec, resolution: usize) -> Arc<Grid> {
    Arc::new(build_grid(spec, resolution).unwrap())
}
