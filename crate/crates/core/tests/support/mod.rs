//! Test-only oracles and generators shared by the integration tests.

#![allow(dead_code)]

pub mod corpus;
pub mod naive;
pub mod worlds;

use std::path::PathBuf;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}
