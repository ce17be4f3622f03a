//! Shared fixtures for the criterion benches.

use std::path::Path;

use rwre_core::model_file::load_model;
use rwre_core::EnvironmentSpec;

/// Loads `models/{name}.toml` from the workspace root.
pub fn model(name: &str) -> EnvironmentSpec {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(format!("{name}.toml"));
    load_model(path).expect("bundled model")
}

pub const SEED: u64 = 1;
