#![allow(dead_code)]

pub mod oracles;

use std::path::PathBuf;

use lrtdahl::io::read_run_config;
use lrtdahl::synthetic::low_rank_scene;
use lrtdahl::{simulate_case, HsiCube, NoiseSpec, RunConfig};

pub const FIXTURE_DIMS: [usize; 3] = [48, 48, 16];
pub const FIXTURE_SEED: u64 = 7;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn case2_config() -> RunConfig {
    read_run_config(fixture_path("case2.cfg")).expect("fixture config parses")
}

pub fn scene() -> HsiCube {
    low_rank_scene(FIXTURE_DIMS, FIXTURE_SEED).unwrap()
}

/// Noisy observation rounded to `f32`, as it would be after a round trip
/// through a cube file.
pub fn observe(truth: &HsiCube, spec: &NoiseSpec) -> HsiCube {
    let (noisy, _) = simulate_case(truth, spec).unwrap();
    noisy.map(|v| v as f32 as f64)
}

pub fn lcg(seed: u64) -> impl FnMut() -> f64 {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }
}

pub fn random_cube(dims: [usize; 3], seed: u64) -> HsiCube {
    let mut next = lcg(seed);
    HsiCube::from_fn(dims, |_, _, _| next()).unwrap()
}
