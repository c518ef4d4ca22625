#![allow(dead_code)]

use rost_core::embed::PathConfig;
use rost_core::problem::{Problem, ProblemSpec};
use serde_json::{json, Value};

/// `nu = delta_0`, `mu = (delta_-1 + delta_1) / 2`.
pub fn two_point_measures() -> (Value, Value) {
    (json!({"atoms": [[0.0, 1.0]]}), json!({"atoms": [[-1.0, 0.5], [1.0, 0.5]]}))
}

/// `nu = delta_0`, `mu = uniform[-1, 1]`.
pub fn uniform_measures() -> (Value, Value) {
    (json!({"atoms": [[0.0, 1.0]]}), json!({"pieces": [[-1.0, 1.0, 0.5]]}))
}

/// `nu = delta_0`, `mu = delta_-1 / 2 + delta_0.7 / 4 + delta_1.5 / 4`.
pub fn three_atom_measures() -> (Value, Value) {
    (
        json!({"atoms": [[0.0, 1.0]]}),
        json!({"atoms": [[-1.0, 0.5], [0.7, 0.25], [1.5, 0.25]]}),
    )
}

/// `nu = (delta_-1 + delta_1) / 2`, `mu = uniform[-1/2, 1/2]`; the target
/// sits inside the initial hull, so the continuation set is not connected.
pub fn split_measures() -> (Value, Value) {
    (json!({"atoms": [[-1.0, 0.5], [1.0, 0.5]]}), json!({"pieces": [[-0.5, 0.5, 1.0]]}))
}

pub fn problem((nu, mu): (Value, Value), horizon: f64, dx: f64, embed: Option<PathConfig>) -> Problem {
    let mut v = json!({"nu": nu, "mu": mu, "horizon": horizon, "dx": dx});
    if let Some(e) = embed {
        v["embed"] = serde_json::to_value(e).unwrap();
    }
    Problem::new(serde_json::from_value::<ProblemSpec>(v).unwrap()).unwrap()
}

pub fn paths(n_paths: usize, dt_sim: f64, t_max: f64, seed: u64) -> PathConfig {
    PathConfig { n_paths, dt_sim, t_max, seed, bridge_correction: false }
}
