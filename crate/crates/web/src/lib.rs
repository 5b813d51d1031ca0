//! WebAssembly bindings for the browser demo. Every entry point returns a JSON
//! string; failures come back as `{"error": "..."}`.

pub mod api;

use wasm_bindgen::prelude::wasm_bindgen;

#[wasm_bindgen]
pub fn bundled_designs() -> String {
    api::bundled_designs()
}

#[wasm_bindgen]
pub fn simulate(source: &str, tokens: &str) -> String {
    api::simulate(source, tokens)
}

#[wasm_bindgen]
pub fn loss_curve(beta: f64, margin: f64, points: usize) -> String {
    api::loss_curve(beta, margin, points)
}

#[wasm_bindgen]
pub fn sample_teacher(source: &str, teacher: &str, n: usize, tau: f64, seed: u64) -> String {
    api::sample_teacher(source, teacher, n, tau, seed)
}
