//! Plain-Rust implementation of the demo operations, testable natively.

use covpref::codec::{validate_and_decode, Token, TokenSeq, Vocab};
use covpref::corpus::{self, Design};
use covpref::curation::TeacherSpec;
use covpref::eval::{eval_policy, EvalSettings};
use covpref::hdl::lint;
use covpref::sim::Simulator;
use covpref::trainer::{neg_log_sigmoid, GapScale};
use serde_json::{json, Value};

const K: usize = 2;
const T_MAX: usize = 8;

fn error(message: impl std::fmt::Display) -> String {
    json!({ "error": message.to_string() }).to_string()
}

fn finish(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => error(e),
    }
}

fn load(source: &str) -> Result<Design, String> {
    let design = Design::parse(source).map_err(|e| format!("parse error: {e}"))?;
    let issues = lint(&design.model);
    if !issues.is_empty() {
        let lines: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
        return Err(format!("lint: {}", lines.join("; ")));
    }
    Ok(design)
}

/// Names and sources of the bundled designs.
pub fn bundled_designs() -> String {
    let designs: Vec<Value> = corpus::bundled()
        .iter()
        .map(|d| json!({ "name": d.name(), "source": d.source }))
        .collect();
    Value::Array(designs).to_string()
}

/// Simulates comma-separated value tokens against `source` and returns the
/// coverage report and cycle trace.
pub fn simulate(source: &str, tokens: &str) -> String {
    finish((|| {
        let design = load(source)?;
        let vocab = Vocab::default();
        let values = tokens
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<Token>().map_err(|_| format!("bad token `{t}`")))
            .collect::<Result<Vec<_>, _>>()?;
        let seq = TokenSeq::from_values(&vocab, &values);
        let stim = validate_and_decode(&design.model, &vocab, &seq, T_MAX)
            .map_err(|e| format!("codec error: {e}"))?;
        let sim = Simulator::new(&design.model).map_err(|e| e.to_string())?;
        let (report, trace) = sim.run_traced(&stim).map_err(|e| e.to_string())?;
        Ok(json!({ "design": design.name(), "coverage": report, "trace": trace }))
    })())
}

/// Scaled strength and loss across coverage gaps in `[0, 1]` for a fixed
/// reward margin, alongside the unscaled loss.
pub fn loss_curve(beta: f64, margin: f64, points: usize) -> String {
    if !(beta > 0.0 && beta.is_finite()) || !margin.is_finite() || points < 2 {
        return error("need beta > 0, a finite margin and at least 2 points");
    }
    let curve: Vec<Value> = (0..points)
        .map(|i| {
            let gap = i as f64 / (points - 1) as f64;
            let beta_star = beta * GapScale::IdentityClamp.apply(gap);
            json!({
                "gap": gap,
                "beta_star": beta_star,
                "cddpo": neg_log_sigmoid(beta_star * margin),
                "dpo": neg_log_sigmoid(beta * margin),
            })
        })
        .collect();
    json!({ "beta": beta, "margin": margin, "points": curve }).to_string()
}

/// Samples `n` sequences from a curation teacher and scores them on `source`.
pub fn sample_teacher(source: &str, teacher: &str, n: usize, tau: f64, seed: u64) -> String {
    finish((|| {
        let design = load(source)?;
        let spec = match teacher {
            "uniform" => TeacherSpec::Uniform,
            "novelty" => TeacherSpec::Novelty,
            other => {
                return Err(format!(
                    "unknown teacher `{other}` (expected uniform or novelty)"
                ))
            }
        };
        let model = spec
            .build(Vocab::default(), K, T_MAX)
            .map_err(|e| e.to_string())?;
        let settings = EvalSettings { n, tau, seed };
        let report = eval_policy(&model, &design, &settings).map_err(|e| e.to_string())?;
        let samples: Vec<Value> = report
            .generations
            .iter()
            .map(|g| json!({ "tokens": g.tokens.interior(), "valid": g.valid, "average": g.coverage.average }))
            .collect();
        Ok(json!({
            "design": design.name(),
            "teacher": spec.label(),
            "valid_fraction": report.valid_fraction(),
            "mean": report.metrics.average.mean,
            "best": report.metrics.average.best,
            "samples": samples,
        }))
    })())
}
