//! Report serialization. JSON reports are rendered through serde_json's
//! default (sorted-key) object representation so a rerun on the same
//! input is byte-identical; the plot data is a tidy CSV of running NMAE
//! curves, one row per (step, model).

use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

use pmgp::learner::ThetaTraceEntry;
use pmgp::{Error, Result};

use crate::runner::{FutureForecast, ModelReport, ModelScore, RunConfig, SweepRow};

fn trend_name(cfg: &RunConfig) -> &'static str {
    match cfg.trend {
        pmgp::kernels::TrendKind::Constant => "constant",
        pmgp::kernels::TrendKind::Linear => "linear",
    }
}

fn config_json(cfg: &RunConfig) -> Value {
    json!({
        "p": cfg.p,
        "components": cfg.components,
        "c": cfg.c,
        "eps": cfg.eps,
        "trend": trend_name(cfg),
        "fs_override": cfg.fs_override,
    })
}

fn trace_json(trace: &[ThetaTraceEntry<f64>]) -> Value {
    Value::Array(
        trace
            .iter()
            .map(|e| {
                json!({
                    "step": e.k,
                    "t": e.t,
                    "theta": e.theta.to_vec(),
                    "local_loglik": e.local_loglik,
                    "fired": e.fired,
                })
            })
            .collect(),
    )
}

fn score_fields(score: &ModelScore, out: &mut Map<String, Value>) {
    out.insert("nmae".into(), json!(score.nmae));
    out.insert("nmae_std".into(), json!(score.nmae_std));
    out.insert("n_steps".into(), json!(score.n_steps));
    if let Some(updates) = score.theta_updates {
        out.insert("theta_updates".into(), json!(updates));
    }
    if let Some(trace) = &score.trace {
        out.insert("theta_trace".into(), trace_json(trace));
    }
    out.insert(
        "runtime_ms".into(),
        score.runtime_ms.map_or(Value::Null, |ms| json!(ms)),
    );
}

fn model_entry(report: &ModelReport) -> Value {
    let mut entry = Map::new();
    entry.insert("model".into(), json!(report.model));
    match &report.outcome {
        Ok(score) => score_fields(score, &mut entry),
        Err(message) => {
            entry.insert("error".into(), json!(message));
        }
    }
    Value::Object(entry)
}

/// Report for a `benchmark` run: one entry per requested model.
pub fn benchmark_report(cfg: &RunConfig, reports: &[ModelReport]) -> Value {
    json!({
        "config": config_json(cfg),
        "models": reports.iter().map(model_entry).collect::<Vec<_>>(),
    })
}

/// Report for a single-model `forecast` run.
pub fn forecast_report(
    cfg: &RunConfig,
    score: &ModelScore,
    fs: f64,
    future: &[FutureForecast],
) -> Value {
    let mut entry = Map::new();
    entry.insert("model".into(), json!("pmgp"));
    score_fields(score, &mut entry);
    entry.insert("fs".into(), json!(fs));
    if !future.is_empty() {
        entry.insert(
            "future".into(),
            Value::Array(
                future
                    .iter()
                    .map(|f| {
                        json!({
                            "t": f.t,
                            "mean": f.mean,
                            "var": f.var,
                            "latent_var": f.latent_var,
                        })
                    })
                    .collect(),
            ),
        );
    }
    entry.insert("config".into(), config_json(cfg));
    Value::Object(entry)
}

/// Report for a `loglik` run.
pub fn loglik_report(cfg: &RunConfig, value: f64, exact: bool, n_steps: usize) -> Value {
    json!({
        "config": config_json(cfg),
        "loglik": value,
        "method": if exact { "dense" } else { "filter" },
        "n_steps": n_steps,
    })
}

/// Report for a `sweep` run.
pub fn sweep_report(cfg: &RunConfig, param: &str, rows: &[SweepRow]) -> Value {
    let results: Vec<Value> = rows
        .iter()
        .map(|row| match &row.outcome {
            Ok((nmae, nmae_std)) => json!({
                "value": row.value,
                "nmae": nmae,
                "nmae_std": nmae_std,
            }),
            Err(message) => json!({
                "value": row.value,
                "error": message,
            }),
        })
        .collect();
    json!({
        "config": config_json(cfg),
        "param": param,
        "results": results,
    })
}

/// Render a report as pretty JSON with a trailing newline.
pub fn render(report: &Value) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report is valid JSON");
    text.push('\n');
    text
}

/// Write a report to a file, or to stdout when no path is given.
pub fn emit(report: &Value, out: Option<&Path>) -> Result<()> {
    let text = render(report);
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| Error::Input(format!("cannot write report: {e}")))
        }
    }
}

/// Write the tidy running-NMAE curves for every successful model:
/// `step,model,running_nmae` with 1-based scored steps.
pub fn write_plot_data(path: &Path, reports: &[ModelReport]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))?;
    writer
        .write_record(["step", "model", "running_nmae"])
        .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))?;
    for report in reports {
        if let Ok(score) = &report.outcome {
            for (i, value) in score.running.iter().enumerate() {
                writer
                    .write_record([
                        (i + 1).to_string(),
                        report.model.clone(),
                        format!("{value}"),
                    ])
                    .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))?;
            }
        }
    }
    writer
        .flush()
        .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}
