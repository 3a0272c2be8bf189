//! Browser bindings. Every export takes and returns JSON text so the page
//! needs no generated types; the plain functions below are what the exports
//! wrap and what the tests call.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use lsbd_core::config::{ModelConfig, RunConfig, SCHEMA};
use lsbd_core::ledger::{gap_prefactor, BoundParams, BoundTable, DELTA};
use lsbd_core::report::{self, Claim, Status};

/// Keeps a single run under a second or so in the page.
pub const MAX_DEMO_DIM: usize = 256;

#[derive(Serialize)]
struct RunSummary {
    verdict: Status,
    sites: usize,
    d: usize,
    t: f64,
    final_gap: Option<f64>,
    spectrum_distance: Option<f64>,
    steps: Vec<StepRow>,
    claims: Vec<Claim>,
}

#[derive(Serialize)]
struct StepRow {
    step: String,
    gap: f64,
    s_norm: f64,
    v_after: f64,
    series_order: usize,
}

fn parse_config(config_json: &str) -> Result<RunConfig, String> {
    let mut value: serde_json::Value = serde_json::from_str(config_json).map_err(|e| e.to_string())?;
    if let Some(obj) = value.as_object_mut() {
        obj.entry("schema").or_insert_with(|| SCHEMA.into());
    }
    let cfg: RunConfig = serde_json::from_value(value).map_err(|e| e.to_string())?;
    cfg.validate().map_err(|e| e.to_string())?;
    if let ModelConfig::Spin { spec_file: Some(_), .. } = cfg.model {
        return Err("spec files are not available in the browser; use kind \"custom\"".into());
    }
    let model = cfg.model.build().map_err(|e| e.to_string())?;
    let dim = model.chain.dim_of(model.chain.whole());
    if dim > MAX_DEMO_DIM {
        return Err(format!("d^N = {dim} is above the demo limit {MAX_DEMO_DIM}"));
    }
    Ok(cfg)
}

pub fn run_flow_json(config_json: &str) -> Result<String, String> {
    let cfg = parse_config(config_json)?;
    let rep = report::run(&cfg).map_err(|e| e.to_string())?;
    let summary = RunSummary {
        verdict: rep.verdict,
        sites: rep.sites,
        d: rep.d,
        t: rep.t,
        final_gap: rep.certificate.as_ref().map(|c| c.gap.measured),
        spectrum_distance: rep.certificate.as_ref().and_then(|c| c.spectrum_distance),
        steps: rep
            .steps
            .iter()
            .map(|s| StepRow {
                step: s.step.to_string(),
                gap: s.gap,
                s_norm: s.s_norm,
                v_after: s.v_after,
                series_order: s.series_order,
            })
            .collect(),
        claims: rep.claims,
    };
    serde_json::to_string(&summary).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct BoundsSummary {
    params: BoundParams,
    radius: f64,
    prefactor: Option<f64>,
    table: BoundTable,
}

pub fn bound_table_json(sites: usize, t: f64) -> Result<String, String> {
    if !(2..=12).contains(&sites) {
        return Err("sites must be between 2 and 12".into());
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err("t must be finite and non-negative".into());
    }
    let params = BoundParams::new(t, DELTA).map_err(|e| e.to_string())?;
    let table = BoundTable::build(sites, t).map_err(|e| e.to_string())?;
    serde_json::to_string(&BoundsSummary {
        radius: params.radius(),
        prefactor: gap_prefactor(t),
        params,
        table,
    })
    .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CurvePoint {
    t: f64,
    gap: Option<f64>,
    verdict: Status,
}

/// Final gap and verdict at `points` couplings spaced evenly on `[0, t_max]`.
pub fn gap_curve_json(config_json: &str, t_max: f64, points: usize) -> Result<String, String> {
    let cfg = parse_config(config_json)?;
    if !(t_max > 0.0 && t_max.is_finite()) || !(2..=64).contains(&points) {
        return Err("need t_max > 0 and 2..=64 points".into());
    }
    let curve: Vec<CurvePoint> = (0..points)
        .map(|i| {
            let t = t_max * i as f64 / (points - 1) as f64;
            let mut c = cfg.clone();
            c.t = Some(t);
            match report::run(&c) {
                Ok(rep) => CurvePoint {
                    t,
                    gap: rep.certificate.as_ref().map(|x| x.gap.measured),
                    verdict: rep.verdict,
                },
                Err(_) => CurvePoint { t, gap: None, verdict: Status::Fail },
            }
        })
        .collect();
    serde_json::to_string(&curve).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn run_flow(config_json: &str) -> Result<String, JsError> {
    run_flow_json(config_json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bound_table(sites: usize, t: f64) -> Result<String, JsError> {
    bound_table_json(sites, t).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn gap_curve(config_json: &str, t_max: f64, points: usize) -> Result<String, JsError> {
    gap_curve_json(config_json, t_max, points).map_err(|e| JsError::new(&e))
}
