//! Inference cost accounting and cost/success Pareto efficiency.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::services::CallUsage;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PriceTable {
    /// Dollars per 1,000 prompt tokens.
    pub per_1k_prompt: f64,
    /// Dollars per 1,000 completion tokens.
    pub per_1k_completion: f64,
}

impl PriceTable {
    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn call_cost(&self, call: &CallUsage) -> f64 {
        call.prompt_tokens as f64 / 1000.0 * self.per_1k_prompt
            + call.completion_tokens as f64 / 1000.0 * self.per_1k_completion
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRecord {
    pub session_id: String,
    pub calls: Vec<CallUsage>,
    pub price: PriceTable,
    /// One-off hardware spend; reported alongside, never amortized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hardware_capex: Option<f64>,
}

impl CostRecord {
    pub fn session_cost(&self) -> f64 {
        self.calls.iter().map(|c| self.price.call_cost(c)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSummary {
    pub sessions: usize,
    pub mean_cost_per_session: f64,
    /// Dollars per success-rate percentage point; infinite when nothing
    /// succeeded.
    pub cost_to_success: f64,
    pub hardware_capex: Option<f64>,
}

pub fn cost_summary(records: &[CostRecord], m_sr: f64) -> Result<CostSummary, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyGroup("no cost records".into()));
    }
    let mean = records.iter().map(CostRecord::session_cost).sum::<f64>() / records.len() as f64;
    let cost_to_success = if m_sr > 0.0 { mean / m_sr } else { f64::INFINITY };
    let hardware_capex = records.iter().filter_map(|r| r.hardware_capex).reduce(f64::max);
    Ok(CostSummary {
        sessions: records.len(),
        mean_cost_per_session: mean,
        cost_to_success,
        hardware_capex,
    })
}

pub fn load_cost_records(path: impl AsRef<Path>) -> Result<Vec<CostRecord>, EvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Parse {
                file: path.display().to_string(),
                detail: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

/// Rounds to `sig` significant figures.
pub fn round_sig(x: f64, sig: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let decimals = sig as i32 - 1 - x.abs().log10().floor() as i32;
    let scale = 10f64.powi(decimals);
    (x * scale).round() / scale
}

/// Fixed-point text with `sig` significant figures (`inf` for infinity).
pub fn format_sig(x: f64, sig: u32) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 || x.is_nan() {
        return format!("{x}");
    }
    let r = round_sig(x, sig);
    let decimals = (sig as i32 - 1 - r.abs().log10().floor() as i32).max(0) as usize;
    format!("{r:.decimals$}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub label: String,
    pub cost: f64,
    /// Success rate in percent.
    pub success: f64,
}

/// Points not dominated by any other (cost no higher and success no lower,
/// strictly better in one). Sorted by cost, then by success descending;
/// identical points are all kept. NaN points are dropped.
pub fn pareto_frontier(configs: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut pts: Vec<&ParetoPoint> = configs
        .iter()
        .filter(|p| !p.cost.is_nan() && !p.success.is_nan())
        .collect();
    pts.sort_by(|a, b| {
        a.cost
            .partial_cmp(&b.cost)
            .unwrap()
            .then(b.success.partial_cmp(&a.success).unwrap())
    });
    let mut out = Vec::new();
    let mut best_cheaper = f64::NEG_INFINITY;
    let mut i = 0;
    while i < pts.len() {
        let cost = pts[i].cost;
        let group_best = pts[i].success;
        let mut j = i;
        while j < pts.len() && pts[j].cost == cost {
            if pts[j].success == group_best && group_best > best_cheaper {
                out.push(pts[j].clone());
            }
            j += 1;
        }
        best_cheaper = best_cheaper.max(group_best);
        i = j;
    }
    out
}

/// Quadratic dominance filter, kept as a reference implementation.
pub fn pareto_frontier_brute_force(configs: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let pts: Vec<&ParetoPoint> = configs
        .iter()
        .filter(|p| !p.cost.is_nan() && !p.success.is_nan())
        .collect();
    let mut out: Vec<ParetoPoint> = pts
        .iter()
        .filter(|p| {
            !pts.iter().any(|q| {
                q.cost <= p.cost && q.success >= p.success && (q.cost < p.cost || q.success > p.success)
            })
        })
        .map(|p| (*p).clone())
        .collect();
    out.sort_by(|a, b| {
        a.cost
            .partial_cmp(&b.cost)
            .unwrap()
            .then(b.success.partial_cmp(&a.success).unwrap())
    });
    out
}
