use std::io::Write;

use serde::{Deserialize, Serialize};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Infeasible,
    Error,
}

/// One (sweep point, trial, scheme) record.
///
/// `gap` is per trial and repeated on every scheme row of that trial: the
/// subcarrier-gain total minus the fragmentation total for the sharing
/// experiments, `(oracle − branch_and_bound)/oracle` for the intra-operator one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub point: usize,
    pub trial: usize,
    pub seed: u64,
    pub operators: Option<usize>,
    pub users_per_operator: Option<usize>,
    pub p_max_dbm: Option<f64>,
    pub scheme: String,
    /// bits/s/Hz: normalized total throughput or NDC sum rate.
    pub value: Option<f64>,
    pub gap: Option<f64>,
    pub status: Status,
    pub message: String,
    pub nodes: Option<usize>,
    pub wall_time_s: Option<f64>,
}

/// Canonical scheme order inside a trial.
pub(crate) fn scheme_rank(scheme: &str) -> usize {
    match scheme {
        "subcarrier_gain" | "oracle" => 0,
        "fragmentation" | "branch_and_bound" => 1,
        _ => 2,
    }
}

pub(crate) fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        (a.point, a.trial, scheme_rank(&a.scheme), &a.scheme).cmp(&(b.point, b.trial, scheme_rank(&b.scheme), &b.scheme))
    });
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), HarnessError> {
    let io = |e: csv::Error| HarnessError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "experiment", "point", "trial", "seed", "operators", "users_per_operator", "p_max_dbm", "scheme",
            "value", "gap", "status", "message", "nodes", "wall_time_s",
        ])
        .map_err(io)?;
    }
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

pub fn write_json<W: Write>(rows: &[ResultRow], mut out: W) -> Result<(), HarnessError> {
    serde_json::to_writer_pretty(&mut out, rows).map_err(|e| HarnessError::Io(e.to_string()))?;
    writeln!(out).map_err(|e| HarnessError::Io(e.to_string()))
}

/// Trial averages at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub point: usize,
    pub operators: Option<usize>,
    pub users_per_operator: Option<usize>,
    pub p_max_dbm: Option<f64>,
    /// `(scheme, mean value, successful trials)` in canonical order.
    pub schemes: Vec<(String, f64, usize)>,
    pub gap_mean: f64,
    /// Standard error of `gap_mean`.
    pub gap_se: f64,
    pub gap_max: f64,
    pub gaps: usize,
    pub failed_rows: usize,
}

impl PointSummary {
    pub fn scheme_mean(&self, scheme: &str) -> Option<f64> {
        self.schemes.iter().find(|s| s.0 == scheme).map(|s| s.1)
    }
}

/// Groups rows by sweep point.
pub fn summarize(rows: &[ResultRow]) -> Vec<PointSummary> {
    let mut points: Vec<usize> = rows.iter().map(|r| r.point).collect();
    points.sort_unstable();
    points.dedup();
    points
        .into_iter()
        .map(|point| {
            let at: Vec<&ResultRow> = rows.iter().filter(|r| r.point == point).collect();
            let first = at[0];
            let mut names: Vec<&str> = at.iter().map(|r| r.scheme.as_str()).collect();
            names.sort_by_key(|s| (scheme_rank(s), *s));
            names.dedup();
            let schemes = names
                .into_iter()
                .map(|name| {
                    let vals: Vec<f64> = at.iter().filter(|r| r.scheme == name).filter_map(|r| r.value).collect();
                    (name.to_string(), mean(&vals), vals.len())
                })
                .collect();
            // One gap per trial.
            let mut trials: Vec<(usize, f64)> = at.iter().filter_map(|r| r.gap.map(|g| (r.trial, g))).collect();
            trials.dedup_by_key(|t| t.0);
            let gaps: Vec<f64> = trials.into_iter().map(|t| t.1).collect();
            let gap_mean = mean(&gaps);
            let gap_se = if gaps.len() > 1 {
                let var = gaps.iter().map(|g| (g - gap_mean).powi(2)).sum::<f64>() / (gaps.len() - 1) as f64;
                (var / gaps.len() as f64).sqrt()
            } else {
                0.0
            };
            PointSummary {
                point,
                operators: first.operators,
                users_per_operator: first.users_per_operator,
                p_max_dbm: first.p_max_dbm,
                schemes,
                gap_mean,
                gap_se,
                gap_max: gaps.iter().copied().fold(f64::NAN, f64::max),
                gaps: gaps.len(),
                failed_rows: at.iter().filter(|r| r.status != Status::Ok).count(),
            }
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}
