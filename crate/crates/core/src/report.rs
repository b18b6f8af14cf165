//! Plain-text run reports.
//!
//! A report is a sequence of `[section]` blocks holding `key = value` lines
//! or CSV tables. Floats are written in shortest round-trip form, so a report
//! pins down every number it prints. Wall-clock times live in the trailing
//! `[timing]` section only; everything above it is reproducible from the
//! `[config]` block.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::criteria::FitSummary;
use crate::error::{Error, Result};
use crate::model::Architecture;
use crate::selector::{SelectionTrace, StepStatus};
use crate::simlab::{ReplicateRecord, SimulationReport};
use crate::trainer::{FitDiagnostics, FittedModel};

/// Header of the section that holds non-reproducible values.
pub const TIMING_SECTION: &str = "[timing]";

/// Shortest string that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_else(|| "NA".into())
}

fn input_names(arch: &Architecture, names: &[String]) -> String {
    arch.inputs()
        .iter()
        .map(|&j| names.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// One fitted model as it appears in a report.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelReport {
    pub arch: Architecture,
    pub inputs: String,
    pub summary: FitSummary,
    pub diagnostics: FitDiagnostics,
    pub starts_converged: usize,
    pub objective: Option<f64>,
    pub test_mse: Option<f64>,
}

impl ModelReport {
    pub fn new(model: &FittedModel, names: &[String], objective: Option<f64>, test_mse: Option<f64>) -> Self {
        Self {
            arch: model.arch.clone(),
            inputs: input_names(&model.arch, names),
            summary: model.summary,
            diagnostics: model.diagnostics,
            starts_converged: model.starts_converged,
            objective,
            test_mse,
        }
    }

    fn write(&self, out: &mut String, header: &str) {
        let s = &self.summary;
        let _ = writeln!(out, "[{header}]");
        let _ = writeln!(out, "inputs = {}", self.inputs);
        let _ = writeln!(out, "p = {}", self.arch.p());
        let _ = writeln!(out, "q = {}", self.arch.q());
        let _ = writeln!(out, "k = {}", s.k);
        let _ = writeln!(out, "n = {}", s.n);
        let _ = writeln!(out, "rss = {}", fmt_f64(s.rss));
        let _ = writeln!(out, "sigma2_hat = {}", fmt_f64(s.sigma2_hat));
        let _ = writeln!(out, "log_lik = {}", fmt_f64(s.log_lik));
        let _ = writeln!(out, "bic = {}", fmt_f64(s.bic));
        let _ = writeln!(out, "aic = {}", fmt_f64(s.aic));
        if let Some(v) = self.objective {
            let _ = writeln!(out, "objective = {}", fmt_f64(v));
        }
        let _ = writeln!(out, "test_mse = {}", fmt_opt(self.test_mse));
        let _ = writeln!(out, "termination = {:?}", self.diagnostics.termination);
        let _ = writeln!(out, "gradient_sup_norm = {}", fmt_f64(self.diagnostics.gradient_sup_norm));
        let _ = writeln!(out, "starts_converged = {}", self.starts_converged);
        out.push('\n');
    }
}

/// Report of a `fit` or `select` run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: String,
    /// Effective parameters in display order.
    pub config: Vec<(String, String)>,
    pub selected: ModelReport,
    /// The full model (all inputs, `q_max` nodes) for comparison.
    pub full: Option<ModelReport>,
    pub trace: Option<SelectionTrace>,
    pub covariate_names: Vec<String>,
    pub fits: Option<usize>,
    pub wall_time: f64,
}

pub const TRACE_HEADER: [&str; 9] = [
    "phase", "round", "inputs", "q", "k", "objective", "status", "termination", "message",
];

fn trace_rows(trace: &SelectionTrace, names: &[String]) -> Vec<[String; 9]> {
    trace
        .steps
        .iter()
        .map(|s| {
            let (status, message) = match &s.status {
                StepStatus::Accepted => ("accepted", String::new()),
                StepStatus::Rejected => ("rejected", String::new()),
                StepStatus::Failed(m) => ("failed", m.clone()),
            };
            [
                s.phase.label().to_string(),
                s.round.to_string(),
                input_names(&s.arch, names),
                s.arch.q().to_string(),
                s.arch.param_count().to_string(),
                fmt_opt(s.objective),
                status.to_string(),
                s.diagnostics
                    .map(|d| format!("{:?}", d.termination))
                    .unwrap_or_else(|| "NA".into()),
                message,
            ]
        })
        .collect()
}

fn csv_table<const N: usize>(header: [&str; N], rows: &[[String; N]]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Csv(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write_config(out: &mut String, command: &str, config: &[(String, String)]) {
    out.push_str("[config]\n");
    let _ = writeln!(out, "command = {command}");
    for (k, v) in config {
        let _ = writeln!(out, "{k} = {v}");
    }
    out.push('\n');
}

impl RunReport {
    pub fn render(&self) -> Result<String> {
        let mut out = String::new();
        write_config(&mut out, &self.command, &self.config);
        self.selected.write(&mut out, "selected");
        if let Some(full) = &self.full {
            full.write(&mut out, "full");
            out.push_str("[comparison]\n");
            let _ = writeln!(out, "delta_bic = {}", fmt_f64(full.summary.bic - self.selected.summary.bic));
            let _ = writeln!(out, "delta_k = {}", full.summary.k as i64 - self.selected.summary.k as i64);
            out.push('\n');
        }
        if let Some(fits) = self.fits {
            let _ = writeln!(out, "[search]\nfits = {fits}\n");
        }
        if let Some(trace) = &self.trace {
            out.push_str("[trace]\n");
            out.push_str(&csv_table(TRACE_HEADER, &trace_rows(trace, &self.covariate_names))?);
            out.push('\n');
        }
        let _ = writeln!(out, "{TIMING_SECTION}\nwall_time_s = {}", fmt_f64(self.wall_time));
        Ok(out)
    }

    /// Writes the selection trace as a standalone CSV file.
    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let trace = self.trace.clone().unwrap_or_default();
        write_file(path, &csv_table(TRACE_HEADER, &trace_rows(&trace, &self.covariate_names))?)
    }
}

pub const REPLICATE_HEADER: [&str; 14] = [
    "replicate", "status", "inputs", "q", "k", "c", "pi", "ph", "pt", "bic", "aic", "objective", "test_mse",
    "fits",
];

fn replicate_row(r: &ReplicateRecord) -> [String; 14] {
    match &r.outcome {
        Ok(m) => [
            r.index.to_string(),
            "ok".into(),
            input_names(&m.selected, &[]),
            m.selected.q().to_string(),
            m.k.to_string(),
            m.recovery.c.to_string(),
            (m.recovery.pi_hit as u8).to_string(),
            (m.recovery.ph_hit as u8).to_string(),
            (m.recovery.pt_hit as u8).to_string(),
            fmt_f64(m.bic),
            fmt_f64(m.aic),
            fmt_f64(m.objective),
            fmt_f64(m.test_mse),
            m.fits.to_string(),
        ],
        Err(e) => {
            let mut row: [String; 14] = std::array::from_fn(|_| "NA".to_string());
            row[0] = r.index.to_string();
            row[1] = format!("failed: {e}");
            row
        }
    }
}

/// Renders a simulation report. `config` is the effective parameter echo.
pub fn render_simulation(report: &SimulationReport, config: &[(String, String)]) -> Result<String> {
    let mut out = String::new();
    write_config(&mut out, "simulate", config);
    let a = &report.aggregate;
    out.push_str("[aggregate]\n");
    let _ = writeln!(out, "completed = {}", a.completed);
    let _ = writeln!(out, "failed = {}", a.failed);
    for (k, v) in [
        ("c_mean", a.c_mean),
        ("pi", a.pi),
        ("ph", a.ph),
        ("pt", a.pt),
        ("median_k", a.median_k),
        ("median_test_mse", a.median_test_mse),
        ("median_bic", a.median_bic),
        ("median_aic", a.median_aic),
    ] {
        let _ = writeln!(out, "{k} = {}", fmt_f64(v));
    }
    out.push('\n');
    out.push_str("[replicates]\n");
    let rows: Vec<_> = report.records.iter().map(replicate_row).collect();
    out.push_str(&csv_table(REPLICATE_HEADER, &rows)?);
    out.push('\n');
    let _ = writeln!(out, "{TIMING_SECTION}\nmedian_time_s = {}", fmt_f64(a.median_time));
    for r in &report.records {
        if let Ok(m) = &r.outcome {
            let _ = writeln!(out, "replicate_{}_s = {}", r.index, fmt_f64(m.wall_time));
        }
    }
    Ok(out)
}

/// The report with its `[timing]` section removed.
pub fn strip_timing(report: &str) -> &str {
    match report.find(TIMING_SECTION) {
        Some(i) => &report[..i],
        None => report,
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)
}
