//! Per-iteration telemetry as line-delimited `key:value` records.

use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lr: f64,
    pub mean_grad_norm: f64,
    /// Mean relative stress of the quartets sampled this iteration (NaN when
    /// the run has no quartet arm).
    pub sampled_stress: f64,
    pub extra: Vec<(&'static str, f64)>,
}

impl IterationRecord {
    pub fn to_line(&self) -> String {
        let mut s = format!(
            "iteration:{} lr:{:e} mean_grad_norm:{:e} sampled_stress:{:e}",
            self.iteration, self.lr, self.mean_grad_norm, self.sampled_stress
        );
        for (k, v) in &self.extra {
            s.push_str(&format!(" {k}:{v:e}"));
        }
        s
    }
}

pub trait Telemetry {
    fn record(&mut self, rec: &IterationRecord);
}

/// Discards everything.
pub struct NoTelemetry;

impl Telemetry for NoTelemetry {
    fn record(&mut self, _rec: &IterationRecord) {}
}

/// Writes one record per line to any writer, every `every` iterations.
pub struct LineTelemetry<W: Write> {
    out: W,
    every: usize,
}

impl<W: Write> LineTelemetry<W> {
    pub fn new(out: W, every: usize) -> Self {
        LineTelemetry { out, every: every.max(1) }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> Telemetry for LineTelemetry<W> {
    fn record(&mut self, rec: &IterationRecord) {
        if rec.iteration.is_multiple_of(self.every) {
            if let Err(e) = writeln!(self.out, "{}", rec.to_line()) {
                log::warn!("telemetry write failed: {e}");
            }
        }
    }
}

/// Keeps every record in memory; handy in tests.
#[derive(Default)]
pub struct VecTelemetry(pub Vec<IterationRecord>);

impl Telemetry for VecTelemetry {
    fn record(&mut self, rec: &IterationRecord) {
        self.0.push(rec.clone());
    }
}
