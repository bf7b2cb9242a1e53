//! The JSON run report.

use serde::Serialize;
use std::collections::BTreeMap;
use std::time::Duration;
use streamlift::pipeline::Timings;
use streamlift::{Reason, ReasonCount, TransformReport};

#[derive(Debug, Default, Serialize)]
pub struct RunReport {
    pub files: Vec<FileReport>,
    pub totals: Totals,
}

#[derive(Debug, Default, Serialize)]
pub struct Totals {
    pub api_calls_total: usize,
    pub api_calls_replaced: usize,
    pub api_calls_remaining: usize,
    pub dyn_locations_introduced: usize,
    pub reasons: BTreeMap<&'static str, ReasonCount>,
}

#[derive(Debug, Serialize)]
pub struct FileReport {
    pub file: String,
    pub api_calls_total: usize,
    pub api_calls_replaced: usize,
    pub api_calls_remaining: usize,
    pub dyn_locations_introduced: usize,
    pub reasons: BTreeMap<&'static str, ReasonCount>,
    /// Milliseconds per phase.
    pub timings_ms: BTreeMap<&'static str, f64>,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

impl FileReport {
    pub fn new(
        file: &str,
        r: &TransformReport,
        hist: &BTreeMap<Reason, ReasonCount>,
        t: &Timings,
        transform: Duration,
    ) -> Self {
        let timings_ms = BTreeMap::from([
            ("frontend", ms(t.frontend)),
            ("streams", ms(t.streams)),
            ("sources", ms(t.sources)),
            ("support", ms(t.support)),
            ("transform", ms(transform)),
        ]);
        FileReport {
            file: file.to_string(),
            api_calls_total: r.api_calls_total,
            api_calls_replaced: r.api_calls_replaced,
            api_calls_remaining: r.api_calls_remaining,
            dyn_locations_introduced: r.dyn_locations_introduced,
            reasons: hist.iter().map(|(k, v)| (k.name(), *v)).collect(),
            timings_ms,
        }
    }
}

impl RunReport {
    pub fn finish(&mut self) {
        let mut t = Totals::default();
        for f in &self.files {
            t.api_calls_total += f.api_calls_total;
            t.api_calls_replaced += f.api_calls_replaced;
            t.api_calls_remaining += f.api_calls_remaining;
            t.dyn_locations_introduced += f.dyn_locations_introduced;
            for (k, c) in &f.reasons {
                let e = t.reasons.entry(k).or_default();
                e.affected += c.affected;
                e.unique += c.unique;
            }
        }
        self.totals = t;
    }
}
