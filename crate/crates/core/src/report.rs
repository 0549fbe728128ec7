//! Named residual checks with verdicts, serializable as JSON.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::numerics::Tolerance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// Passes when `residual <= tolerance`.
    pub fn bound(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        CheckRecord { name: name.into(), residual, tolerance, pass: residual <= tolerance }
    }

    /// Passes when an integer count matches its expected value; the residual is the absolute gap.
    pub fn count(name: impl Into<String>, got: usize, expected: usize) -> Self {
        let gap = (got as f64 - expected as f64).abs();
        CheckRecord { name: name.into(), residual: gap, tolerance: 0.0, pass: got == expected }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub system: String,
    pub records: Vec<CheckRecord>,
    pub seeds: Vec<u64>,
    pub tolerances: Tolerance,
    /// Seconds spent in each named stage.
    pub timings: BTreeMap<String, f64>,
}

impl CheckReport {
    pub fn new(system: impl Into<String>, tolerances: Tolerance) -> Self {
        CheckReport {
            system: system.into(),
            records: Vec::new(),
            seeds: Vec::new(),
            tolerances,
            timings: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, record: CheckRecord) {
        self.records.push(record);
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = CheckRecord>) {
        self.records.extend(records);
    }

    /// Folds a sequence of per-point records into the worst case per name, keeping first-seen order.
    pub fn merge_worst(&mut self, records: impl IntoIterator<Item = CheckRecord>) {
        for r in records {
            match self.records.iter_mut().find(|x| x.name == r.name) {
                Some(existing) => {
                    let worse = (existing.pass && !r.pass)
                        || (existing.pass == r.pass && r.residual > existing.residual);
                    if worse {
                        *existing = r;
                    }
                }
                None => self.records.push(r),
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// One aligned line per record.
    pub fn to_table(&self) -> String {
        let mut out = format!("system: {}\n", self.system);
        for r in &self.records {
            out.push_str(&format!(
                "{:<6} {:<28} residual {:>10.3e}  tol {:>9.2e}\n",
                if r.pass { "PASS" } else { "FAIL" },
                r.name,
                r.residual,
                r.tolerance
            ));
        }
        out.push_str(&format!("overall: {}\n", if self.pass() { "PASS" } else { "FAIL" }));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overall_is_conjunction() {
        let mut r = CheckReport::new("t", Tolerance::default());
        r.push(CheckRecord::bound("eq_a", 1e-12, 1e-9));
        assert!(r.pass());
        r.push(CheckRecord::count("eq_rank", 3, 4));
        assert!(!r.pass());
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn json_round_trip() {
        let mut r = CheckReport::new("toy", Tolerance::default());
        r.push(CheckRecord::bound("eq_21q", 1.25e-15, 1e-9));
        r.seeds.push(7);
        r.timings.insert("build".into(), 0.5);
        let back = CheckReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn merge_keeps_worst() {
        let mut r = CheckReport::new("t", Tolerance::default());
        r.merge_worst([CheckRecord::bound("x", 1e-12, 1e-9)]);
        r.merge_worst([CheckRecord::bound("x", 1e-10, 1e-9)]);
        r.merge_worst([CheckRecord::bound("x", 1e-11, 1e-9)]);
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.get("x").unwrap().residual, 1e-10);
        r.merge_worst([CheckRecord::bound("x", 1e-3, 1e-9)]);
        assert!(!r.pass());
    }
}
