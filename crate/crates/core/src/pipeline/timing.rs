use std::fs::File;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default executions per stage in a timing report.
pub const DEFAULT_EXECUTIONS: usize = 200;

/// Wall-clock milliseconds of one call.
pub fn time_ms<R>(f: impl FnOnce() -> R) -> (R, f64) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed().as_secs_f64() * 1e3)
}

/// Runs `f` `n` times and returns each duration in milliseconds.
pub fn time_stage(n: usize, mut f: impl FnMut()) -> Vec<f64> {
    (0..n).map(|_| time_ms(&mut f).1).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSample {
    pub stage: String,
    pub iteration: usize,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStat {
    pub stage: String,
    pub mean_ms: f64,
    /// Population standard deviation.
    pub std_ms: f64,
    pub n: usize,
}

/// Per-stage statistics in first-seen stage order, plus the raw samples they came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimings {
    pub stats: Vec<StageStat>,
    pub samples: Vec<StageSample>,
}

impl StageTimings {
    pub fn from_samples(samples: Vec<StageSample>) -> Self {
        let mut order: Vec<&str> = Vec::new();
        for s in &samples {
            if !order.contains(&s.stage.as_str()) {
                order.push(&s.stage);
            }
        }
        let stats = order
            .iter()
            .map(|&stage| {
                let v: Vec<f64> = samples.iter().filter(|s| s.stage == stage).map(|s| s.ms).collect();
                let (mean, std, _, _) = crate::syntheval::summarize(&v);
                StageStat {
                    stage: stage.to_string(),
                    mean_ms: mean,
                    std_ms: std,
                    n: v.len(),
                }
            })
            .collect();
        StageTimings { stats, samples }
    }

    pub fn push_stage(&mut self, stage: &str, durations: &[f64]) {
        self.samples
            .extend(durations.iter().enumerate().map(|(i, &ms)| StageSample {
                stage: stage.to_string(),
                iteration: i,
                ms,
            }));
        *self = Self::from_samples(std::mem::take(&mut self.samples));
    }

    pub fn stat(&self, stage: &str) -> Option<&StageStat> {
        self.stats.iter().find(|s| s.stage == stage)
    }

    /// Columns `stage, mean_ms, std_ms, n`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for s in &self.stats {
            w.serialize(s)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }

    /// Columns `stage, iteration, ms`.
    pub fn write_samples_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for s in &self.samples {
            w.serialize(s)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_samples_csv(path: &Path) -> Result<Vec<StageSample>> {
        let mut r = csv::Reader::from_path(path)?;
        Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
    }

    pub fn read_csv(path: &Path) -> Result<Vec<StageStat>> {
        let mut r = csv::Reader::from_path(path)?;
        Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
    }

    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let mut out = format!("{:<20} {:>10} {:>10} {:>6}\n", "stage", "mean ms", "std ms", "n");
        for s in &self.stats {
            out += &format!("{:<20} {:>10.3} {:>10.3} {:>6}\n", s.stage, s.mean_ms, s.std_ms, s.n);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    #[test]
    fn sleeping_stage_is_measured() {
        let d = time_stage(5, || std::thread::sleep(Duration::from_millis(5)));
        let mut t = StageTimings::default();
        t.push_stage("sleep", &d);
        let s = t.stat("sleep").unwrap();
        assert_eq!(s.n, 5);
        assert!(s.mean_ms >= 5.0 && s.mean_ms < 6.0, "{}", s.mean_ms);
    }

    #[test]
    fn csv_reaggregates_exactly() {
        let mut t = StageTimings::default();
        t.push_stage("a", &[1.0, 2.5, 0.1 + 0.2]);
        t.push_stage("b", &[7.0]);
        let dir = tempfile::tempdir().unwrap();
        let (p, q) = (dir.path().join("t.csv"), dir.path().join("s.csv"));
        t.write_csv(&p).unwrap();
        t.write_samples_csv(&q).unwrap();
        let again = StageTimings::from_samples(StageTimings::read_samples_csv(&q).unwrap());
        assert_eq!(again.stats, StageTimings::read_csv(&p).unwrap());
        assert!(t.to_csv().unwrap().starts_with("stage,mean_ms,std_ms,n\na,"));
        assert!(t.table().contains("b"));
    }
}
