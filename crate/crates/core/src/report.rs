//! Learning-curve CSVs, the accuracy table and the augmentation delta summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dnn::{IterationRecord, TrainingReport};
use crate::hierarchy::{Architecture, EvaluationRow};
use crate::{Error, Result};

pub const REPORT_HEADER: &str = "iteration,cost,train_ca,test_ca";
pub const TABLE_HEADER: &str = "subject,arch,with_synthetic,master_ca,slave_ca,end_to_end_ca";

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn render_training_report(report: &TrainingReport) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in &report.records {
        let test = r.test_ca.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", r.iteration, r.cost, r.train_ca, test).unwrap();
    }
    out
}

pub fn write_training_report(path: &Path, report: &TrainingReport) -> Result<()> {
    write_text(path, &render_training_report(report))
}

/// Parses a report back; `network` names it since the file does not.
pub fn parse_training_report(text: &str, network: &str, path: &Path) -> Result<TrainingReport> {
    let mut lines = text.lines();
    if lines.next() != Some(REPORT_HEADER) {
        return Err(Error::format(path, format!("expected header {REPORT_HEADER}")));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            row,
            message,
        };
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(bad(format!("expected 4 cells, found {}", cells.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
        let iteration: usize = cells[0]
            .parse()
            .map_err(|_| bad(format!("bad iteration {:?}", cells[0])))?;
        if iteration != records.len() + 1 {
            return Err(bad(format!("iteration {iteration} out of sequence")));
        }
        let record = IterationRecord {
            iteration,
            cost: num(cells[1])?,
            train_ca: num(cells[2])?,
            test_ca: if cells[3].is_empty() { None } else { Some(num(cells[3])?) },
        };
        if !(record.cost.is_finite() && record.cost >= 0.0) {
            return Err(bad(format!("cost {} is not finite and nonnegative", record.cost)));
        }
        records.push(record);
    }
    Ok(TrainingReport {
        network: network.to_string(),
        records,
        elapsed: Duration::ZERO,
    })
}

pub fn read_training_report(path: &Path, network: &str) -> Result<TrainingReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_training_report(&text, network, path)
}

fn pct(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.3}")).unwrap_or_default()
}

pub fn render_evaluation_table(rows: &[EvaluationRow]) -> String {
    let mut out = format!("{TABLE_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.subject_id,
            r.arch,
            r.with_synthetic,
            pct(r.master_ca),
            pct(r.slave_ca),
            pct(Some(r.end_to_end_ca))
        )
        .unwrap();
    }
    out
}

pub fn write_evaluation_table(path: &Path, rows: &[EvaluationRow]) -> Result<()> {
    write_text(path, &render_evaluation_table(rows))
}

pub fn read_evaluation_table(path: &Path) -> Result<Vec<EvaluationRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(TABLE_HEADER) {
        return Err(Error::format(path, format!("expected header {TABLE_HEADER}")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |message: String| Error::Parse {
                path: path.to_path_buf(),
                row: i + 2,
                message,
            };
            let c: Vec<&str> = line.split(',').collect();
            if c.len() != 6 {
                return Err(bad(format!("expected 6 cells, found {}", c.len())));
            }
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad(format!("bad percentage {s:?}")))
                }
            };
            Ok(EvaluationRow {
                subject_id: c[0].parse().map_err(|_| bad(format!("bad subject {:?}", c[0])))?,
                arch: c[1].parse().map_err(|_| bad(format!("bad arch {:?}", c[1])))?,
                with_synthetic: c[2].parse().map_err(|_| bad(format!("bad flag {:?}", c[2])))?,
                master_ca: opt(c[3])?,
                slave_ca: opt(c[4])?,
                end_to_end_ca: opt(c[5])?.ok_or_else(|| bad("missing end_to_end_ca".into()))?,
            })
        })
        .collect()
}

/// With-minus-without accuracy for one (subject, arch) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub subject_id: u32,
    pub arch: Architecture,
    pub master: Option<f64>,
    pub slave: Option<f64>,
    pub end_to_end: f64,
}

impl Delta {
    /// Any populated column got worse with synthetic data.
    pub fn decreased(&self) -> bool {
        [self.master, self.slave, Some(self.end_to_end)]
            .into_iter()
            .flatten()
            .any(|d| d < 0.0)
    }
}

pub fn deltas(rows: &[EvaluationRow]) -> Vec<Delta> {
    let mut pairs: BTreeMap<(u32, Architecture), [Option<&EvaluationRow>; 2]> = BTreeMap::new();
    for r in rows {
        pairs.entry((r.subject_id, r.arch)).or_default()[r.with_synthetic as usize] = Some(r);
    }
    let diff = |a: Option<f64>, b: Option<f64>| Some(b? - a?);
    pairs
        .into_iter()
        .filter_map(|((subject_id, arch), [without, with])| {
            let (a, b) = (without?, with?);
            Some(Delta {
                subject_id,
                arch,
                master: diff(a.master_ca, b.master_ca),
                slave: diff(a.slave_ca, b.slave_ca),
                end_to_end: b.end_to_end_ca - a.end_to_end_ca,
            })
        })
        .collect()
}

pub fn render_summary(rows: &[EvaluationRow]) -> String {
    let signed = |v: Option<f64>| v.map(|v| format!("{v:+.3}")).unwrap_or_else(|| "-".into());
    let ds = deltas(rows);
    let mut out = String::from("accuracy change from synthetic data (with - without, percentage points)\n");
    writeln!(out, "{:<8} {:<13} {:>9} {:>9} {:>11}", "subject", "arch", "master", "slave", "end-to-end").unwrap();
    for d in &ds {
        writeln!(
            out,
            "{:<8} {:<13} {:>9} {:>9} {:>11}{}",
            d.subject_id,
            d.arch.name(),
            signed(d.master),
            signed(d.slave),
            signed(Some(d.end_to_end)),
            if d.decreased() { "  DECREASED" } else { "" }
        )
        .unwrap();
    }
    let worse = ds.iter().filter(|d| d.decreased()).count();
    if ds.is_empty() {
        out.push_str("no with/without pairs to compare\n");
    } else {
        writeln!(out, "{worse} of {} cells decreased after augmentation", ds.len()).unwrap();
    }
    out
}

/// Echo of a command's fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> TrainingReport {
        TrainingReport {
            network: "master".into(),
            records: (1..=3)
                .map(|i| IterationRecord {
                    iteration: i,
                    cost: 1.0 / i as f64 + 1e-17,
                    train_ca: 10.0 * i as f64 / 3.0,
                    test_ca: (i != 2).then_some(0.1 * i as f64),
                })
                .collect(),
            elapsed: Duration::ZERO,
        }
    }

    #[test]
    fn report_round_trip_is_lossless() {
        let r = report();
        let text = render_training_report(&r);
        let back = parse_training_report(&text, "master", Path::new("x")).unwrap();
        assert_eq!(back, r);
        assert_eq!(render_training_report(&back), text);
    }

    #[test]
    fn report_rejects_gaps() {
        let text = format!("{REPORT_HEADER}\n1,0.5,50,\n3,0.4,60,\n");
        assert!(matches!(
            parse_training_report(&text, "m", Path::new("x")),
            Err(Error::Parse { row: 3, .. })
        ));
    }

    fn row(s: u32, arch: Architecture, syn: bool, e2e: f64) -> EvaluationRow {
        let ms = arch == Architecture::MasterSlave;
        EvaluationRow {
            subject_id: s,
            arch,
            with_synthetic: syn,
            master_ca: ms.then_some(100.0),
            slave_ca: ms.then_some(e2e),
            end_to_end_ca: e2e,
        }
    }

    #[test]
    fn table_formats_three_decimals() {
        let t = render_evaluation_table(&[row(1, Architecture::Conventional, true, 200.0 / 3.0)]);
        assert_eq!(t, format!("{TABLE_HEADER}\n1,conventional,true,,,66.667\n"));
    }

    #[test]
    fn deltas_flag_decreases() {
        let rows = vec![
            row(1, Architecture::MasterSlave, false, 90.0),
            row(1, Architecture::MasterSlave, true, 85.0),
            row(1, Architecture::Conventional, false, 70.0),
            row(1, Architecture::Conventional, true, 80.0),
        ];
        let ds = deltas(&rows);
        assert_eq!(ds.len(), 2);
        assert_eq!(ds[0].arch, Architecture::MasterSlave);
        assert_eq!(ds[0].end_to_end, -5.0);
        assert!(ds[0].decreased());
        assert_eq!(ds[1].end_to_end, 10.0);
        assert!(!ds[1].decreased());
        let s = render_summary(&rows);
        assert_eq!(s.matches("DECREASED").count(), 1);
        assert!(s.contains("1 of 2 cells decreased"));
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("eval.csv");
        let rows = vec![
            row(2, Architecture::MasterSlave, false, 12.5),
            row(2, Architecture::Conventional, true, 50.0),
        ];
        write_evaluation_table(&p, &rows).unwrap();
        assert_eq!(read_evaluation_table(&p).unwrap(), rows);
    }
}
