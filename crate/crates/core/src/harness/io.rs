//! Instance and report files.

use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ColorGroup, Instance, Point};
use crate::report::SolveReport;

pub const INSTANCE_FORMAT: &str = "chromaclust/1";
pub const REPORT_FORMAT: &str = "chromaclust-report/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub id: usize,
    pub points: Vec<Vec<f64>>,
    /// Planted cluster of each point, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
}

/// On-disk form of an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub format: String,
    pub d: usize,
    pub k: usize,
    pub groups: Vec<GroupRecord>,
}

impl InstanceFile {
    pub fn from_instance(inst: &Instance) -> Self {
        InstanceFile {
            format: INSTANCE_FORMAT.into(),
            d: inst.dim(),
            k: inst.k(),
            groups: inst
                .groups()
                .iter()
                .map(|g| GroupRecord {
                    id: g.id,
                    points: g.points.iter().map(|p| p.to_vec()).collect(),
                    labels: None,
                })
                .collect(),
        }
    }

    pub fn to_instance(&self) -> Result<Instance> {
        if self.format != INSTANCE_FORMAT {
            return Err(Error::InvalidInstance(format!(
                "unsupported format tag {:?}, expected {INSTANCE_FORMAT:?}",
                self.format
            )));
        }
        for g in &self.groups {
            if let Some(p) = g.points.iter().find(|p| p.len() != self.d) {
                return Err(Error::InvalidInstance(format!(
                    "group {}: point of dimension {} but d = {}",
                    g.id,
                    p.len(),
                    self.d
                )));
            }
            if let Some(labels) = &g.labels {
                if labels.len() != g.points.len() || labels.iter().any(|&l| l >= self.k) {
                    return Err(Error::InvalidInstance(format!(
                        "group {}: labels must give one cluster in 0..{} per point",
                        g.id, self.k
                    )));
                }
            }
        }
        let groups = self
            .groups
            .iter()
            .map(|g| ColorGroup::new(g.id, g.points.iter().map(|p| Point::from(p.clone())).collect()))
            .collect();
        Instance::new(groups, self.k)
    }

    /// Planted labels in instance point order, if every group has them.
    pub fn labels(&self) -> Option<Vec<Vec<usize>>> {
        self.groups.iter().map(|g| g.labels.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
    }
}

/// Parses delimited text with rows `group_id, x_1, …, x_d`. A leading
/// header row is skipped when its first field is not an integer.
pub fn parse_delimited(text: &str, delimiter: u8, k: usize) -> Result<InstanceFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut groups: Vec<GroupRecord> = Vec::new();
    let mut d: Option<usize> = None;
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(row + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(row + 1, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse { line, message };
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let id_field = rec.get(0).unwrap_or_default();
        let Ok(id) = id_field.parse::<usize>() else {
            if row == 0 {
                continue;
            }
            return Err(parse_err(format!("group id {id_field:?} is not a non-negative integer")));
        };
        let coords = rec
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().map_err(|_| parse_err(format!("coordinate {f:?} is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        match d {
            None if coords.is_empty() => return Err(parse_err("row has no coordinates".into())),
            None => d = Some(coords.len()),
            Some(d) if d != coords.len() => {
                return Err(parse_err(format!("expected {d} coordinates, found {}", coords.len())))
            }
            _ => {}
        }
        match groups.iter_mut().find(|g| g.id == id) {
            Some(g) => g.points.push(coords),
            None => groups.push(GroupRecord { id, points: vec![coords], labels: None }),
        }
    }
    let d = d.ok_or_else(|| Error::Parse { line: 1, message: "no data rows".into() })?;
    Ok(InstanceFile { format: INSTANCE_FORMAT.into(), d, k, groups })
}

/// Reads an instance file. `.csv` and `.tsv` files are delimited text and
/// need `k`; anything else is the structured format.
pub fn read_instance_file(path: &Path, k: Option<usize>) -> Result<InstanceFile> {
    let mut text = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some(ext @ ("csv" | "tsv")) => {
            let k = k.ok_or_else(|| Error::InvalidConfig("delimited input needs k".into()))?;
            parse_delimited(&text, if ext == "csv" { b',' } else { b'\t' }, k)
        }
        _ => {
            let mut file = InstanceFile::from_json(&text)?;
            if let Some(k) = k {
                file.k = k;
            }
            Ok(file)
        }
    }
}

/// On-disk form of a solver report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub format: String,
    pub algorithm: String,
    pub objective_kind: String,
    /// Normalized objective.
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
    pub seed: u64,
    pub candidates: u64,
    pub heuristic: bool,
    pub centers: Vec<Vec<f64>>,
    /// Cluster of every point, per group in file order.
    pub assignments: Vec<Vec<usize>>,
    pub config: serde_json::Value,
}

impl ReportFile {
    pub fn new(report: &SolveReport, config: serde_json::Value, timing: bool) -> Self {
        ReportFile {
            format: REPORT_FORMAT.into(),
            algorithm: report.algorithm.clone(),
            objective_kind: report.kind.to_string(),
            objective: report.objective,
            elapsed_seconds: timing.then(|| report.elapsed.as_secs_f64()),
            seed: report.seed,
            candidates: report.candidates,
            heuristic: report.heuristic,
            centers: report.centers.iter().map(|c| c.to_vec()).collect(),
            assignments: report.partition.assignment().to_vec(),
            config,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
