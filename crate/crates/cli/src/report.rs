use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Serialize, Clone, Copy, PartialEq, Eq, Debug)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// the stored display is a known erratum and the engine output
    /// matches the corrected expression; counts as passing
    FlaggedTypo,
}

#[derive(Serialize, Debug)]
pub struct CheckRecord {
    pub name: String,
    /// which displayed result or invariant this check pins down;
    /// symbolic checks anchor to the shipped reference file
    pub anchor: String,
    pub status: Status,
    pub values: BTreeMap<String, serde_json::Value>,
}

impl CheckRecord {
    pub fn new(name: &str, anchor: &str, ok: bool) -> Self {
        CheckRecord {
            name: name.into(),
            anchor: anchor.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            values: BTreeMap::new(),
        }
    }

    pub fn flagged(name: &str, anchor: &str, matches_correction: bool) -> Self {
        CheckRecord {
            name: name.into(),
            anchor: anchor.into(),
            status: if matches_correction {
                Status::FlaggedTypo
            } else {
                Status::Fail
            },
            values: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.values
            .insert(key.into(), serde_json::to_value(value).unwrap());
        self
    }
}

#[derive(Serialize)]
pub struct Report {
    pub command: String,
    pub version: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
    pub wall_ms: u128,
    pub records: Vec<CheckRecord>,
}

impl Report {
    pub fn any_failed(&self) -> bool {
        self.records.iter().any(|r| r.status == Status::Fail)
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}-report.json", self.command));
        let mut f = std::fs::File::create(&path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(path)
    }
}

/// CSV sidecar for curve data; the header row documents the columns.
pub fn write_csv(dir: &Path, name: &str, header: &str, rows: &[Vec<f64>]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = std::fs::File::create(dir.join(name))?;
    writeln!(f, "{header}")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    Ok(())
}
