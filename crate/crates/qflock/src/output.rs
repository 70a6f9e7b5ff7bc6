//! Result tables and metadata sidecars.
//!
//! Every table is a tab-separated text file:
//!
//! ```text
//! # qflock <version> config_hash=<64 hex digits>
//! <column>\t<column>\t...
//! <value>\t<value>\t...
//! ```
//!
//! Floats use the shortest representation that round-trips exactly, so
//! identical runs produce byte-identical files. `metadata.json` echoes the
//! resolved configuration, seeds, wall time and the list of files.

use crate::config::RunConfig;
use anyhow::{bail, Context};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const METADATA_FILE: &str = "metadata.json";

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| num(x)).collect());
    }

    pub fn file_name(&self) -> String {
        format!("{}.tsv", self.name)
    }

    pub fn render(&self, config_hash: &str) -> String {
        let mut s = String::new();
        writeln!(s, "# qflock {VERSION} config_hash={config_hash}").unwrap();
        writeln!(s, "{}", self.columns.join("\t")).unwrap();
        for r in &self.rows {
            writeln!(s, "{}", r.join("\t")).unwrap();
        }
        s
    }

    /// Index of a column by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of a numeric column.
    pub fn values(&self, name: &str) -> anyhow::Result<Vec<f64>> {
        let k = self.column(name).with_context(|| format!("no column {name} in {}", self.name))?;
        self.rows
            .iter()
            .map(|r| r[k].parse::<f64>().with_context(|| format!("bad number {:?}", r[k])))
            .collect()
    }
}

/// Parse a table file; returns the config hash and the table.
pub fn read_table(path: &Path) -> anyhow::Result<(String, Table)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty table file")?;
    let prefix = format!("# qflock {VERSION} config_hash=");
    let Some(hash) = header.strip_prefix(&prefix) else {
        bail!("unexpected header line {header:?}");
    };
    let columns: Vec<String> = lines
        .next()
        .context("missing column line")?
        .split('\t')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        let row: Vec<String> = line.split('\t').map(str::to_string).collect();
        if row.len() != columns.len() {
            bail!("row has {} fields, expected {}", row.len(), columns.len());
        }
        rows.push(row);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok((hash.to_string(), Table { name, columns, rows }))
}

/// Everything a run produces.
#[derive(Clone, Debug, Default)]
pub struct ResultBundle {
    pub tables: Vec<Table>,
    /// Mode-specific summary values for the metadata file.
    pub summary: serde_json::Map<String, Value>,
}

impl ResultBundle {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Write all tables and the metadata sidecar into `dir`.
pub fn write_bundle(
    dir: &Path,
    config: &RunConfig,
    bundle: &ResultBundle,
    wall_seconds: f64,
) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let hash = config.hash();
    let mut written = Vec::new();
    for t in &bundle.tables {
        let path = dir.join(t.file_name());
        std::fs::write(&path, t.render(&hash)).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    let meta = json!({
        "program": "qflock",
        "version": VERSION,
        "config_hash": hash,
        "mode": config.mode,
        "config": config,
        "seeds": {
            "seed": config.run.seed,
            "trajectory_indices": [0, config.run.trajectories],
        },
        "wall_time_seconds": wall_seconds,
        "files": bundle.tables.iter().map(Table::file_name).collect::<Vec<_>>(),
        "summary": bundle.summary,
    });
    let path = dir.join(METADATA_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    Ok(written)
}
