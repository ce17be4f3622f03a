use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

/// Hex SHA-256 of the model file bytes.
pub fn config_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// CSV table with a header and a trailing `#` metadata line.
pub struct Table {
    header: Vec<String>,
    rows: Vec<String>,
    notes: Vec<String>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new(), notes: Vec::new() }
    }

    pub fn row(&mut self, fields: &[&dyn Display]) {
        let cells: Vec<String> = fields.iter().map(|f| f.to_string()).collect();
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells.join(","));
    }

    /// Extra `#` line written before the metadata line.
    pub fn note(&mut self, text: String) {
        self.notes.push(text);
    }

    pub fn write(&self, path: &Path, hash: &str, seed: u64) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{}", self.header.join(","))?;
        for r in &self.rows {
            writeln!(w, "{r}")?;
        }
        for n in &self.notes {
            writeln!(w, "# {n}")?;
        }
        writeln!(w, "# config_sha256={hash} seed={seed}")?;
        w.flush()
    }
}

pub fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.12}")).collect();
    format!("[{}]", parts.join(", "))
}
