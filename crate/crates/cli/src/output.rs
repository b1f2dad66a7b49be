use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use degbeam::Discretization;
use serde_json::{json, Value};

use crate::config::{Scenario, Task, SCHEMA_VERSION};

/// Shortest round-trip form, scientific outside `[1e-4, 1e16)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Rows of a CSV file.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        self.push_row(row.into_iter().map(num).collect());
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything a task writes: a JSON summary plus named CSV and text files.
pub struct Report {
    pub task: Task,
    pub summary: Value,
    tables: Vec<(String, Table)>,
    texts: Vec<(String, String)>,
    disc: Option<Discretization>,
}

impl Report {
    pub fn new(task: Task, summary: Value) -> Self {
        Self { task, summary, tables: Vec::new(), texts: Vec::new(), disc: None }
    }

    pub fn with_disc(mut self, d: Discretization) -> Self {
        self.disc = Some(d);
        self
    }

    pub fn table(&mut self, name: &str, t: Table) {
        self.tables.push((name.to_string(), t));
    }

    pub fn text(&mut self, name: &str, s: String) {
        self.texts.push((name.to_string(), s));
    }

    pub fn write(&self, dir: &Path, scenario: &Scenario, dump_matrices: bool) -> Result<Vec<String>> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::new();
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "task": self.task,
            "config": scenario,
            "report": self.summary,
        });
        let name = format!("{}.json", self.task);
        fs::write(dir.join(&name), serde_json::to_string_pretty(&doc)? + "\n")?;
        written.push(name);
        for (name, t) in &self.tables {
            t.write(&dir.join(name))?;
            written.push(name.clone());
        }
        for (name, s) in &self.texts {
            fs::write(dir.join(name), s)?;
            written.push(name.clone());
        }
        if dump_matrices {
            if let Some(d) = &self.disc {
                for (name, t) in matrix_tables(d) {
                    t.write(&dir.join(&name))?;
                    written.push(name);
                }
            }
        }
        Ok(written)
    }
}

/// Mesh nodes and the free-dof operators in triplet form.
fn matrix_tables(d: &Discretization) -> Vec<(String, Table)> {
    let mut mesh = Table::new(&["node", "x"]);
    for (i, x) in d.mesh.nodes.iter().enumerate() {
        mesh.push(vec![i as f64, *x]);
    }
    let mut diag = Table::new(&["dof", "full_index", "mass", "damping"]);
    for (k, &i) in d.free.iter().enumerate() {
        diag.push(vec![k as f64, i as f64, d.mass[k], d.damping[k]]);
    }
    let mut stiff = Table::new(&["row", "col", "S", "S0"]);
    let n = d.n_free();
    let kd = d.stiffness.bandwidth();
    for i in 0..n {
        for j in i..(i + kd + 1).min(n) {
            let (s, s0) = (d.stiffness.get(i, j), d.stiffness0.get(i, j));
            if s != 0.0 || s0 != 0.0 {
                stiff.push(vec![i as f64, j as f64, s, s0]);
            }
        }
    }
    vec![("mesh.csv".into(), mesh), ("mass_damping.csv".into(), diag), ("stiffness.csv".into(), stiff)]
}
