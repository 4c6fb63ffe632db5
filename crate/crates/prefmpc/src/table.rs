//! Tab-separated tables and plot-ready figure data.

use std::fmt::Write as _;
use std::path::Path;

use prefmpc_core::mpc::{mean_output_norms, CampaignResult};

use crate::error::{Error, Result};
use crate::formats::{write_json, TrajectoryDoc};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<I, S>(header: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for line in std::iter::once(&self.header).chain(&self.rows) {
            out.push_str(&line.join("\t"));
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`Table::to_tsv`].
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Format("empty table".into()))?
            .split('\t')
            .map(String::from)
            .collect();
        let mut table = Table {
            header,
            rows: Vec::new(),
        };
        for (n, line) in lines.enumerate() {
            let row: Vec<String> = line.split('\t').map(String::from).collect();
            if row.len() != table.header.len() {
                return Err(Error::Format(format!("table line {} has {} fields", n + 2, row.len())));
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Cell of the row whose first field is `row`.
    pub fn cell(&self, row: &str, column: &str) -> Option<&str> {
        let c = self.column(column)?;
        self.rows.iter().find(|r| r[0] == row).map(|r| r[c].as_str())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// `-` for missing values, fixed decimals otherwise.
pub fn fmt_opt(v: Option<f64>, decimals: usize) -> String {
    match v {
        Some(x) => format!("{x:.decimals$}"),
        None => "-".into(),
    }
}

fn per_run_table<F>(names: &[String], runs: usize, first: &str, value: F) -> Table
where
    F: Fn(usize, usize) -> String,
{
    let mut t = Table::new(std::iter::once(first.to_string()).chain(names.iter().cloned()));
    for s in 0..runs {
        let mut row = vec![s.to_string()];
        row.extend((0..names.len()).map(|e| value(e, s)));
        t.push(row);
    }
    t
}

/// Per-controller distributions and averaged output norms of a campaign.
///
/// Writes into `dir`: `phi.tsv` (performance per run, normalized like the
/// table; only when performance was measured), `kappa.tsv` (settling index per
/// run; `t_sim` marks runs that never settled), `max_input.tsv`,
/// `output_norm.tsv` (mean `|y(t)|` per step) and `trajectories/<name>.json`.
pub fn emit_figure_data(names: &[String], campaign: &CampaignResult, t_sim: usize, dir: &Path) -> Result<()> {
    let runs = campaign.runs.first().map_or(0, Vec::len);
    let has_performance = campaign
        .metrics
        .iter()
        .flatten()
        .all(|m| m.performance.is_some())
        && !campaign.metrics.is_empty();
    if has_performance || names.is_empty() {
        let scale = campaign.performance_scale;
        per_run_table(names, runs, "sim", |e, s| {
            let v = campaign.metrics[e][s].performance.expect("checked above");
            format!("{}", v / scale)
        })
        .write(&dir.join("phi.tsv"))?;
    }
    per_run_table(names, runs, "sim", |e, s| campaign.metrics[e][s].settling.index.to_string())
        .write(&dir.join("kappa.tsv"))?;
    per_run_table(names, runs, "sim", |e, s| format!("{}", campaign.metrics[e][s].max_input))
        .write(&dir.join("max_input.tsv"))?;
    let norms: Vec<Vec<f64>> = campaign.runs.iter().map(|r| mean_output_norms(r)).collect();
    let steps = norms.iter().map(Vec::len).min().unwrap_or(0).min(t_sim);
    per_run_table(names, steps, "t", |e, t| format!("{}", norms[e][t])).write(&dir.join("output_norm.tsv"))?;
    for (name, runs) in names.iter().zip(&campaign.runs) {
        let docs: Vec<TrajectoryDoc> = runs.iter().map(|r| (&r.trajectory).into()).collect();
        write_json(&dir.join("trajectories").join(format!("{name}.json")), &docs)?;
    }
    Ok(())
}

/// Header line plus one line per row, for log output.
pub fn render_aligned(t: &Table) -> String {
    let widths: Vec<usize> = (0..t.header.len())
        .map(|c| {
            std::iter::once(&t.header)
                .chain(&t.rows)
                .map(|r| r[c].len())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for line in std::iter::once(&t.header).chain(&t.rows) {
        for (c, cell) in line.iter().enumerate() {
            let _ = write!(out, "{cell:<w$}  ", w = widths[c]);
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
    }
    out
}
