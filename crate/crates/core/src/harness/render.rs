//! Table (CSV and plain text) and SVG renderings of an [`EvalReport`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{EvalReport, RowId};
use crate::boutfeat::Regime;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mae,
    Mape,
}

impl Metric {
    pub fn file_stem(self) -> &'static str {
        match self {
            Metric::Mae => "mae",
            Metric::Mape => "mape",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Metric::Mae => "Mean (std) absolute error, g",
            Metric::Mape => "Mean (std) absolute relative error, %",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub model: String,
    pub feature_set: String,
    /// (mean, std) per column; `None` renders as NA.
    pub cells: Vec<Option<(f64, f64)>>,
    /// Column minimum marker.
    pub flagged: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

const NA: &str = "NA";

/// Table rows: every estimator × feature set, then the baseline. The
/// mean-predictor row stays in the JSON report only.
pub fn build_table(r: &EvalReport, metric: Metric) -> Table {
    let regimes = &r.config.regimes;
    let mut rows: Vec<TableRow> = r
        .rows
        .iter()
        .filter(|row| **row != RowId::Mean)
        .map(|&row| {
            let (model, feature_set) = match row {
                RowId::Model(e, s) => (e.to_string(), s.to_string()),
                _ => ("Baseline".to_string(), "-".to_string()),
            };
            let cells = regimes
                .iter()
                .map(|&g| {
                    r.cell(row, g)
                        .and_then(|c| c.summary(metric))
                        .map(|s| (s.mean, s.std))
                })
                .collect();
            TableRow {
                model,
                feature_set,
                cells,
                flagged: vec![false; regimes.len()],
            }
        })
        .collect();
    for c in 0..regimes.len() {
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in rows.iter().enumerate() {
            if let Some((m, _)) = row.cells[c] {
                if best.is_none_or(|(_, b)| m < b) {
                    best = Some((i, m));
                }
            }
        }
        if let Some((i, _)) = best {
            rows[i].flagged[c] = true;
        }
    }
    Table {
        columns: regimes.iter().map(|g| g.label().to_string()).collect(),
        rows,
    }
}

fn fmt_cell(cell: Option<(f64, f64)>, flagged: bool) -> String {
    match cell {
        None => NA.to_string(),
        Some((m, s)) => format!("{m:.2} ({s:.2}){}", if flagged { "*" } else { "" }),
    }
}

fn parse_cell(s: &str) -> Result<(Option<(f64, f64)>, bool)> {
    if s == NA {
        return Ok((None, false));
    }
    let bad = || Error::Config(format!("malformed table cell '{s}'"));
    let (body, flagged) = match s.strip_suffix('*') {
        Some(b) => (b, true),
        None => (s, false),
    };
    let (m, rest) = body.split_once(" (").ok_or_else(bad)?;
    let sd = rest.strip_suffix(')').ok_or_else(bad)?;
    let m: f64 = m.parse().map_err(|_| bad())?;
    let sd: f64 = sd.parse().map_err(|_| bad())?;
    Ok((Some((m, sd)), flagged))
}

pub fn table_to_csv(t: &Table) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["model".to_string(), "feature_set".to_string()];
    header.extend(t.columns.iter().cloned());
    w.write_record(&header)?;
    for row in &t.rows {
        let mut rec = vec![row.model.clone(), row.feature_set.clone()];
        rec.extend(row.cells.iter().zip(&row.flagged).map(|(c, f)| fmt_cell(*c, *f)));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

pub fn table_from_csv(s: &str) -> Result<Table> {
    let mut rd = csv::Reader::from_reader(s.as_bytes());
    let header = rd.headers()?.clone();
    if header.len() < 2 || &header[0] != "model" || &header[1] != "feature_set" {
        return Err(Error::Config("table CSV must start with model,feature_set".into()));
    }
    let columns: Vec<String> = header.iter().skip(2).map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let mut cells = Vec::new();
        let mut flagged = Vec::new();
        for f in rec.iter().skip(2) {
            let (c, fl) = parse_cell(f)?;
            cells.push(c);
            flagged.push(fl);
        }
        rows.push(TableRow {
            model: rec[0].to_string(),
            feature_set: rec[1].to_string(),
            cells,
            flagged,
        });
    }
    Ok(Table { columns, rows })
}

pub fn table_to_text(t: &Table, title: &str) -> String {
    let mut grid: Vec<Vec<String>> = Vec::with_capacity(t.rows.len() + 1);
    let mut header = vec!["Model".to_string(), "Set".to_string()];
    header.extend(t.columns.iter().cloned());
    grid.push(header);
    for row in &t.rows {
        let mut line = vec![row.model.clone(), row.feature_set.clone()];
        line.extend(row.cells.iter().zip(&row.flagged).map(|(c, f)| fmt_cell(*c, *f)));
        grid.push(line);
    }
    let n_cols = grid[0].len();
    let widths: Vec<usize> = (0..n_cols)
        .map(|j| grid.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = format!("{title}\n");
    for (i, line) in grid.iter().enumerate() {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(j, (c, w))| {
                if j < 2 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (n_cols - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out.push_str("* lowest mean in column\n");
    out
}

/// CSV and plain-text renderings of one metric.
pub fn render_tables(r: &EvalReport, metric: Metric) -> Result<(String, String)> {
    let t = build_table(r, metric);
    Ok((table_to_csv(&t)?, table_to_text(&t, metric.title())))
}

const PALETTE: [&str; 4] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759"];

/// Grouped bar chart of All-regime MAE: one group per feature set, one bar
/// per estimator.
pub fn render_plot(r: &EvalReport) -> Result<String> {
    if !r.config.regimes.contains(&Regime::All) {
        return Err(Error::Config("report has no All-regime results".into()));
    }
    let sets = &r.config.feature_sets;
    let ests = &r.config.estimators;
    let value = |e, s| {
        r.cell(RowId::Model(e, s), Regime::All)
            .and_then(|c| c.mae)
            .map(|m| m.mean)
    };
    let max_v = sets
        .iter()
        .flat_map(|&s| ests.iter().filter_map(move |&e| value(e, s)))
        .fold(0.0_f64, f64::max);
    let y_max = nice_ceil(max_v);

    let (w, h) = (720.0, 400.0);
    let (left, right, top, bottom) = (60.0, 130.0, 40.0, 50.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let group_w = plot_w / sets.len() as f64;
    let bar_w = group_w * 0.8 / ests.len() as f64;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r##"<rect width="{w}" height="{h}" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">Mean absolute error per feature set and estimator, all foods</text>"#,
        w / 2.0
    );
    for tick in 0..=5 {
        let v = y_max * tick as f64 / 5.0;
        let y = top + plot_h - plot_h * tick as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{left:.1}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="#dddddd"/>"##,
            left + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            left - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">MAE (g)</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    for (gi, &set) in sets.iter().enumerate() {
        let gx = left + gi as f64 * group_w + group_w * 0.1;
        for (bi, &est) in ests.iter().enumerate() {
            let Some(v) = value(est, set) else { continue };
            let bh = if y_max > 0.0 { plot_h * v / y_max } else { 0.0 };
            let x = gx + bi as f64 * bar_w;
            let _ = writeln!(
                s,
                r#"<rect class="bar" data-estimator="{est}" data-set="{set}" data-mae="{v}" x="{x:.2}" y="{:.2}" width="{:.2}" height="{bh:.2}" fill="{}"/>"#,
                top + plot_h - bh,
                bar_w * 0.95,
                PALETTE[est.index() % PALETTE.len()]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{set}</text>"#,
            left + (gi as f64 + 0.5) * group_w,
            top + plot_h + 20.0
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{left:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#333333"/>"##,
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    for (bi, &est) in ests.iter().enumerate() {
        let y = top + 10.0 + bi as f64 * 20.0;
        let x = left + plot_w + 20.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{y:.1}" width="12" height="12" fill="{}"/>"#,
            PALETTE[est.index() % PALETTE.len()]
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{est}</text>"#, x + 18.0, y + 10.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Smallest 1, 2 or 5 × 10^n at or above `v`.
fn nice_ceil(v: f64) -> f64 {
    if !(v > 0.0) {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    for m in [1.0, 2.0, 5.0, 10.0] {
        if m * mag >= v {
            return m * mag;
        }
    }
    10.0 * mag
}

#[derive(Serialize)]
struct MetaFold<'a> {
    regime: Regime,
    fold: usize,
    held_out: &'a str,
    seed: u64,
    k: Option<usize>,
    models: Vec<MetaModel<'a>>,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    warnings: &'a [String],
}

#[derive(Serialize)]
struct MetaModel<'a> {
    row: RowId,
    seed: u64,
    hyper_parameters: &'a crate::estimators::HyperParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask: Option<&'a Vec<usize>>,
}

#[derive(Serialize)]
struct Meta<'a> {
    seed: u64,
    k_max: usize,
    subjects: &'a [String],
    notes: &'a [String],
    folds: Vec<MetaFold<'a>>,
}

/// Seeds, codebook sizes and hyper-parameter winners per fold.
pub fn render_meta(r: &EvalReport) -> Result<String> {
    let meta = Meta {
        seed: r.config.seed,
        k_max: r.config.k_max,
        subjects: &r.subjects,
        notes: &r.notes,
        folds: r
            .folds
            .iter()
            .map(|f| MetaFold {
                regime: f.regime,
                fold: f.fold,
                held_out: &f.held_out,
                seed: f.seed,
                k: f.artifacts.as_ref().and_then(|a| a.codebook.as_ref()).map(|c| c.k),
                models: f
                    .artifacts
                    .iter()
                    .flat_map(|a| &a.models)
                    .map(|m| MetaModel {
                        row: m.row,
                        seed: m.seed,
                        hyper_parameters: &m.hyper_parameters,
                        mask: m.mask.as_ref(),
                    })
                    .collect(),
                warnings: &f.warnings,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&meta).map_err(|e| Error::Json {
        path: "meta.json".into(),
        source: e,
    })?;
    s.push('\n');
    Ok(s)
}

pub const OUTPUT_FILES: [&str; 7] = [
    "report.json",
    "mae.csv",
    "mape.csv",
    "mae.txt",
    "mape.txt",
    "fig_all.svg",
    "meta.json",
];

/// Writes every output file into `dir`. The plot is skipped (with the name
/// left out of the returned list) when the All regime is not configured.
pub fn write_outputs(r: &EvalReport, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(&str, String)> = vec![("report.json", r.to_json()?)];
    for m in [Metric::Mae, Metric::Mape] {
        let (csv, txt) = render_tables(r, m)?;
        files.push((if m == Metric::Mae { "mae.csv" } else { "mape.csv" }, csv));
        files.push((if m == Metric::Mae { "mae.txt" } else { "mape.txt" }, txt));
    }
    if r.config.regimes.contains(&Regime::All) {
        files.push(("fig_all.svg", render_plot(r)?));
    }
    files.push(("meta.json", render_meta(r)?));
    let mut written = Vec::new();
    for (name, body) in files {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        written.push(name.to_string());
    }
    Ok(written)
}
