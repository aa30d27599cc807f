//! Long-format panel CSV and the simulation truth sidecar.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use sfgroup::dgp::DgpTruth;
use sfgroup::PanelData;

use crate::{io_error, CliError, Result};

/// Which CSV columns hold what. `regressors = None` takes every column not
/// otherwise named, in header order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub firm: String,
    pub time: String,
    pub outcome: String,
    pub regressors: Option<Vec<String>>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            firm: "firm_id".into(),
            time: "t".into(),
            outcome: "y".into(),
            regressors: None,
        }
    }
}

/// Write `firm_id,t,y,x1..xp` with `t` running 1..T. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_panel(path: &Path, panel: &PanelData) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    let mut header = vec!["firm_id".to_string(), "t".into(), "y".into()];
    header.extend((1..=panel.regressors()).map(|l| format!("x{l}")));
    w.write_record(&header).map_err(|e| io_error(path, e))?;
    for i in 0..panel.firms() {
        for t in 0..panel.periods() {
            let mut rec = vec![panel.firm_ids()[i].clone(), (t + 1).to_string(), panel.y(i)[t].to_string()];
            rec.extend(panel.x(i, t).iter().map(f64::to_string));
            w.write_record(&rec).map_err(|e| io_error(path, e))?;
        }
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// `<stem>.truth.csv` next to a data file.
pub fn truth_path(data: &Path) -> PathBuf {
    sibling(data, "truth.csv")
}

/// `<stem>.truth.json` next to a data file.
pub fn params_path(data: &Path) -> PathBuf {
    sibling(data, "truth.json")
}

fn sibling(data: &Path, suffix: &str) -> PathBuf {
    let stem = data.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    data.with_file_name(format!("{stem}.{suffix}"))
}

/// Sidecar `firm_id,group,u,component` (groups and components 1-based) plus
/// the generating parameters as JSON.
pub fn write_truth(data: &Path, panel: &PanelData, truth: &DgpTruth) -> Result<()> {
    let path = truth_path(data);
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_error(&path, e))?;
    w.write_record(["firm_id", "group", "u", "component"]).map_err(|e| io_error(&path, e))?;
    for i in 0..panel.firms() {
        w.write_record([
            panel.firm_ids()[i].clone(),
            (truth.groups.labels()[i] + 1).to_string(),
            truth.u[i].to_string(),
            (truth.component[i] + 1).to_string(),
        ])
        .map_err(|e| io_error(&path, e))?;
    }
    w.flush().map_err(|e| io_error(&path, e))?;

    let path = params_path(data);
    let params = serde_json::json!({
        "design": truth.design,
        "seed": truth.seed,
        "firms": panel.firms(),
        "periods": panel.periods(),
        "group_sizes": truth.groups.sizes(),
        "sigma_v": truth.sigma_v,
        "law": truth.law,
        "centering": truth.centering,
        "frontier_clamp": truth.frontier_clamp,
    });
    let text = serde_json::to_string_pretty(&params).map_err(|e| io_error(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))
}

fn parse_cell(value: &str, line: u64, column: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::input(format!("line {line}, column {column}: non-numeric value {value:?}")))
}

/// Read a long-format CSV and pivot it into a balanced panel. Firms keep the
/// order of first appearance; periods are sorted by their time value.
pub fn read_panel(path: &Path, columns: &ColumnMap) -> Result<PanelData> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let header: Vec<String> = r.headers().map_err(|e| io_error(path, e))?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::input(format!("{}: no column named {name:?}", path.display())))
    };
    let (fc, tc, yc) = (find(&columns.firm)?, find(&columns.time)?, find(&columns.outcome)?);
    let xnames: Vec<String> = match &columns.regressors {
        Some(names) => names.clone(),
        None => header.iter().enumerate().filter(|(j, _)| ![fc, tc, yc].contains(j)).map(|(_, h)| h.clone()).collect(),
    };
    if xnames.is_empty() {
        return Err(CliError::input("at least one regressor column is required"));
    }
    let xc: Vec<usize> = xnames.iter().map(|n| find(n)).collect::<Result<_>>()?;

    let mut firm_index: HashMap<String, usize> = HashMap::new();
    let mut firm_ids: Vec<String> = Vec::new();
    let mut cells: HashMap<(usize, i64), (f64, Vec<f64>)> = HashMap::new();
    let mut times: BTreeSet<i64> = BTreeSet::new();
    for (row, rec) in r.records().enumerate() {
        let line = row as u64 + 2;
        let rec = rec.map_err(|e| io_error(path, e))?;
        let firm = rec.get(fc).unwrap_or("").trim().to_string();
        let t_raw = rec.get(tc).unwrap_or("");
        let t: i64 = t_raw
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("line {line}, column {}: time {t_raw:?} is not an integer", columns.time)))?;
        let y = parse_cell(rec.get(yc).unwrap_or(""), line, &columns.outcome)?;
        let x = xc
            .iter()
            .zip(&xnames)
            .map(|(&j, name)| parse_cell(rec.get(j).unwrap_or(""), line, name))
            .collect::<Result<Vec<f64>>>()?;
        let next = firm_ids.len();
        let i = *firm_index.entry(firm.clone()).or_insert_with(|| {
            firm_ids.push(firm.clone());
            next
        });
        times.insert(t);
        if cells.insert((i, t), (y, x)).is_some() {
            return Err(CliError::input(format!("line {line}: duplicate observation for firm {firm} at t = {t}")));
        }
    }
    if firm_ids.is_empty() {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    let times: Vec<i64> = times.into_iter().collect();
    let cells_ref = &cells;
    let missing: Vec<String> = firm_ids
        .iter()
        .enumerate()
        .flat_map(|(i, id)| times.iter().filter(move |&&t| !cells_ref.contains_key(&(i, t))).map(move |t| format!("({id}, {t})")))
        .collect();
    if !missing.is_empty() {
        let shown: Vec<&str> = missing.iter().take(20).map(String::as_str).collect();
        let more = if missing.len() > 20 { format!(" and {} more", missing.len() - 20) } else { String::new() };
        return Err(CliError::input(format!(
            "unbalanced panel: missing (firm, t) cells {}{more}",
            shown.join(", ")
        )));
    }
    let (n, t_n, p) = (firm_ids.len(), times.len(), xnames.len());
    let mut y = Vec::with_capacity(n * t_n);
    let mut x = Vec::with_capacity(n * t_n * p);
    for i in 0..n {
        for t in &times {
            let (yv, xv) = &cells[&(i, *t)];
            y.push(*yv);
            x.extend_from_slice(xv);
        }
    }
    Ok(PanelData::new(n, t_n, p, y, x, firm_ids)?)
}
