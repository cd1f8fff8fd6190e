//! Dataset file formats and report/band/table writers.
//!
//! Two input formats: a quantile-matrix CSV (header carries the grid, rows
//! carry predictors then quantile values) and a raw-samples CSV in long form
//! routed through empirical quantile estimation. All floats are written with
//! 17 significant digits so files round-trip bit-exactly.

use nalgebra::DMatrix;
use std::fs;
use std::io::Write;
use std::path::Path;
use wassreg::bands::BandResult;
use wassreg::curve::QuantileCurve;
use wassreg::grid::TimeGrid;
use wassreg::sim::{empirical_quantile_from_sample, CoverageRow, PowerRow, Smoothing};
use wassreg::{Dataset, Error, Result, TestReport};

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        // keep integers readable; still exact
        format!("{v:.1}")
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    QuantileMatrix,
    RawSamples,
}

/// A loaded dataset plus its predictor column names.
#[derive(Debug)]
pub struct LoadedDataset {
    pub data: Dataset,
    pub predictor_names: Vec<String>,
}

/// Sniffs the format from the header: a `value` column together with `id`
/// marks the long raw-samples form.
pub fn detect_format(path: &Path) -> Result<InputFormat> {
    let mut reader = csv_reader(path)?;
    let headers = headers_of(&mut reader)?;
    let has_id = headers.iter().any(|h| h == "id");
    let has_value = headers.iter().any(|h| h == "value");
    Ok(if has_id && has_value { InputFormat::RawSamples } else { InputFormat::QuantileMatrix })
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn headers_of(reader: &mut csv::Reader<fs::File>) -> Result<Vec<String>> {
    Ok(reader
        .headers()
        .map_err(|e| Error::Input(format!("cannot read header: {e}")))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect())
}

/// Loads a dataset in either format; `grid_size` only matters for the
/// raw-samples route, which estimates curves on a fresh uniform grid.
pub fn load_dataset(path: &Path, format: InputFormat, grid_size: usize) -> Result<LoadedDataset> {
    match format {
        InputFormat::QuantileMatrix => load_quantile_matrix(path),
        InputFormat::RawSamples => load_raw_samples(path, grid_size),
    }
}

fn load_quantile_matrix(path: &Path) -> Result<LoadedDataset> {
    let mut reader = csv_reader(path)?;
    let headers = headers_of(&mut reader)?;
    let mut predictor_names = Vec::new();
    let mut grid_points = Vec::new();
    let mut seen_q = false;
    for h in &headers {
        if let Some(name) = h.strip_prefix("x:") {
            if seen_q {
                return Err(Error::Input(
                    "predictor columns must precede quantile columns".into(),
                ));
            }
            predictor_names.push(name.to_string());
        } else if let Some(t) = h.strip_prefix("q:") {
            seen_q = true;
            let t: f64 = t
                .parse()
                .map_err(|_| Error::Input(format!("bad grid point in header: {h}")))?;
            grid_points.push(t);
        } else {
            return Err(Error::Input(format!(
                "unknown column {h}; expected x: or q: prefixes"
            )));
        }
    }
    if grid_points.len() < 2 {
        return Err(Error::Input("need at least two q: columns".into()));
    }
    for w in grid_points.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Input(
                "q: columns out of order; the grid must increase left to right".into(),
            ));
        }
    }
    if grid_points[0] != 0.0 || *grid_points.last().unwrap() != 1.0 {
        return Err(Error::Input("grid must span exactly [0, 1] (missing endpoints)".into()));
    }
    let grid = TimeGrid::from_points(grid_points)?;

    let p = predictor_names.len();
    let m = grid.len();
    let mut xs: Vec<f64> = Vec::new();
    let mut curves: Vec<QuantileCurve> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::Input(format!("row {}: {e}", row_idx + 1)))?;
        if record.len() != p + m {
            return Err(Error::Input(format!(
                "row {}: expected {} fields, got {}",
                row_idx + 1,
                p + m,
                record.len()
            )));
        }
        let parse = |j: usize| -> Result<f64> {
            record[j]
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("row {}: bad number {:?}", row_idx + 1, &record[j])))
        };
        for j in 0..p {
            xs.push(parse(j)?);
        }
        let values: Vec<f64> = (0..m).map(|l| parse(p + l)).collect::<Result<_>>()?;
        let curve = QuantileCurve::new(grid.clone(), values).map_err(|e| match e {
            Error::NonMonotone { index, violation } => Error::Input(format!(
                "row {}: quantile values decrease at column {} (drop {violation:.3e})",
                row_idx + 1,
                index
            )),
            other => other,
        })?;
        curves.push(curve);
    }
    let n = curves.len();
    let x = DMatrix::from_row_slice(n, p, &xs);
    Ok(LoadedDataset { data: Dataset::new(x, curves, None)?, predictor_names })
}

fn load_raw_samples(path: &Path, grid_size: usize) -> Result<LoadedDataset> {
    let mut reader = csv_reader(path)?;
    let headers = headers_of(&mut reader)?;
    let id_col = headers
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| Error::Input("raw-samples file needs an id column".into()))?;
    let value_col = headers
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| Error::Input("raw-samples file needs a value column".into()))?;
    let x_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter_map(|(j, h)| h.strip_prefix("x:").map(|nm| (j, nm.to_string())))
        .collect();
    let predictor_names: Vec<String> = x_cols.iter().map(|(_, nm)| nm.clone()).collect();

    // group rows by id in first-appearance order
    let mut order: Vec<String> = Vec::new();
    let mut samples: std::collections::HashMap<String, (Vec<f64>, Vec<f64>)> =
        std::collections::HashMap::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::Input(format!("row {}: {e}", row_idx + 1)))?;
        let id = record[id_col].trim().to_string();
        let value: f64 = record[value_col]
            .trim()
            .parse()
            .map_err(|_| Error::Input(format!("row {}: bad value", row_idx + 1)))?;
        let x: Vec<f64> = x_cols
            .iter()
            .map(|(j, _)| {
                record[*j]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Input(format!("row {}: bad predictor", row_idx + 1)))
            })
            .collect::<Result<_>>()?;
        match samples.get_mut(&id) {
            Some((xs, vals)) => {
                if xs != &x {
                    return Err(Error::Input(format!(
                        "row {}: predictors change within id {id}",
                        row_idx + 1
                    )));
                }
                vals.push(value);
            }
            None => {
                order.push(id.clone());
                samples.insert(id, (x, vec![value]));
            }
        }
    }
    let grid = TimeGrid::uniform(grid_size);
    let mut xs = Vec::new();
    let mut curves = Vec::new();
    let mut qdens = Vec::new();
    for id in &order {
        let (x, vals) = &samples[id];
        let (qc, qd) = empirical_quantile_from_sample(vals, &grid, Smoothing::LocalLinear, None)
            .map_err(|e| Error::Input(format!("id {id}: {e}")))?;
        xs.extend_from_slice(x);
        curves.push(qc);
        qdens.push(qd);
    }
    let n = curves.len();
    let p = predictor_names.len();
    let x = DMatrix::from_row_slice(n, p, &xs);
    Ok(LoadedDataset { data: Dataset::new(x, curves, Some(qdens))?, predictor_names })
}

/// Writes a dataset in the quantile-matrix format.
pub fn save_dataset(path: &Path, data: &Dataset, predictor_names: &[String]) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = predictor_names
        .iter()
        .map(|nm| format!("x:{nm}"))
        .chain(data.grid().points().iter().map(|&t| format!("q:{}", fmt_f64(t))))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..data.n() {
        let mut fields: Vec<String> = (0..data.p())
            .map(|j| fmt_f64(data.predictors()[(i, j)]))
            .collect();
        fields.extend(data.quantile(i).values().iter().map(|&v| fmt_f64(v)));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    write_file(path, &out)
}

/// JSON writer with explicit 17-significant-digit floats.
pub fn report_to_json(report: &TestReport) -> String {
    let value = serde_json::to_value(report).expect("report serializes");
    let mut out = String::new();
    render_json(&value, 0, &mut out);
    out.push('\n');
    out
}

fn render_json(v: &serde_json::Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match v {
        serde_json::Value::Object(map) => {
            out.push_str("{\n");
            for (k, (key, val)) in map.iter().enumerate() {
                out.push_str(&format!("{pad}  \"{key}\": "));
                render_json(val, indent + 1, out);
                if k + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&format!("{pad}}}"));
        }
        serde_json::Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else {
                out.push_str("[\n");
                for (k, item) in items.iter().enumerate() {
                    out.push_str(&format!("{pad}  "));
                    render_json(item, indent + 1, out);
                    if k + 1 < items.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                out.push_str(&format!("{pad}]"));
            }
        }
        serde_json::Value::Number(num) => {
            if let Some(f) = num.as_f64() {
                if num.is_f64() {
                    out.push_str(&fmt_f64(f));
                } else {
                    out.push_str(&num.to_string());
                }
            } else {
                out.push_str(&num.to_string());
            }
        }
        other => out.push_str(&other.to_string()),
    }
}

pub fn load_report(path: &Path) -> Result<TestReport> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Input(format!("bad report JSON: {e}")))
}

/// Band CSV: abscissa, lower, center, upper, standardization; rows sorted by
/// abscissa.
pub fn band_to_csv(band: &BandResult) -> String {
    let mut out = String::from("abscissa,lower,center,upper,standardization\n");
    for l in 0..band.abscissa.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(band.abscissa[l]),
            fmt_f64(band.lower[l]),
            fmt_f64(band.center[l]),
            fmt_f64(band.upper[l]),
            fmt_f64(band.standardization[l]),
        ));
    }
    out
}

/// Power-experiment CSV in the long layout of the power-curve figure.
pub fn power_rows_to_csv(rows: &[PowerRow]) -> String {
    let mut out = String::from("test,transport,n,engine,signal,reps,rejections,power\n");
    for r in rows {
        let test = match r.test {
            wassreg::TestKind::Global => "global",
            wassreg::TestKind::Partial => "partial",
        };
        out.push_str(&format!(
            "{test},{},{},{},{},{},{},{}\n",
            r.transport,
            r.n,
            r.engine,
            fmt_f64(r.signal),
            r.reps,
            r.rejections,
            fmt_f64(r.rate())
        ));
    }
    out
}

/// Coverage CSV shaped like the error-rate table: one row per x, one column
/// per (band, transport, n) cell.
pub fn coverage_rows_to_csv(rows: &[CoverageRow]) -> String {
    use std::collections::BTreeSet;
    let xs: BTreeSet<i64> = rows.iter().map(|r| (r.x * 1e6).round() as i64).collect();
    let mut cells: Vec<(String, Vec<&CoverageRow>)> = Vec::new();
    for r in rows {
        let kind = match r.band {
            wassreg::bands::BandKind::Winf => "winf",
            wassreg::bands::BandKind::Density => "density",
        };
        let key = format!("{kind}_{}_n{}", r.transport, r.n);
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => cells.push((key, vec![r])),
        }
    }
    let mut out = String::from("x");
    for (key, _) in &cells {
        out.push(',');
        out.push_str(key);
    }
    out.push('\n');
    for &xk in &xs {
        let x = xk as f64 / 1e6;
        out.push_str(&fmt_f64(x));
        for (_, rows) in &cells {
            let cell = rows.iter().find(|r| ((r.x * 1e6).round() as i64) == xk);
            out.push(',');
            match cell {
                Some(r) => out.push_str(&fmt_f64(r.rate())),
                None => out.push_str("NA"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Error::Input(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    let mut f = fs::File::create(path)
        .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))?;
    f.write_all(content.as_bytes())
        .map_err(|e| Error::Input(format!("write failed for {}: {e}", path.display())))
}
