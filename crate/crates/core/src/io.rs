//! CSV and JSON tables.
//!
//! CSV files start with a `# nhlab schema=1 kind=<kind> [key=value ...]`
//! comment, then a header row. Floats use the shortest representation that
//! parses back to the same value; complex numbers are `_re`/`_im` column
//! pairs. JSON carries the same content as
//! `{"schema": 1, "kind": .., "meta": {..}, "columns": [..], "rows": [[..]]}`
//! with non-finite numbers as `null`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::error::{NhError, Result};
use crate::gbz::GbzContour;
use crate::harness::{ScalingResult, SweepTable};
use crate::metrology::{FisherMatrix, FisherReport};
use crate::spectral::{LocalizationProfile, SpectralDecomposition};
use crate::topology::{GapKind, GapReport, PhaseRow, WindingResult};

pub const SCHEMA_VERSION: u32 = 1;
const MAGIC: &str = "# nhlab";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = NhError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(NhError::Config(format!("unknown output format '{other}'"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Num(f64),
    Int(i64),
    Text(String),
    Missing,
}

impl Field {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Field::Num(x) => Some(*x),
            Field::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn to_csv(&self) -> String {
        match self {
            Field::Num(x) => format_float(*x),
            Field::Int(i) => i.to_string(),
            Field::Text(s) => s.clone(),
            Field::Missing => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Field::Num(x) if x.is_finite() => json!(x),
            Field::Int(i) => json!(i),
            Field::Text(s) => json!(s),
            _ => Value::Null,
        }
    }

    fn parse_csv(s: &str) -> Field {
        if s.is_empty() {
            Field::Missing
        } else if let Ok(i) = s.parse::<i64>() {
            Field::Int(i)
        } else if let Ok(x) = s.parse::<f64>() {
            Field::Num(x)
        } else {
            Field::Text(s.to_string())
        }
    }
}

impl From<f64> for Field {
    fn from(x: f64) -> Self {
        Field::Num(x)
    }
}

impl From<i64> for Field {
    fn from(i: i64) -> Self {
        Field::Int(i)
    }
}

impl From<usize> for Field {
    fn from(i: usize) -> Self {
        Field::Int(i as i64)
    }
}

impl From<&str> for Field {
    fn from(s: &str) -> Self {
        Field::Text(s.to_string())
    }
}

impl From<String> for Field {
    fn from(s: String) -> Self {
        Field::Text(s)
    }
}

impl<T: Into<Field>> From<Option<T>> for Field {
    fn from(v: Option<T>) -> Self {
        v.map_or(Field::Missing, Into::into)
    }
}

/// Shortest round-trip decimal; always carries a '.' or exponent.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:?}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub kind: String,
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new(kind: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            kind: kind.into(),
            meta: Vec::new(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<Field>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Field>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!("{MAGIC} schema={SCHEMA_VERSION} kind={}", self.kind);
        for (k, v) in &self.meta {
            out.push_str(&format!(" {k}={v}"));
        }
        out.push('\n');
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Field::to_csv))?;
        }
        let bytes = w.into_inner().map_err(|e| NhError::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let meta: Map<String, Value> = self.meta.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Field::to_json).collect()))
            .collect();
        let doc = json!({
            "schema": SCHEMA_VERSION,
            "kind": self.kind,
            "meta": meta,
            "columns": self.columns,
            "rows": rows,
        });
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    pub fn write(&self, path: &Path, format: OutputFormat) -> Result<()> {
        let text = self.render(format)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (first, body) = text.split_once('\n').unwrap_or((text, ""));
        let (kind, meta) = parse_comment(first)?;
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(Field::parse_csv).collect());
        }
        Ok(Self {
            kind,
            meta,
            columns,
            rows,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        let bad = |what: &str| NhError::Config(format!("malformed table json: {what}"));
        if v["schema"].as_u64() != Some(SCHEMA_VERSION as u64) {
            return Err(bad("schema version"));
        }
        let kind = v["kind"].as_str().ok_or_else(|| bad("kind"))?.to_string();
        let meta = v["meta"]
            .as_object()
            .ok_or_else(|| bad("meta"))?
            .iter()
            .map(|(k, x)| (k.clone(), x.as_str().unwrap_or_default().to_string()))
            .collect();
        let columns = v["columns"]
            .as_array()
            .ok_or_else(|| bad("columns"))?
            .iter()
            .map(|c| c.as_str().map(str::to_string).ok_or_else(|| bad("column name")))
            .collect::<Result<Vec<_>>>()?;
        let rows = v["rows"]
            .as_array()
            .ok_or_else(|| bad("rows"))?
            .iter()
            .map(|r| {
                let cells = r.as_array().ok_or_else(|| bad("row"))?;
                if cells.len() != columns.len() {
                    return Err(bad("row width"));
                }
                Ok(cells
                    .iter()
                    .map(|c| match c {
                        Value::Null => Field::Missing,
                        Value::String(s) => Field::Text(s.clone()),
                        Value::Number(n) => n.as_i64().map_or_else(|| Field::Num(n.as_f64().unwrap_or(f64::NAN)), Field::Int),
                        other => Field::Text(other.to_string()),
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind,
            meta,
            columns,
            rows,
        })
    }
}

fn parse_comment(line: &str) -> Result<(String, Vec<(String, String)>)> {
    let rest = line
        .strip_prefix(MAGIC)
        .ok_or_else(|| NhError::Config("missing nhlab header comment".into()))?;
    let mut kind = None;
    let mut meta = Vec::new();
    for tok in rest.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| NhError::Config(format!("malformed header token '{tok}'")))?;
        match k {
            "schema" => {
                if v != SCHEMA_VERSION.to_string() {
                    return Err(NhError::Config(format!("unsupported schema version {v}")));
                }
            }
            "kind" => kind = Some(v.to_string()),
            _ => meta.push((k.to_string(), v.to_string())),
        }
    }
    Ok((kind.ok_or_else(|| NhError::Config("header lacks kind".into()))?, meta))
}

pub fn spectrum_table(dec: &SpectralDecomposition) -> Table {
    let mut t = Table::new("spectrum", &["index", "re_E", "im_E", "residual"]);
    for (i, (e, r)) in dec.values.iter().zip(&dec.residuals).enumerate() {
        t.push(vec![i.into(), e.re.into(), e.im.into(), (*r).into()]);
    }
    t
}

/// PBC eigenvalues sampled band by band over the Brillouin zone.
pub fn bands_table(ks: &[f64], bands: &[Vec<Complex64>]) -> Table {
    let mut t = Table::new("bands", &["band", "k", "re_E", "im_E"]);
    for (b, band) in bands.iter().enumerate() {
        for (k, e) in ks.iter().zip(band) {
            t.push(vec![b.into(), (*k).into(), e.re.into(), e.im.into()]);
        }
    }
    t
}

pub fn profile_table(profile: &LocalizationProfile) -> Table {
    let mut t = Table::new("profile", &["site", "P"])
        .with_meta("slope_per_module", format_float(profile.slope_per_module))
        .with_meta("fit_r2", format_float(profile.fit_r2));
    for (j, p) in profile.p.iter().enumerate() {
        t.push(vec![j.into(), (*p).into()]);
    }
    t
}

pub fn contour_table(contour: &GbzContour) -> Table {
    let mut t = Table::new("contour", &["phi", "re_beta", "im_beta"]).with_meta("radius", format_float(contour.radius));
    for (phi, b) in contour.phis().into_iter().zip(&contour.points) {
        t.push(vec![phi.into(), b.re.into(), b.im.into()]);
    }
    t
}

pub fn phase_table(rows: &[PhaseRow]) -> Table {
    let mut t = Table::new(
        "phase_diagram",
        &["JR", "winding", "minGap_central", "minGap_side", "point_gap_residual"],
    );
    for r in rows {
        t.push(vec![
            r.jr.into(),
            r.winding.into(),
            r.min_gap_central.into(),
            r.min_gap_side.into(),
            r.point_gap_residual.into(),
        ]);
    }
    t
}

fn gap_kind_str(k: GapKind) -> &'static str {
    match k {
        GapKind::PointGap => "POINT_GAP",
        GapKind::LineGapCentral => "LINE_GAP_CENTRAL",
        GapKind::LineGapSide => "LINE_GAP_SIDE",
    }
}

pub fn gaps_table(reports: &[GapReport]) -> Table {
    let mut t = Table::new(
        "gaps",
        &["kind", "param_re", "param_im", "min_gap", "closed", "band_lo", "band_hi"],
    );
    for g in reports {
        t.push(vec![
            gap_kind_str(g.kind).into(),
            g.parameter_value.re.into(),
            g.parameter_value.im.into(),
            g.min_gap.into(),
            (g.closed as i64).into(),
            g.bands.map(|b| b.0).into(),
            g.bands.map(|b| b.1).into(),
        ]);
    }
    t
}

pub fn winding_table(label: &str, results: &[(f64, WindingResult)]) -> Table {
    let mut t = Table::new("winding", &[label, "winding", "raw_phase", "contour", "contour_points"]);
    for (x, w) in results {
        let (name, n) = match w.contour {
            crate::topology::WindingContour::Gbz { n_points, .. } => ("GBZ", n_points),
            crate::topology::WindingContour::BrillouinZone { n_k } => ("BZ", n_k),
        };
        t.push(vec![(*x).into(), w.value.into(), w.raw_phase.into(), name.into(), n.into()]);
    }
    t
}

fn fisher_row(m: &FisherMatrix, steps: &[f64], residual: f64) -> Vec<Field> {
    let kind = match m.kind {
        crate::metrology::FisherKind::Quantum => "QUANTUM",
        crate::metrology::FisherKind::Classical => "CLASSICAL",
    };
    let labels = m
        .param_spec
        .as_ref()
        .map(|s| s.labels.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(";"))
        .unwrap_or_default();
    let mut row: Vec<Field> = vec![kind.into(), m.basis_label.clone().into(), labels.into()];
    row.extend(m.entries.iter().flatten().map(|&x| Field::Num(x)));
    row.extend(steps.iter().map(|&h| Field::Num(h)));
    row.push(residual.into());
    row
}

/// QFIM followed by each CFIM, entries row-major.
pub fn fisher_table(report: &FisherReport) -> Table {
    let l = report.qfim.dim();
    let mut cols: Vec<String> = vec!["kind".into(), "basis".into(), "labels".into()];
    for i in 0..l {
        for j in 0..l {
            cols.push(format!("F_{i}_{j}"));
        }
    }
    for i in 0..l {
        cols.push(format!("h_{i}"));
    }
    cols.push("max_residual".into());
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new("fisher", &col_refs);
    let steps: Vec<f64> = report.derivatives.iter().map(|d| d.step).collect();
    t.push(fisher_row(&report.qfim, &steps, report.max_residual));
    for m in &report.cfim {
        t.push(fisher_row(m, &steps, report.max_residual));
    }
    t
}

/// One column per observable plus an `errors` column of `OBS:tag` entries.
pub fn sweep_table(table: &SweepTable) -> Table {
    let mut cols: Vec<String> = vec![table.axis.as_str().to_string()];
    cols.extend(table.observables.iter().map(|o| o.as_str().to_string()));
    cols.push("errors".into());
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new("sweep", &col_refs);
    for r in &table.rows {
        let mut row: Vec<Field> = vec![r.x.into()];
        let mut errs = Vec::new();
        for (i, o) in table.observables.iter().enumerate() {
            match &r.errors[i] {
                Some(tag) => {
                    row.push(Field::Missing);
                    errs.push(format!("{o}:{tag}"));
                }
                None => row.push(r.values[i].into()),
            }
        }
        row.push(errs.join(";").into());
        t.push(row);
    }
    t
}

pub fn scaling_table(result: &ScalingResult) -> Table {
    let mut t = Table::new("scaling", &["L", "N", "location", "value"])
        .with_meta("exponent", format_float(result.fit.exponent))
        .with_meta("prefactor", format_float(result.fit.prefactor))
        .with_meta("r2", format_float(result.fit.r2));
    for p in &result.points {
        t.push(vec![p.l.into(), p.n.into(), p.location.into(), p.value.into()]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("spectrum", &["index", "re_E", "im_E", "note"]).with_meta("radius", "1.5");
        t.push(vec![0usize.into(), 0.1.into(), (-1e-300).into(), "a,b".into()]);
        t.push(vec![1usize.into(), (1.0 / 3.0).into(), f64::NAN.into(), Field::Missing]);
        t
    }

    #[test]
    fn csv_round_trip() {
        let t = sample();
        let text = t.to_csv().unwrap();
        assert!(text.starts_with("# nhlab schema=1 kind=spectrum radius=1.5\nindex,re_E,im_E,note\n"));
        let back = Table::from_csv(&text).unwrap();
        assert_eq!(back.kind, "spectrum");
        assert_eq!(back.columns, t.columns);
        assert_eq!(back.rows[0], t.rows[0]);
        assert_eq!(back.rows[1][1], Field::Num(1.0 / 3.0));
        assert!(back.rows[1][2].as_f64().unwrap().is_nan());
        assert_eq!(back.meta, vec![("radius".to_string(), "1.5".to_string())]);
    }

    #[test]
    fn json_round_trip() {
        let t = sample();
        let back = Table::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back.rows[0], t.rows[0]);
        assert_eq!(back.rows[1][2], Field::Missing);
        assert_eq!(back.meta, t.meta);
    }

    #[test]
    fn floats_are_shortest_round_trip() {
        for x in [0.1, 2.0, 1e-7, 123456789.125, -0.0, 5e-324] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_float(0.1), "0.1");
    }

    #[test]
    fn rejects_foreign_files() {
        assert!(Table::from_csv("a,b\n1,2\n").is_err());
        assert!(Table::from_csv("# nhlab schema=2 kind=x\na\n1\n").is_err());
        assert!(Table::from_json("{\"schema\": 2}").is_err());
    }

    #[test]
    fn format_names() {
        assert_eq!("JSON".parse::<OutputFormat>().unwrap(), OutputFormat::Json);
        assert!("xml".parse::<OutputFormat>().is_err());
    }
}
