//! Number formatting and table writers shared by the command line and path export.

use std::io::Write;

use crate::error::Result;

/// `x` with 17 significant digits: fixed notation for moderate magnitudes,
/// scientific otherwise.
pub fn sig17(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.0000000000000000".to_string();
    }
    let mag = x.abs().log10().floor();
    if (-5.0..16.0).contains(&mag) {
        let decimals = (16.0 - mag) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => sig17(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Num(x) if x.is_finite() => serde_json::json!(x),
            Cell::Num(x) => serde_json::Value::String(x.to_string()),
            Cell::Int(i) => serde_json::json!(i),
            Cell::Text(s) => serde_json::Value::String(s.clone()),
            Cell::Bool(b) => serde_json::Value::Bool(*b),
        }
    }
}

/// Column names and rows of one command's output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub warnings: Vec<String>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut w: W, meta: &serde_json::Value) -> Result<()> {
        writeln!(w, "# meta={meta}")?;
        for warning in &self.warnings {
            writeln!(w, "# warning={warning}")?;
        }
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self, meta: &serde_json::Value) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: serde_json::Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(c, v)| (c.to_string(), v.json()))
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        let mut meta = meta.clone();
        if let serde_json::Value::Object(m) = &mut meta {
            m.insert("warnings".into(), serde_json::json!(self.warnings));
        }
        serde_json::json!({ "meta": meta, "rows": rows })
    }
}
