//! CSV tables, datasets on disk, and number formatting.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use drcr_core::Dataset;

use crate::error::{Error, Result};

/// 17 significant digits, enough for any `f64` to survive a round trip.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// A numeric CSV file: header plus rows. `lines[i]` is the line row `i`
/// started on, for error messages.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub lines: Vec<u64>,
}

impl Table {
    pub fn new(headers: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(i) = rows.iter().position(|r| r.len() != headers.len()) {
            return Err(Error::invalid(format!(
                "row {i} has {} fields, header has {}",
                rows[i].len(),
                headers.len()
            )));
        }
        // Header on line 1.
        let lines = (0..rows.len() as u64).map(|i| i + 2).collect();
        Ok(Table { headers, rows, lines })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid(format!("no column named `{name}`")))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn parse_number(field: &str) -> Option<f64> {
    let v: f64 = field.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

/// Reads a header row and numeric records. Lines starting with `#` are
/// skipped.
pub fn parse_table(input: impl Read) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::Parse {
            line: 1,
            msg: "missing header row".into(),
        });
    }
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(headers.len());
        for (k, field) in rec.iter().enumerate() {
            if field.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: format!("missing value for `{}`", headers[k]),
                });
            }
            row.push(parse_number(field).ok_or_else(|| Error::Parse {
                line,
                msg: format!("`{field}` in column `{}` is not a finite number", headers[k]),
            })?);
        }
        rows.push(row);
        lines.push(line);
    }
    Ok(Table { headers, rows, lines })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            line,
            msg: format!("expected {expected_len} fields, found {len}"),
        },
        _ => Error::Parse {
            line,
            msg: e.to_string(),
        },
    }
}

pub fn read_table(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_table(file)
}

/// Writes `table` with an optional `#` provenance line first.
pub fn write_table(path: impl AsRef<Path>, table: &Table, provenance: Option<&str>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    if let Some(p) = provenance {
        writeln!(out, "# {}", p.replace('\n', " ")).map_err(io)?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&table.headers).map_err(csv_error)?;
        for row in &table.rows {
            w.write_record(row.iter().map(|v| fmt17(*v))).map_err(csv_error)?;
        }
        w.flush().map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Which columns are covariates and which is the response, by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    /// Empty means every column except the response.
    pub covariates: Vec<String>,
    pub response: Option<String>,
}

impl Schema {
    pub fn new(covariates: Vec<String>, response: impl Into<String>) -> Self {
        Schema {
            covariates,
            response: Some(response.into()),
        }
    }

    /// Covariates only, for prediction inputs.
    pub fn covariates_only(covariates: Vec<String>) -> Self {
        Schema {
            covariates,
            response: None,
        }
    }

    /// Column indices of the covariates and the response.
    pub fn resolve(&self, table: &Table) -> Result<(Vec<usize>, Option<usize>)> {
        let response = self.response.as_deref().map(|r| table.column(r)).transpose()?;
        let covariates = if self.covariates.is_empty() {
            (0..table.headers.len()).filter(|&k| Some(k) != response).collect()
        } else {
            self.covariates
                .iter()
                .map(|c| table.column(c))
                .collect::<Result<Vec<_>>>()?
        };
        if covariates.is_empty() {
            return Err(Error::invalid("the schema selects no covariates"));
        }
        if let Some(r) = response {
            if covariates.contains(&r) {
                return Err(Error::invalid("the response is also listed as a covariate"));
            }
        }
        Ok((covariates, response))
    }

    pub fn covariate_names(&self, table: &Table) -> Result<Vec<String>> {
        let (cols, _) = self.resolve(table)?;
        Ok(cols.into_iter().map(|k| table.headers[k].clone()).collect())
    }
}

/// Covariates and response as a dataset, no transformation. Without a
/// response column the responses are zero.
pub fn table_to_dataset(table: &Table, schema: &Schema, tag: &str) -> Result<Dataset> {
    let (cols, response) = schema.resolve(table)?;
    let rows: Vec<Vec<f64>> = table
        .rows
        .iter()
        .map(|r| cols.iter().map(|&k| r[k]).collect())
        .collect();
    let ys = table
        .rows
        .iter()
        .map(|r| response.map_or(0.0, |k| r[k]))
        .collect();
    Ok(Dataset::new(&rows, ys, tag)?)
}

/// `x1..xd,y` unless names are given.
pub fn dataset_to_table(data: &Dataset, names: Option<(&[String], &str)>) -> Table {
    let mut headers: Vec<String> = match names {
        Some((cov, _)) => cov.to_vec(),
        None => (1..=data.d()).map(|k| format!("x{k}")).collect(),
    };
    headers.push(names.map_or("y".to_owned(), |(_, r)| r.to_owned()));
    let rows: Vec<Vec<f64>> = (0..data.n())
        .map(|i| {
            let mut r = data.x(i).to_vec();
            r.push(data.y(i));
            r
        })
        .collect();
    let lines = (0..rows.len() as u64).map(|i| i + 2).collect();
    Table { headers, rows, lines }
}

pub fn write_dataset(path: impl AsRef<Path>, data: &Dataset, provenance: &str) -> Result<()> {
    write_table(path, &dataset_to_table(data, None), Some(provenance))
}
