//! Named numeric datasets and their CSV form: a header of variable names,
//! then one sample per line.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("{0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    /// `n × p`, one row per sample.
    pub values: DMatrix<f64>,
}

impl Dataset {
    pub fn new(names: Vec<String>, values: DMatrix<f64>) -> Result<Self, DatasetError> {
        if names.len() != values.ncols() {
            return Err(DatasetError::Shape(format!(
                "{} names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        Ok(Self { names, values })
    }

    /// Names `X1..Xp`.
    pub fn default_names(p: usize) -> Vec<String> {
        (1..=p).map(|i| format!("X{i}")).collect()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if names.is_empty() || names.iter().any(String::is_empty) {
            return Err(DatasetError::Parse {
                line: 1,
                message: "header must name every column".into(),
            });
        }
        let mut flat = Vec::new();
        let mut rows = 0;
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            for field in record.iter() {
                let v: f64 = field.parse().map_err(|_| DatasetError::Parse {
                    line,
                    message: format!("not a number: {field:?}"),
                })?;
                if !v.is_finite() {
                    return Err(DatasetError::Parse {
                        line,
                        message: format!("non-finite value {field:?}"),
                    });
                }
                flat.push(v);
            }
            rows += 1;
        }
        if rows == 0 {
            return Err(DatasetError::Shape("no samples".into()));
        }
        let values = DMatrix::from_row_slice(rows, names.len(), &flat);
        Ok(Self { names, values })
    }

    /// Writes full-precision values (shortest round-tripping representation).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.names)?;
        for row in self.values.row_iter() {
            wtr.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        wtr.flush()?;
        Ok(())
    }
}
