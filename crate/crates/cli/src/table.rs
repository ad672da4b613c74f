//! Small CSV tables with a fixed header.

use std::path::Path;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let io_err = |e: csv::Error| match e.into_kind() {
            csv::ErrorKind::Io(e) => CliError::io(path, e),
            other => CliError::Data(format!("{}: {other:?}", path.display())),
        };
        let mut w = csv::Writer::from_path(path).map_err(io_err)?;
        w.write_record(&self.header).map_err(io_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(io_err)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let fmt = |e: csv::Error| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            match e.into_kind() {
                csv::ErrorKind::Io(e) => CliError::io(path, e),
                other => CliError::Format {
                    path: path.into(),
                    line,
                    message: format!("{other:?}"),
                },
            }
        };
        let mut r = csv::Reader::from_path(path).map_err(fmt)?;
        let header = r.headers().map_err(fmt)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()
            .map_err(fmt)?;
        Ok(Self { header, rows })
    }

    /// Index of a named column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn has_columns(&self, names: &[&str]) -> bool {
        names.iter().all(|n| self.column(n).is_some())
    }
}
