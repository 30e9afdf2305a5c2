//! Machine-readable records files.
//!
//! A records file starts with `# key=value` comment lines (always including
//! `format_version`), followed by a CSV header row of column names and one
//! comma-separated row per record.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{invalid, Error, Result};

pub const RECORDS_FORMAT_VERSION: u32 = 1;

pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
    columns: usize,
}

impl<W: Write> RecordWriter<W> {
    /// Writes the comment header and the column row.
    pub fn new(mut out: W, header: &[(&str, String)], columns: &[&str]) -> Result<Self> {
        if columns.is_empty() {
            return Err(invalid("records need at least one column"));
        }
        writeln!(out, "# format_version={RECORDS_FORMAT_VERSION}")?;
        for (key, value) in header {
            if key.contains('=') || key.contains('\n') || value.contains('\n') {
                return Err(invalid(format!(
                    "header entry {key:?} is not a single key=value line"
                )));
            }
            writeln!(out, "# {key}={value}")?;
        }
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(columns)?;
        Ok(Self {
            inner,
            columns: columns.len(),
        })
    }

    pub fn write_row<I, S>(&mut self, row: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let fields: Vec<S> = row.into_iter().collect();
        if fields.len() != self.columns {
            return Err(invalid(format!(
                "row has {} fields, expected {}",
                fields.len(),
                self.columns
            )));
        }
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Records {
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Records {
    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

pub fn read_records<R: Read>(input: R) -> Result<Records> {
    let mut reader = BufReader::new(input);
    let mut header = Vec::new();
    let mut body = String::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        match line.strip_prefix('#') {
            Some(rest) => {
                let rest = rest.trim();
                if let Some((k, v)) = rest.split_once('=') {
                    header.push((k.trim().to_string(), v.trim().to_string()));
                }
            }
            None => {
                body.push_str(&line);
                reader.read_to_string(&mut body)?;
                break;
            }
        }
    }
    let mut csv_reader = csv::Reader::from_reader(body.as_bytes());
    let columns = csv_reader.headers()?.iter().map(str::to_string).collect();
    let rows = csv_reader
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok(Records {
        header,
        columns,
        rows,
    })
}
