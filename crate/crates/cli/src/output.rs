//! CSV helpers shared by the subcommands.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};

/// Shortest round-trip representation; `NaN` and `inf` spelled out.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

/// A CSV file written row by row and flushed after each row, so partially
/// finished runs still leave readable output.
pub struct CsvOut {
    writer: csv::Writer<BufWriter<File>>,
    path: String,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut writer = csv::Writer::from_writer(BufWriter::new(file));
        writer.write_record(header)?;
        writer.flush()?;
        Ok(Self {
            writer,
            path: path.display().to_string(),
        })
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<()> {
        self.writer
            .write_record(fields.iter().map(AsRef::as_ref))
            .with_context(|| format!("writing {}", self.path))?;
        self.writer.flush().with_context(|| format!("writing {}", self.path))
    }

    pub fn finish(&mut self) -> Result<()> {
        self.writer.flush().with_context(|| format!("writing {}", self.path))
    }
}
