use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use l0_filter::data::{
    generate_synthetic, load_csv_with, CsvOptions, Dataset, SyntheticCase, SyntheticSpec,
};
use l0_filter::FilterError;

use crate::CliError;

/// Where the samples come from: a synthetic case or a CSV file.
#[derive(Debug, Clone)]
pub enum Source {
    Case {
        case: SyntheticCase,
        seed: u64,
    },
    File {
        path: PathBuf,
        label_col: Option<usize>,
        ignore_cols: Vec<usize>,
    },
}

impl Source {
    pub fn load(&self) -> Result<Dataset, CliError> {
        match self {
            Source::Case { case, seed } => Ok(generate_synthetic(SyntheticSpec::new(*case, *seed))),
            Source::File {
                path,
                label_col,
                ignore_cols,
            } => {
                let options = CsvOptions {
                    label_column: *label_col,
                    ignore_columns: ignore_cols.clone(),
                };
                let loaded = load_csv_with(path, &options)?;
                if loaded.dropped_rows > 0 {
                    log::warn!(
                        "{}: dropped {} rows with missing values",
                        path.display(),
                        loaded.dropped_rows
                    );
                }
                Ok(loaded.dataset)
            }
        }
    }

    /// Default number of clusters: the case's, or the number of label classes.
    pub fn default_k(&self, data: &Dataset) -> Option<usize> {
        match self {
            Source::Case { case, .. } => Some(case.num_clusters()),
            Source::File { .. } => data.num_classes(),
        }
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

pub fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::from(FilterError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a header and rows of plain fields as CSV.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let csv_err = |e: csv::Error| {
        CliError::from(FilterError::Csv {
            path: path.to_path_buf(),
            source: e,
        })
    };
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Runs `f` with a buffered writer on `path` and flushes it.
pub fn write_with<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> l0_filter::Result<()>,
{
    let mut out = create(path)?;
    f(&mut out)?;
    out.flush().map_err(|e| io_error(path, e))
}
