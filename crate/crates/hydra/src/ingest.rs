//! Corpus loading from function-per-row CSV files and C source trees.

use std::collections::BTreeSet;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use hydra_core::corpus::{extract_functions, CorpusError};
use hydra_core::{Corpus, FunctionRecord, SourceKind};
use walkdir::WalkDir;

pub const DEFAULT_COLUMN: &str = "func_after";
pub const PROJECT_COLUMN: &str = "project";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("column `{0}` not found in CSV header")]
    MissingColumn(String),
    #[error("no usable functions found")]
    EmptyCorpus,
    #[error("duplicate function id `{0}`")]
    DuplicateId(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl From<CorpusError> for IngestError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::EmptyCorpus => IngestError::EmptyCorpus,
            CorpusError::DuplicateId(id) => IngestError::DuplicateId(id),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IngestError + '_ {
    move |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Options for [`read_csv_corpus`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub column: String,
    pub id_column: Option<String>,
    /// Used for the project field when present in the header.
    pub project_column: Option<String>,
    pub limit: Option<usize>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            column: DEFAULT_COLUMN.to_string(),
            id_column: None,
            project_column: Some(PROJECT_COLUMN.to_string()),
            limit: None,
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".to_string())
}

/// Loads one function per row from `column`. Rows whose cell is empty or not
/// UTF-8 are skipped and counted; ids are zero-based row indices unless
/// `id_column` is given.
pub fn load_csv_corpus(
    path: &Path,
    column: &str,
    id_column: Option<&str>,
    limit: Option<usize>,
) -> Result<Corpus, IngestError> {
    let opts = CsvOptions {
        column: column.to_string(),
        id_column: id_column.map(str::to_string),
        limit,
        ..CsvOptions::default()
    };
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_csv_corpus(file, path, &stem(path), &opts)
}

/// [`load_csv_corpus`] over any reader; `origin` only labels errors.
pub fn read_csv_corpus<R: Read>(reader: R, origin: &Path, name: &str, opts: &CsvOptions) -> Result<Corpus, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.byte_headers().map_err(csv_err(origin))?.clone();
    let find = |name: &str| header.iter().position(|h| h == name.as_bytes());
    let col = find(&opts.column).ok_or_else(|| IngestError::MissingColumn(opts.column.clone()))?;
    let id_col = match &opts.id_column {
        Some(c) => Some(find(c).ok_or_else(|| IngestError::MissingColumn(c.clone()))?),
        None => None,
    };
    let project_col = opts.project_column.as_deref().and_then(find);

    let mut records = Vec::new();
    let mut skipped = 0;
    let mut row = csv::ByteRecord::new();
    let mut index = 0usize;
    loop {
        if opts.limit.is_some_and(|l| index >= l) {
            break;
        }
        match rdr.read_byte_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            // Malformed rows (e.g. wrong field count) are skipped like empty cells.
            Err(e) if !matches!(e.kind(), csv::ErrorKind::Io(_)) => {
                log::warn!("{}: skipping row {index}: {e}", origin.display());
                skipped += 1;
                index += 1;
                continue;
            }
            Err(e) => return Err(csv_err(origin)(e)),
        }
        let text = |c: usize| row.get(c).and_then(|b| std::str::from_utf8(b).ok());
        let source = text(col).filter(|s| !s.trim().is_empty());
        let id = match id_col {
            Some(c) => text(c).map(str::to_string),
            None => Some(index.to_string()),
        };
        match (source, id) {
            (Some(src), Some(id)) => {
                let project = project_col.and_then(text).unwrap_or(name).to_string();
                records.push(FunctionRecord::new(id, project, None, src));
            }
            _ => skipped += 1,
        }
        index += 1;
    }
    Ok(Corpus::new(name, SourceKind::CsvDataset, records, skipped)?)
}

/// Writes `id`, `project` and the raw source under `column`, readable by
/// [`load_csv_corpus`] with `id_column = Some("id")`.
pub fn write_csv_corpus<W: Write>(corpus: &Corpus, column: &str, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", PROJECT_COLUMN, column])?;
    for r in corpus.records() {
        w.write_record([r.id.as_str(), r.project.as_str(), r.raw_source.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn default_extensions() -> BTreeSet<String> {
    ["c", "h"].into_iter().map(str::to_string).collect()
}

fn matches_extension(path: &Path, extensions: &BTreeSet<String>) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| extensions.contains(e.trim_start_matches('.')) || extensions.contains(&format!(".{e}")))
}

/// Extracts top-level function definitions from every file under `root` whose
/// extension is in `extensions` (with or without the leading dot). Files are
/// visited in sorted path order; ids are `<relative_path>#<start_line>`.
pub fn scan_source_tree(root: &Path, extensions: &BTreeSet<String>) -> Result<Corpus, IngestError> {
    let meta = fs::metadata(root).map_err(io_err(root))?;
    let project = root
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| stem(root));
    let files: Vec<PathBuf> = if meta.is_file() {
        vec![root.to_path_buf()]
    } else {
        let mut files = Vec::new();
        for entry in WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| {
                let path = e.path().unwrap_or(root).to_path_buf();
                IngestError::Io {
                    path,
                    source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("filesystem loop")),
                }
            })?;
            if entry.file_type().is_file() && matches_extension(entry.path(), extensions) {
                files.push(entry.into_path());
            }
        }
        files
    };
    let mut records = Vec::new();
    let mut skipped = 0;
    for file in &files {
        let bytes = fs::read(file).map_err(io_err(file))?;
        let Ok(text) = String::from_utf8(bytes) else {
            log::warn!("{}: not UTF-8, skipped", file.display());
            skipped += 1;
            continue;
        };
        let rel = if meta.is_file() {
            file.file_name().map(PathBuf::from).unwrap_or_else(|| file.clone())
        } else {
            file.strip_prefix(root).unwrap_or(file).to_path_buf()
        };
        let rel = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        for f in extract_functions(&text) {
            records.push(FunctionRecord::new(
                format!("{rel}#{}", f.start_line),
                project.clone(),
                Some(rel.clone()),
                f.text,
            ));
        }
    }
    Ok(Corpus::new(project, SourceKind::SourceTree, records, skipped)?)
}

/// Directory (or single C file) → source-tree scan; anything else → CSV.
pub fn load_input(path: &Path, opts: &CsvOptions, extensions: &BTreeSet<String>) -> Result<Corpus, IngestError> {
    let is_dir = fs::metadata(path).map_err(io_err(path))?.is_dir();
    if is_dir || matches_extension(path, extensions) {
        scan_source_tree(path, extensions)
    } else {
        let file = fs::File::open(path).map_err(io_err(path))?;
        read_csv_corpus(file, path, &stem(path), opts)
    }
}
