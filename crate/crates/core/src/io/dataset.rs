use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::{parse_label_file, read_pgm_extent, LabelRecord};

/// One ground-truth image: `<id>.txt` labels and an optional `<id>.pgm` whose
/// header supplies the extent.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub id: String,
    pub label_path: PathBuf,
    pub image_path: Option<PathBuf>,
    pub width: usize,
    pub height: usize,
    pub labels: Vec<LabelRecord>,
}

/// Ground-truth directory, entries sorted by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetIndex {
    pub entries: Vec<IndexEntry>,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

fn with_path(path: &Path, e: Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

impl DatasetIndex {
    /// Scans `dir` for label files. Images without a `.pgm` get
    /// `default_extent` (width, height).
    pub fn scan(dir: &Path, default_extent: (usize, usize)) -> Result<Self> {
        if default_extent.0 == 0 || default_extent.1 == 0 {
            return Err(Error::InvalidShape(format!("default extent {}x{} is empty", default_extent.0, default_extent.1)));
        }
        let mut entries = Vec::new();
        for item in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
            let path = item.map_err(|e| io_err(dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else { continue };
            let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
            let labels = parse_label_file(&text).map_err(|e| with_path(&path, e))?;
            let pgm = path.with_extension("pgm");
            let (image_path, (width, height)) = if pgm.is_file() {
                let bytes = std::fs::read(&pgm).map_err(|e| io_err(&pgm, e))?;
                let ext = read_pgm_extent(&bytes).map_err(|e| with_path(&pgm, e))?;
                (Some(pgm), ext)
            } else {
                (None, default_extent)
            };
            entries.push(IndexEntry { id, label_path: path, image_path, width, height, labels });
        }
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Self { entries })
    }

    pub fn get(&self, id: &str) -> Option<&IndexEntry> {
        self.entries.binary_search_by(|e| e.id.as_str().cmp(id)).ok().map(|i| &self.entries[i])
    }

    pub fn total_instances(&self) -> usize {
        self.entries.iter().map(|e| e.labels.len()).sum()
    }
}
