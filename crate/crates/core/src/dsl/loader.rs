use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Resolves file references in expressions.
pub trait Loader: Sync {
    fn read(&self, path: &str) -> Result<String>;
}

/// Reads files relative to a base directory.
#[derive(Debug, Clone)]
pub struct FsLoader {
    base: PathBuf,
}

impl FsLoader {
    pub fn new(base: impl AsRef<Path>) -> Self {
        Self {
            base: base.as_ref().to_path_buf(),
        }
    }

    pub fn base(&self) -> &Path {
        &self.base
    }
}

impl Loader for FsLoader {
    fn read(&self, path: &str) -> Result<String> {
        let full = self.base.join(path);
        std::fs::read_to_string(&full).map_err(|e| Error::File {
            path: full.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// In-memory files, keyed by the reference text.
#[derive(Debug, Clone, Default)]
pub struct MemoryLoader {
    files: HashMap<String, String>,
}

impl MemoryLoader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, path: impl Into<String>, contents: impl Into<String>) -> Self {
        self.files.insert(path.into(), contents.into());
        self
    }
}

impl Loader for MemoryLoader {
    fn read(&self, path: &str) -> Result<String> {
        self.files.get(path).cloned().ok_or_else(|| Error::File {
            path: path.into(),
            message: "no such file".into(),
        })
    }
}
