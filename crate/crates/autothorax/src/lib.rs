//! File formats, IO and orchestration for the autothorax retrieval engine:
//! manifest CSV, binary vector stores, network checkpoints, image loading,
//! a scoped-thread executor, reports and the command-line driver.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
mod error;
pub mod exec;
pub mod images;
pub mod manifest;
pub mod report;
pub mod store;

pub use error::{Error, Result};

use std::path::Path;

/// Write a file, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
