//! Result files are rendered in memory and then written through a sibling
//! temporary file and a rename, so a failed run never leaves a partial file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Named file contents destined for one output directory.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn add(&mut self, name: &str, contents: Vec<u8>) {
        self.files.push((name.to_string(), contents));
    }

    pub fn add_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_vec_pretty(value).map_err(CliError::runtime)?;
        text.push(b'\n');
        self.add(name, text);
        Ok(())
    }

    /// Writes every file into `dir`, creating it if needed.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        let mut written = Vec::new();
        for (name, contents) in self.files {
            let path = dir.join(&name);
            write_atomic(&path, &contents)?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::Runtime(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp-{}", file_name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::Runtime(format!("cannot write {}: {e}", path.display()))
    })
}
