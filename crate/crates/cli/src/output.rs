//! Output files are written to a temporary sibling and renamed into place,
//! so a failed command never leaves a truncated result behind.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Refuses to start when any target exists (unless `force`) or when its
/// directory is missing. Called before any work is done.
pub fn check_targets(paths: &[&Path], force: bool) -> CliResult<()> {
    for (i, p) in paths.iter().enumerate() {
        if paths[..i].contains(p) {
            return Err(CliError::Config(format!(
                "output {} is named twice",
                p.display()
            )));
        }
        if p.exists() && !force {
            return Err(CliError::Config(format!(
                "{} exists; pass --force to overwrite",
                p.display()
            )));
        }
        let dir = parent_dir(p);
        if !dir.is_dir() {
            return Err(CliError::io(
                p,
                std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("directory {} does not exist", dir.display()),
                ),
            ));
        }
    }
    Ok(())
}

fn parent_dir(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn temp_path(p: &Path) -> PathBuf {
    let name = p
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    parent_dir(p).join(format!(".{name}.{}.tmp", std::process::id()))
}

/// Staged outputs; nothing is visible at the final paths until `commit`.
#[derive(Default)]
pub struct Staged {
    files: Vec<(PathBuf, PathBuf)>,
}

impl Staged {
    pub fn write(
        &mut self,
        path: &Path,
        body: impl FnOnce(&mut BufWriter<File>) -> fpfit::Result<()>,
    ) -> CliResult<()> {
        let tmp = temp_path(path);
        let file = File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        // registered first so a failing body still gets cleaned up
        self.files.push((tmp.clone(), path.to_path_buf()));
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush().map_err(|e| CliError::io(&tmp, e))?;
        Ok(())
    }

    pub fn write_json<T: serde::Serialize>(&mut self, path: &Path, value: &T) -> CliResult<()> {
        self.write(path, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    pub fn commit(mut self) -> CliResult<()> {
        for (tmp, dest) in std::mem::take(&mut self.files) {
            fs::rename(&tmp, &dest).map_err(|e| CliError::io(&dest, e))?;
        }
        Ok(())
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        for (tmp, _) in &self.files {
            let _ = fs::remove_file(tmp);
        }
    }
}
