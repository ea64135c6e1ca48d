//! Atomic file emission.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Output directory shared by the files of one command.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::runtime(format!("creating {}", root.display()), e))?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes through a sibling temporary file renamed into place, so readers
    /// never see a partial file.
    pub fn write_with(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<(), Box<dyn std::error::Error>>,
    ) -> Result<PathBuf, CliError> {
        let target = self.path(name);
        let tmp = self.path(&format!(".{name}.tmp"));
        let context = || format!("writing {}", target.display());
        let result = (|| -> Result<(), Box<dyn std::error::Error>> {
            let mut w = BufWriter::new(File::create(&tmp)?);
            body(&mut w)?;
            w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
            fs::rename(&tmp, &target)?;
            Ok(())
        })();
        if let Err(e) = result {
            let _ = fs::remove_file(&tmp);
            return Err(CliError::runtime(context(), e));
        }
        log::info!("wrote {}", target.display());
        Ok(target)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }
}
