use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::CliResult;

/// Files written by one command. Unless [`Artifacts::keep`] is called, every
/// file created through the tracker is removed when it is dropped, so a
/// failing command leaves nothing half-written behind.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
    keep: bool,
}

impl Artifacts {
    pub fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            keep: false,
        })
    }

    /// Creates `name` inside the output directory and hands the buffered
    /// writer to `fill`.
    pub fn write(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut BufWriter<File>) -> CliResult<()>,
    ) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        let file = File::create(&path)?;
        self.written.push(path.clone());
        let mut w = BufWriter::new(file);
        fill(&mut w)?;
        w.flush()?;
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> CliResult<PathBuf> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    pub fn keep(mut self) -> Vec<PathBuf> {
        self.keep = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for Artifacts {
    fn drop(&mut self) {
        if !self.keep {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dropped_tracker_removes_its_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = {
            let mut a = Artifacts::new(dir.path()).unwrap();
            a.write("x.txt", |w| Ok(writeln!(w, "partial")?)).unwrap()
        };
        assert!(!path.exists());

        let mut a = Artifacts::new(dir.path()).unwrap();
        let path = a.write("y.txt", |w| Ok(writeln!(w, "done")?)).unwrap();
        assert_eq!(a.keep(), vec![path.clone()]);
        assert!(path.exists());
    }

    #[test]
    fn failed_fill_is_cleaned_up() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::new(dir.path()).unwrap();
        let err = a.write("z.csv", |_| {
            Err(crate::error::CliError::Numerical("x".into()))
        });
        assert!(err.is_err());
        drop(a);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
