use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Output directory; every file lands via a temporary sibling and a rename.
pub struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let target = self.root.join(name);
        let dir = target.parent().unwrap_or(&self.root).to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
        tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(tmp.path(), e))?;
        // temporaries are created 0600; results should be ordinary files
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            tmp.as_file()
                .set_permissions(std::fs::Permissions::from_mode(0o644))
                .map_err(|e| CliError::io(tmp.path(), e))?;
        }
        tmp.persist(&target).map_err(|e| CliError::io(&target, e.error))?;
        self.written.push(target.clone());
        Ok(target)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// File-name-safe version of a label.
pub fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "unnamed".into()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_and_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::create(&dir.path().join("a/b")).unwrap();
        let p = out.write("x.csv", "1\n").unwrap();
        out.write("x.csv", "2\n").unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "2\n");
        // no temporaries left behind
        assert_eq!(std::fs::read_dir(dir.path().join("a/b")).unwrap().count(), 1);
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("fiber 3/a"), "fiber_3_a");
        assert_eq!(slug(""), "unnamed");
    }
}
