use std::fs;
use std::path::{Component, Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Root for every file a subcommand writes. Output paths are relative to it
/// and may not climb out of it.
#[derive(Clone, Debug)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Resolves `rel` under the root, creating parent directories.
    pub fn resolve(&self, rel: impl AsRef<Path>) -> Result<PathBuf> {
        let rel = rel.as_ref();
        check_relative(rel)?;
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating directory {}", parent.display()))?;
        }
        Ok(path)
    }

    pub fn write(&self, rel: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.resolve(rel)?;
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// A view rooted at a subdirectory.
    pub fn sub(&self, rel: impl AsRef<Path>) -> Result<OutDir> {
        let rel = rel.as_ref();
        check_relative(rel)?;
        Ok(OutDir::new(self.root.join(rel)))
    }
}

fn check_relative(rel: &Path) -> Result<()> {
    if rel.as_os_str().is_empty() {
        bail!("empty output path");
    }
    for c in rel.components() {
        match c {
            Component::Normal(_) | Component::CurDir => {}
            _ => bail!(
                "output path {} must be relative to the output directory and must not contain '..'",
                rel.display()
            ),
        }
    }
    Ok(())
}
