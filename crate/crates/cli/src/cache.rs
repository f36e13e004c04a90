//! On-disk artifact cache. Each entry is a directory named by the config
//! digest; a lock file in the root serializes writers against readers.

use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

const MANIFEST: &str = "manifest.txt";

pub struct Cache {
    root: PathBuf,
}

fn cache_err(what: &str, path: &Path, e: std::io::Error) -> CliError {
    CliError::Cache(format!("{what} {}: {e}", path.display()))
}

impl Cache {
    pub fn open(root: PathBuf) -> CliResult<Self> {
        fs::create_dir_all(&root).map_err(|e| cache_err("cannot create", &root, e))?;
        Ok(Self { root })
    }

    fn lock_file(&self) -> CliResult<File> {
        let path = self.root.join(".lock");
        OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|e| cache_err("cannot open", &path, e))
    }

    pub fn lookup(&self, key: &str) -> CliResult<Option<Vec<Artifact>>> {
        let lock = self.lock_file()?;
        lock.lock_shared().map_err(|e| cache_err("cannot lock", &self.root, e))?;
        let dir = self.root.join(key);
        let manifest = match fs::read_to_string(dir.join(MANIFEST)) {
            Ok(m) => m,
            Err(_) => return Ok(None),
        };
        let mut out = Vec::new();
        for name in manifest.lines().filter(|l| !l.is_empty()) {
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(|e| cache_err("cannot read", &path, e))?;
            out.push(Artifact { name: name.to_string(), bytes });
        }
        Ok(Some(out))
    }

    pub fn store(&self, key: &str, artifacts: &[Artifact]) -> CliResult<()> {
        let lock = self.lock_file()?;
        lock.lock().map_err(|e| cache_err("cannot lock", &self.root, e))?;
        let tmp = self.root.join(format!(".tmp-{key}"));
        let _ = fs::remove_dir_all(&tmp);
        fs::create_dir_all(&tmp).map_err(|e| cache_err("cannot create", &tmp, e))?;
        let mut manifest = String::new();
        for a in artifacts {
            let path = tmp.join(&a.name);
            fs::write(&path, &a.bytes).map_err(|e| cache_err("cannot write", &path, e))?;
            manifest.push_str(&a.name);
            manifest.push('\n');
        }
        // the manifest goes last: an entry without one is never read
        let path = tmp.join(MANIFEST);
        fs::write(&path, manifest).map_err(|e| cache_err("cannot write", &path, e))?;
        let dest = self.root.join(key);
        let _ = fs::remove_dir_all(&dest);
        fs::rename(&tmp, &dest).map_err(|e| cache_err("cannot move into", &dest, e))
    }
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| cache_err("cannot create", dir, e))?;
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes).map_err(|e| cache_err("cannot write", &path, e))?;
    }
    Ok(())
}
