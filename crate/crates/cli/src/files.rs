//! Input loading, all-or-nothing output writes and the run manifest.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::{EXIT_IO, EXIT_USAGE};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

/// Configuration problems are usage errors; anything about the input data
/// is an I/O error.
impl From<ridgeline::Error> for CliError {
    fn from(e: ridgeline::Error) -> Self {
        match e {
            ridgeline::Error::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Io(other.to_string()),
        }
    }
}

pub fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Files held in memory until the command has fully succeeded.
#[derive(Debug, Default)]
pub struct PendingFiles {
    files: Vec<(String, PathBuf, Vec<u8>)>,
}

impl PendingFiles {
    pub fn add(&mut self, label: &str, path: &Path, bytes: Vec<u8>) {
        self.files
            .push((label.to_string(), path.to_path_buf(), bytes));
    }

    pub fn first_path(&self) -> Option<&Path> {
        self.files.first().map(|(_, p, _)| p.as_path())
    }

    /// `label path sha256` lines in insertion order.
    pub fn checksum_lines(&self) -> String {
        let mut out = String::new();
        for (label, path, bytes) in &self.files {
            let _ = writeln!(
                out,
                "output {label} {} sha256 {}",
                path.display(),
                sha256_hex(bytes)
            );
        }
        out
    }

    /// Writes every file to a temporary sibling, then renames them into
    /// place. On any failure the temporaries and already renamed files are
    /// removed.
    pub fn commit(self) -> Result<(), CliError> {
        let mut staged: Vec<(PathBuf, &Path)> = Vec::new();
        let cleanup = |staged: &[(PathBuf, &Path)], renamed: usize| {
            for (i, (tmp, dst)) in staged.iter().enumerate() {
                let _ = fs::remove_file(if i < renamed { dst } else { tmp.as_path() });
            }
        };
        for (_, path, bytes) in &self.files {
            let mut tmp = path.as_os_str().to_owned();
            tmp.push(".ridgeline-tmp");
            let tmp = PathBuf::from(tmp);
            if let Err(e) = fs::write(&tmp, bytes) {
                cleanup(&staged, 0);
                let _ = fs::remove_file(&tmp);
                return Err(CliError::Io(format!("{}: {e}", path.display())));
            }
            staged.push((tmp, path));
        }
        for i in 0..staged.len() {
            if let Err(e) = fs::rename(&staged[i].0, staged[i].1) {
                cleanup(&staged, i);
                return Err(CliError::Io(format!("{}: {e}", staged[i].1.display())));
            }
        }
        Ok(())
    }
}

/// Plain-text run record: one `key value` pair per line, no timestamps.
#[derive(Debug, Default)]
pub struct Manifest {
    lines: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, input: &Path, input_bytes: &[u8]) -> Self {
        let mut m = Manifest::default();
        m.field("command", command);
        m.field("input", input.display());
        m.field("input_sha256", sha256_hex(input_bytes));
        m
    }

    pub fn field(&mut self, key: &str, value: impl fmt::Display) {
        self.lines.push(format!("{key} {value}"));
    }

    /// Adds the manifest to `pending`, listing every file already pending.
    /// Nothing is written when there are no outputs and no explicit path.
    pub fn attach(self, pending: &mut PendingFiles, explicit: Option<&Path>) {
        let path = match (explicit, pending.first_path()) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(first)) => {
                let mut p = first.as_os_str().to_owned();
                p.push(".manifest");
                PathBuf::from(p)
            }
            (None, None) => return,
        };
        let mut text = String::from("ridgeline run manifest\n");
        for line in &self.lines {
            text.push_str(line);
            text.push('\n');
        }
        text.push_str(&pending.checksum_lines());
        pending.add("manifest", &path, text.into_bytes());
    }
}
