//! Record of what a command read and wrote, with content hashes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const CONFIG_FILE: &str = "config.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn file_hash(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

pub struct Manifest {
    command: String,
    seed: u64,
    config_sha256: String,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config_text: &str) -> Self {
        Manifest {
            command: command.to_string(),
            seed,
            config_sha256: sha256_hex(config_text.as_bytes()),
            inputs: Vec::new(),
            outputs: vec![CONFIG_FILE.to_string()],
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// An output file name relative to the output directory.
    pub fn output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    /// Write the manifest into `out` and return its own hash.
    pub fn write(&self, out: &Path) -> std::io::Result<String> {
        let mut text = String::new();
        let _ = writeln!(text, "command\t{}", self.command);
        let _ = writeln!(text, "seed\t{}", self.seed);
        let _ = writeln!(text, "config_sha256\t{}", self.config_sha256);
        for p in &self.inputs {
            let _ = writeln!(text, "input\t{}\t{}", p.display(), file_hash(p)?);
        }
        for name in &self.outputs {
            let _ = writeln!(text, "output\t{name}\t{}", file_hash(&out.join(name))?);
        }
        std::fs::write(out.join(MANIFEST_FILE), &text)?;
        Ok(sha256_hex(text.as_bytes()))
    }
}
