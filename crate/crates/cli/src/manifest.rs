use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rpitrack_core::certify::text::Writer;
use sha2::{Digest, Sha256};

/// Writes through a sibling temporary file and a rename, so readers never
/// observe a half-written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let name = path.file_name().ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = name.to_os_string();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Record of one command invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    /// `(role, path, sha256)`; the digest is `unreadable` when the file could not be read.
    pub inputs: Vec<(String, PathBuf, String)>,
    pub seed: Option<u64>,
    pub outputs: Vec<(String, PathBuf)>,
    pub wall_clock: Duration,
    pub exit_code: i32,
    pub summary: String,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            inputs: Vec::new(),
            seed: None,
            outputs: Vec::new(),
            wall_clock: Duration::ZERO,
            exit_code: 0,
            summary: String::new(),
        }
    }

    /// Registers an input and hashes its bytes.
    pub fn input(&mut self, role: &str, path: &Path, bytes: Option<&[u8]>) {
        let digest = bytes.map_or_else(|| "unreadable".to_string(), sha256_hex);
        self.inputs.push((role.to_string(), path.to_path_buf(), digest));
    }

    pub fn passed(&self) -> bool {
        self.exit_code == 0
    }

    pub fn to_text(&self) -> String {
        let mut w = Writer::new();
        w.comment("rpitrack run manifest")
            .section("run")
            .word("command", &self.command)
            .word("seed", &self.seed.map_or("none".to_string(), |s| s.to_string()))
            .word("wall_clock_s", &format!("{:.3}", self.wall_clock.as_secs_f64()))
            .word("exit_code", &self.exit_code.to_string())
            .word("status", if self.passed() { "pass" } else { "fail" });
        if !self.summary.is_empty() {
            w.word("summary", &self.summary.replace(['\n', '#'], " "));
        }
        w.section("inputs");
        for (role, path, digest) in &self.inputs {
            w.word(role, &path.display().to_string()).word(&format!("{role}_sha256"), digest);
        }
        w.section("outputs");
        for (role, path) in &self.outputs {
            w.word(role, &path.display().to_string());
        }
        w.finish()
    }
}
