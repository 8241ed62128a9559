use std::io::Write;
use std::path::PathBuf;

use crate::CliError;

/// Destination for a command's main artifact. Every artifact starts with a
/// `# config_hash=` comment line.
pub struct Output {
    pub path: Option<PathBuf>,
    pub config_hash: String,
}

impl Output {
    pub fn comment(&self) -> String {
        format!("# config_hash={}\n", self.config_hash)
    }

    /// Writes `body` (header row included) after the hash comment.
    pub fn emit(&self, body: &str) -> Result<(), CliError> {
        let text = format!("{}{body}", self.comment());
        match &self.path {
            Some(p) => std::fs::write(p, text)?,
            None => std::io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(())
    }

    pub fn csv(&self, header: &str, rows: &[String]) -> Result<(), CliError> {
        let mut body = String::with_capacity(64 * (rows.len() + 1));
        body.push_str(header);
        body.push('\n');
        for r in rows {
            body.push_str(r);
            body.push('\n');
        }
        self.emit(&body)
    }
}

/// Human-readable summary line on stderr, tagged with the config hash.
pub fn note(hash: &str, line: &str) {
    eprintln!("[{}] {line}", &hash[..12]);
}
