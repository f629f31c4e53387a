use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or arguments.
    Usage(String),
    /// Inputs that parse but do not validate, or I/O failures.
    Validation(String),
}

impl CliError {
    pub fn report(&self) -> ExitCode {
        let (msg, code) = match self {
            CliError::Usage(m) => (m, 2),
            CliError::Validation(m) => (m, 1),
        };
        // keep the message on one line
        let line = msg.replace('\n', " ");
        eprintln!("error: {line}");
        ExitCode::from(code)
    }
}

impl From<crackscope_core::Error> for CliError {
    fn from(e: crackscope_core::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Writes to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::Validation(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// To `path` atomically, or to stdout.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, contents.as_bytes()),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}
