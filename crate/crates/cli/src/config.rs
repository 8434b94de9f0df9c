//! `--config` files: `key = value` lines spliced into the argument list
//! right after the subcommand, so explicit flags given later win.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: PathBuf, line: usize },
    #[error("--config needs a file name")]
    MissingPath,
}

/// Global flags that consume the following argument.
const VALUED_GLOBALS: &[&str] = &["--config", "--log-level"];

fn config_path(argv: &[OsString]) -> Result<Option<PathBuf>, ConfigError> {
    let mut iter = argv.iter().skip(1);
    while let Some(arg) = iter.next() {
        let Some(s) = arg.to_str() else { continue };
        if s == "--" {
            break;
        }
        if let Some(path) = s.strip_prefix("--config=") {
            return Ok(Some(PathBuf::from(path)));
        }
        if s == "--config" {
            return iter.next().map(PathBuf::from).map(Some).ok_or(ConfigError::MissingPath);
        }
    }
    Ok(None)
}

/// Index of the subcommand name in `argv`.
fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_str()?;
        if VALUED_GLOBALS.contains(&s) {
            i += 2;
        } else if s.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

pub fn parse(text: &str, path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            path: path.to_path_buf(),
            line: i + 1,
        })?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                path: path.to_path_buf(),
                line: i + 1,
            });
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let Some(path) = config_path(&argv)? else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Read {
        path: path.clone(),
        source,
    })?;
    let pairs = parse(&text, &path)?;
    let Some(at) = subcommand_index(&argv) else {
        return Ok(argv);
    };
    let mut out = argv;
    let inserted = pairs.into_iter().map(|(k, v)| OsString::from(format!("--{k}={v}")));
    out.splice(at + 1..at + 1, inserted);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(items: &[&str]) -> Vec<OsString> {
        items.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_lines() {
        let pairs = parse("# defaults\nepochs = 5\n\n--lr=0.01\nbatch_size = 8\n", Path::new("c")).unwrap();
        assert_eq!(
            pairs,
            [
                ("epochs".to_string(), "5".to_string()),
                ("lr".to_string(), "0.01".to_string()),
                ("batch-size".to_string(), "8".to_string())
            ]
        );
        assert!(matches!(parse("epochs 5", Path::new("c")), Err(ConfigError::Syntax { line: 1, .. })));
    }

    #[test]
    fn splices_after_the_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg");
        std::fs::write(&path, "epochs = 5\n").unwrap();
        let p = path.to_str().unwrap();
        let out = expand(args(&["mlta", "--log-level", "warn", "train", "--config", p, "--epochs", "7"])).unwrap();
        assert_eq!(
            out,
            args(&["mlta", "--log-level", "warn", "train", "--epochs=5", "--config", p, "--epochs", "7"])
        );
        let untouched = args(&["mlta", "train", "--epochs", "7"]);
        assert_eq!(expand(untouched.clone()).unwrap(), untouched);
        assert!(matches!(expand(args(&["mlta", "train", "--config"])), Err(ConfigError::MissingPath)));
    }
}
