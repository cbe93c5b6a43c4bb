//! Flat `key = value` config files, merged into the command line.
//!
//! A file may name the subcommand with `subcommand = <name>` or a
//! `[<name>]` header. Every other key becomes `--key value`; flags given on
//! the command line win over the file.

use std::fs;

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigFile {
    pub subcommand: Option<String>,
    pub entries: Vec<(String, String)>,
}

pub fn parse_config(text: &str) -> Result<ConfigFile, ConfigError> {
    let mut cfg = ConfigFile::default();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line: k + 1,
                msg: "unterminated section header".into(),
            })?;
            cfg.subcommand = Some(name.trim().to_string());
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: k + 1,
            msg: format!("expected key = value, got '{line}'"),
        })?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ConfigError::Syntax {
                line: k + 1,
                msg: format!("bad key '{key}'"),
            });
        }
        let value = value.trim().to_string();
        if key == "subcommand" {
            cfg.subcommand = Some(value);
        } else if cfg.entries.iter().any(|(k2, _)| *k2 == key) {
            return Err(ConfigError::Syntax {
                line: k + 1,
                msg: format!("duplicate key '{key}'"),
            });
        } else {
            cfg.entries.push((key, value));
        }
    }
    Ok(cfg)
}

/// Removes `--config <path>` from `argv` and splices the file's entries in
/// after the subcommand.
pub fn expand_args(argv: Vec<String>) -> Result<Vec<String>, ConfigError> {
    let mut args = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or_else(|| ConfigError::Invalid("--config needs a path".into()))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            args.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|source| ConfigError::Read { path: path.clone(), source })?;
    let cfg = parse_config(&text)?;
    let has_sub = args.get(1).is_some_and(|a| !a.starts_with('-'));
    if !has_sub {
        let sub = cfg
            .subcommand
            .clone()
            .ok_or_else(|| ConfigError::Invalid("no subcommand on the command line or in the config".into()))?;
        args.insert(1.min(args.len()), sub);
    } else if let Some(sub) = &cfg.subcommand {
        if args[1] != *sub {
            return Err(ConfigError::Invalid(format!(
                "config is for '{sub}' but the command line says '{}'",
                args[1]
            )));
        }
    }
    let given: Vec<String> = args
        .iter()
        .filter_map(|a| a.strip_prefix("--").map(|k| k.split('=').next().unwrap_or(k).to_string()))
        .collect();
    let mut extra = Vec::new();
    for (k, v) in cfg.entries {
        if given.contains(&k) {
            continue;
        }
        match v.as_str() {
            "true" => extra.push(format!("--{k}")),
            "false" => {}
            "" => extra.push(format!("--{k}")),
            _ => {
                extra.push(format!("--{k}"));
                extra.push(v);
            }
        }
    }
    let at = 2.min(args.len());
    args.splice(at..at, extra);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_underscores() {
        let c = parse_config("# demo\n[sticking]\nalpha = 0.5\nx_0 = 1 # inline\n\n").unwrap();
        assert_eq!(c.subcommand.as_deref(), Some("sticking"));
        assert_eq!(c.entries, vec![("alpha".into(), "0.5".into()), ("x-0".into(), "1".into())]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(parse_config("alpha 0.5"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(parse_config("[x").is_err());
        assert!(parse_config("a = 1\na = 2").is_err());
    }

    #[test]
    fn command_line_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.txt");
        fs::write(&p, "subcommand = sticking\nalpha = 0.5\nv0 = -2\nflag = true\noff = false\n").unwrap();
        let argv = ["scs", "--config", p.to_str().unwrap(), "--v0", "-3"].map(String::from).to_vec();
        let out = expand_args(argv).unwrap();
        assert_eq!(out, ["scs", "sticking", "--alpha", "0.5", "--flag", "--v0", "-3"].map(String::from).to_vec());
    }
}
