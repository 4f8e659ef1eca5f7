//! Flat `key=value` configuration files.
//!
//! Keys are long flag names without the leading dashes. The entries are
//! turned into flags placed before the command-line flags of the chosen
//! subcommand, and clap lets a later occurrence override an earlier one, so
//! the command line wins.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::Path;

use clap::{Arg, Command};

use crate::artifact::read_string;
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub entries: Vec<(String, String)>,
}

/// Long names that never come from a config file.
const RESERVED: [&str; 3] = ["config", "help", "version"];

impl ConfigFile {
    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::validation(format!("line {}: expected key=value", i + 1)))?;
            let key = key.trim().trim_start_matches("--").to_string();
            if key.is_empty() {
                return Err(CliError::validation(format!("line {}: empty key", i + 1)));
            }
            if entries.iter().any(|(k, _)| *k == key) {
                return Err(CliError::validation(format!("line {}: duplicate key `{key}`", i + 1)));
            }
            entries.push((key, value.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        Self::parse(&read_string(path)?).map_err(|e| e.at(path))
    }

    /// Rejects keys that are not a flag of any subcommand.
    pub fn validate(&self, root: &Command) -> CliResult<()> {
        let known = known_keys(root);
        for (key, _) in &self.entries {
            if !known.contains(key.as_str()) {
                return Err(CliError::validation(format!("unknown config key `{key}`")));
            }
        }
        Ok(())
    }

    /// Flags for the entries that `sub` accepts, in file order.
    pub fn flags_for(&self, root: &Command, sub: &Command) -> CliResult<Vec<OsString>> {
        let mut out = Vec::new();
        for (key, value) in &self.entries {
            let Some(arg) = find_arg(root, sub, key) else {
                continue;
            };
            if arg.get_action().takes_values() {
                out.push(format!("--{key}").into());
                out.push(value.into());
            } else {
                match value.as_str() {
                    "true" | "1" | "yes" => out.push(format!("--{key}").into()),
                    "false" | "0" | "no" => {}
                    other => {
                        return Err(CliError::validation(format!(
                            "config key `{key}`: expected true or false, got `{other}`"
                        )))
                    }
                }
            }
        }
        Ok(out)
    }
}

fn known_keys(root: &Command) -> BTreeSet<String> {
    let mut keys = BTreeSet::new();
    let mut add = |cmd: &Command| {
        for a in cmd.get_arguments() {
            if let Some(l) = a.get_long() {
                if !RESERVED.contains(&l) {
                    keys.insert(l.to_string());
                }
            }
        }
    };
    add(root);
    for sub in root.get_subcommands() {
        add(sub);
    }
    keys
}

fn find_arg<'a>(root: &'a Command, sub: &'a Command, key: &str) -> Option<&'a Arg> {
    if RESERVED.contains(&key) {
        return None;
    }
    sub.get_arguments()
        .chain(root.get_arguments().filter(|a| a.is_global_set()))
        .find(|a| a.get_long() == Some(key))
}

/// Position of the subcommand token in `argv` (after the program name and
/// any global flags), if present.
fn subcommand_position(root: &Command, argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let token = argv[i].to_string_lossy();
        if let Some(long) = token.strip_prefix("--") {
            if long.contains('=') {
                i += 1;
                continue;
            }
            let takes_value = root
                .get_arguments()
                .find(|a| a.get_long() == Some(long))
                .is_some_and(|a| a.get_action().takes_values());
            i += if takes_value { 2 } else { 1 };
            continue;
        }
        return root.find_subcommand(token.as_ref()).map(|_| i);
    }
    None
}

/// Value of `--config` anywhere in `argv`.
pub fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// `argv` with the config entries for the chosen subcommand inserted right
/// after the subcommand token.
pub fn merge_config(root: &Command, argv: Vec<OsString>, config: &ConfigFile) -> CliResult<Vec<OsString>> {
    config.validate(root)?;
    let Some(pos) = subcommand_position(root, &argv) else {
        return Ok(argv);
    };
    let sub = root
        .find_subcommand(argv[pos].to_string_lossy().as_ref())
        .expect("position found by name");
    let flags = config.flags_for(root, sub)?;
    let mut out = argv[..=pos].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}
