//! `--config FILE` support. The TOML is turned into `--flag value` pairs
//! spliced in right after the subcommand name, so anything typed on the
//! command line later overrides it.
//!
//! Top-level keys apply to every subcommand; a table named after the
//! subcommand (`[purity-sweep]`) adds keys for that one only.

use std::ffi::OsString;
use std::path::Path;

use crate::error::CliError;

pub const SUBCOMMANDS: [&str; 7] = ["contours", "jsa", "purity-sweep", "stats", "set-calibrate", "overlap", "fringes"];

// global options taking a value; their values are never subcommand names
const VALUED_GLOBALS: [&str; 2] = ["--out-dir", "--config"];

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

fn subcommand_position(args: &[OsString]) -> Option<usize> {
    let mut skip = false;
    for (k, a) in args.iter().enumerate().skip(1) {
        if skip {
            skip = false;
            continue;
        }
        let s = a.to_string_lossy();
        if VALUED_GLOBALS.contains(&s.as_ref()) {
            skip = true;
            continue;
        }
        if SUBCOMMANDS.contains(&s.as_ref()) {
            return Some(k);
        }
    }
    None
}

fn render(value: &toml::Value) -> Option<String> {
    match value {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Array(items) => {
            let parts: Option<Vec<String>> = items.iter().map(render).collect();
            parts.map(|p| p.join(","))
        }
        _ => None,
    }
}

fn flags_from(table: &toml::Table, path: &Path, out: &mut Vec<OsString>) -> Result<(), CliError> {
    for (key, value) in table {
        if value.is_table() || key == "config" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            v => {
                let text = render(v).ok_or_else(|| CliError::Usage {
                    flag: flag.clone(),
                    reason: format!("unsupported value in {}", path.display()),
                })?;
                out.push(flag.into());
                out.push(text.into());
            }
        }
    }
    Ok(())
}

/// Returns `args` with the config file's flags spliced in, or unchanged
/// when no `--config` is present.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path).to_path_buf();
    let Some(at) = subcommand_position(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Usage {
        flag: "--config".into(),
        reason: format!("{}: {}", path.display(), e.message()),
    })?;
    let mut injected = Vec::new();
    flags_from(&table, &path, &mut injected)?;
    let sub = args[at].to_string_lossy().into_owned();
    if let Some(toml::Value::Table(t)) = table.get(&sub) {
        flags_from(t, &path, &mut injected)?;
    }
    let mut out = args[..=at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[at + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn splices_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "grid = 64\nnonlinear = true\nquiet = false\n[jsa]\npump_nm = 1010.0\n[stats]\nseed = 9\n").unwrap();
        let args = os(&["xfwm", "--config", p.to_str().unwrap(), "jsa", "--grid", "32"]);
        let got = expand(args).unwrap();
        let got: Vec<String> = got.iter().map(|s| s.to_string_lossy().into_owned()).collect();
        let tail = &got[4..];
        assert_eq!(tail, ["--grid", "64", "--nonlinear", "--pump-nm", "1010", "--grid", "32"]);
    }

    #[test]
    fn arrays_join_with_commas() {
        let v: toml::Value = toml::from_str::<toml::Table>("a = [1, 2.5]").unwrap()["a"].clone();
        assert_eq!(render(&v).unwrap(), "1,2.5");
    }

    #[test]
    fn out_dir_value_is_not_a_subcommand() {
        let args = os(&["xfwm", "--out-dir", "jsa", "stats"]);
        assert_eq!(subcommand_position(&args), Some(3));
    }
}
