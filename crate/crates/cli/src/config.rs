//! `key=value` config files, merged as flags ahead of the command line.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context};
use clap::{ArgAction, Command};

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse(text: &str) -> anyhow::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key=value, got '{line}'", i + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Flags for `entries`, checked against the subcommand's arguments.
fn to_flags(sub: &Command, entries: &[(String, String)]) -> anyhow::Result<Vec<OsString>> {
    let mut flags = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            bail!("config files cannot include other config files");
        }
        let Some(arg) = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
        else {
            bail!("unknown key '{key}' for {}", sub.get_name());
        };
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" => flags.push(format!("--{key}").into()),
                "false" => {}
                other => bail!("key '{key}' expects true or false, got '{other}'"),
            },
            _ => {
                flags.push(format!("--{key}").into());
                flags.push(value.into());
            }
        }
    }
    Ok(flags)
}

/// Inserts config-file flags right after the subcommand name, so flags given
/// on the command line override them.
pub fn merge(cmd: &Command, args: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let Some(pos) = args
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 1)
    else {
        return Ok(args);
    };
    let name = args[pos].to_string_lossy().into_owned();
    let Some(sub) = cmd.find_subcommand(&name) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .with_context(|| format!("reading config {}", path.to_string_lossy()))?;
    let flags = to_flags(sub, &parse(&text)?)?;
    let mut merged = args[..=pos].to_vec();
    merged.extend(flags);
    merged.extend_from_slice(&args[pos + 1..]);
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_underscores() {
        let kv = parse("# sweep\nt_max = 13\n\nfrosts=2 # trailing\n").unwrap();
        assert_eq!(
            kv,
            vec![("t-max".into(), "13".into()), ("frosts".into(), "2".into())]
        );
        assert!(parse("novalue\n").is_err());
        assert!(parse("=3\n").is_err());
    }
}
