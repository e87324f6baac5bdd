//! `--config <file>`: `key = value` lines spliced in as `--key value` right
//! after the subcommand, so flags given on the command line win.

use std::ffi::OsString;

/// Parses one config file into flag arguments. Blank lines and lines
/// starting with `#` are skipped; `true`/`false` toggle switch flags.
pub fn parse(text: &str) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", n + 1))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(format!("config line {}: invalid key", n + 1));
        }
        match value.trim() {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            v => {
                out.push(format!("--{key}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

/// Removes `--config <file>` (or `--config=<file>`) from `argv` and inserts
/// the file's flags directly after the subcommand path.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        match arg.to_str() {
            Some("--config") => path = Some(it.next().ok_or("--config needs a file")?),
            Some(s) if s.starts_with("--config=") => path = Some(OsString::from(&s["--config=".len()..])),
            _ => rest.push(arg),
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.to_string_lossy()))?;
    let extra = parse(&text)?;
    // Subcommand path: leading words that are not flags (`train`, `theory angles`).
    let at = 1 + rest[1..]
        .iter()
        .take_while(|a| a.to_str().is_some_and(|s| !s.starts_with('-')))
        .count();
    rest.splice(at..at, extra);
    Ok(rest)
}
