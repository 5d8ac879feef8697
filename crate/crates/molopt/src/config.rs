//! `key = value` text files: one pair per line, `#` comments, UTF-8.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {0}: expected `key = value`")]
    BadLine(usize),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?}")]
    BadValue { key: String, value: String },
}

pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::BadLine(i + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn render_key_values(pairs: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(v);
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        let text = "# header\nfoo = 1\n\nbar = hello world\n";
        let kv = parse_key_values(text).unwrap();
        assert_eq!(kv.len(), 2);
        assert_eq!(kv[0], ("foo".to_string(), "1".to_string()));
        assert_eq!(kv[1].1, "hello world");
        let rendered = render_key_values(&kv);
        assert_eq!(parse_key_values(&rendered).unwrap(), kv);
    }

    #[test]
    fn bad_line_reported_with_number() {
        assert_eq!(
            parse_key_values("a = 1\nnonsense\n"),
            Err(ConfigError::BadLine(2))
        );
    }
}
