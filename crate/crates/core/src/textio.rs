//! Sectioned key/value text documents used for dataset manifests, checkpoint
//! headers, experiment configs and evaluation reports.
//!
//! Format: `[section]` headers, `key = value` lines, `#` comments, blank
//! lines ignored. Writing preserves insertion order so reruns are
//! byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing key [{section}] {key}")]
    Missing { section: String, key: String },
    #[error("[{section}] {key}: cannot parse {value:?} as {ty}")]
    BadValue {
        section: String,
        key: String,
        value: String,
        ty: &'static str,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Doc {
    sections: Vec<(String, Vec<(String, String)>)>,
}

impl Doc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl ToString) {
        let value = value.to_string();
        let sec = match self.sections.iter_mut().find(|(s, _)| s == section) {
            Some((_, entries)) => entries,
            None => {
                self.sections.push((section.to_string(), Vec::new()));
                &mut self.sections.last_mut().unwrap().1
            }
        };
        match sec.iter_mut().find(|(k, _)| k == key) {
            Some((_, v)) => *v = value,
            None => sec.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(s, _)| s == section)?
            .1
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str, TextError> {
        self.get(section, key).ok_or_else(|| TextError::Missing {
            section: section.into(),
            key: key.into(),
        })
    }

    pub fn parse_value<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
    ) -> Result<T, TextError> {
        let raw = self.require(section, key)?;
        raw.parse().map_err(|_| TextError::BadValue {
            section: section.into(),
            key: key.into(),
            value: raw.into(),
            ty: std::any::type_name::<T>(),
        })
    }

    pub fn sections(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|(s, _)| s.as_str())
    }

    pub fn entries<'a>(&'a self, section: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.sections
            .iter()
            .filter(move |(s, _)| s == section)
            .flat_map(|(_, e)| e.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    pub fn parse(text: &str) -> Result<Self, TextError> {
        let mut doc = Doc::new();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| TextError::Parse {
                    line: idx + 1,
                    msg: "unterminated section header".into(),
                })?;
                current = Some(name.trim().to_string());
                // Materialize the section even if it stays empty.
                doc.sections
                    .push((current.clone().unwrap(), Vec::new()));
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| TextError::Parse {
                line: idx + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            })?;
            let section = current.clone().ok_or_else(|| TextError::Parse {
                line: idx + 1,
                msg: "key outside any [section]".into(),
            })?;
            doc.set(&section, key.trim(), value.trim());
        }
        doc.sections.retain(|(_, e)| !e.is_empty());
        Ok(doc)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, (section, entries)) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            writeln!(out, "[{section}]").unwrap();
            for (k, v) in entries {
                writeln!(out, "{k} = {v}").unwrap();
            }
        }
        out
    }

    pub fn read(path: &Path) -> Result<Self, TextError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn write_atomic(&self, path: &Path) -> Result<(), TextError> {
        write_atomic(path, self.render().as_bytes())?;
        Ok(())
    }
}

/// Write bytes via a temp file and rename so partial writes never land.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip() {
        let text = "# comment\n[alpha]\nx = 1\nname = hello world\n\n[beta]\nratio = 0.5\n";
        let doc = Doc::parse(text).unwrap();
        assert_eq!(doc.get("alpha", "x"), Some("1"));
        assert_eq!(doc.get("alpha", "name"), Some("hello world"));
        assert_eq!(doc.parse_value::<f64>("beta", "ratio").unwrap(), 0.5);
        let rendered = doc.render();
        assert_eq!(Doc::parse(&rendered).unwrap(), doc);
    }

    #[test]
    fn errors_carry_location_and_names() {
        let err = Doc::parse("[a]\nbroken line\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        let doc = Doc::parse("[a]\nx = nope\n").unwrap();
        let err = doc.parse_value::<u32>("a", "x").unwrap_err();
        assert!(err.to_string().contains("x"));
        let err = doc.require("a", "missing").unwrap_err();
        assert!(err.to_string().contains("missing"));
    }

    #[test]
    fn render_is_deterministic() {
        let mut doc = Doc::new();
        doc.set("s", "b", 2);
        doc.set("s", "a", 1);
        assert_eq!(doc.render(), doc.clone().render());
        assert_eq!(doc.render(), "[s]\nb = 2\na = 1\n");
    }
}
