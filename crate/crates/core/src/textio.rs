//! Small helpers shared by the plain-text artifact formats.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Shortest decimal form that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Whitespace tokenizer skipping `#` comments and tracking line numbers.
pub(crate) struct Tokens<'a> {
    path: PathBuf,
    tokens: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    pub fn new(text: &'a str, path: &Path) -> Self {
        let mut tokens = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("");
            tokens.extend(body.split_whitespace().map(|t| (i + 1, t)));
        }
        Self { path: path.to_path_buf(), tokens, pos: 0 }
    }

    pub fn error(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse { path: self.path.clone(), line, msg: msg.into() }
    }

    fn current_line(&self) -> usize {
        self.tokens.get(self.pos).or(self.tokens.last()).map_or(0, |t| t.0)
    }

    pub fn next_str(&mut self) -> Result<&'a str> {
        let line = self.current_line();
        let tok = self.tokens.get(self.pos).ok_or_else(|| self.error(line, "unexpected end of file"))?;
        self.pos += 1;
        Ok(tok.1)
    }

    pub fn next_parse<T: FromStr>(&mut self) -> Result<T> {
        let line = self.current_line();
        let s = self.next_str()?;
        s.parse().map_err(|_| self.error(line, format!("cannot parse `{s}`")))
    }

    pub fn expect_header(&mut self, magic: &str) -> Result<()> {
        let line = self.current_line();
        let m = self.next_str()?;
        let v: u32 = self.next_parse()?;
        if m != magic || v != 1 {
            return Err(self.error(line, format!("expected header `{magic} 1`, found `{m} {v}`")));
        }
        Ok(())
    }

    pub fn expect_end(&self) -> Result<()> {
        match self.tokens.get(self.pos) {
            None => Ok(()),
            Some(&(line, t)) => Err(self.error(line, format!("trailing content `{t}`"))),
        }
    }
}
