//! The `kind(name=value,...)` mini-grammar shared by field and model specs.
//!
//! Arguments may be named (`offset_sin(a=2,b=1)`) or positional in the
//! declared parameter order (`const(1)`); positional arguments must precede
//! named ones. Every error names the token that caused it.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub kind: String,
    pub args: Vec<Arg>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arg {
    pub name: Option<String>,
    pub value: f64,
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_value(token: &str) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| Error::parse(token, "expected a real number"))?;
    if !v.is_finite() {
        return Err(Error::parse(token, "value must be finite"));
    }
    Ok(v)
}

pub fn parse_call(input: &str) -> Result<Call> {
    let s = input.trim();
    let open = s
        .find('(')
        .ok_or_else(|| Error::parse(s, "expected `kind(...)`"))?;
    let kind = s[..open].trim();
    if !is_ident(kind) {
        return Err(Error::parse(kind, "invalid kind identifier"));
    }
    let rest = &s[open + 1..];
    let close = rest
        .rfind(')')
        .ok_or_else(|| Error::parse(s, "missing closing `)`"))?;
    let trailing = rest[close + 1..].trim();
    if !trailing.is_empty() {
        return Err(Error::parse(trailing, "unexpected trailing input"));
    }
    let body = rest[..close].trim();

    let mut args = Vec::new();
    let mut seen_named = false;
    if !body.is_empty() {
        for raw in body.split(',') {
            let item = raw.trim();
            if item.is_empty() {
                return Err(Error::parse(raw, "empty argument"));
            }
            match item.split_once('=') {
                Some((name, value)) => {
                    let name = name.trim();
                    if !is_ident(name) {
                        return Err(Error::parse(name, "invalid parameter name"));
                    }
                    seen_named = true;
                    args.push(Arg {
                        name: Some(name.to_string()),
                        value: parse_value(value.trim())?,
                    });
                }
                None => {
                    if seen_named {
                        return Err(Error::parse(
                            item,
                            "positional argument after named argument",
                        ));
                    }
                    args.push(Arg {
                        name: None,
                        value: parse_value(item)?,
                    });
                }
            }
        }
    }
    Ok(Call {
        kind: kind.to_string(),
        args,
    })
}

impl Call {
    /// Resolves arguments against the declared parameter names, returning
    /// values in declaration order.
    pub fn bind(&self, names: &[&str]) -> Result<Vec<f64>> {
        let mut values: Vec<Option<f64>> = vec![None; names.len()];
        for (pos, arg) in self.args.iter().enumerate() {
            let slot = match &arg.name {
                Some(name) => names.iter().position(|n| n == name).ok_or_else(|| {
                    Error::parse(
                        name.as_str(),
                        format!("unknown parameter for `{}`", self.kind),
                    )
                })?,
                None => {
                    if pos >= names.len() {
                        return Err(Error::parse(
                            arg.value.to_string(),
                            format!("too many arguments for `{}`", self.kind),
                        ));
                    }
                    pos
                }
            };
            if values[slot].is_some() {
                return Err(Error::parse(names[slot], "parameter given twice"));
            }
            values[slot] = Some(arg.value);
        }
        values
            .into_iter()
            .zip(names)
            .map(|(v, name)| {
                v.ok_or_else(|| {
                    Error::parse(*name, format!("missing parameter for `{}`", self.kind))
                })
            })
            .collect()
    }
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn fmt_value(v: f64) -> String {
    format!("{v}")
}
