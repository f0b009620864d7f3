//! Line-oriented `key = value` files with repeated `[section]` blocks.
//!
//! Values are either double-quoted strings (escapes `\"`, `\\`, `\n`, `\t`)
//! or bare tokens running to the end of the line. `#` starts a comment
//! outside quotes.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    pub top: Vec<Entry>,
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub line: usize,
    pub reason: String,
}

impl std::fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

impl Document {
    pub fn parse(text: &str) -> Result<Self, SyntaxError> {
        let mut doc = Document::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |reason: &str| SyntaxError {
                line,
                reason: reason.to_string(),
            };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('[') {
                let name = strip_comment(rest)
                    .trim_end()
                    .strip_suffix(']')
                    .ok_or_else(|| err("unterminated section header"))?
                    .trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(err("section names are letters, digits and `_`"));
                }
                doc.sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| err("expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(err("keys are letters, digits, `_` and `-`"));
            }
            let value = parse_value(value.trim()).map_err(|r| err(&r))?;
            let entries = match doc.sections.last_mut() {
                Some(s) => &mut s.entries,
                None => &mut doc.top,
            };
            if entries.iter().any(|e| e.key == key) {
                return Err(err(&format!("duplicate key `{key}`")));
            }
            entries.push(Entry {
                key: key.to_string(),
                value,
                line,
            });
        }
        Ok(doc)
    }
}

fn strip_comment(s: &str) -> &str {
    s.split_once('#').map_or(s, |(a, _)| a)
}

fn parse_value(s: &str) -> Result<String, String> {
    let Some(body) = s.strip_prefix('"') else {
        let v = strip_comment(s).trim();
        if v.is_empty() {
            return Err("missing value".into());
        }
        return Ok(v.to_string());
    };
    let mut out = String::new();
    let mut chars = body.chars();
    loop {
        match chars.next() {
            None => return Err("unterminated string".into()),
            Some('"') => break,
            Some('\\') => match chars.next() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                _ => return Err("unknown escape".into()),
            },
            Some(c) => out.push(c),
        }
    }
    let rest = chars.as_str().trim();
    if !(rest.is_empty() || rest.starts_with('#')) {
        return Err("unexpected text after string".into());
    }
    Ok(out)
}

/// Quotes a value so that [`Document::parse`] reads it back unchanged.
pub fn quote(value: &str) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    out.push('"');
    for c in value.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub(crate) fn write_entry(out: &mut String, key: &str, value: &str) {
    let _ = writeln!(out, "{key} = {}", quote(value));
}

/// Splits a command line into words. Single and double quotes group words;
/// backslash escapes the next character outside single quotes.
pub fn split_command(line: &str) -> Result<Vec<String>, String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    let mut in_word = false;
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        match c {
            '\'' => {
                in_word = true;
                loop {
                    match chars.next() {
                        Some('\'') => break,
                        Some(c) => cur.push(c),
                        None => return Err("unterminated single quote".into()),
                    }
                }
            }
            '"' => {
                in_word = true;
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some(c) => cur.push(c),
                            None => return Err("dangling backslash".into()),
                        },
                        Some(c) => cur.push(c),
                        None => return Err("unterminated double quote".into()),
                    }
                }
            }
            '\\' => {
                in_word = true;
                cur.push(chars.next().ok_or("dangling backslash")?);
            }
            c if c.is_whitespace() => {
                if in_word {
                    words.push(std::mem::take(&mut cur));
                    in_word = false;
                }
            }
            c => {
                in_word = true;
                cur.push(c);
            }
        }
    }
    if in_word {
        words.push(cur);
    }
    Ok(words)
}

/// Names inside `{...}` placeholders, in order of appearance.
pub fn placeholders(template: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        let end = after.find('}').ok_or("unclosed `{` in command template")?;
        let name = &after[..end];
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("bad placeholder `{{{name}}}`"));
        }
        out.push(name.to_string());
        rest = &after[end + 1..];
    }
    Ok(out)
}

/// Replaces every `{name}` with `lookup(name)`.
pub fn substitute(word: &str, lookup: &dyn Fn(&str) -> String) -> String {
    let mut out = String::new();
    let mut rest = word;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end) => {
                out.push_str(&lookup(&after[..end]));
                rest = &after[end + 1..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_top_and_sections() {
        let doc = Document::parse(
            "# header\nid = \"kalman\"\ncount = 3 # trailing\n\n[param]\nname = \"q\"\nlabel = \"a # b\"\n[param]\nname = r\n",
        )
        .unwrap();
        assert_eq!(doc.top.len(), 2);
        assert_eq!(doc.top[1].value, "3");
        assert_eq!(doc.sections.len(), 2);
        assert_eq!(doc.sections[0].entries[1].value, "a # b");
        assert_eq!(doc.sections[1].entries[0].value, "r");
        assert_eq!(doc.sections[1].line, 8);
    }

    #[test]
    fn reports_line_numbers() {
        let e = Document::parse("id = \"x\"\nnot a pair\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = Document::parse("id = \"x\nid2 = 1").unwrap_err();
        assert_eq!(e.line, 1);
        let e = Document::parse("a = 1\na = 2").unwrap_err();
        assert!(e.reason.contains("duplicate"));
        assert!(Document::parse("[stage").is_err());
        assert!(Document::parse("a =").is_err());
    }

    #[test]
    fn quote_round_trips() {
        for v in [
            "plain",
            "with \"quotes\"",
            "back\\slash",
            "tab\tand\nnewline",
            "# hash",
            "",
        ] {
            let doc = Document::parse(&format!("k = {}", quote(v))).unwrap();
            assert_eq!(doc.top[0].value, v);
        }
    }

    #[test]
    fn command_splitting() {
        assert_eq!(
            split_command(r#"python3 -c 'print("a b")' "x y" z\ w {input}"#).unwrap(),
            vec!["python3", "-c", "print(\"a b\")", "x y", "z w", "{input}"]
        );
        assert_eq!(split_command("a ''").unwrap(), vec!["a", ""]);
        assert!(split_command("a 'b").is_err());
    }

    #[test]
    fn placeholder_scan_and_substitution() {
        assert_eq!(
            placeholders("run {input} --q={q} {output}").unwrap(),
            vec!["input", "q", "output"]
        );
        assert!(placeholders("run {input").is_err());
        assert!(placeholders("run {in put}").is_err());
        let got = substitute("--q={q}/{x}", &|k| if k == "q" { "0.5".into() } else { "X".into() });
        assert_eq!(got, "--q=0.5/X");
    }
}
