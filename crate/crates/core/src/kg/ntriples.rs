use thiserror::Error;

use super::TripleStore;
use crate::sparql::Term;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LoadError {
    #[error("malformed N-Triples line {line}: {message}")]
    MalformedLine { line: usize, message: String },
}

struct Cursor<'a> {
    rest: &'a str,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        self.rest = self.rest.trim_start();
    }

    fn iri(&mut self) -> Result<String, String> {
        self.skip_ws();
        let body = self.rest.strip_prefix('<').ok_or("expected `<`")?;
        let end = body.find('>').ok_or("unterminated IRI")?;
        let iri = &body[..end];
        if iri.is_empty() || iri.contains(char::is_whitespace) {
            return Err(format!("invalid IRI `{iri}`"));
        }
        self.rest = &body[end + 1..];
        Ok(iri.to_string())
    }

    fn literal(&mut self) -> Result<String, String> {
        let mut text = String::new();
        let mut chars = self.rest[1..].char_indices();
        let close = loop {
            match chars.next() {
                Some((_, '\\')) => match chars.next() {
                    Some((_, 'n')) => text.push('\n'),
                    Some((_, 't')) => text.push('\t'),
                    Some((_, 'r')) => text.push('\r'),
                    Some((_, '"')) => text.push('"'),
                    Some((_, '\\')) => text.push('\\'),
                    Some((_, other)) => return Err(format!("unknown escape `\\{other}`")),
                    None => return Err("unterminated literal".into()),
                },
                Some((i, '"')) => break i,
                Some((_, c)) => text.push(c),
                None => return Err("unterminated literal".into()),
            }
        };
        self.rest = &self.rest[close + 2..];
        // Language tags and datatypes are accepted but only the lexical form is kept.
        if let Some(tag) = self.rest.strip_prefix('@') {
            let end = tag.find(|c: char| !(c.is_ascii_alphanumeric() || c == '-')).unwrap_or(tag.len());
            self.rest = &tag[end..];
        } else if let Some(dt) = self.rest.strip_prefix("^^") {
            self.rest = dt;
            self.iri()?;
        }
        Ok(text)
    }

    fn object(&mut self) -> Result<Term, String> {
        self.skip_ws();
        if self.rest.starts_with('"') {
            self.literal().map(Term::Literal)
        } else {
            self.iri().map(Term::Iri)
        }
    }

    fn end(&mut self) -> Result<(), String> {
        self.skip_ws();
        let after = self.rest.strip_prefix('.').ok_or("missing terminal `.`")?.trim_start();
        if after.is_empty() || after.starts_with('#') {
            Ok(())
        } else {
            Err(format!("trailing input `{after}`"))
        }
    }
}

fn parse_line(line: &str) -> Result<(String, String, Term), String> {
    let mut c = Cursor { rest: line };
    let s = c.iri()?;
    let p = c.iri()?;
    let o = c.object()?;
    c.end()?;
    Ok((s, p, o))
}

/// Loads N-Triples with absolute IRIs; blank lines and `#` comments are skipped.
pub fn load_ntriples(text: &str) -> Result<TripleStore, LoadError> {
    let mut store = TripleStore::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (s, p, o) = parse_line(line).map_err(|message| LoadError::MalformedLine { line: i + 1, message })?;
        store.insert(&s, &p, o);
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_and_comments() {
        let text = "# header\n\
                    <http://a> <http://p> \"x \\\"y\\\"\" .\n\
                    \n\
                    <http://a> <http://q> \"12\"^^<http://www.w3.org/2001/XMLSchema#integer> . # trailing\n\
                    <http://a> <http://r> \"Berlin\"@en-GB .\n";
        let store = load_ntriples(text).unwrap();
        assert_eq!(store.len(), 3);
        assert!(store.contains("http://a", "http://p", &Term::literal("x \"y\"")));
        assert!(store.contains("http://a", "http://q", &Term::literal("12")));
        assert!(store.contains("http://a", "http://r", &Term::literal("Berlin")));
    }

    #[test]
    fn malformed_lines_are_numbered() {
        let text = "<http://a> <http://p> <http://b> .\n<http://a> <http://p> <http://b>\n";
        assert_eq!(
            load_ntriples(text),
            Err(LoadError::MalformedLine { line: 2, message: "missing terminal `.`".into() })
        );
        assert!(load_ntriples("<http://a> \"p\" <http://b> .").is_err());
        assert!(load_ntriples("<http://a> <http://p> \"open .").is_err());
    }

    #[test]
    fn empty_file() {
        assert!(load_ntriples("").unwrap().is_empty());
    }
}
