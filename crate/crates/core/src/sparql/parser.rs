use std::collections::BTreeMap;

use thiserror::Error;

use super::{PrefixTable, QueryHeader, SparqlQuery, Term, TriplePattern};

const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

/// Keywords that are valid SPARQL but outside the supported subset.
const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "FILTER",
    "OPTIONAL",
    "UNION",
    "MINUS",
    "BIND",
    "VALUES",
    "SERVICE",
    "GRAPH",
    "ORDER",
    "LIMIT",
    "OFFSET",
    "GROUP",
    "HAVING",
    "BASE",
    "CONSTRUCT",
    "DESCRIBE",
    "REDUCED",
    "FROM",
    "NOT",
    "EXISTS",
    "SUM",
    "AVG",
    "MIN",
    "MAX",
    "SAMPLE",
    "GROUP_CONCAT",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SparqlError {
    /// Valid SPARQL outside the supported subset.
    #[error("unsupported SPARQL construct `{0}`")]
    UnsupportedConstruct(String),
    #[error("SPARQL syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("undeclared prefix `{0}:`")]
    UnknownPrefix(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Iri(String),
    Literal(String),
    Var(String),
    /// Keyword, prefixed name or the `a` shorthand.
    Word(String),
    Punct(char),
    Eof,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    peeked: Option<(usize, Tok)>,
    declared: BTreeMap<String, String>,
    fallback: Option<&'a PrefixTable>,
}

impl<'a> Parser<'a> {
    fn syntax(&self, offset: usize, message: impl Into<String>) -> SparqlError {
        SparqlError::Syntax { offset, message: message.into() }
    }

    fn lex(&mut self) -> Result<(usize, Tok), SparqlError> {
        let bytes = self.src.as_bytes();
        loop {
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < bytes.len() && bytes[self.pos] == b'#' {
                while self.pos < bytes.len() && bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        let Some(c) = self.src[start..].chars().next() else {
            return Ok((start, Tok::Eof));
        };
        match c {
            '<' => {
                let rest = &self.src[start + 1..];
                let end = rest.find(|ch: char| ch == '>' || ch.is_whitespace()).filter(|&i| rest.as_bytes()[i] == b'>');
                match end {
                    Some(i) => {
                        self.pos = start + 1 + i + 1;
                        Ok((start, Tok::Iri(rest[..i].to_string())))
                    }
                    None => Err(SparqlError::UnsupportedConstruct("<".into())),
                }
            }
            '"' | '\'' => {
                let mut text = String::new();
                let mut chars = self.src[start + 1..].char_indices();
                loop {
                    match chars.next() {
                        Some((_, '\\')) => match chars.next() {
                            Some((_, 'n')) => text.push('\n'),
                            Some((_, 't')) => text.push('\t'),
                            Some((_, 'r')) => text.push('\r'),
                            Some((_, other)) => text.push(other),
                            None => return Err(self.syntax(start, "unterminated literal")),
                        },
                        Some((i, ch)) if ch == c => {
                            self.pos = start + 1 + i + ch.len_utf8();
                            break;
                        }
                        Some((_, ch)) => text.push(ch),
                        None => return Err(self.syntax(start, "unterminated literal")),
                    }
                }
                match self.src[self.pos..].chars().next() {
                    Some('@') => Err(SparqlError::UnsupportedConstruct("language tag".into())),
                    Some('^') => Err(SparqlError::UnsupportedConstruct("^^".into())),
                    _ => Ok((start, Tok::Literal(text))),
                }
            }
            '?' | '$' => {
                let name_start = start + 1;
                let len = self.src[name_start..]
                    .find(|ch: char| !(ch.is_alphanumeric() || ch == '_'))
                    .unwrap_or(self.src.len() - name_start);
                if len == 0 {
                    return Err(self.syntax(start, "empty variable name"));
                }
                self.pos = name_start + len;
                Ok((start, Tok::Var(self.src[name_start..self.pos].to_string())))
            }
            '{' | '}' | '(' | ')' | '.' | ';' | ',' | '*' => {
                self.pos += 1;
                Ok((start, Tok::Punct(c)))
            }
            c if c.is_alphanumeric() || c == '_' || c == ':' => {
                let mut len = self.src[start..]
                    .find(|ch: char| !(ch.is_alphanumeric() || matches!(ch, '_' | '-' | '.' | ':')))
                    .unwrap_or(self.src.len() - start);
                while self.src[start..start + len].ends_with('.') {
                    len -= 1;
                }
                self.pos = start + len;
                Ok((start, Tok::Word(self.src[start..self.pos].to_string())))
            }
            '!' | '=' | '>' | '|' | '^' | '/' => Err(SparqlError::UnsupportedConstruct(c.to_string())),
            other => Err(self.syntax(start, format!("unexpected character `{other}`"))),
        }
    }

    fn peek(&mut self) -> Result<&Tok, SparqlError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lex()?);
        }
        Ok(&self.peeked.as_ref().unwrap().1)
    }

    fn next(&mut self) -> Result<(usize, Tok), SparqlError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lex(),
        }
    }

    fn keyword_is(tok: &Tok, kw: &str) -> bool {
        matches!(tok, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn check_unsupported(tok: &Tok) -> Result<(), SparqlError> {
        if let Tok::Word(w) = tok {
            let upper = w.to_ascii_uppercase();
            if UNSUPPORTED_KEYWORDS.contains(&upper.as_str()) {
                return Err(SparqlError::UnsupportedConstruct(upper));
            }
        }
        Ok(())
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SparqlError> {
        let (off, tok) = self.next()?;
        Self::check_unsupported(&tok)?;
        if Self::keyword_is(&tok, kw) {
            Ok(())
        } else {
            Err(self.syntax(off, format!("expected {kw}")))
        }
    }

    fn expect_punct(&mut self, p: char) -> Result<(), SparqlError> {
        let (off, tok) = self.next()?;
        Self::check_unsupported(&tok)?;
        if tok == Tok::Punct(p) {
            Ok(())
        } else {
            Err(self.syntax(off, format!("expected `{p}`")))
        }
    }

    fn expect_var(&mut self) -> Result<String, SparqlError> {
        match self.next()? {
            (_, Tok::Var(v)) => Ok(v),
            (off, tok) => {
                Self::check_unsupported(&tok)?;
                if tok == Tok::Punct('*') {
                    return Err(SparqlError::UnsupportedConstruct("*".into()));
                }
                Err(self.syntax(off, "expected variable"))
            }
        }
    }

    fn expand(&self, word: &str) -> Result<String, SparqlError> {
        let (label, local) = word.split_once(':').ok_or_else(|| SparqlError::UnsupportedConstruct(word.to_string()))?;
        let ns = self
            .declared
            .get(label)
            .map(String::as_str)
            .or_else(|| self.fallback.and_then(|t| t.namespace(label)))
            .ok_or_else(|| SparqlError::UnknownPrefix(label.to_string()))?;
        Ok(format!("{ns}{local}"))
    }

    fn prologue(&mut self) -> Result<(), SparqlError> {
        while Self::keyword_is(self.peek()?, "PREFIX") {
            self.next()?;
            let (off, tok) = self.next()?;
            let label = match tok {
                Tok::Word(w) if w.ends_with(':') && w.matches(':').count() == 1 => w.trim_end_matches(':').to_string(),
                _ => return Err(self.syntax(off, "expected prefix label")),
            };
            let (off, tok) = self.next()?;
            let Tok::Iri(ns) = tok else {
                return Err(self.syntax(off, "expected namespace IRI"));
            };
            self.declared.insert(label, ns);
        }
        Ok(())
    }

    /// `COUNT ( [DISTINCT] ?v )`, after the COUNT keyword.
    fn count_body(&mut self) -> Result<String, SparqlError> {
        self.expect_punct('(')?;
        if Self::keyword_is(self.peek()?, "DISTINCT") {
            self.next()?;
        }
        let var = self.expect_var()?;
        self.expect_punct(')')?;
        Ok(var)
    }

    fn header(&mut self) -> Result<QueryHeader, SparqlError> {
        let (off, tok) = self.next()?;
        Self::check_unsupported(&tok)?;
        if Self::keyword_is(&tok, "ASK") {
            return Ok(QueryHeader::Ask);
        }
        if !Self::keyword_is(&tok, "SELECT") {
            return Err(self.syntax(off, "expected SELECT or ASK"));
        }
        let mut distinct = false;
        if Self::keyword_is(self.peek()?, "DISTINCT") {
            self.next()?;
            distinct = true;
        }
        let header = match self.next()? {
            (_, Tok::Var(var)) => QueryHeader::Select { var, distinct },
            (_, Tok::Word(w)) if w.eq_ignore_ascii_case("COUNT") => QueryHeader::Count { var: self.count_body()? },
            (_, Tok::Punct('(')) => {
                self.expect_keyword("COUNT")?;
                let var = self.count_body()?;
                self.expect_keyword("AS")?;
                self.expect_var()?;
                self.expect_punct(')')?;
                QueryHeader::Count { var }
            }
            (_, Tok::Punct('*')) => return Err(SparqlError::UnsupportedConstruct("*".into())),
            (off, tok) => {
                Self::check_unsupported(&tok)?;
                return Err(self.syntax(off, "expected projection"));
            }
        };
        if matches!(self.peek()?, Tok::Var(_) | Tok::Punct('(')) {
            return Err(SparqlError::UnsupportedConstruct("multiple projections".into()));
        }
        Ok(header)
    }

    fn term(&mut self, position: &str) -> Result<Term, SparqlError> {
        let (off, tok) = self.next()?;
        Self::check_unsupported(&tok)?;
        match tok {
            Tok::Var(v) => Ok(Term::Var(v)),
            Tok::Iri(i) => Ok(Term::Iri(i)),
            Tok::Literal(l) => Ok(Term::Literal(l)),
            Tok::Word(w) if w.contains(':') => Ok(Term::Iri(self.expand(&w)?)),
            Tok::Word(w) if w.chars().all(|c| c.is_ascii_digit() || c == '.' || c == '-') => Ok(Term::Literal(w)),
            Tok::Punct('{') => Err(SparqlError::UnsupportedConstruct("nested group".into())),
            Tok::Punct('[') => Err(SparqlError::UnsupportedConstruct("blank node".into())),
            _ => Err(self.syntax(off, format!("expected {position}"))),
        }
    }

    fn predicate(&mut self) -> Result<String, SparqlError> {
        let (off, tok) = self.next()?;
        Self::check_unsupported(&tok)?;
        match tok {
            Tok::Iri(i) => Ok(i),
            Tok::Word(w) if w == "a" => Ok(RDF_TYPE.to_string()),
            Tok::Word(w) if w.contains(':') => self.expand(&w),
            Tok::Var(_) => Err(SparqlError::UnsupportedConstruct("variable predicate".into())),
            _ => Err(self.syntax(off, "expected predicate")),
        }
    }

    fn group(&mut self) -> Result<Vec<TriplePattern>, SparqlError> {
        self.expect_punct('{')?;
        let mut triples = Vec::new();
        loop {
            let tok = self.peek()?.clone();
            Self::check_unsupported(&tok)?;
            match tok {
                Tok::Punct('}') => {
                    self.next()?;
                    return Ok(triples);
                }
                Tok::Punct('.') => {
                    self.next()?;
                }
                Tok::Punct('{') => return Err(SparqlError::UnsupportedConstruct("nested group".into())),
                Tok::Eof => return Err(self.syntax(self.src.len(), "unterminated group")),
                _ => {
                    let subject = self.term("subject")?;
                    loop {
                        let predicate = self.predicate()?;
                        loop {
                            let object = self.term("object")?;
                            triples.push(TriplePattern {
                                subject: subject.clone(),
                                predicate: predicate.clone(),
                                object,
                            });
                            if *self.peek()? == Tok::Punct(',') {
                                self.next()?;
                            } else {
                                break;
                            }
                        }
                        if *self.peek()? == Tok::Punct(';') {
                            self.next()?;
                            if matches!(self.peek()?, Tok::Punct('.') | Tok::Punct('}')) {
                                break;
                            }
                        } else {
                            break;
                        }
                    }
                    let next = self.peek()?.clone();
                    Self::check_unsupported(&next)?;
                    if !matches!(next, Tok::Punct('.') | Tok::Punct('}')) {
                        let off = self.peeked.as_ref().map(|p| p.0).unwrap_or(self.pos);
                        return Err(self.syntax(off, "expected `.` or `}` after triple"));
                    }
                }
            }
        }
    }

    fn query(mut self) -> Result<SparqlQuery, SparqlError> {
        self.prologue()?;
        let header = self.header()?;
        if Self::keyword_is(self.peek()?, "WHERE") {
            self.next()?;
        }
        let triples = self.group()?;
        let (off, tok) = self.next()?;
        Self::check_unsupported(&tok)?;
        if tok != Tok::Eof {
            return Err(self.syntax(off, "trailing input after query"));
        }
        Ok(SparqlQuery { header, triples, prefixes: self.declared })
    }
}

/// Parses the supported subset. Prefixed names must be declared in the text.
pub fn parse_sparql(text: &str) -> Result<SparqlQuery, SparqlError> {
    Parser { src: text, pos: 0, peeked: None, declared: BTreeMap::new(), fallback: None }.query()
}

/// As [`parse_sparql`], resolving undeclared prefixes through `table`.
pub fn parse_sparql_with(text: &str, table: &PrefixTable) -> Result<SparqlQuery, SparqlError> {
    Parser { src: text, pos: 0, peeked: None, declared: BTreeMap::new(), fallback: Some(table) }.query()
}
