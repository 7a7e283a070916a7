use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use super::{AmrError, AmrGraph, AmrGraphBuilder, Edge, Node, NodeId, NodeKind, Sidecar};

/// Roles that end in `-of` without being inverses.
const NON_INVERTED_OF: &[&str] = &["consist-of", "prep-out-of", "prep-on-behalf-of"];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Slash,
    Role(String),
    Str(String),
    Sym(String),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err(&self, offset: usize, message: impl Into<String>) -> AmrError {
        AmrError::MalformedPenman { offset, message: message.into() }
    }

    fn tokens(mut self) -> Result<Vec<(usize, Tok)>, AmrError> {
        let bytes = self.src.as_bytes();
        let mut out = Vec::new();
        while self.pos < bytes.len() {
            let c = bytes[self.pos];
            let start = self.pos;
            match c {
                b if b.is_ascii_whitespace() => self.pos += 1,
                b'#' => {
                    while self.pos < bytes.len() && bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b'(' => {
                    self.pos += 1;
                    out.push((start, Tok::Open));
                }
                b')' => {
                    self.pos += 1;
                    out.push((start, Tok::Close));
                }
                b'/' => {
                    self.pos += 1;
                    out.push((start, Tok::Slash));
                }
                b'"' => {
                    self.pos += 1;
                    let mut s = String::new();
                    let mut closed = false;
                    let mut chars = self.src[self.pos..].char_indices();
                    while let Some((i, ch)) = chars.next() {
                        match ch {
                            '\\' => {
                                if let Some((_, esc)) = chars.next() {
                                    s.push(esc);
                                }
                            }
                            '"' => {
                                self.pos += i + 1;
                                closed = true;
                                break;
                            }
                            _ => s.push(ch),
                        }
                    }
                    if !closed {
                        return Err(self.err(start, "unterminated string"));
                    }
                    out.push((start, Tok::Str(s)));
                }
                b':' => {
                    self.pos += 1;
                    let sym = self.symbol();
                    if sym.is_empty() {
                        return Err(self.err(start, "empty role"));
                    }
                    out.push((start, Tok::Role(sym)));
                }
                _ => {
                    let sym = self.symbol();
                    out.push((start, Tok::Sym(sym)));
                }
            }
        }
        Ok(out)
    }

    fn symbol(&mut self) -> String {
        let start = self.pos;
        for (i, ch) in self.src[start..].char_indices() {
            if ch.is_whitespace() || matches!(ch, '(' | ')' | '"' | '/') {
                self.pos = start + i;
                return self.src[start..self.pos].to_string();
            }
        }
        self.pos = self.src.len();
        self.src[start..].to_string()
    }
}

#[derive(Debug)]
struct TreeNode {
    offset: usize,
    var: String,
    concept: String,
    edges: Vec<(String, Value)>,
}

#[derive(Debug)]
enum Value {
    Node(TreeNode),
    Str(String),
    Sym(String),
}

struct TreeParser {
    toks: Vec<(usize, Tok)>,
    i: usize,
    end: usize,
}

impl TreeParser {
    fn err(&self, message: impl Into<String>) -> AmrError {
        let offset = self.toks.get(self.i).map(|t| t.0).unwrap_or(self.end);
        AmrError::MalformedPenman { offset, message: message.into() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.1)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.i).map(|t| t.1.clone());
        self.i += 1;
        t
    }

    fn node(&mut self) -> Result<TreeNode, AmrError> {
        let offset = self.toks.get(self.i).map(|t| t.0).unwrap_or(self.end);
        if self.next() != Some(Tok::Open) {
            return Err(self.err("expected `(`"));
        }
        let var = match self.next() {
            Some(Tok::Sym(s)) => s,
            _ => return Err(self.err("expected variable")),
        };
        if self.next() != Some(Tok::Slash) {
            return Err(self.err(format!("expected `/` after variable `{var}`")));
        }
        let concept = match self.next() {
            Some(Tok::Sym(s)) | Some(Tok::Str(s)) => s,
            _ => return Err(self.err(format!("expected concept for `{var}`"))),
        };
        let mut edges = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Close) => {
                    self.i += 1;
                    break;
                }
                Some(Tok::Role(_)) => {
                    let Some(Tok::Role(role)) = self.next() else { unreachable!() };
                    let value = match self.peek() {
                        Some(Tok::Open) => Value::Node(self.node()?),
                        Some(Tok::Str(_)) => {
                            let Some(Tok::Str(s)) = self.next() else { unreachable!() };
                            Value::Str(s)
                        }
                        Some(Tok::Sym(_)) => {
                            let Some(Tok::Sym(s)) = self.next() else { unreachable!() };
                            Value::Sym(s)
                        }
                        _ => return Err(self.err(format!("missing value for role `:{role}`"))),
                    };
                    edges.push((role, value));
                }
                None => return Err(self.err("unbalanced parentheses")),
                _ => return Err(self.err("expected role or `)`")),
            }
        }
        Ok(TreeNode { offset, var, concept, edges })
    }
}

fn collect_vars(node: &TreeNode, vars: &mut BTreeSet<String>) -> Result<(), AmrError> {
    if !vars.insert(node.var.clone()) {
        return Err(AmrError::MalformedPenman {
            offset: node.offset,
            message: format!("variable `{}` defined twice", node.var),
        });
    }
    for (_, v) in &node.edges {
        if let Value::Node(child) = v {
            collect_vars(child, vars)?;
        }
    }
    Ok(())
}

fn normalize_role(role: &str) -> (&str, bool) {
    if NON_INVERTED_OF.contains(&role) {
        return (role, false);
    }
    match role.strip_suffix("-of") {
        Some(base) if !base.is_empty() => (base, true),
        _ => (role, false),
    }
}

struct GraphAssembler<'a> {
    builder: AmrGraphBuilder,
    vars: &'a BTreeSet<String>,
    constant_ids: BTreeMap<String, usize>,
}

impl GraphAssembler<'_> {
    fn constant_id(&mut self, parent: &str, role: &str) -> NodeId {
        let base = format!("{parent}:{role}");
        let n = self.constant_ids.entry(base.clone()).or_insert(0);
        *n += 1;
        if *n == 1 {
            base.into()
        } else {
            format!("{base}#{n}").into()
        }
    }

    fn add(&mut self, node: &TreeNode) {
        self.builder
            .add_node(node.var.as_str().into(), Node { concept: node.concept.clone(), kind: NodeKind::Variable });
        for (role, value) in &node.edges {
            let other: NodeId = match value {
                Value::Node(child) => {
                    self.add(child);
                    child.var.as_str().into()
                }
                Value::Sym(s) if self.vars.contains(s) => s.as_str().into(),
                Value::Sym(s) | Value::Str(s) => {
                    let quoted = matches!(value, Value::Str(_));
                    let id = self.constant_id(&node.var, role);
                    self.builder.add_node(id.clone(), Node { concept: s.clone(), kind: NodeKind::Constant { quoted } });
                    if role == "wiki" && s != "-" {
                        self.builder.add_wiki(node.var.as_str().into(), wiki_iri(s));
                    }
                    id
                }
            };
            let (base, inverted) = normalize_role(role);
            let here: NodeId = node.var.as_str().into();
            let (source, target) = if inverted { (other, here) } else { (here, other) };
            self.builder.add_edge(Edge { source, role: base.to_string(), target, inverted });
        }
    }
}

/// Bare wiki titles resolve into the DBpedia resource namespace.
fn wiki_iri(value: &str) -> String {
    if value.contains("://") {
        value.to_string()
    } else {
        format!("http://dbpedia.org/resource/{}", value.replace(' ', "_"))
    }
}

/// Parses a single Penman graph and attaches the sidecar alignments and wiki links.
pub fn parse_penman(text: &str, sidecar: &Sidecar) -> Result<AmrGraph, AmrError> {
    let toks = Lexer { src: text, pos: 0 }.tokens()?;
    if toks.is_empty() {
        return Err(AmrError::MalformedPenman { offset: 0, message: "empty input".into() });
    }
    let mut parser = TreeParser { toks, i: 0, end: text.len() };
    let tree = parser.node()?;
    if parser.i < parser.toks.len() {
        return Err(parser.err("trailing input after graph"));
    }
    let mut vars = BTreeSet::new();
    collect_vars(&tree, &mut vars)?;

    let mut asm = GraphAssembler { builder: AmrGraphBuilder::default(), vars: &vars, constant_ids: BTreeMap::new() };
    asm.add(&tree);
    let mut builder = asm.builder.root(&tree.var);
    for node in sidecar.alignments.keys().chain(sidecar.wiki.keys()) {
        if !builder.has_node(node) {
            return Err(AmrError::DanglingAlignment { node: node.clone(), detail: "an unknown node".into() });
        }
    }
    builder.apply_sidecar(sidecar);
    builder.build()
}

fn write_constant(out: &mut String, node: &Node) {
    match node.kind {
        NodeKind::Constant { quoted: true } => {
            out.push('"');
            for ch in node.concept.chars() {
                if ch == '"' || ch == '\\' {
                    out.push('\\');
                }
                out.push(ch);
            }
            out.push('"');
        }
        _ => out.push_str(&node.concept),
    }
}

/// Renders the graph back to Penman, restoring `-of` roles.
pub fn serialize_penman(g: &AmrGraph) -> String {
    let mut out = String::new();
    let mut defined = BTreeSet::new();
    write_node(g, g.root(), 0, &mut defined, &mut out);
    out
}

fn write_node<'g>(g: &'g AmrGraph, id: &'g NodeId, depth: usize, defined: &mut BTreeSet<&'g NodeId>, out: &mut String) {
    let node = g.node(id.as_str()).expect("node exists");
    if node.is_constant() {
        write_constant(out, node);
        return;
    }
    defined.insert(id);
    let _ = write!(out, "({} / {}", id, node.concept);
    for e in g.edges() {
        let (owner, other) = if e.inverted { (&e.target, &e.source) } else { (&e.source, &e.target) };
        if owner != id {
            continue;
        }
        out.push('\n');
        out.push_str(&"    ".repeat(depth + 1));
        let _ = write!(out, ":{}{} ", e.role, if e.inverted { "-of" } else { "" });
        let other_node = g.node(other.as_str()).expect("edge endpoint exists");
        if other_node.is_constant() {
            write_constant(out, other_node);
        } else if defined.contains(other) {
            out.push_str(other.as_str());
        } else {
            write_node(g, other, depth + 1, defined, out);
        }
    }
    out.push(')');
}
