//! The `.ftm` model format.
//!
//! ```text
//! model <name>
//! node <id> <state,state,...> <observable|latent> <intervenable|fixed> "<label>"
//! edge <id> <from> <to> [excluded]
//! cpt <child> : <p> <p> ...                              # root node
//! cpt <child> | <parent> <parent> ... : <s>,<s>,...= <p> <p> ...   # one line per parent tuple
//! ```
//!
//! `#` starts a comment. Tokens are whitespace separated; `|`, `:` and `=`
//! are also accepted without surrounding spaces. The parser collects every
//! diagnostic it can instead of stopping at the first.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::graph::{CptDef, EdgeDef, NetworkSpec, NodeDef, Visibility};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagnosticKind {
    Syntax { expected: String },
    UnknownNodeReference { id: String },
    UnknownState { node: String, state: String },
    DuplicateDefinition { what: String },
    BadProbability { text: String },
    ParentListMismatch { node: String },
    RowCountMismatch { node: String, expected: usize, got: usize },
    RowLengthMismatch { node: String, expected: usize, got: usize },
}

/// A parse problem at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    #[serde(flatten)]
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: ", self.line, self.col)?;
        match &self.kind {
            DiagnosticKind::Syntax { expected } => write!(f, "syntax error, expected {expected}"),
            DiagnosticKind::UnknownNodeReference { id } => write!(f, "reference to undeclared node `{id}`"),
            DiagnosticKind::UnknownState { node, state } => write!(f, "node `{node}` has no state `{state}`"),
            DiagnosticKind::DuplicateDefinition { what } => write!(f, "duplicate definition of {what}"),
            DiagnosticKind::BadProbability { text } => write!(f, "`{text}` is not a probability in [0, 1]"),
            DiagnosticKind::ParentListMismatch { node } => {
                write!(f, "table rows for `{node}` disagree on the parent list")
            }
            DiagnosticKind::RowCountMismatch { node, expected, got } => {
                write!(f, "table for `{node}` has {got} row(s), expected {expected}")
            }
            DiagnosticKind::RowLengthMismatch { node, expected, got } => {
                write!(f, "row for `{node}` has {got} value(s), expected {expected}")
            }
        }
    }
}

/// All diagnostics from a failed parse.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ParseErrors(pub Vec<Diagnostic>);

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseErrors {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Pipe,
    Colon,
    Eq,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn tokenize(line: &str, lineno: usize, diags: &mut Vec<Diagnostic>) -> Vec<Token> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            '#' => break,
            c if c.is_whitespace() => i += 1,
            '|' | ':' | '=' => {
                out.push(Token {
                    tok: match c {
                        '|' => Tok::Pipe,
                        ':' => Tok::Colon,
                        _ => Tok::Eq,
                    },
                    col,
                });
                i += 1;
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                let mut closed = false;
                while i < chars.len() {
                    match chars[i] {
                        '\\' if i + 1 < chars.len() => {
                            s.push(chars[i + 1]);
                            i += 2;
                        }
                        '"' => {
                            closed = true;
                            i += 1;
                            break;
                        }
                        ch => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                if !closed {
                    diags.push(Diagnostic {
                        line: lineno,
                        col,
                        kind: DiagnosticKind::Syntax { expected: "closing `\"`".into() },
                    });
                }
                out.push(Token { tok: Tok::Quoted(s), col });
            }
            _ => {
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() && !matches!(chars[i], '|' | ':' | '=' | '#' | '"') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Word(chars[start..i].iter().collect()), col });
            }
        }
    }
    out
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphanumeric() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    eol_col: usize,
}

impl<'a> Cursor<'a> {
    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.eol_col, |t| t.col)
    }

    fn err(&self, expected: &str) -> Diagnostic {
        Diagnostic { line: self.line, col: self.col(), kind: DiagnosticKind::Syntax { expected: expected.to_string() } }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn ident(&mut self, expected: &str) -> Result<(String, usize), Diagnostic> {
        match self.peek() {
            Some(Tok::Word(w)) if is_ident(w) => {
                let col = self.col();
                let w = w.clone();
                self.pos += 1;
                Ok((w, col))
            }
            _ => Err(self.err(expected)),
        }
    }

    fn word(&mut self, expected: &str) -> Result<(String, usize), Diagnostic> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let col = self.col();
                let w = w.clone();
                self.pos += 1;
                Ok((w, col))
            }
            _ => Err(self.err(expected)),
        }
    }

    fn punct(&mut self, p: Tok, expected: &str) -> Result<(), Diagnostic> {
        if self.peek() == Some(&p) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(expected))
        }
    }

    fn end(&self) -> Result<(), Diagnostic> {
        if self.pos < self.toks.len() {
            Err(self.err("end of line"))
        } else {
            Ok(())
        }
    }
}

struct RawNode {
    line: usize,
    def: NodeDef,
}

struct RawEdge {
    line: usize,
    cols: [usize; 2],
    def: EdgeDef,
}

struct RawCptLine {
    line: usize,
    child: (String, usize),
    parents: Vec<(String, usize)>,
    tuple: Option<(Vec<String>, usize)>,
    probs: Vec<(f64, usize)>,
    bad_values: bool,
}

/// Parses model text into a spec. Structural checks beyond references
/// (cycles, normalization) are left to network validation.
pub fn parse_model(text: &str) -> Result<NetworkSpec, ParseErrors> {
    let mut diags = Vec::new();
    let mut name: Option<String> = None;
    let mut nodes: Vec<RawNode> = Vec::new();
    let mut edges: Vec<RawEdge> = Vec::new();
    let mut cpt_lines: Vec<RawCptLine> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let toks = tokenize(raw, lineno, &mut diags);
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor { toks: &toks, pos: 0, line: lineno, eol_col: raw.chars().count() + 1 };
        let result = match cur.peek() {
            Some(Tok::Word(kw)) if kw == "model" => {
                cur.pos += 1;
                parse_model_line(&mut cur).map(|n| {
                    if name.is_some() {
                        diags.push(Diagnostic {
                            line: lineno,
                            col: 1,
                            kind: DiagnosticKind::DuplicateDefinition { what: "model".into() },
                        });
                    } else {
                        name = Some(n);
                    }
                })
            }
            Some(Tok::Word(kw)) if kw == "node" => {
                cur.pos += 1;
                parse_node_line(&mut cur).map(|def| nodes.push(RawNode { line: lineno, def }))
            }
            Some(Tok::Word(kw)) if kw == "edge" => {
                cur.pos += 1;
                parse_edge_line(&mut cur).map(|(def, cols)| edges.push(RawEdge { line: lineno, cols, def }))
            }
            Some(Tok::Word(kw)) if kw == "cpt" => {
                cur.pos += 1;
                parse_cpt_line(&mut cur, &mut diags).map(|c| cpt_lines.push(c))
            }
            _ => Err(cur.err("`model`, `node`, `edge` or `cpt`")),
        };
        if let Err(d) = result {
            diags.push(d);
        }
    }

    if name.is_none() {
        diags.push(Diagnostic {
            line: 1,
            col: 1,
            kind: DiagnosticKind::Syntax { expected: "a `model <name>` line".into() },
        });
    }

    let mut spec = NetworkSpec::new(name.as_deref().unwrap_or(""));
    let mut node_pos: HashMap<String, usize> = HashMap::new();
    for raw in nodes {
        if node_pos.contains_key(&raw.def.id) {
            diags.push(Diagnostic {
                line: raw.line,
                col: 6,
                kind: DiagnosticKind::DuplicateDefinition { what: format!("node `{}`", raw.def.id) },
            });
            continue;
        }
        node_pos.insert(raw.def.id.clone(), spec.nodes.len());
        spec.nodes.push(raw.def);
    }

    let mut edge_ids: HashMap<String, usize> = HashMap::new();
    for raw in edges {
        if edge_ids.contains_key(&raw.def.id) {
            diags.push(Diagnostic {
                line: raw.line,
                col: 6,
                kind: DiagnosticKind::DuplicateDefinition { what: format!("edge `{}`", raw.def.id) },
            });
            continue;
        }
        let mut ok = true;
        for (end, col) in [(&raw.def.from, raw.cols[0]), (&raw.def.to, raw.cols[1])] {
            if !node_pos.contains_key(end) {
                diags.push(Diagnostic {
                    line: raw.line,
                    col,
                    kind: DiagnosticKind::UnknownNodeReference { id: end.clone() },
                });
                ok = false;
            }
        }
        edge_ids.insert(raw.def.id.clone(), raw.line);
        if ok {
            spec.edges.push(raw.def);
        }
    }

    assemble_cpts(&mut spec, &node_pos, cpt_lines, &mut diags);

    if diags.is_empty() {
        Ok(spec)
    } else {
        diags.sort_by_key(|d| (d.line, d.col));
        Err(ParseErrors(diags))
    }
}

fn parse_model_line(cur: &mut Cursor) -> Result<String, Diagnostic> {
    let (name, _) = cur.ident("model name")?;
    cur.end()?;
    Ok(name)
}

fn parse_node_line(cur: &mut Cursor) -> Result<NodeDef, Diagnostic> {
    let (id, _) = cur.ident("node id")?;
    let states_col = cur.col();
    let (states_text, _) = cur.word("comma-separated state list")?;
    let states: Vec<String> = states_text.split(',').map(str::to_string).collect();
    if states.iter().any(|s| !is_ident(s)) {
        return Err(Diagnostic {
            line: cur.line,
            col: states_col,
            kind: DiagnosticKind::Syntax { expected: "comma-separated state names".into() },
        });
    }
    if states.len() < 2 {
        return Err(Diagnostic {
            line: cur.line,
            col: states_col,
            kind: DiagnosticKind::Syntax { expected: "at least two states".into() },
        });
    }
    for (i, s) in states.iter().enumerate() {
        if states[..i].contains(s) {
            return Err(Diagnostic {
                line: cur.line,
                col: states_col,
                kind: DiagnosticKind::DuplicateDefinition { what: format!("state `{s}` of node `{id}`") },
            });
        }
    }
    let visibility = match cur.peek() {
        Some(Tok::Word(w)) if w == "observable" => Visibility::Observable,
        Some(Tok::Word(w)) if w == "latent" => Visibility::Latent,
        _ => return Err(cur.err("`observable` or `latent`")),
    };
    cur.pos += 1;
    let intervenable = match cur.peek() {
        Some(Tok::Word(w)) if w == "intervenable" => true,
        Some(Tok::Word(w)) if w == "fixed" => false,
        _ => return Err(cur.err("`intervenable` or `fixed`")),
    };
    cur.pos += 1;
    let label = match cur.peek() {
        Some(Tok::Quoted(s)) => s.clone(),
        _ => return Err(cur.err("quoted label")),
    };
    cur.pos += 1;
    cur.end()?;
    Ok(NodeDef { id, label, states, visibility, intervenable })
}

fn parse_edge_line(cur: &mut Cursor) -> Result<(EdgeDef, [usize; 2]), Diagnostic> {
    let (id, _) = cur.ident("edge id")?;
    let (from, c1) = cur.ident("source node id")?;
    let (to, c2) = cur.ident("target node id")?;
    let excluded = match cur.peek() {
        None => false,
        Some(Tok::Word(w)) if w == "excluded" => {
            cur.pos += 1;
            true
        }
        _ => return Err(cur.err("`excluded` or end of line")),
    };
    cur.end()?;
    Ok((EdgeDef { id, from, to, excluded }, [c1, c2]))
}

fn parse_cpt_line(cur: &mut Cursor, diags: &mut Vec<Diagnostic>) -> Result<RawCptLine, Diagnostic> {
    let line = cur.line;
    let child = cur.ident("child node id")?;
    let mut parents = Vec::new();
    if cur.peek() == Some(&Tok::Pipe) {
        cur.pos += 1;
        while let Some(Tok::Word(_)) = cur.peek() {
            parents.push(cur.ident("parent node id")?);
        }
        if parents.is_empty() {
            return Err(cur.err("parent node id"));
        }
    }
    cur.punct(Tok::Colon, "`:`")?;
    let tuple = if parents.is_empty() {
        None
    } else {
        let col = cur.col();
        let (text, _) = cur.word("parent state tuple")?;
        cur.punct(Tok::Eq, "`=` after the parent state tuple")?;
        Some((text.split(',').map(str::to_string).collect(), col))
    };
    let mut probs = Vec::new();
    let mut bad_values = false;
    while let Some(Tok::Word(w)) = cur.peek() {
        let col = cur.col();
        match w.parse::<f64>() {
            Ok(p) if (0.0..=1.0).contains(&p) => probs.push((p, col)),
            _ => {
                bad_values = true;
                diags.push(Diagnostic { line, col, kind: DiagnosticKind::BadProbability { text: w.clone() } })
            }
        }
        cur.pos += 1;
    }
    cur.end()?;
    if probs.is_empty() && !bad_values {
        return Err(cur.err("probability values"));
    }
    Ok(RawCptLine { line, child, parents, tuple, probs, bad_values })
}

fn assemble_cpts(
    spec: &mut NetworkSpec,
    node_pos: &HashMap<String, usize>,
    lines: Vec<RawCptLine>,
    diags: &mut Vec<Diagnostic>,
) {
    struct Building {
        first_line: usize,
        parents: Vec<String>,
        cards: Vec<usize>,
        rows: Vec<Option<Vec<f64>>>,
        broken: bool,
    }
    let mut order: Vec<String> = Vec::new();
    let mut tables: HashMap<String, Building> = HashMap::new();

    for raw in lines {
        let (child, child_col) = &raw.child;
        let Some(&ci) = node_pos.get(child) else {
            diags.push(Diagnostic {
                line: raw.line,
                col: *child_col,
                kind: DiagnosticKind::UnknownNodeReference { id: child.clone() },
            });
            continue;
        };
        let mut cards = Vec::new();
        let mut known = true;
        for (p, col) in &raw.parents {
            match node_pos.get(p) {
                Some(&pi) => cards.push(spec.nodes[pi].states.len()),
                None => {
                    diags.push(Diagnostic {
                        line: raw.line,
                        col: *col,
                        kind: DiagnosticKind::UnknownNodeReference { id: p.clone() },
                    });
                    known = false;
                }
            }
        }
        let parents: Vec<String> = raw.parents.iter().map(|(p, _)| p.clone()).collect();
        let entry = tables.entry(child.clone()).or_insert_with(|| {
            order.push(child.clone());
            Building {
                first_line: raw.line,
                parents: parents.clone(),
                cards: cards.clone(),
                rows: vec![None; if known { cards.iter().product() } else { 0 }],
                broken: !known,
            }
        });
        if entry.parents != parents {
            diags.push(Diagnostic {
                line: raw.line,
                col: *child_col,
                kind: DiagnosticKind::ParentListMismatch { node: child.clone() },
            });
            continue;
        }
        if raw.bad_values {
            // Already diagnosed; a partial table would only add noise.
            entry.broken = true;
        }
        if entry.broken {
            continue;
        }

        let card = spec.nodes[ci].states.len();
        if raw.probs.len() != card {
            diags.push(Diagnostic {
                line: raw.line,
                col: raw.probs.first().map_or(*child_col, |p| p.1),
                kind: DiagnosticKind::RowLengthMismatch { node: child.clone(), expected: card, got: raw.probs.len() },
            });
            continue;
        }

        let row_index = match &raw.tuple {
            None => Some(0),
            Some((states, col)) => {
                if states.len() != parents.len() {
                    diags.push(Diagnostic {
                        line: raw.line,
                        col: *col,
                        kind: DiagnosticKind::Syntax { expected: format!("{} parent state(s)", parents.len()) },
                    });
                    None
                } else {
                    let mut idx = 0;
                    let mut ok = true;
                    for ((p, s), card) in parents.iter().zip(states).zip(&entry.cards) {
                        match spec.nodes[node_pos[p]].state_index(s) {
                            Some(si) => idx = idx * card + si,
                            None => {
                                diags.push(Diagnostic {
                                    line: raw.line,
                                    col: *col,
                                    kind: DiagnosticKind::UnknownState { node: p.clone(), state: s.clone() },
                                });
                                ok = false;
                            }
                        }
                    }
                    ok.then_some(idx)
                }
            }
        };
        let Some(row_index) = row_index else { continue };
        let slot = &mut entry.rows[row_index];
        if slot.is_some() {
            diags.push(Diagnostic {
                line: raw.line,
                col: *child_col,
                kind: DiagnosticKind::DuplicateDefinition { what: format!("table row for `{child}`") },
            });
            continue;
        }
        *slot = Some(raw.probs.iter().map(|p| p.0).collect());
    }

    for child in order {
        let b = tables.remove(&child).expect("recorded");
        if b.broken {
            continue;
        }
        let got = b.rows.iter().filter(|r| r.is_some()).count();
        if got != b.rows.len() {
            diags.push(Diagnostic {
                line: b.first_line,
                col: 1,
                kind: DiagnosticKind::RowCountMismatch { node: child, expected: b.rows.len(), got },
            });
            continue;
        }
        spec.cpts.push(CptDef { child, parents: b.parents, rows: b.rows.into_iter().flatten().collect() });
    }
}

fn fmt_prob(p: f64) -> String {
    // `Display` for f64 is the shortest string that round-trips.
    if p == 0.0 {
        "0".to_string()
    } else {
        format!("{p}")
    }
}

fn quote(label: &str) -> String {
    let mut s = String::with_capacity(label.len() + 2);
    s.push('"');
    for c in label.chars() {
        if c == '"' || c == '\\' {
            s.push('\\');
        }
        s.push(c);
    }
    s.push('"');
    s
}

/// Canonical text for a spec. Byte-identical for structurally equal specs.
pub fn serialize_model(spec: &NetworkSpec) -> String {
    let spec = spec.canonical();
    let mut out = String::new();
    out.push_str(&format!("model {}\n", spec.name));

    out.push('\n');
    for n in &spec.nodes {
        out.push_str(&format!(
            "node {} {} {} {} {}\n",
            n.id,
            n.states.join(","),
            match n.visibility {
                Visibility::Observable => "observable",
                Visibility::Latent => "latent",
            },
            if n.intervenable { "intervenable" } else { "fixed" },
            quote(&n.label)
        ));
    }

    if !spec.edges.is_empty() {
        out.push('\n');
    }
    for e in &spec.edges {
        out.push_str(&format!("edge {} {} {}", e.id, e.from, e.to));
        if e.excluded {
            out.push_str(" excluded");
        }
        out.push('\n');
    }

    for cpt in &spec.cpts {
        out.push('\n');
        let probs = |row: &[f64]| row.iter().map(|&p| fmt_prob(p)).collect::<Vec<_>>().join(" ");
        if cpt.parents.is_empty() {
            for row in &cpt.rows {
                out.push_str(&format!("cpt {} : {}\n", cpt.child, probs(row)));
            }
            continue;
        }
        let cards: Vec<usize> = cpt.parents.iter().map(|p| spec.node(p).map_or(1, |n| n.states.len())).collect();
        let mut digits = vec![0usize; cards.len()];
        for (r, row) in cpt.rows.iter().enumerate() {
            crate::graph::decode_digits(r, &cards, &mut digits);
            let tuple: Vec<&str> = cpt
                .parents
                .iter()
                .zip(&digits)
                .map(|(p, &d)| spec.node(p).map_or("?", |n| n.states[d].as_str()))
                .collect();
            out.push_str(&format!(
                "cpt {} | {} : {}= {}\n",
                cpt.child,
                cpt.parents.join(" "),
                tuple.join(","),
                probs(row)
            ));
        }
    }
    out
}


/// Parses standalone `cpt` lines against the nodes of `spec`, as used for
/// contingency edits supplied in their own file. Diagnostics carry the line
/// numbers of `text`.
pub fn parse_cpt_lines(text: &str, spec: &NetworkSpec) -> Result<Vec<CptDef>, ParseErrors> {
    let mut header = format!("model {}\n", if spec.name.is_empty() { "m" } else { &spec.name });
    for n in &spec.nodes {
        header.push_str(&format!("node {} {} latent fixed \"\"\n", n.id, n.states.join(",")));
    }
    let offset = header.lines().count();
    let full = format!("{header}{text}");
    match parse_model(&full) {
        Ok(parsed) => Ok(parsed.cpts),
        Err(ParseErrors(diags)) => Err(ParseErrors(
            diags
                .into_iter()
                .map(|mut d| {
                    d.line = d.line.saturating_sub(offset).max(1);
                    d
                })
                .collect(),
        )),
    }
}

#[cfg(test)]
mod cpt_file_tests {
    use super::*;

    #[test]
    fn standalone_rows() {
        let spec = parse_model(
            "model M\nnode A t,f latent fixed \"a\"\nnode B t,f latent fixed \"b\"\nedge E1 A B\ncpt A : 0.5 0.5\ncpt B | A : t= 1 0\ncpt B | A : f= 0 1\n",
        )
        .unwrap();
        let cpts = parse_cpt_lines("cpt B | A : t= 0.5 0.5\ncpt B | A : f= 0.25 0.75\n", &spec).unwrap();
        assert_eq!(cpts.len(), 1);
        assert_eq!(cpts[0].rows[1], vec![0.25, 0.75]);
        let err = parse_cpt_lines("cpt B | A : t= 0.5 0.5\n", &spec).unwrap_err();
        assert_eq!(err.0[0].line, 1);
    }
}
