//! Unvalidated network descriptions and their validation.
//!
//! A [`NetworkSpec`] is what the model parser produces and what the
//! serializer consumes. It may violate any network invariant; call
//! [`NetworkSpec::validate`] for the list of violations or
//! [`Network::build`](super::Network::build) to obtain a checked network.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::GraphError;

/// Tolerance for a table row summing to one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Observable,
    Latent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDef {
    pub id: String,
    pub label: String,
    pub states: Vec<String>,
    pub visibility: Visibility,
    pub intervenable: bool,
}

impl NodeDef {
    pub fn new(id: &str, label: &str, states: &[&str], visibility: Visibility, intervenable: bool) -> Self {
        NodeDef {
            id: id.to_string(),
            label: label.to_string(),
            states: states.iter().map(|s| s.to_string()).collect(),
            visibility,
            intervenable,
        }
    }

    /// Binary `true,false` node.
    pub fn binary(id: &str, label: &str, visibility: Visibility, intervenable: bool) -> Self {
        Self::new(id, label, &["true", "false"], visibility, intervenable)
    }

    pub fn state_index(&self, state: &str) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDef {
    pub id: String,
    pub from: String,
    pub to: String,
    /// Declared but left out of the built graph unless explicitly requested.
    #[serde(default)]
    pub excluded: bool,
}

impl EdgeDef {
    pub fn new(id: &str, from: &str, to: &str) -> Self {
        EdgeDef { id: id.to_string(), from: from.to_string(), to: to.to_string(), excluded: false }
    }

    pub fn excluded(mut self) -> Self {
        self.excluded = true;
        self
    }
}

/// Conditional probability table.
///
/// `rows` is indexed by the parent-state tuple in mixed radix, the first
/// parent being the most significant digit and each parent's states taken
/// in declared order. Each row is a distribution over the child's states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CptDef {
    pub child: String,
    pub parents: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CptDef {
    pub fn new(child: &str, parents: &[&str], rows: Vec<Vec<f64>>) -> Self {
        CptDef { child: child.to_string(), parents: parents.iter().map(|s| s.to_string()).collect(), rows }
    }

    pub fn root(child: &str, probs: Vec<f64>) -> Self {
        Self::new(child, &[], vec![probs])
    }
}

/// Options controlling which declared edges take part in a build.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildOptions {
    pub include_excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub nodes: Vec<NodeDef>,
    pub edges: Vec<EdgeDef>,
    pub cpts: Vec<CptDef>,
}

impl NetworkSpec {
    pub fn new(name: &str) -> Self {
        NetworkSpec { name: name.to_string(), nodes: Vec::new(), edges: Vec::new(), cpts: Vec::new() }
    }

    pub fn node(&self, id: &str) -> Option<&NodeDef> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn cpt(&self, child: &str) -> Option<&CptDef> {
        self.cpts.iter().find(|c| c.child == child)
    }

    pub(crate) fn cpt_mut(&mut self, child: &str) -> Option<&mut CptDef> {
        self.cpts.iter_mut().find(|c| c.child == child)
    }

    /// Edges that participate in a build under `opts`.
    pub fn active_edges(&self, opts: BuildOptions) -> impl Iterator<Item = &EdgeDef> {
        self.edges.iter().filter(move |e| opts.include_excluded || !e.excluded)
    }

    pub fn validate(&self) -> Vec<GraphError> {
        self.validate_with(BuildOptions::default())
    }

    /// Every invariant violation, in a fixed order: ids, edges, cycles, tables.
    pub fn validate_with(&self, opts: BuildOptions) -> Vec<GraphError> {
        let mut findings = Vec::new();

        let mut seen = HashSet::new();
        for node in &self.nodes {
            if !seen.insert(node.id.as_str()) {
                findings.push(GraphError::DuplicateId { kind: "node", id: node.id.clone() });
            }
            if node.states.len() < 2 {
                findings.push(GraphError::TooFewStates { node: node.id.clone(), count: node.states.len() });
            }
            let mut states = HashSet::new();
            for s in &node.states {
                if !states.insert(s.as_str()) {
                    findings.push(GraphError::DuplicateState { node: node.id.clone(), state: s.clone() });
                }
            }
        }
        let mut edge_ids = HashSet::new();
        for edge in &self.edges {
            if !edge_ids.insert(edge.id.as_str()) {
                findings.push(GraphError::DuplicateId { kind: "edge", id: edge.id.clone() });
            }
        }

        let nodes: HashMap<&str, &NodeDef> = self.nodes.iter().map(|n| (n.id.as_str(), n)).collect();
        let mut usable = Vec::new();
        for edge in self.active_edges(opts) {
            let mut ok = true;
            for end in [&edge.from, &edge.to] {
                if !nodes.contains_key(end.as_str()) {
                    findings.push(GraphError::DanglingEdge { edge: edge.id.clone(), node: end.clone() });
                    ok = false;
                }
            }
            if ok {
                usable.push(edge);
            }
        }

        if let Some(cycle) = find_cycle(&self.nodes, &usable) {
            findings.push(GraphError::Cyclic { edges: cycle });
        }

        let mut cpt_seen = HashSet::new();
        for cpt in &self.cpts {
            if !nodes.contains_key(cpt.child.as_str()) {
                findings.push(GraphError::UnknownNode(cpt.child.clone()));
                continue;
            }
            if !cpt_seen.insert(cpt.child.as_str()) {
                findings.push(GraphError::DuplicateCpt(cpt.child.clone()));
                continue;
            }
            self.check_cpt(cpt, &nodes, &usable, &mut findings);
        }
        for node in &self.nodes {
            if !cpt_seen.contains(node.id.as_str()) {
                findings.push(GraphError::MissingCpt(node.id.clone()));
            }
        }
        findings
    }

    fn check_cpt(
        &self,
        cpt: &CptDef,
        nodes: &HashMap<&str, &NodeDef>,
        edges: &[&EdgeDef],
        findings: &mut Vec<GraphError>,
    ) {
        let child = nodes[cpt.child.as_str()];
        let expected: BTreeSet<&str> = edges.iter().filter(|e| e.to == cpt.child).map(|e| e.from.as_str()).collect();
        let got: BTreeSet<&str> = cpt.parents.iter().map(String::as_str).collect();
        if expected != got || got.len() != cpt.parents.len() {
            findings.push(GraphError::ParentSetMismatch {
                node: cpt.child.clone(),
                expected: expected.iter().map(|s| s.to_string()).collect(),
                got: cpt.parents.clone(),
            });
        }

        let mut rows_expected = 1usize;
        for p in &cpt.parents {
            match nodes.get(p.as_str()) {
                Some(n) => rows_expected *= n.states.len(),
                None => {
                    findings.push(GraphError::UnknownNode(p.clone()));
                    return;
                }
            }
        }
        if cpt.rows.len() != rows_expected {
            findings.push(GraphError::CptShapeMismatch {
                node: cpt.child.clone(),
                expected: rows_expected,
                got: cpt.rows.len(),
            });
        }
        for (r, row) in cpt.rows.iter().enumerate() {
            if row.len() != child.states.len() {
                findings.push(GraphError::RowLengthMismatch {
                    node: cpt.child.clone(),
                    row: r,
                    expected: child.states.len(),
                    got: row.len(),
                });
                continue;
            }
            if let Some(&bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                findings.push(GraphError::ProbabilityOutOfRange { node: cpt.child.clone(), row: r, value: bad });
                continue;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                findings.push(GraphError::RowNotNormalized { node: cpt.child.clone(), row: r, sum });
            }
        }
    }

    /// Canonical form: nodes keep declaration order, edges sorted by id,
    /// tables in node order with parents re-indexed into node order.
    ///
    /// Assumes table shapes are consistent; malformed tables are left as-is.
    pub fn canonical(&self) -> NetworkSpec {
        let pos: HashMap<&str, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
        let mut edges = self.edges.clone();
        edges.sort_by(|a, b| natural_cmp(&a.id, &b.id));

        let mut cpts: Vec<CptDef> = self.cpts.iter().map(|c| reorder_parents(c, self, &pos)).collect();
        cpts.sort_by_key(|c| pos.get(c.child.as_str()).copied().unwrap_or(usize::MAX));

        NetworkSpec { name: self.name.clone(), nodes: self.nodes.clone(), edges, cpts }
    }
}

fn reorder_parents(cpt: &CptDef, spec: &NetworkSpec, pos: &HashMap<&str, usize>) -> CptDef {
    let Some(cards) = cpt.parents.iter().map(|p| spec.node(p).map(|n| n.states.len())).collect::<Option<Vec<_>>>()
    else {
        return cpt.clone();
    };
    if cpt.rows.len() != cards.iter().product::<usize>() {
        return cpt.clone();
    }
    let mut order: Vec<usize> = (0..cpt.parents.len()).collect();
    order.sort_by_key(|&i| pos.get(cpt.parents[i].as_str()).copied().unwrap_or(usize::MAX));
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return cpt.clone();
    }

    let new_cards: Vec<usize> = order.iter().map(|&i| cards[i]).collect();
    let mut rows = Vec::with_capacity(cpt.rows.len());
    let mut tuple = vec![0usize; order.len()];
    for r in 0..cpt.rows.len() {
        decode_mixed_radix(r, &new_cards, &mut tuple);
        let mut old_index = 0;
        for (old_pos, &card) in cards.iter().enumerate() {
            let new_pos = order.iter().position(|&o| o == old_pos).unwrap_or(0);
            old_index = old_index * card + tuple[new_pos];
        }
        rows.push(cpt.rows[old_index].clone());
    }
    CptDef { child: cpt.child.clone(), parents: order.iter().map(|&i| cpt.parents[i].clone()).collect(), rows }
}

/// Writes the mixed-radix digits of `index` (most significant first) into `out`.
pub(crate) fn decode_mixed_radix(mut index: usize, cards: &[usize], out: &mut [usize]) {
    for (slot, &card) in out.iter_mut().zip(cards).rev() {
        *slot = index % card;
        index /= card;
    }
}

/// Orders ids like `E2` before `E10`: compares the non-digit prefix, then
/// the trailing number, then the raw string.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn split(s: &str) -> (&str, Option<u64>) {
        let cut = s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        (&s[..cut], s[cut..].parse().ok())
    }
    let (pa, na) = split(a);
    let (pb, nb) = split(b);
    pa.cmp(pb).then(na.cmp(&nb)).then(a.cmp(b))
}

/// Returns the edge ids along one directed cycle, if any exists.
fn find_cycle(nodes: &[NodeDef], edges: &[&EdgeDef]) -> Option<Vec<String>> {
    let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    let mut out: Vec<Vec<(usize, &str)>> = vec![Vec::new(); nodes.len()];
    for e in edges {
        out[index[e.from.as_str()]].push((index[e.to.as_str()], e.id.as_str()));
    }

    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color = vec![0u8; nodes.len()];
    let mut via: Vec<Option<(usize, &str)>> = vec![None; nodes.len()];
    for start in 0..nodes.len() {
        if color[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        color[start] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < out[v].len() {
                let (w, eid) = out[v][*next];
                *next += 1;
                match color[w] {
                    0 => {
                        color[w] = 1;
                        via[w] = Some((v, eid));
                        stack.push((w, 0));
                    }
                    1 => {
                        let mut cycle = vec![eid.to_string()];
                        let mut cur = v;
                        while cur != w {
                            let (prev, e) = via[cur].expect("on-stack node has a predecessor");
                            cycle.push(e.to_string());
                            cur = prev;
                        }
                        cycle.reverse();
                        return Some(cycle);
                    }
                    _ => {}
                }
            } else {
                color[v] = 2;
                stack.pop();
            }
        }
    }
    None
}
