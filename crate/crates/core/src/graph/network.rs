use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::spec::{decode_mixed_radix, BuildOptions, NetworkSpec, NodeDef, Visibility};
use super::GraphError;

/// Node id to state name. Partial assignments serve as evidence, full ones
/// as joint samples.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(BTreeMap<String, String>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, node: &str, state: &str) -> Self {
        self.insert(node, state);
        self
    }

    pub fn insert(&mut self, node: &str, state: &str) -> Option<String> {
        self.0.insert(node.to_string(), state.to_string())
    }

    pub fn get(&self, node: &str) -> Option<&str> {
        self.0.get(node).map(String::as_str)
    }

    pub fn remove(&mut self, node: &str) -> Option<String> {
        self.0.remove(node)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        Assignment(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

/// Probability per state of one node, in the node's state order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub node: String,
    pub states: Vec<String>,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn prob(&self, state: &str) -> Option<f64> {
        self.states.iter().position(|s| s == state).map(|i| self.probs[i])
    }
}

/// A validated discrete Bayesian network.
///
/// Immutable once built. Edits (interventions) go through the spec and
/// produce a new network.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    index: HashMap<String, usize>,
    cards: Vec<usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    /// Row-major `[parent config][child state]`.
    tables: Vec<Vec<f64>>,
    topo: Vec<usize>,
    active_edges: Vec<usize>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.active_edges == other.active_edges
    }
}

impl Network {
    /// Builds with excluded edges left out.
    pub fn build(spec: NetworkSpec) -> Result<Network, GraphError> {
        Self::build_with(spec, BuildOptions::default())
    }

    pub fn build_with(spec: NetworkSpec, opts: BuildOptions) -> Result<Network, GraphError> {
        if let Some(first) = spec.validate_with(opts).into_iter().next() {
            return Err(first);
        }
        let index: HashMap<String, usize> = spec.nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
        let n = spec.nodes.len();
        let cards: Vec<usize> = spec.nodes.iter().map(|n| n.states.len()).collect();
        let mut parents = vec![Vec::new(); n];
        let mut tables = vec![Vec::new(); n];
        for cpt in &spec.cpts {
            let c = index[&cpt.child];
            parents[c] = cpt.parents.iter().map(|p| index[p]).collect();
            tables[c] = cpt.rows.iter().flatten().copied().collect();
        }
        let mut children = vec![Vec::new(); n];
        let mut active_edges = Vec::new();
        for (i, e) in spec.edges.iter().enumerate() {
            if opts.include_excluded || !e.excluded {
                children[index[&e.from]].push(index[&e.to]);
                active_edges.push(i);
            }
        }
        let topo = topological_order(&parents, &children);
        Ok(Network { spec, index, cards, parents, children, tables, topo, active_edges })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn into_spec(self) -> NetworkSpec {
        self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn len(&self) -> usize {
        self.spec.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NodeDef] {
        &self.spec.nodes
    }

    pub fn node(&self, id: &str) -> Option<&NodeDef> {
        self.index.get(id).map(|&i| &self.spec.nodes[i])
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub(crate) fn require(&self, id: &str) -> Result<usize, GraphError> {
        self.node_index(id).ok_or_else(|| GraphError::UnknownNode(id.to_string()))
    }

    pub(crate) fn require_state(&self, node: usize, state: &str) -> Result<usize, GraphError> {
        self.spec.nodes[node].state_index(state).ok_or_else(|| GraphError::UnknownState {
            node: self.spec.nodes[node].id.clone(),
            state: state.to_string(),
        })
    }

    pub fn card(&self, node: usize) -> usize {
        self.cards[node]
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    /// Parent indices in table order.
    pub fn parents_of(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn children_of(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn is_root(&self, node: usize) -> bool {
        self.parents[node].is_empty()
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn topo_ids(&self) -> Vec<&str> {
        self.topo.iter().map(|&i| self.spec.nodes[i].id.as_str()).collect()
    }

    /// Edges that are part of the graph (excluded declarations omitted).
    pub fn active_edge_count(&self) -> usize {
        self.active_edges.len()
    }

    pub fn observable_ids(&self) -> Vec<String> {
        self.spec.nodes.iter().filter(|n| n.visibility == Visibility::Observable).map(|n| n.id.clone()).collect()
    }

    pub fn intervenable_ids(&self) -> Vec<String> {
        self.spec.nodes.iter().filter(|n| n.intervenable).map(|n| n.id.clone()).collect()
    }

    /// Row of `node`'s table selected by the full (index) assignment `states`.
    pub fn table_row(&self, node: usize, states: &[usize]) -> &[f64] {
        let mut row = 0;
        for &p in &self.parents[node] {
            row = row * self.cards[p] + states[p];
        }
        let card = self.cards[node];
        &self.tables[node][row * card..(row + 1) * card]
    }

    /// Flat table, `[parent config][child state]`.
    pub fn table(&self, node: usize) -> &[f64] {
        &self.tables[node]
    }

    /// All descendants of `node` (excluding itself).
    pub fn descendants(&self, node: usize) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut stack = self.children[node].clone();
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend(&self.children[v]);
            }
        }
        (0..self.len()).filter(|&i| seen[i]).collect()
    }

    /// Resolves a (possibly partial) assignment to per-node state indices.
    pub fn resolve(&self, assignment: &Assignment) -> Result<Vec<Option<usize>>, GraphError> {
        let mut out = vec![None; self.len()];
        for (node, state) in assignment.iter() {
            let i = self.require(node)?;
            out[i] = Some(self.require_state(i, state)?);
        }
        Ok(out)
    }

    /// Inverse of [`resolve`](Self::resolve) for a full index assignment.
    pub fn assignment_from_indices(&self, states: &[usize]) -> Assignment {
        self.spec.nodes.iter().zip(states).map(|(n, &s)| (n.id.clone(), n.states[s].clone())).collect()
    }

    /// Chain-rule probability of a full assignment.
    pub fn joint_probability(&self, full: &Assignment) -> Result<f64, GraphError> {
        let resolved = self.resolve(full)?;
        let missing: Vec<String> = resolved
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_none())
            .map(|(i, _)| self.spec.nodes[i].id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(GraphError::IncompleteAssignment(missing));
        }
        let states: Vec<usize> = resolved.into_iter().flatten().collect();
        Ok(self.joint_probability_indices(&states))
    }

    pub fn joint_probability_indices(&self, states: &[usize]) -> f64 {
        (0..self.len()).map(|i| self.table_row(i, states)[states[i]]).product()
    }

    /// Probability vector for `node` given its parents' row index.
    pub(crate) fn row_by_index(&self, node: usize, row: usize) -> &[f64] {
        let card = self.cards[node];
        &self.tables[node][row * card..(row + 1) * card]
    }

    /// Number of rows in the table of `node`.
    pub fn parent_rows(&self, node: usize) -> usize {
        self.parents[node].iter().map(|&p| self.cards[p]).product()
    }

    /// Parent-state tuple of a table row.
    pub fn row_tuple(&self, node: usize, row: usize) -> Vec<usize> {
        let cards: Vec<usize> = self.parents[node].iter().map(|&p| self.cards[p]).collect();
        let mut out = vec![0; cards.len()];
        decode_mixed_radix(row, &cards, &mut out);
        out
    }
}

/// Kahn's algorithm, choosing the lowest declaration index among ready nodes.
fn topological_order(parents: &[Vec<usize>], children: &[Vec<usize>]) -> Vec<usize> {
    let n = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{CptDef, EdgeDef};

    fn chain(pa: f64, pb_t: f64, pb_f: f64) -> Network {
        let mut s = NetworkSpec::new("chain");
        s.nodes.push(NodeDef::binary("A", "a", Visibility::Latent, false));
        s.nodes.push(NodeDef::binary("B", "b", Visibility::Observable, false));
        s.edges.push(EdgeDef::new("E1", "A", "B"));
        s.cpts.push(CptDef::root("A", vec![pa, 1.0 - pa]));
        s.cpts.push(CptDef::new("B", &["A"], vec![vec![pb_t, 1.0 - pb_t], vec![pb_f, 1.0 - pb_f]]));
        Network::build(s).unwrap()
    }

    #[test]
    fn chain_topo_order() {
        let net = chain(0.5, 1.0, 0.0);
        assert_eq!(net.topo_ids(), vec!["A", "B"]);
    }

    #[test]
    fn two_cycle_is_rejected_naming_both_edges() {
        let mut s = NetworkSpec::new("cyc");
        s.nodes.push(NodeDef::binary("A", "a", Visibility::Latent, false));
        s.nodes.push(NodeDef::binary("B", "b", Visibility::Latent, false));
        s.edges.push(EdgeDef::new("E1", "A", "B"));
        s.edges.push(EdgeDef::new("E2", "B", "A"));
        s.cpts.push(CptDef::new("A", &["B"], vec![vec![0.5, 0.5]; 2]));
        s.cpts.push(CptDef::new("B", &["A"], vec![vec![0.5, 0.5]; 2]));
        match Network::build(s) {
            Err(GraphError::Cyclic { mut edges }) => {
                edges.sort();
                assert_eq!(edges, vec!["E1", "E2"]);
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn joint_with_unit_factor() {
        let net = chain(0.5, 1.0, 0.0);
        let p = net.joint_probability(&Assignment::new().with("A", "true").with("B", "true")).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn joint_requires_full_assignment() {
        let net = chain(0.5, 1.0, 0.0);
        assert_eq!(
            net.joint_probability(&Assignment::new().with("A", "true")),
            Err(GraphError::IncompleteAssignment(vec!["B".into()]))
        );
    }

    #[test]
    fn joint_sums_to_one() {
        let net = chain(0.3, 0.7, 0.2);
        let mut total = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                total += net.joint_probability_indices(&[a, b]);
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
    }
}
