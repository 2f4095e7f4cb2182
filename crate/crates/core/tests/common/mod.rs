//! Shared test support: seeded random networks and a brute-force
//! enumeration oracle that reads the spec tables directly.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shadowfolk::graph::{Assignment, CptDef, EdgeDef, NetworkSpec, NodeDef, Visibility};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_row<R: Rng>(rng: &mut R, card: usize, zeros: bool) -> Vec<f64> {
    let mut w: Vec<f64> = (0..card).map(|_| rng.random::<f64>() + 0.01).collect();
    if zeros && rng.random_bool(0.15) {
        let k = rng.random_range(0..card);
        w[k] = 0.0;
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// A random DAG with `2..=max_nodes` nodes of 2 or 3 states, declared in a
/// shuffled order so that declaration order is not topological.
pub fn random_spec(seed: u64, max_nodes: usize) -> NetworkSpec {
    random_spec_with(seed, max_nodes, 3, true)
}

/// Binary nodes only, no zero entries.
pub fn random_binary_spec(seed: u64, max_nodes: usize) -> NetworkSpec {
    random_spec_with(seed, max_nodes, 2, false)
}

#[allow(clippy::needless_range_loop)]
pub fn random_spec_with(seed: u64, max_nodes: usize, max_card: usize, zeros: bool) -> NetworkSpec {
    let mut r = rng(seed);
    let n = r.random_range(2..=max_nodes);
    let cards: Vec<usize> = (0..n).map(|_| r.random_range(2..=max_card)).collect();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for child in 1..n {
        for p in 0..child {
            if parents[child].len() < 3 && r.random_bool(0.45) {
                parents[child].push(p);
            }
        }
        parents[child].shuffle(&mut r);
    }
    let id = |i: usize| format!("V{i}");
    let mut spec = NetworkSpec::new(&format!("random-{seed}"));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    for &i in &order {
        let states: Vec<String> = (0..cards[i]).map(|s| format!("s{s}")).collect();
        let states: Vec<&str> = states.iter().map(String::as_str).collect();
        let vis = if r.random_bool(0.5) { Visibility::Observable } else { Visibility::Latent };
        spec.nodes.push(NodeDef::new(&id(i), &format!("node {i}"), &states, vis, r.random_bool(0.5)));
    }
    let mut e = 0;
    for child in 0..n {
        for &p in &parents[child] {
            e += 1;
            spec.edges.push(EdgeDef::new(&format!("E{e}"), &id(p), &id(child)));
        }
    }
    for &i in &order {
        let rows: usize = parents[i].iter().map(|&p| cards[p]).product();
        let table = (0..rows).map(|_| random_row(&mut r, cards[i], zeros)).collect();
        let ps: Vec<String> = parents[i].iter().map(|&p| id(p)).collect();
        let ps: Vec<&str> = ps.iter().map(String::as_str).collect();
        spec.cpts.push(CptDef::new(&id(i), &ps, table));
    }
    spec
}

/// All full assignments as state-name vectors aligned with `spec.nodes`.
pub fn enumerate(spec: &NetworkSpec) -> Vec<Vec<usize>> {
    let cards: Vec<usize> = spec.nodes.iter().map(|n| n.states.len()).collect();
    let total: usize = cards.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut cur = vec![0; cards.len()];
    for _ in 0..total {
        out.push(cur.clone());
        for k in (0..cards.len()).rev() {
            cur[k] += 1;
            if cur[k] < cards[k] {
                break;
            }
            cur[k] = 0;
        }
    }
    out
}

/// Child position, parent positions and rows of one table.
type Table<'a> = (usize, Vec<usize>, &'a [Vec<f64>]);

/// Table lookups resolved to node positions once per spec.
pub struct Oracle<'a> {
    spec: &'a NetworkSpec,
    cards: Vec<usize>,
    tables: Vec<Table<'a>>,
}

impl<'a> Oracle<'a> {
    pub fn new(spec: &'a NetworkSpec) -> Self {
        let pos = |id: &str| spec.nodes.iter().position(|n| n.id == id).unwrap();
        Oracle {
            spec,
            cards: spec.nodes.iter().map(|n| n.states.len()).collect(),
            tables: spec
                .cpts
                .iter()
                .map(|c| (pos(&c.child), c.parents.iter().map(|p| pos(p)).collect(), c.rows.as_slice()))
                .collect(),
        }
    }

    /// Product of one entry per table.
    pub fn joint(&self, states: &[usize]) -> f64 {
        let mut p = 1.0;
        for (child, parents, rows) in &self.tables {
            let mut row = 0;
            for &j in parents {
                row = row * self.cards[j] + states[j];
            }
            p *= rows[row][states[*child]];
        }
        p
    }

    pub fn posterior(&self, evidence: &Assignment, query: &str) -> Option<Vec<f64>> {
        let spec = self.spec;
        let pos = |id: &str| spec.nodes.iter().position(|n| n.id == id).unwrap();
        let ev: Vec<(usize, usize)> = evidence
            .iter()
            .map(|(k, v)| {
                let i = pos(k);
                (i, spec.nodes[i].states.iter().position(|s| s == v).unwrap())
            })
            .collect();
        let q = pos(query);
        let mut acc = vec![0.0; self.cards[q]];
        for states in enumerate(spec) {
            if ev.iter().all(|&(i, s)| states[i] == s) {
                acc[states[q]] += self.joint(&states);
            }
        }
        let z: f64 = acc.iter().sum();
        (z > 0.0).then(|| acc.iter().map(|a| a / z).collect())
    }
}

/// Joint probability from the spec tables.
pub fn oracle_joint(spec: &NetworkSpec, states: &[usize]) -> f64 {
    Oracle::new(spec).joint(states)
}

/// Posterior of `query` given `evidence` by summing the full joint.
/// `None` when the evidence has probability zero.
pub fn oracle_posterior(spec: &NetworkSpec, evidence: &Assignment, query: &str) -> Option<Vec<f64>> {
    Oracle::new(spec).posterior(evidence, query)
}

/// A random query: a node plus evidence on up to half of the others.
pub fn random_query<R: Rng>(r: &mut R, spec: &NetworkSpec) -> (Assignment, String) {
    let q = r.random_range(0..spec.nodes.len());
    let mut ev = Assignment::new();
    for (i, n) in spec.nodes.iter().enumerate() {
        if i != q && r.random_bool(0.4) {
            let s = r.random_range(0..n.states.len());
            ev.insert(&n.id, &n.states[s]);
        }
    }
    (ev, spec.nodes[q].id.clone())
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Exact population figures for a (world, folk) pair by enumerating the
/// world joint and scoring each observation pattern with the oracle.
#[derive(Debug, Clone, Default)]
pub struct Analytic {
    pub incidence: f64,
    pub true_rate: f64,
    pub false_rate: f64,
    /// Probability mass of suspicious users per attributed cue.
    pub attributions: std::collections::BTreeMap<String, f64>,
}

impl Analytic {
    pub fn false_share(&self) -> f64 {
        self.false_rate / self.incidence
    }
}

pub fn oracle_suspicion(folk: &NetworkSpec, obs: &Assignment, node: &str, state: &str) -> Option<f64> {
    let s = folk.node(node).unwrap().state_index(state).unwrap();
    oracle_posterior(folk, obs, node).map(|p| p[s])
}

/// Cue whose flip lowers suspicion the most, by the oracle.
pub fn oracle_basis(folk: &NetworkSpec, obs: &Assignment, node: &str, state: &str) -> Option<String> {
    let base = oracle_suspicion(folk, obs, node, state)?;
    let mut best: Option<(String, f64)> = None;
    for n in folk.nodes.iter().filter(|n| obs.get(&n.id).is_some()) {
        let cur = obs.get(&n.id).unwrap();
        let lowest = n
            .states
            .iter()
            .filter(|s| s.as_str() != cur)
            .filter_map(|s| oracle_suspicion(folk, &obs.clone().with(&n.id, s), node, state))
            .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.min(p))));
        if let Some(l) = lowest {
            let drop = base - l;
            if drop > 0.0 && best.as_ref().is_none_or(|(_, d)| drop > *d) {
                best = Some((n.id.clone(), drop));
            }
        }
    }
    best.map(|(id, _)| id)
}

pub fn analytic(world: &NetworkSpec, folk: &NetworkSpec, threshold: f64) -> Analytic {
    let obs_ids: Vec<usize> =
        (0..world.nodes.len()).filter(|&i| world.nodes[i].visibility == Visibility::Observable).collect();
    let gt = world.nodes.iter().position(|n| n.id == "N4").unwrap();
    let mut out = Analytic::default();
    let mut cache: std::collections::HashMap<Vec<usize>, (bool, Option<String>)> = Default::default();
    let oracle = Oracle::new(world);
    for states in enumerate(world) {
        let p = oracle.joint(&states);
        if p == 0.0 {
            continue;
        }
        let key: Vec<usize> = obs_ids.iter().map(|&i| states[i]).collect();
        let (sus, basis) = cache
            .entry(key)
            .or_insert_with(|| {
                let obs: Assignment = obs_ids
                    .iter()
                    .map(|&i| (world.nodes[i].id.clone(), world.nodes[i].states[states[i]].clone()))
                    .collect();
                let score = oracle_suspicion(folk, &obs, "N4", "true").unwrap();
                let sus = score >= threshold;
                (sus, if sus { oracle_basis(folk, &obs, "N4", "true") } else { None })
            })
            .clone();
        if sus {
            out.incidence += p;
            if states[gt] == 0 {
                out.true_rate += p;
            } else {
                out.false_rate += p;
            }
            if let Some(b) = basis {
                *out.attributions.entry(b).or_default() += p;
            }
        }
    }
    out
}
