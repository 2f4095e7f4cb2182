//! Exact posterior marginals by variable elimination.

use super::{Assignment, Distribution, Factor, GraphError, Network};

/// One factor per node, built from its table.
pub fn network_factors(net: &Network) -> Vec<Factor> {
    (0..net.len())
        .map(|i| {
            let mut scope = net.parents_of(i).to_vec();
            scope.push(i);
            let cards = scope.iter().map(|&v| net.card(v)).collect();
            Factor::new(scope, cards, net.table(i).to_vec()).expect("validated table is a factor")
        })
        .collect()
}

/// `P(query | evidence)` with a min-degree elimination order.
pub fn posterior(net: &Network, evidence: &Assignment, query: &str) -> Result<Distribution, GraphError> {
    let q = net.require(query)?;
    let ev = net.resolve(evidence)?;
    let probs = posterior_indices(net, &ev, q, None)?;
    Ok(distribution(net, q, probs))
}

/// Like [`posterior`] but eliminating hidden variables in the given order.
/// `order` must list every node that is neither the query nor observed,
/// each exactly once.
pub fn posterior_with_order(
    net: &Network,
    evidence: &Assignment,
    query: &str,
    order: &[&str],
) -> Result<Distribution, GraphError> {
    let q = net.require(query)?;
    let ev = net.resolve(evidence)?;
    let order = order.iter().map(|id| net.require(id)).collect::<Result<Vec<_>, _>>()?;
    let probs = posterior_indices(net, &ev, q, Some(&order))?;
    Ok(distribution(net, q, probs))
}

fn distribution(net: &Network, q: usize, probs: Vec<f64>) -> Distribution {
    let node = &net.nodes()[q];
    Distribution { node: node.id.clone(), states: node.states.clone(), probs }
}

/// Index-level posterior. `evidence[i]` is the observed state of node `i`.
pub(crate) fn posterior_indices(
    net: &Network,
    evidence: &[Option<usize>],
    query: usize,
    order: Option<&[usize]>,
) -> Result<Vec<f64>, GraphError> {
    let mut factors: Vec<Factor> = network_factors(net)
        .into_iter()
        .map(|mut f| {
            for (v, s) in evidence.iter().enumerate() {
                if let Some(s) = *s {
                    f = f.restrict(v, s);
                }
            }
            f
        })
        .collect();

    let hidden: Vec<usize> = (0..net.len()).filter(|&v| v != query && evidence[v].is_none()).collect();
    let order = match order {
        Some(o) => {
            let mut sorted = o.to_vec();
            sorted.sort_unstable();
            if sorted != hidden {
                return Err(GraphError::BadOrdering("order must list each hidden variable exactly once".into()));
            }
            o.to_vec()
        }
        None => min_degree_order(&factors, &hidden),
    };

    for var in order {
        let (with, without): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.scope().contains(&var));
        factors = without;
        if let Some(product) = multiply_all(with)? {
            factors.push(product.sum_out(var)?);
        }
    }

    let joint = multiply_all(factors)?.unwrap_or_else(|| Factor::scalar(1.0));
    let card = net.card(query);
    let unnormalized: Vec<f64> = match evidence[query] {
        // Query observed: the remaining factor is a scalar P(evidence).
        Some(s) => {
            let mut v = vec![0.0; card];
            v[s] = joint.total();
            v
        }
        None => {
            debug_assert_eq!(joint.scope(), &[query]);
            joint.table().to_vec()
        }
    };
    let total: f64 = unnormalized.iter().sum();
    if total.is_nan() || total <= 0.0 || !total.is_finite() {
        return Err(GraphError::ImpossibleEvidence);
    }
    Ok(unnormalized.into_iter().map(|w| w / total).collect())
}

fn multiply_all(factors: Vec<Factor>) -> Result<Option<Factor>, GraphError> {
    let mut iter = factors.into_iter();
    let Some(first) = iter.next() else {
        return Ok(None);
    };
    iter.try_fold(first, |acc, f| acc.product(&f)).map(Some)
}

/// Greedy min-degree ordering over the interaction graph of `factors`;
/// ties go to the lowest node index (declaration order).
pub fn min_degree_order(factors: &[Factor], hidden: &[usize]) -> Vec<usize> {
    let n =
        factors.iter().flat_map(|f| f.scope().iter().copied()).chain(hidden.iter().copied()).max().map_or(0, |m| m + 1);
    let mut adj = vec![vec![false; n]; n];
    for f in factors {
        for &a in f.scope() {
            for &b in f.scope() {
                if a != b {
                    adj[a][b] = true;
                }
            }
        }
    }
    let mut remaining: Vec<usize> = hidden.to_vec();
    remaining.sort_unstable();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let degree = |v: usize| (0..n).filter(|&u| adj[v][u] && !eliminated[u]).count();
        let (pos, &v) = remaining.iter().enumerate().min_by_key(|&(_, &v)| degree(v)).expect("non-empty");
        let neighbors: Vec<usize> = (0..n).filter(|&u| adj[v][u] && !eliminated[u]).collect();
        for &a in &neighbors {
            for &b in &neighbors {
                if a != b {
                    adj[a][b] = true;
                }
            }
        }
        eliminated[v] = true;
        remaining.remove(pos);
        order.push(v);
    }
    order
}
