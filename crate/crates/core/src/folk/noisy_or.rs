//! Noisy-OR tables over binary nodes.
//!
//! State index 0 is the "present" state (the models list `true,false`).
//! A guard parent must be present for the child to be possible at all;
//! every other parent is an independent sufficient cause with a weight, and
//! the leak covers causes outside the model. A root node is the degenerate
//! case whose prior is its leak.

use crate::error::{Error, Result};
use crate::graph::{CptDef, Network};

const FIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyOr {
    pub child: String,
    /// Parents in table order.
    pub parents: Vec<String>,
    pub guards: Vec<bool>,
    /// One per parent; ignored for guards.
    pub weights: Vec<f64>,
    pub leak: f64,
}

impl NoisyOr {
    /// Reads the noisy-OR parameters back out of `node`'s table, failing if
    /// the table is not exactly of that form.
    pub fn from_network(net: &Network, node: &str) -> Result<NoisyOr> {
        let i = net.require(node)?;
        let not_noisy = || Error::NotNoisyOr(node.to_string());
        let parents = net.parents_of(i);
        if net.card(i) != 2 || parents.iter().any(|&p| net.card(p) != 2) {
            return Err(not_noisy());
        }
        let k = parents.len();
        let rows: Vec<&[f64]> = (0..1usize << k).map(|r| net.row_by_index(i, r)).collect();
        // Bit j (from the most significant end) of a row index is 0 when parent j is present.
        let present = |row: usize, j: usize| (row >> (k - 1 - j)) & 1 == 0;

        let guards: Vec<bool> =
            (0..k).map(|j| (0..rows.len()).filter(|&r| !present(r, j)).all(|r| rows[r][0] == 0.0)).collect();
        let row_of = |active: &[bool]| -> usize { (0..k).fold(0, |acc, j| (acc << 1) | usize::from(!active[j])) };
        let base: Vec<bool> = guards.clone();
        let leak = rows[row_of(&base)][0];
        let weights: Vec<f64> = (0..k)
            .map(|j| {
                if guards[j] || leak >= 1.0 {
                    return 0.0;
                }
                let mut active = base.clone();
                active[j] = true;
                1.0 - rows[row_of(&active)][1] / (1.0 - leak)
            })
            .collect();

        let fitted = NoisyOr {
            child: node.to_string(),
            parents: parents.iter().map(|&p| net.nodes()[p].id.clone()).collect(),
            guards,
            weights,
            leak,
        };
        let ok = fitted
            .rows()
            .iter()
            .zip(&rows)
            .all(|(a, b)| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= FIT_TOLERANCE));
        if ok {
            Ok(fitted)
        } else {
            Err(not_noisy())
        }
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        let k = self.parents.len();
        (0..1usize << k)
            .map(|r| {
                let present = |j: usize| (r >> (k - 1 - j)) & 1 == 0;
                if (0..k).any(|j| self.guards[j] && !present(j)) {
                    return vec![0.0, 1.0];
                }
                let absent = (0..k)
                    .filter(|&j| !self.guards[j] && present(j))
                    .fold(1.0 - self.leak, |q, j| q * (1.0 - self.weights[j]));
                vec![1.0 - absent, absent]
            })
            .collect()
    }

    pub fn to_cpt(&self) -> CptDef {
        CptDef { child: self.child.clone(), parents: self.parents.clone(), rows: self.rows() }
    }

    pub fn weight_mut(&mut self, parent: &str) -> Option<&mut f64> {
        let j = self.parents.iter().position(|p| p == parent)?;
        if self.guards[j] {
            None
        } else {
            Some(&mut self.weights[j])
        }
    }

    pub fn weight(&self, parent: &str) -> Option<f64> {
        let j = self.parents.iter().position(|p| p == parent)?;
        (!self.guards[j]).then(|| self.weights[j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeDef, NetworkSpec, NodeDef, Visibility};

    fn guarded() -> NoisyOr {
        NoisyOr {
            child: "C".into(),
            parents: vec!["G".into(), "A".into(), "B".into()],
            guards: vec![true, false, false],
            weights: vec![0.0, 0.5, 0.25],
            leak: 0.1,
        }
    }

    fn net_with(cpt: CptDef) -> Network {
        let mut s = NetworkSpec::new("m");
        for id in ["G", "A", "B", "C"] {
            s.nodes.push(NodeDef::binary(id, id, Visibility::Latent, false));
        }
        for (e, p) in ["G", "A", "B"].iter().enumerate() {
            s.edges.push(EdgeDef::new(&format!("E{e}"), p, "C"));
            s.cpts.push(CptDef::root(p, vec![0.5, 0.5]));
        }
        s.cpts.push(cpt);
        Network::build(s).unwrap()
    }

    #[test]
    fn rows_follow_noisy_or() {
        let rows = guarded().rows();
        // G, A, B all present
        assert!((rows[0][1] - 0.9 * 0.5 * 0.75).abs() < 1e-15);
        // G present, A and B absent: leak only
        assert!((rows[3][0] - 0.1).abs() < 1e-15);
        // G absent: impossible regardless of the rest
        for r in &rows[4..] {
            assert_eq!(r, &vec![0.0, 1.0]);
        }
    }

    #[test]
    fn extraction_round_trips() {
        let net = net_with(guarded().to_cpt());
        let back = NoisyOr::from_network(&net, "C").unwrap();
        assert_eq!(back.guards, vec![true, false, false]);
        assert!((back.leak - 0.1).abs() < 1e-12);
        assert!((back.weights[1] - 0.5).abs() < 1e-12);
        assert!((back.weights[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn root_prior_is_leak() {
        let net = net_with(guarded().to_cpt());
        let root = NoisyOr::from_network(&net, "A").unwrap();
        assert!(root.parents.is_empty());
        assert_eq!(root.leak, 0.5);
    }

    #[test]
    fn arbitrary_table_is_rejected() {
        let mut cpt = guarded().to_cpt();
        cpt.rows[1] = vec![0.99, 0.01];
        let net = net_with(cpt);
        assert!(matches!(NoisyOr::from_network(&net, "C"), Err(Error::NotNoisyOr(_))));
    }
}
