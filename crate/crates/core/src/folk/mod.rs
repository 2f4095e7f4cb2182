//! The user's folk theory of shadowbanning: suspicion scoring, cue
//! attribution and calibration against survey shares.

mod calibrate;
mod noisy_or;
mod targets;

pub use calibrate::{
    calibrate, calibration_loss, CalibrationResult, CalibrationSettings, FreeParam, ParamKind, Residual, Side,
};
pub use noisy_or::NoisyOr;
pub use targets::{Mapping, SurveyTargets, TargetRow, FALSE_SUSPICION, TRULY_SHADOWBANNED};

use crate::error::{Error, Result};
use crate::graph::{posterior_indices, Assignment, GraphError, Network, Visibility};
use crate::intervention::Intervention;
use crate::io::parse_model;

pub const DEFAULT_FOLK_MODEL: &str = include_str!("../../models/default-folk.ftm");
pub const DEFAULT_TARGETS: &str = include_str!("../../models/survey-targets.csv");

pub const DEFAULT_SUSPICION_NODE: &str = "N4";
pub const DEFAULT_SUSPICION_STATE: &str = "true";

/// A network read as a user's mental model, with the node whose posterior
/// is the user's suspicion.
#[derive(Debug, Clone, PartialEq)]
pub struct FolkTheory {
    network: Network,
    observable: Vec<usize>,
    suspicion_node: usize,
    suspicion_state: usize,
}

impl FolkTheory {
    pub fn new(network: Network, suspicion_node: &str, suspicion_state: &str) -> Result<FolkTheory> {
        let node = network.require(suspicion_node)?;
        let state = network.require_state(node, suspicion_state)?;
        if network.nodes()[node].visibility != Visibility::Latent {
            return Err(Error::InvalidModel(format!("suspicion node `{suspicion_node}` must be latent")));
        }
        let observable = network
            .nodes()
            .iter()
            .enumerate()
            .filter(|(_, n)| n.visibility == Visibility::Observable)
            .map(|(i, _)| i)
            .collect();
        Ok(FolkTheory { network, observable, suspicion_node: node, suspicion_state: state })
    }

    /// Uses the default suspicion query `N4 = true`.
    pub fn from_network(network: Network) -> Result<FolkTheory> {
        Self::new(network, DEFAULT_SUSPICION_NODE, DEFAULT_SUSPICION_STATE)
    }

    pub fn from_text(text: &str) -> Result<FolkTheory> {
        Self::from_network(Network::build(parse_model(text)?)?)
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn observable(&self) -> Vec<&str> {
        self.observable.iter().map(|&i| self.network.nodes()[i].id.as_str()).collect()
    }

    pub(crate) fn observable_indices(&self) -> &[usize] {
        &self.observable
    }

    pub fn intervenable(&self) -> Vec<String> {
        self.network.intervenable_ids()
    }

    pub fn suspicion_node(&self) -> &str {
        &self.network.nodes()[self.suspicion_node].id
    }

    pub fn suspicion_state(&self) -> &str {
        &self.network.nodes()[self.suspicion_node].states[self.suspicion_state]
    }

    fn evidence(&self, obs: &Assignment) -> Result<Vec<Option<usize>>> {
        let ev = self.network.resolve(obs)?;
        for (i, s) in ev.iter().enumerate() {
            if s.is_some() && !self.observable.contains(&i) {
                return Err(Error::NonObservableEvidence(self.network.nodes()[i].id.clone()));
            }
        }
        Ok(ev)
    }

    /// Posterior probability of the suspicion state given observations.
    pub fn suspicion_probability(&self, obs: &Assignment) -> Result<f64> {
        let ev = self.evidence(obs)?;
        self.score(&ev)
    }

    pub fn suspects(&self, obs: &Assignment, threshold: f64) -> Result<bool> {
        check_threshold(threshold)?;
        Ok(self.suspicion_probability(obs)? >= threshold)
    }

    /// The single observed cue the model would cite: the one whose flip
    /// lowers suspicion the most. Ties go to declaration order; `None` when
    /// no observed cue raises suspicion.
    pub fn attribute_basis(&self, obs: &Assignment) -> Result<Option<String>> {
        let ev = self.evidence(obs)?;
        Ok(self.basis(&ev)?.map(|i| self.network.nodes()[i].id.clone()))
    }

    pub(crate) fn score(&self, evidence: &[Option<usize>]) -> Result<f64> {
        let probs = posterior_indices(&self.network, evidence, self.suspicion_node, None)?;
        Ok(probs[self.suspicion_state])
    }

    pub(crate) fn basis(&self, evidence: &[Option<usize>]) -> Result<Option<usize>> {
        let base = self.score(evidence)?;
        let mut best: Option<(usize, f64)> = None;
        let mut flipped = evidence.to_vec();
        for &cue in &self.observable {
            let Some(observed) = evidence[cue] else { continue };
            // Lowest suspicion over the alternative states of this cue.
            let mut lowest: Option<f64> = None;
            for alt in (0..self.network.card(cue)).filter(|&s| s != observed) {
                flipped[cue] = Some(alt);
                match self.score(&flipped) {
                    Ok(p) => lowest = Some(lowest.map_or(p, |l: f64| l.min(p))),
                    Err(Error::Graph(GraphError::ImpossibleEvidence)) => {}
                    Err(e) => return Err(e),
                }
            }
            flipped[cue] = Some(observed);
            let Some(lowest) = lowest else { continue };
            let drop = base - lowest;
            if drop > 0.0 && best.is_none_or(|(_, d)| drop > d) {
                best = Some((cue, drop));
            }
        }
        Ok(best.map(|(i, _)| i))
    }

    /// Applies an intervention to this model, requiring the target to be
    /// marked intervenable. Ignores `applies_to`.
    pub fn apply(&self, iv: &Intervention) -> Result<FolkTheory> {
        let net = iv.apply_checked(&self.network)?;
        FolkTheory::new(net, self.suspicion_node(), self.suspicion_state())
    }

    pub(crate) fn with_network(&self, network: Network) -> Result<FolkTheory> {
        FolkTheory::new(network, self.suspicion_node(), self.suspicion_state())
    }
}

pub(crate) fn check_threshold(threshold: f64) -> Result<()> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(threshold))
    }
}

/// The shipped, calibrated folk theory.
pub fn default_folk_theory() -> FolkTheory {
    FolkTheory::from_text(DEFAULT_FOLK_MODEL).expect("shipped folk model is valid")
}

pub fn default_targets() -> SurveyTargets {
    SurveyTargets::parse(DEFAULT_TARGETS).expect("shipped targets are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{BuildOptions, Network};
    use crate::intervention::set_prior;

    fn patterns() -> Vec<Assignment> {
        let mut out = Vec::new();
        for n2 in ["true", "false"] {
            for n6 in ["true", "false"] {
                for n7 in ["true", "false"] {
                    out.push(Assignment::new().with("N2", n2).with("N6", n6).with("N7", n7));
                }
            }
        }
        out
    }

    #[test]
    fn default_shape() {
        let folk = default_folk_theory();
        assert!(folk.network().spec().validate().is_empty());
        assert_eq!(folk.network().len(), 7);
        assert_eq!(folk.network().active_edge_count(), 7);
        assert_eq!(folk.observable(), vec!["N2", "N6", "N7"]);
        assert!(folk.intervenable().contains(&"N1".to_string()));
    }

    #[test]
    fn including_the_feedback_edge_is_cyclic() {
        let spec = parse_model(DEFAULT_FOLK_MODEL).unwrap();
        let err = Network::build_with(spec, BuildOptions { include_excluded: true }).unwrap_err();
        match err {
            GraphError::Cyclic { edges } => assert!(edges.contains(&"E8".to_string())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hard_guard_in_table() {
        let folk = default_folk_theory();
        let net = folk.network();
        let n4 = net.node_index("N4").unwrap();
        let n1_pos = net.parents_of(n4).iter().position(|&p| p == net.node_index("N1").unwrap()).unwrap();
        for row in 0..net.parent_rows(n4) {
            if net.row_tuple(n4, row)[n1_pos] == 1 {
                assert_eq!(net.row_by_index(n4, row)[0], 0.0);
            }
        }
    }

    #[test]
    fn attest_absence_zeroes_suspicion() {
        let folk = default_folk_theory();
        let net = set_prior(folk.network(), "N1", &[0.0, 1.0]).unwrap();
        let folk = folk.with_network(net).unwrap();
        for obs in patterns() {
            assert_eq!(folk.suspicion_probability(&obs).unwrap(), 0.0);
            assert_eq!(folk.attribute_basis(&obs).unwrap(), None);
        }
    }

    #[test]
    fn evidence_must_be_observable() {
        let folk = default_folk_theory();
        assert!(matches!(
            folk.suspicion_probability(&Assignment::new().with("N5", "true")),
            Err(Error::NonObservableEvidence(n)) if n == "N5"
        ));
    }

    #[test]
    fn thresholds() {
        let folk = default_folk_theory();
        let obs = Assignment::new().with("N6", "true");
        assert!(folk.suspects(&obs, 0.0).unwrap());
        assert!(!folk.suspects(&obs, 1.0).unwrap());
        assert!(matches!(folk.suspects(&obs, 1.5), Err(Error::InvalidThreshold(_))));
        assert!(matches!(folk.suspects(&obs, -0.1), Err(Error::InvalidThreshold(_))));
    }

    #[test]
    fn basis_edge_cases() {
        let folk = default_folk_theory();
        let none = Assignment::new().with("N2", "false").with("N6", "false").with("N7", "false");
        assert_eq!(folk.attribute_basis(&none).unwrap(), None);
        assert_eq!(folk.attribute_basis(&Assignment::new()).unwrap(), None);
        let single = Assignment::new().with("N6", "true");
        assert_eq!(folk.attribute_basis(&single).unwrap().as_deref(), Some("N6"));
    }

    #[test]
    fn suspicion_node_must_be_latent() {
        let net = default_folk_theory().network().clone();
        assert!(matches!(FolkTheory::new(net, "N6", "true"), Err(Error::InvalidModel(_))));
    }
}
