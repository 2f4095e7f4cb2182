//! Outcome setting, prior edits and contingency edits, and their measured
//! effect on false suspicions.
//!
//! The raw graph operations ([`do_intervene`], [`set_prior`],
//! [`set_contingency`]) accept any node. [`FolkTheory::apply`] and
//! [`WorldModel::apply`] additionally require the target to be marked
//! intervenable in that model.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::folk::FolkTheory;
use crate::graph::{CptDef, GraphError, Network, ROW_SUM_TOLERANCE};
use crate::sim::{simulate_population, SuspicionStats, WorldModel};

/// Graph surgery: cut every edge into `node` and pin it to `outcome`.
pub fn do_intervene(net: &Network, node: &str, outcome: &str) -> Result<Network> {
    let i = net.require(node)?;
    let s = net.require_state(i, outcome)?;
    let mut spec = net.spec().clone();
    spec.edges.retain(|e| e.to != node);
    let mut point = vec![0.0; net.card(i)];
    point[s] = 1.0;
    *spec.cpt_mut(node).expect("validated network has a table per node") =
        CptDef { child: node.to_string(), parents: Vec::new(), rows: vec![point] };
    Ok(Network::build(spec)?)
}

/// Replaces a root node's prior.
pub fn set_prior(net: &Network, node: &str, prior: &[f64]) -> Result<Network> {
    let i = net.require(node)?;
    if !net.is_root(i) {
        return Err(Error::NotRoot(node.to_string()));
    }
    if prior.len() != net.card(i) {
        return Err(GraphError::RowLengthMismatch {
            node: node.to_string(),
            row: 0,
            expected: net.card(i),
            got: prior.len(),
        }
        .into());
    }
    let sum: f64 = prior.iter().sum();
    if prior.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(Error::NotNormalized { node: node.to_string(), sum });
    }
    let mut spec = net.spec().clone();
    spec.cpt_mut(node).expect("validated").rows = vec![prior.to_vec()];
    Ok(Network::build(spec)?)
}

/// Replaces one node's table. The parent set must stay the same; only the
/// strengths change.
pub fn set_contingency(net: &Network, node: &str, table: &CptDef) -> Result<Network> {
    net.require(node)?;
    if table.child != node {
        return Err(Error::InvalidIntervention(format!("table is for `{}`, not `{node}`", table.child)));
    }
    let current = net.spec().cpt(node).expect("validated");
    let want: BTreeSet<&String> = current.parents.iter().collect();
    let got: BTreeSet<&String> = table.parents.iter().collect();
    if want != got || got.len() != table.parents.len() {
        return Err(GraphError::ParentSetMismatch {
            node: node.to_string(),
            expected: current.parents.clone(),
            got: table.parents.clone(),
        }
        .into());
    }
    let mut spec = net.spec().clone();
    *spec.cpt_mut(node).expect("validated") = table.clone();
    Ok(Network::build(spec)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AppliesTo {
    World,
    Folk,
    Both,
}

impl AppliesTo {
    pub fn world(self) -> bool {
        matches!(self, AppliesTo::World | AppliesTo::Both)
    }

    pub fn folk(self) -> bool {
        matches!(self, AppliesTo::Folk | AppliesTo::Both)
    }
}

impl std::str::FromStr for AppliesTo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "world" => Ok(AppliesTo::World),
            "folk" => Ok(AppliesTo::Folk),
            "both" => Ok(AppliesTo::Both),
            other => Err(Error::InvalidIntervention(format!("applies-to must be world, folk or both, not `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Action {
    SetOutcome { state: String },
    SetPrior { probs: Vec<f64> },
    SetContingency { parents: Vec<String>, rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub target: String,
    #[serde(flatten)]
    pub action: Action,
    pub applies_to: AppliesTo,
}

impl Intervention {
    pub fn set_outcome(target: &str, state: &str, applies_to: AppliesTo) -> Self {
        Intervention {
            name: String::new(),
            target: target.to_string(),
            action: Action::SetOutcome { state: state.to_string() },
            applies_to,
        }
    }

    pub fn set_prior(target: &str, probs: Vec<f64>, applies_to: AppliesTo) -> Self {
        Intervention { name: String::new(), target: target.to_string(), action: Action::SetPrior { probs }, applies_to }
    }

    pub fn set_contingency(table: CptDef, applies_to: AppliesTo) -> Self {
        Intervention {
            name: String::new(),
            target: table.child,
            action: Action::SetContingency { parents: table.parents, rows: table.rows },
            applies_to,
        }
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    /// Applies the action with the raw graph operation, ignoring
    /// intervenability annotations.
    pub fn apply_raw(&self, net: &Network) -> Result<Network> {
        match &self.action {
            Action::SetOutcome { state } => do_intervene(net, &self.target, state),
            Action::SetPrior { probs } => set_prior(net, &self.target, probs),
            Action::SetContingency { parents, rows } => set_contingency(
                net,
                &self.target,
                &CptDef { child: self.target.clone(), parents: parents.clone(), rows: rows.clone() },
            ),
        }
    }

    /// Checks annotations, then applies. Used by the model wrappers.
    pub(crate) fn apply_checked(&self, net: &Network) -> Result<Network> {
        let node = net.node(&self.target).ok_or_else(|| GraphError::UnknownNode(self.target.clone()))?;
        if !node.intervenable {
            return Err(Error::NotIntervenable(self.target.clone()));
        }
        self.apply_raw(net)
    }
}

impl fmt::Display for Intervention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.name.is_empty() {
            write!(f, "{}: ", self.name)?;
        }
        let side = match self.applies_to {
            AppliesTo::World => "world",
            AppliesTo::Folk => "folk",
            AppliesTo::Both => "world+folk",
        };
        match &self.action {
            Action::SetOutcome { state } => write!(f, "do({}={state}) on {side}", self.target),
            Action::SetPrior { probs } => {
                let p: Vec<String> = probs.iter().map(|p| p.to_string()).collect();
                write!(f, "prior {}=({}) on {side}", self.target, p.join(","))
            }
            Action::SetContingency { parents, .. } => {
                write!(f, "table {} | {} on {side}", self.target, parents.join(" "))
            }
        }
    }
}

/// Simulation settings shared by baseline and post-intervention runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub n: u64,
    pub seed: u64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub false_suspicion_rate: Option<f64>,
    pub true_suspicion_rate: Option<f64>,
    pub suspicion_incidence: Option<f64>,
    pub false_share_among_suspicious: Option<f64>,
}

fn delta(post: Option<f64>, base: Option<f64>) -> Option<f64> {
    Some(post? - base?)
}

impl Deltas {
    pub fn between(baseline: &SuspicionStats, post: &SuspicionStats) -> Deltas {
        Deltas {
            false_suspicion_rate: delta(post.false_suspicion_rate, baseline.false_suspicion_rate),
            true_suspicion_rate: delta(post.true_suspicion_rate, baseline.true_suspicion_rate),
            suspicion_incidence: delta(post.suspicion_incidence, baseline.suspicion_incidence),
            false_share_among_suspicious: delta(
                post.false_share_among_suspicious,
                baseline.false_share_among_suspicious,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionReport {
    pub intervention: Intervention,
    pub description: String,
    pub baseline: SuspicionStats,
    pub post: SuspicionStats,
    pub deltas: Deltas,
    pub settings: SimSettings,
}

fn check_threshold(threshold: f64) -> Result<()> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(threshold))
    }
}

/// The (world, folk) pair after applying `iv` to the side(s) it names.
pub fn apply_to_models(world: &WorldModel, folk: &FolkTheory, iv: &Intervention) -> Result<(WorldModel, FolkTheory)> {
    let w = if iv.applies_to.world() { world.apply(iv)? } else { world.clone() };
    let f = if iv.applies_to.folk() { folk.apply(iv)? } else { folk.clone() };
    Ok((w, f))
}

pub fn evaluate_intervention(
    world: &WorldModel,
    folk: &FolkTheory,
    iv: &Intervention,
    settings: SimSettings,
) -> Result<InterventionReport> {
    check_threshold(settings.threshold)?;
    let (w, f) = apply_to_models(world, folk, iv)?;
    let (baseline, post) = rayon::join(
        || simulate_population(world, folk, settings.n, settings.threshold, settings.seed),
        || simulate_population(&w, &f, settings.n, settings.threshold, settings.seed),
    );
    Ok(report(iv, baseline?, post?, settings))
}

fn report(
    iv: &Intervention,
    baseline: SuspicionStats,
    post: SuspicionStats,
    settings: SimSettings,
) -> InterventionReport {
    InterventionReport {
        intervention: iv.clone(),
        description: iv.to_string(),
        deltas: Deltas::between(&baseline, &post),
        baseline,
        post,
        settings,
    }
}

/// Evaluates every candidate against one shared baseline and ranks them by
/// post-intervention false-suspicion rate (ascending, stable).
pub fn sweep_interventions(
    world: &WorldModel,
    folk: &FolkTheory,
    ivs: &[Intervention],
    settings: SimSettings,
) -> Result<Vec<InterventionReport>> {
    check_threshold(settings.threshold)?;
    if ivs.is_empty() {
        return Ok(Vec::new());
    }
    let models = ivs.iter().map(|iv| apply_to_models(world, folk, iv)).collect::<Result<Vec<_>>>()?;
    let baseline = simulate_population(world, folk, settings.n, settings.threshold, settings.seed)?;
    let posts = models
        .par_iter()
        .map(|(w, f)| simulate_population(w, f, settings.n, settings.threshold, settings.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut reports: Vec<InterventionReport> =
        ivs.iter().zip(posts).map(|(iv, post)| report(iv, baseline.clone(), post, settings)).collect();
    // Absent rates (n = 0) sort last.
    reports.sort_by(|a, b| {
        let key = |r: &InterventionReport| r.post.false_suspicion_rate.unwrap_or(f64::INFINITY);
        key(a).total_cmp(&key(b))
    });
    Ok(reports)
}

/// Reads a JSON array of interventions.
pub fn parse_catalog(text: &str) -> Result<Vec<Intervention>> {
    Ok(serde_json::from_str(text)?)
}
