//! Ground-truth world model and population simulation.
//!
//! Each episode is one user: a full joint sample from the world network,
//! of which the user sees the observable nodes. The folk theory scores those
//! observations; the tally compares the resulting suspicion with the
//! sampled ground truth.

mod record;
mod rng;

pub use record::{model_hash, ModelRef, RunRecord};
pub use rng::{sample_index, StreamFactory};

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::folk::{check_threshold, FolkTheory};
use crate::graph::{Assignment, Network, Visibility};
use crate::intervention::Intervention;
use crate::io::parse_model;

pub const DEFAULT_WORLD_MODEL: &str = include_str!("../../models/default-world.ftm");

/// Episodes per work unit. Fixed so partitioning never depends on thread count.
const CHUNK: u64 = 4096;

/// Observation patterns are scored up front when there are at most this many.
const EAGER_PATTERNS: usize = 1024;

/// The platform as it actually operates.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    network: Network,
    observable: Vec<usize>,
    ground_truth_node: usize,
    ground_truth_state: usize,
}

impl WorldModel {
    pub fn new(network: Network, ground_truth_node: &str, ground_truth_state: &str) -> Result<WorldModel> {
        let node = network.require(ground_truth_node)?;
        let state = network.require_state(node, ground_truth_state)?;
        let observable = network
            .nodes()
            .iter()
            .enumerate()
            .filter(|(_, n)| n.visibility == Visibility::Observable)
            .map(|(i, _)| i)
            .collect();
        Ok(WorldModel { network, observable, ground_truth_node: node, ground_truth_state: state })
    }

    /// Ground truth is `N4 = true`.
    pub fn from_network(network: Network) -> Result<WorldModel> {
        Self::new(network, "N4", "true")
    }

    pub fn from_text(text: &str) -> Result<WorldModel> {
        Self::from_network(Network::build(parse_model(text)?)?)
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn observable(&self) -> Vec<&str> {
        self.observable.iter().map(|&i| self.network.nodes()[i].id.as_str()).collect()
    }

    pub fn ground_truth_node(&self) -> &str {
        &self.network.nodes()[self.ground_truth_node].id
    }

    /// Applies an intervention, requiring the target to be marked
    /// intervenable. Ignores `applies_to`.
    pub fn apply(&self, iv: &Intervention) -> Result<WorldModel> {
        let net = iv.apply_checked(&self.network)?;
        self.with_network(net)
    }

    pub(crate) fn with_network(&self, network: Network) -> Result<WorldModel> {
        let node = &self.network.nodes()[self.ground_truth_node];
        WorldModel::new(network, &node.id, &node.states[self.ground_truth_state])
    }

    /// Ancestral sample into `states` (indexed by node).
    fn sample_into<R: Rng>(&self, rng: &mut R, states: &mut [usize]) {
        for &v in self.network.topo_order() {
            let row = self.network.table_row(v, states);
            states[v] = sample_index(rng, row);
        }
    }

    fn is_shadowbanned(&self, states: &[usize]) -> bool {
        states[self.ground_truth_node] == self.ground_truth_state
    }
}

pub fn default_world_model() -> WorldModel {
    WorldModel::from_text(DEFAULT_WORLD_MODEL).expect("shipped world model is valid")
}

/// One simulated user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub index: u64,
    pub seed: u64,
    pub ground_truth: Assignment,
    pub observations: Assignment,
}

/// Samples episode `index` of the run seeded by `seed`.
pub fn sample_episode(world: &WorldModel, seed: u64, index: u64) -> Episode {
    let mut rng = StreamFactory::new(seed).stream(index);
    let mut states = vec![0; world.network.len()];
    world.sample_into(&mut rng, &mut states);
    let ground_truth = world.network.assignment_from_indices(&states);
    let observations = world
        .observable
        .iter()
        .map(|&i| {
            let n = &world.network.nodes()[i];
            (n.id.clone(), n.states[states[i]].clone())
        })
        .collect();
    Episode { index, seed, ground_truth, observations }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspicionStats {
    pub n: u64,
    pub suspicious: u64,
    pub true_suspicions: u64,
    pub false_suspicions: u64,
    /// `suspicious / n`; absent when `n = 0`.
    pub suspicion_incidence: Option<f64>,
    pub true_suspicion_rate: Option<f64>,
    pub false_suspicion_rate: Option<f64>,
    /// Absent when nobody is suspicious.
    pub false_share_among_suspicious: Option<f64>,
    pub true_share_among_suspicious: Option<f64>,
    /// Suspicious episodes by the cue the folk theory attributes them to.
    pub attributions: BTreeMap<String, u64>,
    pub unattributed: u64,
    pub seed: u64,
    pub threshold: f64,
}

impl SuspicionStats {
    /// Attribution counts for `cues`, rescaled to sum to one over those cues.
    pub fn attribution_shares(&self, cues: &[&str]) -> Option<BTreeMap<String, f64>> {
        let counts: Vec<u64> = cues.iter().map(|c| self.attributions.get(*c).copied().unwrap_or(0)).collect();
        let total: u64 = counts.iter().sum();
        (total > 0).then(|| cues.iter().zip(counts).map(|(c, k)| (c.to_string(), k as f64 / total as f64)).collect())
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    suspicious: u64,
    true_suspicions: u64,
    false_suspicions: u64,
    attributions: Vec<u64>,
    unattributed: u64,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.suspicious += other.suspicious;
        self.true_suspicions += other.true_suspicions;
        self.false_suspicions += other.false_suspicions;
        self.unattributed += other.unattributed;
        if self.attributions.len() < other.attributions.len() {
            self.attributions.resize(other.attributions.len(), 0);
        }
        for (a, b) in self.attributions.iter_mut().zip(other.attributions) {
            *a += b;
        }
        self
    }
}

#[derive(Debug, Clone, Copy)]
struct PatternScore {
    suspects: bool,
    basis: Option<usize>,
}

/// Maps world observations onto folk evidence.
struct Bridge<'a> {
    world: &'a WorldModel,
    folk: &'a FolkTheory,
    /// (world node, folk node, folk state per world state)
    links: Vec<(usize, usize, Vec<usize>)>,
    threshold: f64,
}

impl<'a> Bridge<'a> {
    fn new(world: &'a WorldModel, folk: &'a FolkTheory, threshold: f64) -> Result<Bridge<'a>> {
        let mut links = Vec::new();
        for &f in folk.observable_indices() {
            let fnode = &folk.network().nodes()[f];
            let w = world.network.node_index(&fnode.id).filter(|w| world.observable.contains(w)).ok_or_else(|| {
                Error::ObservableMismatch(format!("`{}` is not observable in the world model", fnode.id))
            })?;
            let wnode = &world.network.nodes()[w];
            let map = wnode
                .states
                .iter()
                .map(|s| fnode.state_index(s))
                .collect::<Option<Vec<_>>>()
                .filter(|m| m.len() == fnode.states.len())
                .ok_or_else(|| {
                    Error::ObservableMismatch(format!("`{}` has different states in the two models", fnode.id))
                })?;
            links.push((w, f, map));
        }
        Ok(Bridge { world, folk, links, threshold })
    }

    fn pattern(&self, world_states: &[usize]) -> Vec<usize> {
        self.links.iter().map(|(w, _, map)| map[world_states[*w]]).collect()
    }

    fn score(&self, pattern: &[usize]) -> Result<PatternScore> {
        let mut evidence = vec![None; self.folk.network().len()];
        for ((_, f, _), &s) in self.links.iter().zip(pattern) {
            evidence[*f] = Some(s);
        }
        let p = self.folk.score(&evidence)?;
        let suspects = p >= self.threshold;
        let basis = if suspects { self.folk.basis(&evidence)? } else { None };
        Ok(PatternScore { suspects, basis })
    }

    fn pattern_count(&self) -> usize {
        self.links
            .iter()
            .try_fold(1usize, |acc, (_, f, _)| acc.checked_mul(self.folk.network().card(*f)))
            .unwrap_or(usize::MAX)
    }

    fn all_patterns(&self) -> Result<HashMap<Vec<usize>, PatternScore>> {
        let cards: Vec<usize> = self.links.iter().map(|(_, f, _)| self.folk.network().card(*f)).collect();
        let total = self.pattern_count();
        let mut out = HashMap::with_capacity(total);
        let mut digits = vec![0; cards.len()];
        for i in 0..total {
            crate::graph::decode_digits(i, &cards, &mut digits);
            let score = self.score(&digits)?;
            out.insert(digits.clone(), score);
        }
        Ok(out)
    }

    fn run_chunk(
        &self,
        factory: &StreamFactory,
        start: u64,
        end: u64,
        eager: Option<&HashMap<Vec<usize>, PatternScore>>,
    ) -> Result<Tally> {
        let mut lazy: HashMap<Vec<usize>, PatternScore> = HashMap::new();
        let mut tally = Tally { attributions: vec![0; self.folk.network().len()], ..Tally::default() };
        let mut states = vec![0; self.world.network.len()];
        for index in start..end {
            let mut rng = factory.stream(index);
            self.world.sample_into(&mut rng, &mut states);
            let pattern = self.pattern(&states);
            let score = match eager {
                Some(table) => table[&pattern],
                None => match lazy.get(&pattern) {
                    Some(s) => *s,
                    None => {
                        let s = self.score(&pattern)?;
                        lazy.insert(pattern, s);
                        s
                    }
                },
            };
            if !score.suspects {
                continue;
            }
            tally.suspicious += 1;
            if self.world.is_shadowbanned(&states) {
                tally.true_suspicions += 1;
            } else {
                tally.false_suspicions += 1;
            }
            match score.basis {
                Some(b) => tally.attributions[b] += 1,
                None => tally.unattributed += 1,
            }
        }
        Ok(tally)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Simulates `n` users on the current rayon pool.
pub fn simulate_population(
    world: &WorldModel,
    folk: &FolkTheory,
    n: u64,
    threshold: f64,
    seed: u64,
) -> Result<SuspicionStats> {
    check_threshold(threshold)?;
    let bridge = Bridge::new(world, folk, threshold)?;
    let eager = if bridge.pattern_count() <= EAGER_PATTERNS && n > 0 { Some(bridge.all_patterns()?) } else { None };
    let factory = StreamFactory::new(seed);
    let chunks = n.div_ceil(CHUNK);
    let tallies: Vec<Result<Tally>> = (0..chunks)
        .into_par_iter()
        .map(|c| bridge.run_chunk(&factory, c * CHUNK, ((c + 1) * CHUNK).min(n), eager.as_ref()))
        .collect();
    let mut tally = Tally { attributions: vec![0; folk.network().len()], ..Tally::default() };
    for t in tallies {
        tally = tally.merge(t?);
    }

    let attributions = tally
        .attributions
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(i, &k)| (folk.network().nodes()[i].id.clone(), k))
        .collect();
    Ok(SuspicionStats {
        n,
        suspicious: tally.suspicious,
        true_suspicions: tally.true_suspicions,
        false_suspicions: tally.false_suspicions,
        suspicion_incidence: ratio(tally.suspicious, n),
        true_suspicion_rate: ratio(tally.true_suspicions, n),
        false_suspicion_rate: ratio(tally.false_suspicions, n),
        false_share_among_suspicious: ratio(tally.false_suspicions, tally.suspicious),
        true_share_among_suspicious: ratio(tally.true_suspicions, tally.suspicious),
        attributions,
        unattributed: tally.unattributed,
        seed,
        threshold,
    })
}

/// [`simulate_population`] on a dedicated pool of `workers` threads.
pub fn simulate_population_with_workers(
    world: &WorldModel,
    folk: &FolkTheory,
    n: u64,
    threshold: f64,
    seed: u64,
    workers: usize,
) -> Result<SuspicionStats> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidSettings(e.to_string()))?;
    pool.install(|| simulate_population(world, folk, n, threshold, seed))
}
