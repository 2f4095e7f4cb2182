//! Fitting folk and world parameters to survey shares.
//!
//! Coordinate descent: each sweep visits the free parameters in order and
//! tries an evenly spaced grid of values centred on the current one; the
//! grid span starts at the full bound range and shrinks geometrically per
//! sweep. A candidate is accepted only if it strictly lowers the loss, so
//! the loss trace never increases. Every evaluation simulates with the same
//! `(n, seed)`, which makes the whole run a pure function of its inputs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{FolkTheory, NoisyOr, SurveyTargets, FALSE_SUSPICION, TRULY_SHADOWBANNED};
use crate::error::{Error, Result};
use crate::graph::Network;
use crate::sim::{simulate_population, SuspicionStats, WorldModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Folk,
    World,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamKind {
    /// Root prior of the present state.
    Prior,
    Leak,
    Weight(String),
}

/// A calibratable number, written `side:node:prior`, `side:node:leak` or
/// `side:node:weight:parent`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FreeParam {
    pub side: Side,
    pub node: String,
    pub kind: ParamKind,
}

impl fmt::Display for FreeParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = match self.side {
            Side::Folk => "folk",
            Side::World => "world",
        };
        match &self.kind {
            ParamKind::Prior => write!(f, "{side}:{}:prior", self.node),
            ParamKind::Leak => write!(f, "{side}:{}:leak", self.node),
            ParamKind::Weight(p) => write!(f, "{side}:{}:weight:{p}", self.node),
        }
    }
}

impl FromStr for FreeParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidSettings(format!("bad parameter `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        let side = match parts.first() {
            Some(&"folk") => Side::Folk,
            Some(&"world") => Side::World,
            _ => return Err(bad()),
        };
        let kind = match parts[..] {
            [_, _, "prior"] => ParamKind::Prior,
            [_, _, "leak"] => ParamKind::Leak,
            [_, _, "weight", parent] => ParamKind::Weight(parent.to_string()),
            _ => return Err(bad()),
        };
        Ok(FreeParam { side, node: parts[1].to_string(), kind })
    }
}

impl TryFrom<String> for FreeParam {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FreeParam> for String {
    fn from(p: FreeParam) -> String {
        p.to_string()
    }
}

fn default_grid_points() -> usize {
    11
}
fn default_iterations() -> usize {
    8
}
fn default_shrink() -> f64 {
    0.5
}
fn default_lower() -> f64 {
    0.001
}
fn default_upper() -> f64 {
    0.999
}
fn default_decimals() -> u32 {
    6
}
fn default_threshold() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    pub params: Vec<FreeParam>,
    /// Candidate values per parameter per sweep.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Number of sweeps over all parameters.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_shrink")]
    pub shrink: f64,
    #[serde(default = "default_lower")]
    pub lower: f64,
    #[serde(default = "default_upper")]
    pub upper: f64,
    /// Candidate values are rounded to this many decimal places.
    #[serde(default = "default_decimals")]
    pub decimals: u32,
    pub n: u64,
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "one")]
    pub population_weight: f64,
    #[serde(default = "one")]
    pub attribution_weight: f64,
}

impl CalibrationSettings {
    pub fn new(params: Vec<FreeParam>, n: u64, seed: u64) -> CalibrationSettings {
        CalibrationSettings {
            params,
            grid_points: default_grid_points(),
            iterations: default_iterations(),
            shrink: default_shrink(),
            lower: default_lower(),
            upper: default_upper(),
            decimals: default_decimals(),
            n,
            seed,
            threshold: default_threshold(),
            population_weight: 1.0,
            attribution_weight: 1.0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::NoFreeParameters);
        }
        let bad = |m: &str| Err(Error::InvalidSettings(m.to_string()));
        if self.grid_points < 2 {
            return bad("grid_points must be at least 2");
        }
        if !(0.0 <= self.lower && self.lower < self.upper && self.upper <= 1.0) {
            return bad("bounds must satisfy 0 <= lower < upper <= 1");
        }
        if !(self.shrink > 0.0 && self.shrink <= 1.0) {
            return bad("shrink must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidThreshold(self.threshold));
        }
        Ok(())
    }

    fn round(&self, v: f64) -> f64 {
        let scale = 10f64.powi(self.decimals as i32);
        ((v.clamp(self.lower, self.upper) * scale).round() / scale).clamp(self.lower, self.upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub target: String,
    pub simulated: Option<f64>,
    pub expected: f64,
    pub residual: f64,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub folk: FolkTheory,
    pub world: WorldModel,
    /// Loss before any step, then after each accepted step.
    pub loss_trace: Vec<f64>,
    pub residuals: Vec<Residual>,
    pub stats: SuspicionStats,
    pub accepted_steps: usize,
    pub evaluations: usize,
    pub parameters: Vec<(String, f64)>,
    pub settings: CalibrationSettings,
}

impl CalibrationResult {
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("trace starts with the initial loss")
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "loss_trace": self.loss_trace,
            "final_loss": self.final_loss(),
            "accepted_steps": self.accepted_steps,
            "evaluations": self.evaluations,
            "parameters": self.parameters.iter().map(|(k, v)| (k.clone(), *v)).collect::<BTreeMap<_, _>>(),
            "residuals": self.residuals,
            "stats": self.stats,
            "settings": self.settings,
        })
    }
}

/// Weighted squared-residual loss of a (folk, world) pair against targets.
pub fn calibration_loss(
    folk: &FolkTheory,
    world: &WorldModel,
    targets: &SurveyTargets,
    settings: &CalibrationSettings,
) -> Result<(f64, Vec<Residual>, SuspicionStats)> {
    let stats = simulate_population(world, folk, settings.n, settings.threshold, settings.seed)?;
    let mut residuals = Vec::new();

    let true_share = stats.true_share_among_suspicious;
    residuals.push(Residual {
        target: TRULY_SHADOWBANNED.to_string(),
        simulated: true_share,
        expected: targets.truly_shadowbanned(),
        // Nobody suspicious: worst possible share error.
        residual: true_share.map_or(1.0, |s| s - targets.truly_shadowbanned()),
        weight: settings.population_weight,
    });
    // Redundant with the row above; reported, not weighted.
    let false_share = stats.false_share_among_suspicious;
    residuals.push(Residual {
        target: FALSE_SUSPICION.to_string(),
        simulated: false_share,
        expected: targets.false_suspicion(),
        residual: false_share.map_or(1.0, |s| s - targets.false_suspicion()),
        weight: 0.0,
    });

    let cue_targets = targets.normalized_cue_shares();
    let cues: Vec<&str> = cue_targets.keys().map(String::as_str).collect();
    let shares = stats.attribution_shares(&cues);
    for (cue, expected) in &cue_targets {
        let simulated = shares.as_ref().map(|s| s[cue]);
        residuals.push(Residual {
            target: format!("attribution:{cue}"),
            simulated,
            expected: *expected,
            residual: simulated.unwrap_or(0.0) - expected,
            weight: settings.attribution_weight,
        });
    }

    let loss = residuals.iter().map(|r| r.weight * r.residual * r.residual).sum();
    Ok((loss, residuals, stats))
}

/// Noisy-OR tables touched by the free parameters, keyed by (side, node).
struct Parameterization {
    tables: BTreeMap<(Side, String), NoisyOr>,
}

impl Parameterization {
    fn new(folk: &FolkTheory, world: &WorldModel, params: &[FreeParam]) -> Result<Parameterization> {
        let mut tables = BTreeMap::new();
        for p in params {
            let net = match p.side {
                Side::Folk => folk.network(),
                Side::World => world.network(),
            };
            let key = (p.side, p.node.clone());
            if !tables.contains_key(&key) {
                tables.insert(key.clone(), NoisyOr::from_network(net, &p.node)?);
            }
            let table = &tables[&key];
            match &p.kind {
                ParamKind::Prior if !table.parents.is_empty() => {
                    return Err(Error::InvalidSettings(format!("`{p}`: node has parents, use leak")))
                }
                ParamKind::Weight(parent) if table.weight(parent).is_none() => {
                    return Err(Error::InvalidSettings(format!(
                        "`{p}`: `{parent}` is not a weighted parent of `{}`",
                        p.node
                    )))
                }
                _ => {}
            }
        }
        Ok(Parameterization { tables })
    }

    fn values(&self, params: &[FreeParam]) -> Vec<f64> {
        params
            .iter()
            .map(|p| {
                let t = &self.tables[&(p.side, p.node.clone())];
                match &p.kind {
                    ParamKind::Prior | ParamKind::Leak => t.leak,
                    ParamKind::Weight(parent) => t.weight(parent).expect("checked"),
                }
            })
            .collect()
    }

    fn models(
        &self,
        folk: &FolkTheory,
        world: &WorldModel,
        params: &[FreeParam],
        values: &[f64],
    ) -> Result<(FolkTheory, WorldModel)> {
        let mut tables = self.tables.clone();
        for (p, &v) in params.iter().zip(values) {
            let t = tables.get_mut(&(p.side, p.node.clone())).expect("registered");
            match &p.kind {
                ParamKind::Prior | ParamKind::Leak => t.leak = v,
                ParamKind::Weight(parent) => *t.weight_mut(parent).expect("checked") = v,
            }
        }
        let mut folk_spec = folk.network().spec().clone();
        let mut world_spec = world.network().spec().clone();
        for ((side, node), t) in &tables {
            let spec = match side {
                Side::Folk => &mut folk_spec,
                Side::World => &mut world_spec,
            };
            *spec.cpt_mut(node).expect("node has a table") = t.to_cpt();
        }
        Ok((folk.with_network(Network::build(folk_spec)?)?, world.with_network(Network::build(world_spec)?)?))
    }
}

pub fn calibrate(
    folk: &FolkTheory,
    world: &WorldModel,
    targets: &SurveyTargets,
    settings: &CalibrationSettings,
) -> Result<CalibrationResult> {
    settings.check()?;
    targets.check_against(folk.network())?;
    let params = &settings.params;
    let param = Parameterization::new(folk, world, params)?;
    // Start from the bound-clamped, rounded values so the fitted files
    // carry the same precision as every candidate.
    let mut values: Vec<f64> = param.values(params).into_iter().map(|v| settings.round(v)).collect();

    let (mut cur_folk, mut cur_world) = param.models(folk, world, params, &values)?;
    let (mut loss, _, _) = calibration_loss(&cur_folk, &cur_world, targets, settings)?;
    let mut trace = vec![loss];
    let mut evaluations = 1;
    let mut accepted = 0;

    for sweep in 0..settings.iterations {
        let span = (settings.upper - settings.lower) * settings.shrink.powi(sweep as i32);
        for k in 0..params.len() {
            let start = values[k];
            let mut best: Option<(f64, f64, FolkTheory, WorldModel)> = None;
            for j in 0..settings.grid_points {
                let offset = j as f64 / (settings.grid_points - 1) as f64 - 0.5;
                let v = settings.round(start + span * offset);
                if v == start {
                    continue;
                }
                let mut trial = values.clone();
                trial[k] = v;
                let (f, w) = param.models(folk, world, params, &trial)?;
                let (l, _, _) = calibration_loss(&f, &w, targets, settings)?;
                evaluations += 1;
                let bar = best.as_ref().map_or(loss, |b| b.0);
                if l < bar {
                    best = Some((l, v, f, w));
                }
            }
            if let Some((l, v, f, w)) = best {
                values[k] = v;
                loss = l;
                cur_folk = f;
                cur_world = w;
                trace.push(loss);
                accepted += 1;
            }
        }
    }

    let (final_loss, residuals, stats) = calibration_loss(&cur_folk, &cur_world, targets, settings)?;
    debug_assert_eq!(final_loss, loss);
    Ok(CalibrationResult {
        folk: cur_folk,
        world: cur_world,
        loss_trace: trace,
        residuals,
        stats,
        accepted_steps: accepted,
        evaluations,
        parameters: params.iter().map(|p| p.to_string()).zip(values).collect(),
        settings: settings.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::folk::{default_folk_theory, default_targets, Mapping, TargetRow};
    use crate::sim::default_world_model;

    fn settings(params: &[&str]) -> CalibrationSettings {
        let mut s = CalibrationSettings::new(params.iter().map(|p| p.parse().unwrap()).collect(), 4000, 3);
        s.iterations = 2;
        s.grid_points = 5;
        s
    }

    #[test]
    fn param_strings_round_trip() {
        for s in ["folk:N1:prior", "world:N4:leak", "folk:N6:weight:N5"] {
            assert_eq!(s.parse::<FreeParam>().unwrap().to_string(), s);
        }
        assert!("moon:N1:prior".parse::<FreeParam>().is_err());
        assert!("folk:N1:size".parse::<FreeParam>().is_err());
    }

    #[test]
    fn no_parameters_is_an_error() {
        let s = settings(&[]);
        assert!(matches!(
            calibrate(&default_folk_theory(), &default_world_model(), &default_targets(), &s),
            Err(Error::NoFreeParameters)
        ));
    }

    #[test]
    fn guard_and_prior_misuse_rejected() {
        let folk = default_folk_theory();
        let world = default_world_model();
        for bad in ["folk:N4:weight:N1", "folk:N4:prior", "folk:N4:weight:N6"] {
            assert!(
                matches!(
                    calibrate(&folk, &world, &default_targets(), &settings(&[bad])),
                    Err(Error::InvalidSettings(_))
                ),
                "{bad}"
            );
        }
    }

    #[test]
    fn trace_never_increases_and_residuals_match() {
        let folk = default_folk_theory();
        let world = default_world_model();
        let s = settings(&["world:N5:prior", "folk:N5:prior", "world:N4:leak"]);
        let r = calibrate(&folk, &world, &default_targets(), &s).unwrap();
        assert_eq!(r.loss_trace.len(), r.accepted_steps + 1);
        assert!(r.loss_trace.windows(2).all(|w| w[1] <= w[0]));
        let (loss, residuals, _) = calibration_loss(&r.folk, &r.world, &default_targets(), &s).unwrap();
        assert_eq!(loss, r.final_loss());
        assert_eq!(residuals, r.residuals);
    }

    #[test]
    fn satisfied_targets_take_no_steps() {
        let folk = default_folk_theory();
        let world = default_world_model();
        let s = settings(&["world:N5:prior", "folk:N3:prior"]);
        // Targets read off the current simulation: loss is exactly zero.
        let (_, residuals, stats) = calibration_loss(&folk, &world, &default_targets(), &s).unwrap();
        let share = |t: &str| residuals.iter().find(|r| r.target == t).unwrap().simulated.unwrap();
        let mut rows = vec![
            TargetRow {
                category: TRULY_SHADOWBANNED.into(),
                share: stats.true_share_among_suspicious.unwrap(),
                mapping: Mapping::Population,
            },
            TargetRow {
                category: FALSE_SUSPICION.into(),
                share: 1.0 - stats.true_share_among_suspicious.unwrap(),
                mapping: Mapping::Population,
            },
        ];
        for cue in ["N2", "N6", "N7"] {
            rows.push(TargetRow {
                category: cue.into(),
                share: share(&format!("attribution:{cue}")),
                mapping: Mapping::Node(cue.into()),
            });
        }
        let targets = SurveyTargets { rows };
        let r = calibrate(&folk, &world, &targets, &s).unwrap();
        assert_eq!(r.loss_trace.len(), 1);
        assert_eq!(r.accepted_steps, 0);
    }

    #[test]
    fn deterministic() {
        let s = settings(&["world:N5:prior", "folk:N6:weight:N5"]);
        let a = calibrate(&default_folk_theory(), &default_world_model(), &default_targets(), &s).unwrap();
        let b = calibrate(&default_folk_theory(), &default_world_model(), &default_targets(), &s).unwrap();
        assert_eq!(a.loss_trace, b.loss_trace);
        assert_eq!(a.parameters, b.parameters);
        assert_eq!(
            crate::io::serialize_model(a.folk.network().spec()),
            crate::io::serialize_model(b.folk.network().spec())
        );
    }
}
