//! Survey targets: the shares of suspicious users citing each basis, and
//! the population split between true and false suspicions.
//!
//! File format, one row per line (`#` comments, optional header):
//!
//! ```text
//! category,share,mapped_node
//! less-engagement,0.16,N6
//! strict-moderators,0.022,unmapped
//! truly-shadowbanned,0.034,population
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Network;

pub const TRULY_SHADOWBANNED: &str = "truly-shadowbanned";
pub const FALSE_SUSPICION: &str = "false-suspicion";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "node")]
pub enum Mapping {
    Node(String),
    Unmapped,
    Population,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRow {
    pub category: String,
    pub share: f64,
    pub mapping: Mapping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyTargets {
    pub rows: Vec<TargetRow>,
}

impl SurveyTargets {
    pub fn parse(text: &str) -> Result<SurveyTargets> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() || (rows.is_empty() && line.starts_with("category,")) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [category, share, mapped] = fields[..] else {
                return Err(Error::InvalidTargets(format!("line {}: expected `category,share,mapped_node`", i + 1)));
            };
            let share: f64 = share
                .parse()
                .ok()
                .filter(|s| (0.0..=1.0).contains(s))
                .ok_or_else(|| Error::InvalidTargets(format!("line {}: share `{share}` not in [0, 1]", i + 1)))?;
            let mapping = match mapped {
                "unmapped" => Mapping::Unmapped,
                "population" => Mapping::Population,
                "" => return Err(Error::InvalidTargets(format!("line {}: empty mapped_node", i + 1))),
                node => Mapping::Node(node.to_string()),
            };
            if rows.iter().any(|r: &TargetRow| r.category == category) {
                return Err(Error::InvalidTargets(format!("line {}: duplicate category `{category}`", i + 1)));
            }
            rows.push(TargetRow { category: category.to_string(), share, mapping });
        }
        let targets = SurveyTargets { rows };
        targets.check()?;
        Ok(targets)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::from("category,share,mapped_node\n");
        for r in &self.rows {
            let mapped = match &r.mapping {
                Mapping::Node(n) => n.as_str(),
                Mapping::Unmapped => "unmapped",
                Mapping::Population => "population",
            };
            out.push_str(&format!("{},{},{}\n", r.category, r.share, mapped));
        }
        out
    }

    fn check(&self) -> Result<()> {
        let t = self.share(TRULY_SHADOWBANNED);
        let f = self.share(FALSE_SUSPICION);
        match (t, f) {
            (Some(t), Some(f)) if (t + f - 1.0).abs() <= 1e-9 => Ok(()),
            (Some(t), Some(f)) => Err(Error::InvalidTargets(format!("population shares sum to {}", t + f))),
            _ => Err(Error::InvalidTargets(format!(
                "`{TRULY_SHADOWBANNED}` and `{FALSE_SUSPICION}` population rows are required"
            ))),
        }
    }

    /// Every mapped node must exist in `net`.
    pub fn check_against(&self, net: &Network) -> Result<()> {
        for r in &self.rows {
            if let Mapping::Node(n) = &r.mapping {
                if net.node(n).is_none() {
                    return Err(Error::InvalidTargets(format!("category `{}` maps to unknown node `{n}`", r.category)));
                }
            }
        }
        Ok(())
    }

    pub fn share(&self, category: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.category == category).map(|r| r.share)
    }

    pub fn truly_shadowbanned(&self) -> f64 {
        self.share(TRULY_SHADOWBANNED).expect("checked at parse")
    }

    pub fn false_suspicion(&self) -> f64 {
        self.share(FALSE_SUSPICION).expect("checked at parse")
    }

    /// Summed share per mapped cue node.
    pub fn cue_shares(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for r in &self.rows {
            if let Mapping::Node(n) = &r.mapping {
                *out.entry(n.clone()).or_insert(0.0) += r.share;
            }
        }
        out
    }

    /// Cue shares rescaled to sum to one.
    pub fn normalized_cue_shares(&self) -> BTreeMap<String, f64> {
        let shares = self.cue_shares();
        let total: f64 = shares.values().sum();
        shares.into_iter().map(|(k, v)| (k, if total > 0.0 { v / total } else { 0.0 })).collect()
    }

    /// Copy with the population rows replaced.
    pub fn with_population(mut self, truly_shadowbanned: f64) -> SurveyTargets {
        for r in &mut self.rows {
            if r.category == TRULY_SHADOWBANNED {
                r.share = truly_shadowbanned;
            } else if r.category == FALSE_SUSPICION {
                r.share = 1.0 - truly_shadowbanned;
            }
        }
        self
    }
}
