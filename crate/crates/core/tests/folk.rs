mod common;

use common::*;
use shadowfolk::folk::{default_folk_theory, default_targets, FolkTheory, Mapping, SurveyTargets, DEFAULT_FOLK_MODEL};
use shadowfolk::graph::Assignment;
use shadowfolk::io::parse_model;
use shadowfolk::Error;

fn obs(n2: bool, n6: bool, n7: bool) -> Assignment {
    let s = |b: bool| if b { "true" } else { "false" };
    Assignment::new().with("N2", s(n2)).with("N6", s(n6)).with("N7", s(n7))
}

// P(N4 = true | N2, N6, N7) for the shipped folk theory, indexed by
// (N2, N6, N7) with true first.
const PINNED: [((bool, bool, bool), f64); 8] = [
    ((true, true, true), 0.9498812167604508),
    ((true, true, false), 0.6900298265751099),
    ((true, false, true), 0.7175552584711187),
    ((true, false, false), 0.041670261580830044),
    ((false, true, true), 0.5239146894976268),
    ((false, true, false), 0.114462196544388),
    ((false, false, true), 0.12854981009741112),
    ((false, false, false), 0.002518391073661174),
];

#[test]
fn shipped_folk_theory_posteriors_are_pinned() {
    let folk = default_folk_theory();
    let spec = parse_model(DEFAULT_FOLK_MODEL).unwrap();
    for ((n2, n6, n7), want) in PINNED {
        let o = obs(n2, n6, n7);
        let got = folk.suspicion_probability(&o).unwrap();
        let oracle = oracle_suspicion(&spec, &o, "N4", "true").unwrap();
        assert!((got - want).abs() <= 1e-12, "{o:?}: {got}");
        assert!((oracle - want).abs() <= 1e-12, "{o:?}: oracle {oracle}");
    }
    let prior = folk.suspicion_probability(&Assignment::new()).unwrap();
    assert!((prior - 0.154323).abs() <= 1e-12);
}

#[test]
fn low_engagement_raises_suspicion() {
    let folk = default_folk_theory();
    for n2 in [true, false] {
        for n7 in [true, false] {
            let hi = folk.suspicion_probability(&obs(n2, true, n7)).unwrap();
            let lo = folk.suspicion_probability(&obs(n2, false, n7)).unwrap();
            assert!(hi > lo);
        }
    }
    let hi = folk.suspicion_probability(&Assignment::new().with("N6", "true")).unwrap();
    let lo = folk.suspicion_probability(&Assignment::new().with("N6", "false")).unwrap();
    assert!(hi > lo);
}

#[test]
fn suspicious_patterns_at_one_half() {
    let folk = default_folk_theory();
    let mut suspicious = Vec::new();
    for ((n2, n6, n7), _) in PINNED {
        if folk.suspects(&obs(n2, n6, n7), 0.5).unwrap() {
            suspicious.push((n2, n6, n7));
        }
    }
    assert_eq!(suspicious, vec![(true, true, true), (true, true, false), (true, false, true), (false, true, true)]);
}

#[test]
fn attribution_matches_the_oracle() {
    let folk = default_folk_theory();
    let spec = parse_model(DEFAULT_FOLK_MODEL).unwrap();
    for ((n2, n6, n7), _) in PINNED {
        let o = obs(n2, n6, n7);
        assert_eq!(folk.attribute_basis(&o).unwrap(), oracle_basis(&spec, &o, "N4", "true"), "{o:?}");
    }
    assert_eq!(folk.attribute_basis(&obs(false, true, true)).unwrap().as_deref(), Some("N7"));
    assert_eq!(folk.attribute_basis(&obs(true, true, true)).unwrap().as_deref(), Some("N2"));
    assert_eq!(folk.attribute_basis(&obs(true, true, false)).unwrap().as_deref(), Some("N6"));
    // nothing observed raises suspicion
    assert_eq!(folk.attribute_basis(&obs(false, false, false)).unwrap(), None);
    assert_eq!(folk.attribute_basis(&Assignment::new()).unwrap(), None);
}

#[test]
fn latent_evidence_and_bad_thresholds_are_rejected() {
    let folk = default_folk_theory();
    let ev = Assignment::new().with("N5", "true");
    assert!(matches!(folk.suspicion_probability(&ev), Err(Error::NonObservableEvidence(_))));
    assert!(matches!(folk.suspects(&Assignment::new(), 1.5), Err(Error::InvalidThreshold(_))));
    assert!(matches!(folk.suspects(&Assignment::new(), -0.1), Err(Error::InvalidThreshold(_))));
}

#[test]
fn suspicion_node_must_be_latent() {
    let net = default_folk_theory().network().clone();
    assert!(FolkTheory::new(net.clone(), "N6", "true").is_err());
    assert!(FolkTheory::new(net.clone(), "N9", "true").is_err());
    assert!(FolkTheory::new(net, "N4", "maybe").is_err());
}

#[test]
fn shipped_targets_aggregate_into_cues() {
    let t = default_targets();
    assert!((t.truly_shadowbanned() - 0.034).abs() < 1e-12);
    assert!((t.false_suspicion() - 0.966).abs() < 1e-12);
    let cues = t.cue_shares();
    assert!((cues["N6"] - 0.16).abs() < 1e-12);
    assert!((cues["N7"] - 0.199).abs() < 1e-12);
    assert!((cues["N2"] - 0.055).abs() < 1e-12);
    let norm = t.normalized_cue_shares();
    assert!((norm.values().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(t.rows.iter().filter(|r| r.mapping == Mapping::Unmapped).count() == 4);
    let back = SurveyTargets::parse(&t.serialize()).unwrap();
    assert_eq!(back, t);
}

#[test]
fn malformed_targets_are_rejected() {
    assert!(SurveyTargets::parse("category,share,mapped_node\nx,0.5,N6\n").is_err());
    let bad_split = "x,0.5,N6\ntruly-shadowbanned,0.1,population\nfalse-suspicion,0.8,population\n";
    assert!(SurveyTargets::parse(bad_split).is_err());
    let bad_share = "x,abc,N6\ntruly-shadowbanned,0.1,population\nfalse-suspicion,0.9,population\n";
    assert!(SurveyTargets::parse(bad_share).is_err());
    let unknown = "x,0.5,N99\ntruly-shadowbanned,0.1,population\nfalse-suspicion,0.9,population\n";
    let t = SurveyTargets::parse(unknown).unwrap();
    assert!(t.check_against(default_folk_theory().network()).is_err());
}
