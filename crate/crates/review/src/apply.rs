use std::collections::{BTreeSet, HashMap};

use kgrefine_core::graph::{labels, Graph, Triple};
use serde::{Deserialize, Serialize};

use crate::{CandidateSet, Rating, RatingCode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedEdge {
    pub candidate_id: String,
    pub triple: Triple,
    pub code: RatingCode,
    pub reviewer: String,
    pub rated_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedCandidate {
    pub candidate_id: String,
    pub triple: Triple,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Changelog {
    pub accept_codes: Vec<RatingCode>,
    pub added: Vec<AppliedEdge>,
    pub skipped: Vec<SkippedCandidate>,
}

/// Adds a condition edge for every candidate with an active rating in
/// `accept`. Candidates whose edge already exists, or whose endpoints are
/// missing from `graph`, are listed as skipped, so a rerun adds nothing.
/// When several reviewers accept a candidate the last rating given is
/// recorded as its provenance.
pub fn apply_accepted<'a>(
    graph: &mut Graph,
    candidates: &CandidateSet,
    active: impl IntoIterator<Item = &'a Rating>,
    accept: &BTreeSet<RatingCode>,
) -> Changelog {
    let mut accepted: HashMap<&str, &Rating> = HashMap::new();
    for r in active.into_iter().filter(|r| accept.contains(&r.code)) {
        accepted
            .entry(r.candidate_id.as_str())
            .and_modify(|prev| {
                if r.timestamp >= prev.timestamp {
                    *prev = r;
                }
            })
            .or_insert(r);
    }

    let mut log = Changelog { accept_codes: accept.iter().copied().collect(), ..Changelog::default() };
    for c in &candidates.candidates {
        let Some(rating) = accepted.get(c.id.as_str()) else { continue };
        let triple = Triple::new(&c.rule, labels::SIGNALS_BY, &c.factor);
        let skip = |reason: &str| SkippedCandidate {
            candidate_id: c.id.clone(),
            triple: triple.clone(),
            reason: reason.to_string(),
        };
        if graph.contains_triple(&c.rule, labels::SIGNALS_BY, &c.factor) {
            log.skipped.push(skip("relation already in graph"));
        } else if !graph.contains_node(&c.rule) || !graph.contains_node(&c.factor) {
            log.skipped.push(skip("rule or factor missing from graph"));
        } else {
            graph.add_edge(&c.rule, labels::SIGNALS_BY, &c.factor).expect("endpoints checked");
            log.added.push(AppliedEdge {
                candidate_id: c.id.clone(),
                triple,
                code: rating.code,
                reviewer: rating.reviewer.clone(),
                rated_at: rating.timestamp.clone(),
            });
        }
    }
    log
}
