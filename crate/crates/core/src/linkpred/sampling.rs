use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{LinkPredError, PairSample, PairSource};
use crate::graph::{labels, Graph, NodeKind, Triple};
use crate::rng;

/// Condition edges: `rule --signals_by--> risk factor`.
pub fn condition_edges(graph: &Graph) -> Vec<Triple> {
    graph
        .edges()
        .filter(|e| e.label == labels::SIGNALS_BY)
        .filter(|e| {
            let (s, d) = (graph.node(e.src), graph.node(e.dst));
            matches!((s, d), (Some(s), Some(d)) if s.kind.is_rule() && d.kind.is_risk_factor())
        })
        .map(|e| e.to_triple())
        .collect()
}

/// One positive per condition edge, in edge order.
pub fn positive_pairs(graph: &Graph) -> Vec<PairSample> {
    let mut seen = HashSet::new();
    condition_edges(graph)
        .into_iter()
        .filter(|t| seen.insert((t.src.clone(), t.dst.clone())))
        .map(|t| PairSample::new(t.src, t.dst, PairSource::ExistingEdge))
        .collect()
}

/// Rules and candidate factors that negatives are drawn from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingUniverse {
    pub rules: Vec<String>,
    pub factors: Vec<String>,
}

impl SamplingUniverse {
    /// All rule nodes, and every risk-factor node whose kind occurs as a
    /// condition target. Without condition edges all risk-factor kinds count.
    pub fn from_graph(graph: &Graph) -> Self {
        let target_kinds: BTreeSet<NodeKind> = condition_edges(graph)
            .iter()
            .filter_map(|t| graph.node(&t.dst).map(|n| n.kind))
            .collect();
        let rules = graph.nodes().filter(|n| n.kind.is_rule()).map(|n| n.id.clone()).collect();
        let factors = graph
            .nodes()
            .filter(|n| {
                if target_kinds.is_empty() {
                    n.kind.is_risk_factor()
                } else {
                    target_kinds.contains(&n.kind)
                }
            })
            .map(|n| n.id.clone())
            .collect();
        SamplingUniverse { rules, factors }
    }
}

fn linked(graph: &Graph, a: &str, b: &str) -> bool {
    graph.connected(a, b) || graph.connected(b, a)
}

type PairSet = HashSet<(String, String)>;

fn is_blocked(graph: &Graph, exclude: &PairSet, rule: &str, factor: &str) -> bool {
    linked(graph, rule, factor) || exclude.contains(&(rule.to_string(), factor.to_string()))
}

/// `n` distinct absent pairs drawn uniformly from the universe.
///
/// Pairs linked in `graph` (either direction) or listed in `exclude` are
/// never drawn.
pub fn negative_pairs_random(
    universe: &SamplingUniverse,
    graph: &Graph,
    n: usize,
    exclude: &PairSet,
    seed: u64,
) -> Result<Vec<PairSample>, LinkPredError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut absent = Vec::new();
    for r in &universe.rules {
        for f in &universe.factors {
            if !is_blocked(graph, exclude, r, f) {
                absent.push((r, f));
            }
        }
    }
    if absent.len() < n {
        return Err(LinkPredError::InsufficientAbsentPairs { requested: n, available: absent.len() });
    }
    let mut r = rng::stream(seed, "negatives/random");
    let mut picked = sample(&mut r, absent.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked
        .into_iter()
        .map(|i| PairSample::new(absent[i].0, absent[i].1, PairSource::Random))
        .collect())
}

/// Up to `k` unconnected factors for every rule that has a positive.
pub fn negative_pairs_per_rule(
    universe: &SamplingUniverse,
    graph: &Graph,
    positives: &[PairSample],
    k: usize,
    exclude: &PairSet,
    seed: u64,
) -> Vec<PairSample> {
    let rules: BTreeSet<&str> = positives.iter().map(|p| p.rule.as_str()).collect();
    let mut r = rng::stream(seed, "negatives/per-rule");
    let mut out = Vec::new();
    for rule in rules {
        let pool: Vec<&String> = universe.factors.iter().filter(|f| !is_blocked(graph, exclude, rule, f)).collect();
        let take = k.min(pool.len());
        let mut picked = sample(&mut r, pool.len(), take).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| PairSample::new(rule, pool[i].as_str(), PairSource::PerRule)));
    }
    out
}

/// Polarity counterpart of a factor: an explicit `oppositeOf` link wins,
/// otherwise `_increased` and `_decreased` suffixes swap. The counterpart
/// must exist in the graph.
pub fn opposite_factor(graph: &Graph, factor: &str) -> Option<String> {
    let explicit = graph
        .out_edges(factor)
        .find(|e| e.label == labels::OPPOSITE_OF)
        .map(|e| e.dst.to_string())
        .or_else(|| graph.in_edges(factor).find(|e| e.label == labels::OPPOSITE_OF).map(|e| e.src.to_string()));
    if explicit.is_some() {
        return explicit;
    }
    let swapped = match factor.strip_suffix("_increased") {
        Some(stem) => format!("{stem}_decreased"),
        None => format!("{}_increased", factor.strip_suffix("_decreased")?),
    };
    graph.contains_node(&swapped).then_some(swapped)
}

/// The opposite-polarity factor of each positive, paired with the same rule.
///
/// Pairs that are themselves positives, linked in `graph`, listed in
/// `exclude` or already emitted are skipped.
pub fn negative_pairs_opposite(graph: &Graph, positives: &[PairSample], exclude: &PairSet) -> Vec<PairSample> {
    let positive_keys: PairSet = positives.iter().map(PairSample::key).collect();
    let mut emitted = HashSet::new();
    let mut out = Vec::new();
    for p in positives {
        let Some(opp) = opposite_factor(graph, &p.factor) else { continue };
        let key = (p.rule.clone(), opp);
        if positive_keys.contains(&key) || is_blocked(graph, exclude, &key.0, &key.1) || !emitted.insert(key.clone()) {
            continue;
        }
        out.push(PairSample::new(key.0, key.1, PairSource::Opposite));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum NegativeStrategy {
    /// As many random absent pairs as there are positives.
    Random,
    PerRule { k: usize },
    Opposite,
}

impl NegativeStrategy {
    /// Negatives for `positives`; `exclude` should hold every known positive.
    pub fn sample(
        self,
        universe: &SamplingUniverse,
        graph: &Graph,
        positives: &[PairSample],
        exclude: &PairSet,
        seed: u64,
    ) -> Result<Vec<PairSample>, LinkPredError> {
        match self {
            NegativeStrategy::Random => negative_pairs_random(universe, graph, positives.len(), exclude, seed),
            NegativeStrategy::PerRule { k } => {
                Ok(negative_pairs_per_rule(universe, graph, positives, k, exclude, seed))
            }
            NegativeStrategy::Opposite => Ok(negative_pairs_opposite(graph, positives, exclude)),
        }
    }

    /// Source positive of each negative, used to keep opposite negatives on
    /// the same side of a split as the positive they came from.
    pub fn origins(negatives: &[PairSample], positives: &[PairSample], graph: &Graph) -> BTreeMap<usize, usize> {
        let mut by_key = BTreeMap::new();
        for (i, p) in positives.iter().enumerate() {
            if let Some(o) = opposite_factor(graph, &p.factor) {
                by_key.entry((p.rule.clone(), o)).or_insert(i);
            }
        }
        negatives
            .iter()
            .enumerate()
            .filter_map(|(i, n)| by_key.get(&n.key()).map(|&p| (i, p)))
            .collect()
    }
}

impl fmt::Display for NegativeStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NegativeStrategy::Random => f.write_str("random"),
            NegativeStrategy::PerRule { k } => write!(f, "per-rule-k{k}"),
            NegativeStrategy::Opposite => f.write_str("opposite"),
        }
    }
}

impl FromStr for NegativeStrategy {
    type Err = String;

    /// Accepts `random`, `opposite`, `per-rule` (k = 1), `per-rule:K` and `per-rule-kK`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => return Ok(NegativeStrategy::Random),
            "opposite" => return Ok(NegativeStrategy::Opposite),
            "per-rule" => return Ok(NegativeStrategy::PerRule { k: 1 }),
            _ => {}
        }
        let k = s
            .strip_prefix("per-rule:")
            .or_else(|| s.strip_prefix("per-rule-k"))
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|&k| k >= 1)
            .ok_or_else(|| format!("unknown negative strategy {s:?}"))?;
        Ok(NegativeStrategy::PerRule { k })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{cholestasis, cholestasis_fragment, Node};

    fn keys(v: &[PairSample]) -> BTreeSet<(String, String)> {
        v.iter().map(PairSample::key).collect()
    }

    #[test]
    fn fragment_positives() {
        let g = cholestasis_fragment();
        let pos = positive_pairs(&g);
        let expected: BTreeSet<_> = [
            ("Rule_Cholestase", "Bilirubin_total_increased"),
            ("Rule_Cholestase", "Alkaline_Phosphatase_increased"),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        assert_eq!(keys(&pos), expected);
        assert!(pos.iter().all(PairSample::is_positive));
    }

    #[test]
    fn no_rules_no_positives() {
        let mut g = Graph::new();
        g.add_node(Node::new("A", NodeKind::Finding)).unwrap();
        assert!(positive_pairs(&g).is_empty());
    }

    #[test]
    fn opposite_of_bilirubin() {
        let g = cholestasis_fragment();
        let pos = positive_pairs(&g);
        let neg = negative_pairs_opposite(&g, &pos, &HashSet::new());
        assert!(neg.contains(&PairSample::new("Rule_Cholestase", "Bilirubin_total_decreased", PairSource::Opposite)));
        assert_eq!(neg.len(), 2);
    }

    #[test]
    fn factor_without_opposite() {
        let mut g = Graph::new();
        g.add_node(Node::new("R", NodeKind::ExaminationRule)).unwrap();
        g.add_node(Node::new("Fever", NodeKind::Finding)).unwrap();
        g.add_edge("R", labels::SIGNALS_BY, "Fever").unwrap();
        let pos = positive_pairs(&g);
        assert!(negative_pairs_opposite(&g, &pos, &HashSet::new()).is_empty());
    }

    #[test]
    fn contradicting_opposite_is_suppressed() {
        let mut g = cholestasis_fragment();
        g.add_edge("Rule_Cholestase", labels::SIGNALS_BY, "Bilirubin_total_decreased").unwrap();
        let pos = positive_pairs(&g);
        let neg = negative_pairs_opposite(&g, &pos, &HashSet::new());
        assert!(neg.iter().all(|n| !n.factor.starts_with("Bilirubin")));
    }

    #[test]
    fn explicit_opposite_link_wins() {
        let mut g = Graph::new();
        g.add_node(Node::new("R", NodeKind::ExaminationRule)).unwrap();
        for id in ["Fever", "Hypothermia", "Fever_decreased"] {
            g.add_node(Node::new(id, NodeKind::Finding)).unwrap();
        }
        g.add_edge("R", labels::SIGNALS_BY, "Fever").unwrap();
        g.add_edge("Hypothermia", labels::OPPOSITE_OF, "Fever").unwrap();
        assert_eq!(opposite_factor(&g, "Fever").as_deref(), Some("Hypothermia"));
    }

    fn bipartite(rules: usize, factors: usize, complete: bool) -> Graph {
        let mut g = Graph::new();
        for r in 0..rules {
            g.add_node(Node::new(format!("R{r}"), NodeKind::LaboratoryRule)).unwrap();
        }
        for f in 0..factors {
            g.add_node(Node::new(format!("F{f}"), NodeKind::Finding)).unwrap();
        }
        for r in 0..rules {
            for f in 0..factors {
                if complete || f == r {
                    g.add_edge(&format!("R{r}"), labels::SIGNALS_BY, &format!("F{f}")).unwrap();
                }
            }
        }
        g
    }

    #[test]
    fn random_negatives_are_absent_and_distinct() {
        let g = bipartite(5, 10, false);
        let u = SamplingUniverse::from_graph(&g);
        let pos = positive_pairs(&g);
        let exclude: PairSet = pos.iter().map(PairSample::key).collect();
        let neg = negative_pairs_random(&u, &g, pos.len(), &exclude, 1).unwrap();
        assert_eq!(neg.len(), pos.len());
        assert_eq!(keys(&neg).len(), neg.len());
        assert!(neg.iter().all(|n| !g.connected(&n.rule, &n.factor) && !exclude.contains(&n.key())));
        assert!(negative_pairs_random(&u, &g, 0, &exclude, 1).unwrap().is_empty());
    }

    #[test]
    fn complete_bipartite_has_no_absent_pairs() {
        let g = bipartite(3, 4, true);
        let u = SamplingUniverse::from_graph(&g);
        assert!(matches!(
            negative_pairs_random(&u, &g, 1, &HashSet::new(), 0),
            Err(LinkPredError::InsufficientAbsentPairs { requested: 1, available: 0 })
        ));
    }

    #[test]
    fn per_rule_counts() {
        let g = bipartite(2, 20, false);
        let u = SamplingUniverse::from_graph(&g);
        let pos = positive_pairs(&g);
        let neg = negative_pairs_per_rule(&u, &g, &pos, 3, &HashSet::new(), 5);
        assert_eq!(neg.len(), 6);
        let full = bipartite(2, 4, true);
        let u = SamplingUniverse::from_graph(&full);
        let pos = positive_pairs(&full);
        assert!(negative_pairs_per_rule(&u, &full, &pos, 3, &HashSet::new(), 5).is_empty());
    }

    #[test]
    fn universe_uses_condition_target_kinds() {
        let g = cholestasis();
        let u = SamplingUniverse::from_graph(&g);
        assert_eq!(u.rules.len(), 3);
        assert!(u.factors.iter().any(|f| f == "Bilirubin_total_decreased"));
        assert!(u.factors.iter().any(|f| f == "Jaundice"));
        assert!(!u.factors.iter().any(|f| f == "Bilirubin_total"));
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("per-rule:5".parse::<NegativeStrategy>(), Ok(NegativeStrategy::PerRule { k: 5 }));
        assert_eq!("per-rule-k3".parse::<NegativeStrategy>(), Ok(NegativeStrategy::PerRule { k: 3 }));
        assert!("per-rule:0".parse::<NegativeStrategy>().is_err());
        let s = NegativeStrategy::PerRule { k: 3 };
        assert_eq!(s.to_string().parse::<NegativeStrategy>(), Ok(s));
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"strategy":"per-rule","k":3}"#);
    }
}
