use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{CandidateSet, Rating, RatingCode};

/// Per-disease counts of each active rating code. `counts[i]` holds code
/// `i + 1`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewSummary {
    pub diseases: BTreeMap<String, [usize; 5]>,
    pub totals: [usize; 5],
    /// Number of active ratings; equals the sum of `totals`.
    pub rated: usize,
}

impl ReviewSummary {
    /// Summary of the given active ratings. Ratings of candidates missing
    /// from `candidates` are ignored.
    pub fn from_ratings<'a>(candidates: &CandidateSet, ratings: impl IntoIterator<Item = &'a Rating>) -> Self {
        let disease: BTreeMap<&str, &str> =
            candidates.candidates.iter().map(|c| (c.id.as_str(), c.disease.as_str())).collect();
        let mut s = ReviewSummary::default();
        for r in ratings {
            if let Some(d) = disease.get(r.candidate_id.as_str()) {
                s.add(d, r.code);
            }
        }
        s
    }

    pub fn add(&mut self, disease: &str, code: RatingCode) {
        self.diseases.entry(disease.to_string()).or_default()[code.index()] += 1;
        self.totals[code.index()] += 1;
        self.rated += 1;
    }

    /// Undoes one [`add`](Self::add); rows that drop to zero are removed.
    pub fn remove(&mut self, disease: &str, code: RatingCode) {
        let row = self.diseases.get_mut(disease).expect("removed rating was counted");
        row[code.index()] -= 1;
        if row.iter().all(|&n| n == 0) {
            self.diseases.remove(disease);
        }
        self.totals[code.index()] -= 1;
        self.rated -= 1;
    }

    pub fn count(&self, code: RatingCode) -> usize {
        self.totals[code.index()]
    }
}
