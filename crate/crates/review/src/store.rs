use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::{Candidate, CandidateSet, RatingCode, ReviewError, ReviewSummary};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rating {
    pub candidate_id: String,
    pub code: RatingCode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    pub reviewer: String,
    /// RFC 3339, UTC.
    pub timestamp: String,
}

/// Body of a rating submission. The code is range-checked on record so an
/// out-of-range value is reported as such rather than as malformed input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingRequest {
    pub candidate_id: String,
    pub code: i64,
    #[serde(default)]
    pub comment: Option<String>,
    pub reviewer: String,
}

/// Latest rating per (candidate, reviewer), keyed in that order.
pub fn active_ratings(history: &[Rating]) -> BTreeMap<(String, String), Rating> {
    let mut active = BTreeMap::new();
    for r in history {
        active.insert((r.candidate_id.clone(), r.reviewer.clone()), r.clone());
    }
    active
}

/// Append-only newline-delimited JSON file of ratings.
#[derive(Debug)]
pub struct RatingLog {
    path: PathBuf,
    file: File,
    history: Vec<Rating>,
}

impl RatingLog {
    /// Opens or creates the log. Any line that does not parse as a rating,
    /// including a final line without its newline, makes the store corrupt.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ReviewError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(|e| ReviewError::CorruptStore {
            path: path.clone(),
            line: 0,
            reason: e.to_string(),
        })?;
        let corrupt = |line: usize, reason: String| ReviewError::CorruptStore { path: path.clone(), line, reason };
        if !text.is_empty() && !text.ends_with('\n') {
            return Err(corrupt(text.lines().count(), "truncated final line".into()));
        }
        let mut history = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            history.push(serde_json::from_str(line).map_err(|e| corrupt(i + 1, e.to_string()))?);
        }
        Ok(RatingLog { path, file, history })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn history(&self) -> &[Rating] {
        &self.history
    }

    /// Writes one line and syncs it to disk before the rating is kept.
    pub fn append(&mut self, rating: Rating) -> Result<(), ReviewError> {
        let mut line = serde_json::to_string(&rating)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        self.history.push(rating);
        Ok(())
    }
}

/// Candidates, their rating log and the views maintained over it.
#[derive(Debug)]
pub struct ReviewStore {
    candidates: CandidateSet,
    index: HashMap<String, usize>,
    log: RatingLog,
    /// History position of the active rating per (candidate, reviewer).
    active: BTreeMap<(String, String), usize>,
    summary: ReviewSummary,
}

impl ReviewStore {
    /// Fails if the log rates a candidate that is not in `candidates`.
    pub fn open(candidates: CandidateSet, log: RatingLog) -> Result<Self, ReviewError> {
        candidates.validate()?;
        let index = candidates.candidates.iter().enumerate().map(|(i, c)| (c.id.clone(), i)).collect();
        let mut store = ReviewStore {
            candidates,
            index,
            log,
            active: BTreeMap::new(),
            summary: ReviewSummary::default(),
        };
        for pos in 0..store.log.history.len() {
            let id = &store.log.history[pos].candidate_id;
            if !store.index.contains_key(id) {
                return Err(ReviewError::CorruptStore {
                    path: store.log.path.clone(),
                    line: pos + 1,
                    reason: format!("rating for unknown candidate `{id}`"),
                });
            }
            store.activate(pos);
        }
        Ok(store)
    }

    fn activate(&mut self, pos: usize) {
        let r = &self.log.history[pos];
        let disease = &self.candidates.candidates[self.index[&r.candidate_id]].disease;
        let key = (r.candidate_id.clone(), r.reviewer.clone());
        if let Some(prev) = self.active.insert(key, pos) {
            self.summary.remove(disease, self.log.history[prev].code);
        }
        self.summary.add(disease, r.code);
    }

    pub fn record(&mut self, request: RatingRequest) -> Result<Rating, ReviewError> {
        let code = RatingCode::new(request.code)?;
        if !self.index.contains_key(&request.candidate_id) {
            return Err(ReviewError::UnknownCandidate(request.candidate_id));
        }
        let reviewer = request.reviewer.trim();
        if reviewer.is_empty() {
            return Err(ReviewError::InvalidRequest("reviewer must not be empty".into()));
        }
        let rating = Rating {
            candidate_id: request.candidate_id,
            code,
            comment: request.comment.filter(|c| !c.trim().is_empty()),
            reviewer: reviewer.to_string(),
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        };
        self.log.append(rating.clone())?;
        self.activate(self.log.history.len() - 1);
        Ok(rating)
    }

    pub fn candidates(&self) -> &CandidateSet {
        &self.candidates
    }

    pub fn candidate(&self, id: &str) -> Option<&Candidate> {
        self.index.get(id).map(|&i| &self.candidates.candidates[i])
    }

    pub fn history(&self) -> &[Rating] {
        self.log.history()
    }

    /// Active ratings in (candidate, reviewer) order.
    pub fn active(&self) -> impl Iterator<Item = &Rating> + '_ {
        self.active.values().map(|&pos| &self.log.history[pos])
    }

    pub fn active_for(&self, id: &str) -> Vec<&Rating> {
        self.active.range((id.to_string(), String::new())..).take_while(|((c, _), _)| c == id).map(|(_, &pos)| &self.log.history[pos]).collect()
    }

    pub fn history_for(&self, id: &str) -> Vec<&Rating> {
        self.log.history.iter().filter(|r| r.candidate_id == id).collect()
    }

    pub fn is_rated(&self, id: &str) -> bool {
        !self.active_for(id).is_empty()
    }

    pub fn summary(&self) -> &ReviewSummary {
        &self.summary
    }
}
