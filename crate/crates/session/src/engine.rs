use mentalgen_core::classifier::Prediction;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{CandidateImage, Constraints, GenerationRequest, GenerationResult, ImageRef, Provenance};

pub const CANDIDATES_PER_ROUND: usize = 5;
pub const MIN_RATING: u8 = 1;
pub const MAX_RATING: u8 = 7;

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("session {0} is finalized")]
    Finalized(String),
    #[error("session id `{0}` already exists")]
    DuplicateSession(String),
    #[error("base image {0} cannot be resolved")]
    UnresolvableImage(String),
    #[error("rating {value} for candidate {candidate} is outside 1..=7")]
    RatingOutOfRange { candidate: usize, value: i64 },
    #[error("expected {expected} ratings, got {found}")]
    WrongRatingCount { expected: usize, found: usize },
    #[error("ratings are required unless a final mark is given")]
    MissingRatings,
    #[error("candidate {0} does not exist")]
    InvalidCandidate(usize),
    #[error("no round is waiting for {0}")]
    NoOpenRound(&'static str),
    #[error("round {0} is still open")]
    RoundInProgress(usize),
    #[error("event out of order: {0}")]
    OutOfOrder(String),
    #[error("empty corpus: {0}")]
    EmptyCorpus(String),
    #[error("session has no completed rounds")]
    EmptyHistory,
    #[error("log: {0}")]
    Log(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Finalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionConfig {
    /// Advisory minimum; only scripted simulation enforces it.
    pub min_rounds: usize,
    pub constraints: Constraints,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { min_rounds: 8, constraints: Constraints::default(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    /// 1-based.
    pub index: usize,
    pub base_image: ImageRef,
    pub prediction: Prediction,
    pub requests: Vec<GenerationRequest>,
    /// Empty until the generation results arrive.
    pub candidates: Vec<CandidateImage>,
    pub ratings: Option<Vec<u8>>,
    pub selected: Option<usize>,
    pub final_mark: Option<usize>,
}

impl Round {
    pub fn is_ready(&self) -> bool {
        !self.candidates.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.selected.is_some()
    }
}

/// Log events; applying them in order rebuilds a session exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SessionEvent {
    SessionStarted {
        session_id: String,
        participant_id: String,
        base_image: ImageRef,
        config: SessionConfig,
    },
    RoundStarted {
        round: usize,
        base_image: ImageRef,
        prediction: Prediction,
        requests: Vec<GenerationRequest>,
    },
    CandidatesReady {
        round: usize,
        candidates: Vec<CandidateImage>,
    },
    RatingsSubmitted {
        round: usize,
        ratings: Option<Vec<u8>>,
        selected: usize,
        final_mark: Option<usize>,
    },
    Finalized {
        round: usize,
        final_mark: usize,
    },
}

impl SessionEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            SessionEvent::SessionStarted { .. } => "session_started",
            SessionEvent::RoundStarted { .. } => "round_started",
            SessionEvent::CandidatesReady { .. } => "candidates_ready",
            SessionEvent::RatingsSubmitted { .. } => "ratings_submitted",
            SessionEvent::Finalized { .. } => "finalized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub round: usize,
    pub selected: usize,
    pub finalized: bool,
    /// Base image for the next round; `None` once finalized.
    pub next_base: Option<ImageRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSession {
    pub session_id: String,
    pub participant_id: String,
    pub base_image: ImageRef,
    /// Index of the latest round; 0 before the first.
    pub round_index: usize,
    pub history: Vec<Round>,
    pub status: SessionStatus,
    pub config: SessionConfig,
}

/// Validated 1..=7 ratings, one per candidate.
pub fn validate_ratings(raw: &[i64]) -> Result<Vec<u8>, SessionError> {
    if raw.len() != CANDIDATES_PER_ROUND {
        return Err(SessionError::WrongRatingCount { expected: CANDIDATES_PER_ROUND, found: raw.len() });
    }
    raw.iter()
        .enumerate()
        .map(|(candidate, &value)| {
            if (MIN_RATING as i64..=MAX_RATING as i64).contains(&value) {
                Ok(value as u8)
            } else {
                Err(SessionError::RatingOutOfRange { candidate, value })
            }
        })
        .collect()
}

/// Index of the highest rating, earliest on ties.
pub fn select_candidate(ratings: &[u8]) -> usize {
    let mut best = 0;
    for (i, r) in ratings.iter().enumerate() {
        if *r > ratings[best] {
            best = i;
        }
    }
    best
}

impl DesignSession {
    /// The `session_started` event for a new session. The caller checks that
    /// the base image resolves and the id is unused.
    pub fn start_event(session_id: &str, participant_id: &str, base_image: ImageRef, config: SessionConfig) -> SessionEvent {
        SessionEvent::SessionStarted {
            session_id: session_id.into(),
            participant_id: participant_id.into(),
            base_image,
            config,
        }
    }

    pub fn from_start(event: &SessionEvent) -> Result<Self, SessionError> {
        match event {
            SessionEvent::SessionStarted { session_id, participant_id, base_image, config } => Ok(Self {
                session_id: session_id.clone(),
                participant_id: participant_id.clone(),
                base_image: base_image.clone(),
                round_index: 0,
                history: Vec::new(),
                status: SessionStatus::Active,
                config: config.clone(),
            }),
            other => Err(SessionError::OutOfOrder(format!("log must begin with session_started, got {}", other.kind()))),
        }
    }

    /// Rebuilds a session from its full event sequence.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a SessionEvent>) -> Result<Self, SessionError> {
        let mut it = events.into_iter();
        let first = it.next().ok_or_else(|| SessionError::Log("empty log".into()))?;
        let mut session = Self::from_start(first)?;
        for ev in it {
            session.apply(ev)?;
        }
        Ok(session)
    }

    pub fn current_round(&self) -> Option<&Round> {
        self.history.last()
    }

    pub fn is_finalized(&self) -> bool {
        self.status == SessionStatus::Finalized
    }

    pub fn min_rounds_met(&self) -> bool {
        self.history.iter().filter(|r| r.is_closed()).count() >= self.config.min_rounds
    }

    fn ensure_active(&self) -> Result<(), SessionError> {
        if self.is_finalized() {
            Err(SessionError::Finalized(self.session_id.clone()))
        } else {
            Ok(())
        }
    }

    /// Checks that a new round may start now.
    pub fn can_start_round(&self) -> Result<(), SessionError> {
        self.ensure_active()?;
        match self.current_round() {
            Some(r) if !r.is_closed() => Err(SessionError::RoundInProgress(r.index)),
            _ => Ok(()),
        }
    }

    pub fn round_started_event(&self, prediction: Prediction, requests: Vec<GenerationRequest>) -> Result<SessionEvent, SessionError> {
        self.can_start_round()?;
        Ok(SessionEvent::RoundStarted {
            round: self.round_index + 1,
            base_image: self.base_image.clone(),
            prediction,
            requests,
        })
    }

    /// Pairs results with the open round's requests by request id; missing
    /// results become timeout placeholders.
    pub fn candidates_event(&self, results: &[GenerationResult]) -> Result<SessionEvent, SessionError> {
        self.ensure_active()?;
        let round = self
            .current_round()
            .filter(|r| !r.is_ready())
            .ok_or(SessionError::NoOpenRound("candidates"))?;
        let candidates = round
            .requests
            .iter()
            .enumerate()
            .map(|(id, req)| {
                let result = results.iter().find(|r| r.request_id == req.request_id);
                let (image, status) = match result {
                    Some(r) => (r.image.clone(), r.status),
                    None => (None, crate::types::GenerationStatus::Timeout),
                };
                CandidateImage {
                    id,
                    request_id: req.request_id.clone(),
                    image,
                    status,
                    prompt_tokens: req.prompt_tokens.clone(),
                    model_weight: req.model_weight,
                    provenance: if id == 0 { Provenance::Predicted } else { Provenance::Perturbed },
                    seed: req.seed,
                }
            })
            .collect();
        Ok(SessionEvent::CandidatesReady { round: round.index, candidates })
    }

    /// Events for a rating submission, without applying them.
    pub fn ratings_events(
        &self,
        ratings: Option<&[i64]>,
        final_mark: Option<usize>,
    ) -> Result<Vec<SessionEvent>, SessionError> {
        self.ensure_active()?;
        let round = self
            .current_round()
            .filter(|r| r.is_ready() && !r.is_closed())
            .ok_or(SessionError::NoOpenRound("ratings"))?;
        let ratings = ratings.map(validate_ratings).transpose()?;
        if let Some(mark) = final_mark {
            if mark >= round.candidates.len() {
                return Err(SessionError::InvalidCandidate(mark));
            }
        }
        let selected = match (&ratings, final_mark) {
            (_, Some(mark)) => mark,
            (Some(r), None) => select_candidate(r),
            (None, None) => return Err(SessionError::MissingRatings),
        };
        let mut events = vec![SessionEvent::RatingsSubmitted { round: round.index, ratings, selected, final_mark }];
        if let Some(mark) = final_mark {
            events.push(SessionEvent::Finalized { round: round.index, final_mark: mark });
        }
        Ok(events)
    }

    pub fn outcome(&self) -> Option<RoundOutcome> {
        let round = self.current_round().filter(|r| r.is_closed())?;
        Some(RoundOutcome {
            round: round.index,
            selected: round.selected.expect("closed round"),
            finalized: self.is_finalized(),
            next_base: (!self.is_finalized()).then(|| self.base_image.clone()),
        })
    }

    /// Applies one event. All checks run before any field changes, so a
    /// rejected event leaves the session untouched.
    pub fn apply(&mut self, event: &SessionEvent) -> Result<(), SessionError> {
        match event {
            SessionEvent::SessionStarted { .. } => {
                Err(SessionError::OutOfOrder("session_started after the first event".into()))
            }
            SessionEvent::RoundStarted { round, base_image, prediction, requests } => {
                self.can_start_round()?;
                if *round != self.round_index + 1 || *base_image != self.base_image {
                    return Err(SessionError::OutOfOrder(format!("round_started {round} does not follow round {}", self.round_index)));
                }
                if requests.len() != CANDIDATES_PER_ROUND {
                    return Err(SessionError::OutOfOrder(format!("round {round} has {} requests", requests.len())));
                }
                self.history.push(Round {
                    index: *round,
                    base_image: base_image.clone(),
                    prediction: prediction.clone(),
                    requests: requests.clone(),
                    candidates: Vec::new(),
                    ratings: None,
                    selected: None,
                    final_mark: None,
                });
                self.round_index = *round;
                Ok(())
            }
            SessionEvent::CandidatesReady { round, candidates } => {
                self.ensure_active()?;
                let open = self.current_round().filter(|r| r.index == *round && !r.is_ready());
                if open.is_none() {
                    return Err(SessionError::NoOpenRound("candidates"));
                }
                let predicted = candidates.iter().filter(|c| c.provenance == Provenance::Predicted).count();
                if candidates.len() != CANDIDATES_PER_ROUND || predicted != 1 {
                    return Err(SessionError::OutOfOrder(format!(
                        "round {round} needs 5 candidates with one predicted, got {} with {predicted}",
                        candidates.len()
                    )));
                }
                self.history.last_mut().expect("open round").candidates = candidates.clone();
                Ok(())
            }
            SessionEvent::RatingsSubmitted { round, ratings, selected, final_mark } => {
                let expected = self.ratings_events(
                    ratings.as_ref().map(|r| r.iter().map(|&v| v as i64).collect::<Vec<_>>()).as_deref(),
                    *final_mark,
                )?;
                match &expected[0] {
                    SessionEvent::RatingsSubmitted { round: r, selected: s, .. } if r == round && s == selected => {}
                    _ => return Err(SessionError::OutOfOrder(format!("ratings for round {round} do not match the open round"))),
                }
                let r = self.history.last_mut().expect("open round");
                r.ratings = ratings.clone();
                r.selected = Some(*selected);
                r.final_mark = *final_mark;
                if final_mark.is_none() {
                    if let Some(image) = &r.candidates[*selected].image {
                        self.base_image = image.clone();
                    }
                }
                Ok(())
            }
            SessionEvent::Finalized { round, final_mark } => {
                self.ensure_active()?;
                let last = self.current_round().ok_or(SessionError::NoOpenRound("finalization"))?;
                if last.index != *round || last.final_mark != Some(*final_mark) {
                    return Err(SessionError::OutOfOrder(format!("finalized does not match round {round}")));
                }
                self.status = SessionStatus::Finalized;
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSatisfaction {
    pub round: usize,
    pub ratings: Vec<u8>,
    pub mean: f64,
    pub max: u8,
    pub selected: usize,
    pub selected_rating: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMark {
    pub round: usize,
    pub candidate: usize,
    pub image: Option<ImageRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatisfactionTrace {
    pub session_id: String,
    pub participant_id: String,
    pub status: SessionStatus,
    /// Rated rounds only.
    pub rounds: Vec<RoundSatisfaction>,
    pub final_mark: Option<FinalMark>,
}

impl SatisfactionTrace {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

/// Per-round rating summary of every rated round plus the final mark.
pub fn session_report(session: &DesignSession) -> Result<SatisfactionTrace, SessionError> {
    if !session.history.iter().any(Round::is_closed) {
        return Err(SessionError::EmptyHistory);
    }
    let rounds = session
        .history
        .iter()
        .filter_map(|r| {
            let ratings = r.ratings.clone()?;
            let selected = r.selected?;
            Some(RoundSatisfaction {
                round: r.index,
                mean: ratings.iter().map(|&v| v as f64).sum::<f64>() / ratings.len() as f64,
                max: ratings.iter().copied().max().unwrap_or(0),
                selected,
                selected_rating: ratings[selected],
                ratings,
            })
        })
        .collect();
    let final_mark = session.history.iter().find_map(|r| {
        r.final_mark.map(|candidate| FinalMark {
            round: r.index,
            candidate,
            image: r.candidates.get(candidate).and_then(|c| c.image.clone()),
        })
    });
    Ok(SatisfactionTrace {
        session_id: session.session_id.clone(),
        participant_id: session.participant_id.clone(),
        status: session.status,
        rounds,
        final_mark,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{GenerationStatus, Provenance};
    use mentalgen_core::signal::CommandLabel;

    fn img(tag: &str) -> ImageRef {
        ImageRef::for_bytes(tag.as_bytes())
    }

    fn pred() -> Prediction {
        Prediction { command: CommandLabel::MoreClassicalStyle, confidence: 0.6, decision_values: [0.0, 0.0, 1.0] }
    }

    pub(crate) fn new_session() -> DesignSession {
        DesignSession::from_start(&DesignSession::start_event("s1", "p1", img("base"), SessionConfig::default())).unwrap()
    }

    fn requests(session: &DesignSession) -> Vec<GenerationRequest> {
        (0..5)
            .map(|i| GenerationRequest {
                request_id: format!("s1-r{}-c{i}", session.round_index + 1),
                base_image: session.base_image.clone(),
                command: CommandLabel::MoreClassicalStyle,
                model_weight: 0.6,
                prompt_tokens: vec![format!("t{i}")],
                constraints: Constraints::default(),
                seed: i as u64,
            })
            .collect()
    }

    fn open_ready_round(s: &mut DesignSession) {
        let ev = s.round_started_event(pred(), requests(s)).unwrap();
        s.apply(&ev).unwrap();
        let results: Vec<GenerationResult> = s
            .current_round()
            .unwrap()
            .requests
            .iter()
            .map(|r| GenerationResult::ok(&r.request_id, img(&r.request_id), 0, 1))
            .collect();
        let ev = s.candidates_event(&results).unwrap();
        s.apply(&ev).unwrap();
    }

    fn rate(s: &mut DesignSession, ratings: &[i64], mark: Option<usize>) -> Result<(), SessionError> {
        for ev in s.ratings_events(Some(ratings), mark)? {
            s.apply(&ev)?;
        }
        Ok(())
    }

    #[test]
    fn tie_goes_to_earliest_and_chains_base() {
        let mut s = new_session();
        open_ready_round(&mut s);
        rate(&mut s, &[3, 5, 2, 5, 1], None).unwrap();
        let outcome = s.outcome().unwrap();
        assert_eq!(outcome.selected, 1);
        assert_eq!(s.base_image, img("s1-r1-c1"));
        assert_eq!(outcome.next_base, Some(img("s1-r1-c1")));
        open_ready_round(&mut s);
        assert_eq!(s.current_round().unwrap().base_image, img("s1-r1-c1"));
    }

    #[test]
    fn final_mark_finalizes() {
        let mut s = new_session();
        open_ready_round(&mut s);
        for ev in s.ratings_events(None, Some(3)).unwrap() {
            s.apply(&ev).unwrap();
        }
        assert!(s.is_finalized());
        assert!(matches!(s.round_started_event(pred(), vec![]), Err(SessionError::Finalized(_))));
        let trace = session_report(&s).unwrap();
        assert_eq!(trace.len(), 0);
        assert_eq!(trace.final_mark.as_ref().unwrap().candidate, 3);
    }

    #[test]
    fn rating_validation() {
        let mut s = new_session();
        open_ready_round(&mut s);
        assert_eq!(rate(&mut s, &[1, 2, 8, 4, 5], None), Err(SessionError::RatingOutOfRange { candidate: 2, value: 8 }));
        assert_eq!(rate(&mut s, &[0, 2, 3, 4, 5], None), Err(SessionError::RatingOutOfRange { candidate: 0, value: 0 }));
        assert!(matches!(rate(&mut s, &[1, 2], None), Err(SessionError::WrongRatingCount { .. })));
        assert_eq!(s.ratings_events(None, None), Err(SessionError::MissingRatings));
        assert_eq!(s.ratings_events(None, Some(5)), Err(SessionError::InvalidCandidate(5)));
        assert!(s.current_round().unwrap().ratings.is_none());
    }

    #[test]
    fn report_means() {
        let mut s = new_session();
        open_ready_round(&mut s);
        rate(&mut s, &[2, 2, 3, 2, 3], None).unwrap();
        let trace = session_report(&s).unwrap();
        assert!((trace.rounds[0].mean - 2.4).abs() < 1e-12);
        assert_eq!(trace.rounds[0].max, 3);
        assert_eq!(trace.rounds[0].selected, 2);
        assert_eq!(trace.rounds[0].selected_rating, 3);
        assert_eq!(session_report(&new_session()), Err(SessionError::EmptyHistory));
    }

    #[test]
    fn eight_rounds_then_mark() {
        let mut s = new_session();
        for r in 0..8 {
            open_ready_round(&mut s);
            let mark = (r == 7).then_some(0);
            rate(&mut s, &[4, 5, 6, 7, 1], mark).unwrap();
        }
        assert!(s.min_rounds_met());
        assert!(s.is_finalized());
        assert_eq!(session_report(&s).unwrap().len(), 8);
    }

    #[test]
    fn failed_candidates_keep_previous_base() {
        let mut s = new_session();
        let ev = s.round_started_event(pred(), requests(&s)).unwrap();
        s.apply(&ev).unwrap();
        let ev = s.candidates_event(&[]).unwrap();
        s.apply(&ev).unwrap();
        let r = s.current_round().unwrap();
        assert!(r.candidates.iter().all(|c| c.status == GenerationStatus::Timeout && c.image.is_none()));
        assert_eq!(r.candidates.iter().filter(|c| c.provenance == Provenance::Predicted).count(), 1);
        rate(&mut s, &[1, 7, 1, 1, 1], None).unwrap();
        assert_eq!(s.base_image, img("base"));
    }

    #[test]
    fn replay_rebuilds_state() {
        let mut s = new_session();
        let mut log = vec![DesignSession::start_event("s1", "p1", img("base"), SessionConfig::default())];
        for _ in 0..3 {
            let ev = s.round_started_event(pred(), requests(&s)).unwrap();
            s.apply(&ev).unwrap();
            log.push(ev);
            let results: Vec<_> = s.current_round().unwrap().requests.iter()
                .map(|r| GenerationResult::ok(&r.request_id, img(&r.request_id), 0, 1)).collect();
            let ev = s.candidates_event(&results).unwrap();
            s.apply(&ev).unwrap();
            log.push(ev);
            for ev in s.ratings_events(Some(&[1, 2, 3, 4, 5]), None).unwrap() {
                s.apply(&ev).unwrap();
                log.push(ev);
            }
        }
        assert_eq!(DesignSession::replay(&log).unwrap(), s);
    }
}
