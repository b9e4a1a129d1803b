use std::path::Path;
use std::time::Duration;

use mentalgen_core::classifier::Prediction;

use crate::corpus::{compose_requests, round_seed, PromptCorpus};
use crate::engine::{DesignSession, Round, RoundOutcome, SessionError, SessionEvent};
use crate::gateway::Generator;
use crate::log::SessionLog;
use crate::types::{GenerationRequest, GenerationResult};

/// A session plus its optional log. Every event is validated against the
/// session, appended (and fsynced) to the log, and only then applied.
#[derive(Debug)]
pub struct Recorder {
    session: DesignSession,
    log: Option<SessionLog>,
    outbox: Vec<SessionEvent>,
}

impl Recorder {
    pub fn start(start: SessionEvent, mut log: Option<SessionLog>) -> Result<Self, SessionError> {
        let session = DesignSession::from_start(&start)?;
        if let Some(log) = &mut log {
            log.append(&start)?;
        }
        Ok(Self { session, log, outbox: Vec::new() })
    }

    /// Reopens a log and rebuilds its session.
    pub fn resume(path: &Path) -> Result<Self, SessionError> {
        let (log, events) = SessionLog::open(path)?;
        Ok(Self { session: DesignSession::replay(&events)?, log: Some(log), outbox: Vec::new() })
    }

    pub fn session(&self) -> &DesignSession {
        &self.session
    }

    pub fn commit(&mut self, event: SessionEvent) -> Result<(), SessionError> {
        let mut next = self.session.clone();
        next.apply(&event)?;
        if let Some(log) = &mut self.log {
            log.append(&event)?;
        }
        self.session = next;
        self.outbox.push(event);
        Ok(())
    }

    /// Events committed since the last call, oldest first.
    pub fn drain_committed(&mut self) -> Vec<SessionEvent> {
        std::mem::take(&mut self.outbox)
    }

    /// Composes and records the next round's requests.
    pub fn begin_round(&mut self, prediction: Prediction, corpus: &PromptCorpus) -> Result<Vec<GenerationRequest>, SessionError> {
        self.session.can_start_round()?;
        let round = self.session.round_index + 1;
        let s = &self.session;
        let requests = compose_requests(
            &prediction,
            &s.base_image,
            corpus,
            s.config.constraints,
            round_seed(s.config.seed, round),
            &format!("{}-r{round}", s.session_id),
        )?;
        let event = self.session.round_started_event(prediction, requests.clone())?;
        self.commit(event)?;
        Ok(requests)
    }

    pub fn finish_round(&mut self, results: &[GenerationResult]) -> Result<&Round, SessionError> {
        let event = self.session.candidates_event(results)?;
        self.commit(event)?;
        Ok(self.session.current_round().expect("round just finished"))
    }

    pub fn submit_ratings(&mut self, ratings: Option<&[i64]>, final_mark: Option<usize>) -> Result<RoundOutcome, SessionError> {
        for event in self.session.ratings_events(ratings, final_mark)? {
            self.commit(event)?;
        }
        Ok(self.session.outcome().expect("round closed"))
    }
}

/// Runs generation for a request batch; if the backend overruns `limit`,
/// every request gets a timeout placeholder.
pub async fn generate_with_limit(generator: &dyn Generator, requests: &[GenerationRequest], limit: Duration) -> Vec<GenerationResult> {
    match tokio::time::timeout(limit, generator.generate_batch(requests)).await {
        Ok(results) => results,
        Err(_) => requests
            .iter()
            .map(|r| GenerationResult::timeout(&r.request_id, limit.as_millis() as u64, 1))
            .collect(),
    }
}

/// One full round up to `candidates_ready`: compose, record, generate, record.
pub async fn play_round<'a>(
    recorder: &'a mut Recorder,
    prediction: Prediction,
    corpus: &PromptCorpus,
    generator: &dyn Generator,
    limit: Duration,
) -> Result<&'a Round, SessionError> {
    let requests = recorder.begin_round(prediction, corpus)?;
    let results = generate_with_limit(generator, &requests, limit).await;
    recorder.finish_round(&results)
}
