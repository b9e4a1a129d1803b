use std::collections::BTreeMap;

use mentalgen_core::classifier::Prediction;
use mentalgen_core::signal::CommandLabel;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::SessionError;
use crate::types::{Constraints, GenerationRequest, ImageRef};

/// Perturbed requests composed alongside the predicted one.
pub const PERTURBED_PER_ROUND: usize = 4;
/// Share of prompt tokens replaced in a perturbed request (at least one).
pub const PERTURBATION_RATE: f64 = 0.25;

/// Canonical prompt tokens per command plus the shared replacement pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptCorpus {
    pub commands: BTreeMap<CommandLabel, Vec<String>>,
    pub pool: Vec<String>,
    /// Vocabulary reserved for structure preservation; never drawn into prompts.
    pub structural: Vec<String>,
}

fn owned(words: &[&str]) -> Vec<String> {
    words.iter().map(|s| s.to_string()).collect()
}

impl Default for PromptCorpus {
    fn default() -> Self {
        let commands = BTreeMap::from([
            (
                CommandLabel::IncreaseTransparency,
                owned(&["interior", "floor-to-ceiling glazing", "glass partitions", "open plan", "daylight", "slim frames", "translucent screens", "airy"]),
            ),
            (
                CommandLabel::MoreLuxuriousDecoration,
                owned(&["interior", "ornate moulding", "marble surfaces", "brass fixtures", "crystal chandelier", "velvet upholstery", "gilded trim", "rich textures"]),
            ),
            (
                CommandLabel::MoreClassicalStyle,
                owned(&["interior", "classical columns", "symmetrical layout", "coffered ceiling", "wainscoting", "arched doorways", "herringbone parquet", "cornices"]),
            ),
        ]);
        let pool = owned(&[
            "warm lighting", "oak flooring", "linen textiles", "potted plants", "neutral palette", "soft shadows",
            "walnut furniture", "terrazzo", "wool rug", "ceramic vases", "bookshelves", "pendant lamp",
            "stone accent wall", "rattan chairs", "high ceiling", "morning light", "muted greens", "plaster walls",
            "low sofa", "framed prints",
        ]);
        let structural = owned(&["preserve walls", "preserve openings", "keep layout", "edge map", "line map"]);
        Self { commands, pool, structural }
    }
}

impl PromptCorpus {
    pub fn validate(&self) -> Result<(), SessionError> {
        for command in CommandLabel::ALL {
            if self.commands.get(&command).is_none_or(Vec::is_empty) {
                return Err(SessionError::EmptyCorpus(format!("no prompt tokens for {command}")));
            }
        }
        if self.pool.is_empty() {
            return Err(SessionError::EmptyCorpus("replacement pool is empty".into()));
        }
        if let Some(t) = self.pool.iter().find(|t| self.structural.contains(t)) {
            return Err(SessionError::EmptyCorpus(format!("pool token `{t}` is reserved structural vocabulary")));
        }
        Ok(())
    }
}

/// Seed of round `round` (1-based) in a session seeded with `session_seed`.
pub fn round_seed(session_seed: u64, round: usize) -> u64 {
    session_seed ^ (round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// One request with the command's canonical prompt weighted by the
/// prediction confidence, then four with a seeded 25% of tokens swapped for
/// pool draws. All five share the base image and constraint flags.
pub fn compose_requests(
    prediction: &Prediction,
    base: &ImageRef,
    corpus: &PromptCorpus,
    constraints: Constraints,
    seed: u64,
    id_prefix: &str,
) -> Result<Vec<GenerationRequest>, SessionError> {
    let canonical = corpus
        .commands
        .get(&prediction.command)
        .filter(|t| !t.is_empty())
        .ok_or_else(|| SessionError::EmptyCorpus(format!("no prompt tokens for {}", prediction.command)))?;
    if corpus.pool.is_empty() {
        return Err(SessionError::EmptyCorpus("replacement pool is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weight = prediction.confidence.clamp(0.0, 1.0);
    let request = |i: usize, tokens: Vec<String>, seed: u64| GenerationRequest {
        request_id: format!("{id_prefix}-c{i}"),
        base_image: base.clone(),
        command: prediction.command,
        model_weight: weight,
        prompt_tokens: tokens,
        constraints,
        seed,
    };

    let mut out = vec![request(0, canonical.clone(), rng.random())];
    let n_replace = ((canonical.len() as f64 * PERTURBATION_RATE).floor() as usize).clamp(1, canonical.len());
    for i in 1..=PERTURBED_PER_ROUND {
        let mut tokens = canonical.clone();
        let positions = sample(&mut rng, tokens.len(), n_replace);
        let fresh: Vec<&String> = corpus.pool.iter().filter(|t| !tokens.contains(t)).collect();
        let source: Vec<&String> = if fresh.len() >= n_replace { fresh } else { corpus.pool.iter().collect() };
        let draws = sample(&mut rng, source.len(), n_replace.min(source.len()));
        for (k, pos) in positions.iter().enumerate() {
            tokens[pos] = source[draws.index(k % draws.len())].clone();
        }
        out.push(request(i, tokens, rng.random()));
    }
    Ok(out)
}
