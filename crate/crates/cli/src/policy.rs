use std::collections::VecDeque;
use std::path::Path;

use mentalgen_session::{Provenance as Origin, Round, MAX_RATING, MIN_RATING};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::args::RatingPolicyKind;
use crate::error::CliError;

/// One round's scripted response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedRound {
    #[serde(default)]
    pub ratings: Option<Vec<i64>>,
    #[serde(default)]
    pub final_mark: Option<usize>,
}

/// `{"v": 1, "rounds": [{"ratings": [...], "final_mark": 2}, ...]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingScript {
    pub v: u32,
    pub rounds: Vec<ScriptedRound>,
}

impl RatingScript {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let script: Self =
            serde_json::from_str(&text).map_err(|e| CliError::new("schema", format!("{}: {e}", path.display())))?;
        if script.v != 1 {
            return Err(CliError::new("schema", format!("{}: unsupported script version {}", path.display(), script.v)));
        }
        Ok(script)
    }
}

/// Stands in for the participant when a session runs unattended.
pub enum RatingPolicy {
    PreferPredicted,
    Random(ChaCha8Rng),
    Script(VecDeque<ScriptedRound>),
}

impl RatingPolicy {
    pub fn new(kind: RatingPolicyKind, seed: u64, script: Option<&Path>) -> Result<Self, CliError> {
        Ok(match kind {
            RatingPolicyKind::PreferPredicted => Self::PreferPredicted,
            RatingPolicyKind::Random => Self::Random(ChaCha8Rng::seed_from_u64(seed)),
            RatingPolicyKind::Script => {
                let path = script.ok_or_else(|| CliError::new("usage", "--rating-policy script needs --script"))?;
                Self::Script(RatingScript::load(path)?.rounds.into())
            }
        })
    }

    pub fn rate(&mut self, round: &Round) -> Result<ScriptedRound, CliError> {
        let ratings = match self {
            Self::PreferPredicted => round
                .candidates
                .iter()
                .map(|c| match (c.image.is_some(), c.provenance) {
                    (false, _) => MIN_RATING as i64,
                    (true, Origin::Predicted) => MAX_RATING as i64,
                    (true, Origin::Perturbed) => 4,
                })
                .collect(),
            Self::Random(rng) => {
                round.candidates.iter().map(|_| rng.random_range(MIN_RATING as i64..=MAX_RATING as i64)).collect()
            }
            Self::Script(rounds) => {
                return rounds
                    .pop_front()
                    .ok_or_else(|| CliError::new("schema", format!("rating script has no entry for round {}", round.index)));
            }
        };
        Ok(ScriptedRound { ratings: Some(ratings), final_mark: None })
    }
}
