use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonaId {
    Thinker,
    Realist,
    Feeler,
}

impl PersonaId {
    pub const ALL: [PersonaId; 3] = [PersonaId::Thinker, PersonaId::Realist, PersonaId::Feeler];

    pub fn as_str(self) -> &'static str {
        match self {
            PersonaId::Thinker => "thinker",
            PersonaId::Realist => "realist",
            PersonaId::Feeler => "feeler",
        }
    }
}

impl fmt::Display for PersonaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PersonaId {
    type Err = PersonaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "thinker" => Ok(PersonaId::Thinker),
            "realist" => Ok(PersonaId::Realist),
            "feeler" => Ok(PersonaId::Feeler),
            other => Err(PersonaError::UnknownId(other.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PersonaError {
    #[error("unknown persona id {0:?}")]
    UnknownId(String),
    #[error("persona file has no front-matter header")]
    MissingHeader,
    #[error("persona header is missing `{0}`")]
    MissingField(&'static str),
    #[error("persona prompt text is empty")]
    EmptyPrompt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub id: PersonaId,
    pub display_name: String,
    pub prompt_text: String,
    pub mbti_axis: String,
}

const THINKER: &str = include_str!("../../data/personas/thinker.md");
const REALIST: &str = include_str!("../../data/personas/realist.md");
const FEELER: &str = include_str!("../../data/personas/feeler.md");

impl Persona {
    /// The shipped persona for `id`.
    pub fn builtin(id: PersonaId) -> Persona {
        let text = match id {
            PersonaId::Thinker => THINKER,
            PersonaId::Realist => REALIST,
            PersonaId::Feeler => FEELER,
        };
        Persona::parse(text).expect("bundled persona files are well-formed")
    }

    /// Parses a persona file: a `---` delimited `key: value` header followed by
    /// the prompt text.
    pub fn parse(text: &str) -> Result<Persona, PersonaError> {
        let text = text.trim_start_matches('\u{feff}');
        let rest = text.strip_prefix("---").ok_or(PersonaError::MissingHeader)?;
        let end = rest.find("\n---").ok_or(PersonaError::MissingHeader)?;
        let (header, body) = (&rest[..end], &rest[end + 4..]);

        let mut id = None;
        let mut display_name = None;
        let mut mbti_axis = None;
        for line in header.lines() {
            let Some((key, value)) = line.split_once(':') else { continue };
            let value = value.trim().to_string();
            match key.trim() {
                "id" => id = Some(value.parse::<PersonaId>()?),
                "display_name" => display_name = Some(value),
                "mbti_axis" => mbti_axis = Some(value),
                _ => {}
            }
        }
        let prompt_text = body.trim().to_string();
        if prompt_text.is_empty() {
            return Err(PersonaError::EmptyPrompt);
        }
        Ok(Persona {
            id: id.ok_or(PersonaError::MissingField("id"))?,
            display_name: display_name.ok_or(PersonaError::MissingField("display_name"))?,
            mbti_axis: mbti_axis.ok_or(PersonaError::MissingField("mbti_axis"))?,
            prompt_text,
        })
    }
}
