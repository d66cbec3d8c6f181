//! Expression and Action Unit label vocabularies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The six prototypical expressions, in the fixed order used for
/// tie-breaking and confusion-matrix layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Expression {
    #[serde(rename = "AN")]
    Anger,
    #[serde(rename = "DI")]
    Disgust,
    #[serde(rename = "FE")]
    Fear,
    #[serde(rename = "HA")]
    Happiness,
    #[serde(rename = "SA")]
    Sadness,
    #[serde(rename = "SU")]
    Surprise,
}

impl Expression {
    pub const ALL: [Expression; 6] = [
        Expression::Anger,
        Expression::Disgust,
        Expression::Fear,
        Expression::Happiness,
        Expression::Sadness,
        Expression::Surprise,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Expression::Anger => "AN",
            Expression::Disgust => "DI",
            Expression::Fear => "FE",
            Expression::Happiness => "HA",
            Expression::Sadness => "SA",
            Expression::Surprise => "SU",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Expression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Schema(format!("unknown expression '{s}'")))
    }
}

/// Action Units scored in the evaluation, ascending.
pub const ACTION_UNITS: [u8; 17] = [1, 2, 4, 5, 6, 7, 9, 10, 12, 15, 16, 17, 20, 23, 24, 25, 26];

pub fn au_index(au: u8) -> Option<usize> {
    ACTION_UNITS.iter().position(|&a| a == au)
}

/// Parses a `+`-separated AU list such as `1+2+25`; empty input is the empty set.
pub fn parse_aus(s: &str) -> Result<Vec<u8>> {
    let mut aus = Vec::new();
    for tok in s.split('+').map(str::trim).filter(|t| !t.is_empty()) {
        let tok = tok.trim_start_matches(['A', 'U', 'a', 'u']);
        let au: u8 = tok
            .parse()
            .map_err(|_| Error::Schema(format!("bad action unit '{tok}'")))?;
        if au_index(au).is_none() {
            return Err(Error::Schema(format!("AU{au} is not in the scored set")));
        }
        aus.push(au);
    }
    aus.sort_unstable();
    aus.dedup();
    Ok(aus)
}

pub fn format_aus(aus: &[u8]) -> String {
    aus.iter().map(u8::to_string).collect::<Vec<_>>().join("+")
}
