use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Per-contract verdict / ground-truth label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Clean,
    Defective,
}

impl Label {
    /// Output class index of the classifier head.
    pub fn class_index(self) -> usize {
        match self {
            Label::Clean => 0,
            Label::Defective => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Clean => "clean",
            Label::Defective => "defective",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clean" => Ok(Label::Clean),
            "defective" => Ok(Label::Defective),
            other => Err(format!("bad label {other:?}")),
        }
    }
}
