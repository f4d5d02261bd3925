use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One hop of a topological walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instruction {
    Next,
    Prev,
    Mate,
    /// Terminal hop to the parent edge.
    Edge,
    /// Terminal hop to the parent face.
    Face,
}

impl Instruction {
    pub fn symbol(self) -> char {
        match self {
            Instruction::Next => 'N',
            Instruction::Prev => 'P',
            Instruction::Mate => 'M',
            Instruction::Edge => 'E',
            Instruction::Face => 'F',
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Instruction::Edge | Instruction::Face)
    }
}

/// Entity type a walk lands on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Coedge,
    Edge,
    Face,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WalkParseError {
    #[error("empty walk string (use \"I\" for the identity walk)")]
    Empty,
    #[error("illegal character {found:?} at column {column}")]
    IllegalCharacter { found: char, column: usize },
    #[error("terminal instruction {found:?} at column {column} is not the last instruction")]
    TerminalNotLast { found: char, column: usize },
    #[error("identity \"I\" at column {column} must be the whole walk")]
    IdentityNotAlone { column: usize },
}

impl WalkParseError {
    /// One-based column of the offending character, when there is one.
    pub fn column(&self) -> Option<usize> {
        match self {
            WalkParseError::Empty => None,
            WalkParseError::IllegalCharacter { column, .. }
            | WalkParseError::TerminalNotLast { column, .. }
            | WalkParseError::IdentityNotAlone { column } => Some(*column),
        }
    }
}

/// A parsed walk: coedge hops applied left to right, optionally followed by
/// one terminal hop to an edge or face.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Walk {
    instructions: Vec<Instruction>,
}

impl Walk {
    pub fn identity() -> Self {
        Walk { instructions: Vec::new() }
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn target(&self) -> Target {
        match self.instructions.last() {
            Some(Instruction::Edge) => Target::Edge,
            Some(Instruction::Face) => Target::Face,
            _ => Target::Coedge,
        }
    }

    /// Concatenation `self` then `other`. Fails if `self` already ends on an
    /// edge or face.
    pub fn then(&self, other: &Walk) -> Result<Walk, WalkParseError> {
        if let Some(&last) = self.instructions.last() {
            if last.is_terminal() && !other.instructions.is_empty() {
                return Err(WalkParseError::TerminalNotLast {
                    found: last.symbol(),
                    column: self.instructions.len(),
                });
            }
        }
        let mut instructions = self.instructions.clone();
        instructions.extend_from_slice(&other.instructions);
        Ok(Walk { instructions })
    }
}

/// Parses a walk string over `{I, N, P, M, E, F}`.
pub fn parse_walk(text: &str) -> Result<Walk, WalkParseError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(WalkParseError::Empty);
    }
    if text == "I" {
        return Ok(Walk::identity());
    }
    let chars: Vec<char> = text.chars().collect();
    let mut instructions = Vec::with_capacity(chars.len());
    for (k, &c) in chars.iter().enumerate() {
        let column = k + 1;
        let instruction = match c {
            'N' => Instruction::Next,
            'P' => Instruction::Prev,
            'M' => Instruction::Mate,
            'E' => Instruction::Edge,
            'F' => Instruction::Face,
            'I' => return Err(WalkParseError::IdentityNotAlone { column }),
            other => return Err(WalkParseError::IllegalCharacter { found: other, column }),
        };
        if instruction.is_terminal() && k + 1 != chars.len() {
            return Err(WalkParseError::TerminalNotLast { found: c, column });
        }
        instructions.push(instruction);
    }
    Ok(Walk { instructions })
}

impl FromStr for Walk {
    type Err = WalkParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_walk(s)
    }
}

impl fmt::Display for Walk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.instructions.is_empty() {
            return f.write_str("I");
        }
        for i in &self.instructions {
            write!(f, "{}", i.symbol())?;
        }
        Ok(())
    }
}

impl Serialize for Walk {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Walk {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_walk(&s).map_err(serde::de::Error::custom)
    }
}
