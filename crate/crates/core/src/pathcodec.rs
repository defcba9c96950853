//! Path plans, their JSON wire format, and decoding into motion primitives.
//!
//! The wire format is a single-key object whose digits are quoted strings:
//!
//! ```text
//! {"array":["1","0","0","3"]}
//! ```
//!
//! Decoding walks consecutive pairs of `[initial_heading, plan...]`. For each
//! pair the heading delta `d = prev - next` picks the turn:
//!
//! | d          | primitives                    |
//! |------------|-------------------------------|
//! | 0          | FORWARD                       |
//! | -1 or 3    | TURN_RIGHT, FORWARD           |
//! | 1 or -3    | TURN_LEFT, FORWARD            |
//! | -2 or 2    | TURN_LEFT, TURN_LEFT, FORWARD |

use std::fmt;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::gridworld::Action;

/// A non-empty ordered list of moves.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathPlan(Vec<Action>);

impl PathPlan {
    /// Returns `None` for an empty list.
    pub fn new(actions: Vec<Action>) -> Option<Self> {
        if actions.is_empty() {
            None
        } else {
            Some(Self(actions))
        }
    }

    pub fn from_codes(codes: &[u8]) -> Result<Self, WireError> {
        if codes.is_empty() {
            return Err(WireError::EmptyPlan);
        }
        codes
            .iter()
            .map(|&c| Action::from_code(c).ok_or_else(|| WireError::InvalidDirection(c.to_string())))
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }

    pub fn actions(&self) -> &[Action] {
        &self.0
    }

    pub fn codes(&self) -> Vec<u8> {
        self.0.iter().map(|a| a.code()).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn last(&self) -> Action {
        *self.0.last().expect("plan is non-empty")
    }
}

impl fmt::Display for PathPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", a.code())?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MovePrimitive {
    Forward,
    TurnLeft,
    TurnRight,
}

impl fmt::Display for MovePrimitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MovePrimitive::Forward => "FORWARD",
            MovePrimitive::TurnLeft => "TURN_LEFT",
            MovePrimitive::TurnRight => "TURN_RIGHT",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("malformed: {0}")]
    Malformed(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error("invalid-direction: {0}")]
    InvalidDirection(String),
    #[error("empty-plan")]
    EmptyPlan,
}

impl WireError {
    /// Machine-readable reason, as reported by the path service.
    pub fn reason(&self) -> &'static str {
        match self {
            WireError::Malformed(_) => "malformed",
            WireError::Schema(_) => "schema",
            WireError::InvalidDirection(_) => "invalid-direction",
            WireError::EmptyPlan => "empty-plan",
        }
    }
}

#[derive(Serialize)]
struct WirePlan {
    array: Vec<String>,
}

pub fn encode_wire(plan: &PathPlan) -> Vec<u8> {
    let wire = WirePlan {
        array: plan.actions().iter().map(|a| a.code().to_string()).collect(),
    };
    serde_json::to_vec(&wire).expect("string arrays always serialize")
}

pub fn decode_wire(bytes: &[u8]) -> Result<PathPlan, WireError> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| WireError::Malformed(e.to_string()))?;
    let Value::Object(map) = value else {
        return Err(WireError::Schema("top level is not an object".into()));
    };
    if let Some(extra) = map.keys().find(|k| k.as_str() != "array") {
        return Err(WireError::Schema(format!("unexpected key {extra:?}")));
    }
    let entries = match map.get("array") {
        None => return Err(WireError::Schema("missing \"array\" key".into())),
        Some(Value::Array(entries)) => entries,
        Some(_) => return Err(WireError::Schema("\"array\" is not an array".into())),
    };
    if entries.is_empty() {
        return Err(WireError::EmptyPlan);
    }
    let actions = entries
        .iter()
        .map(|entry| match entry {
            Value::String(s) => match s.as_str() {
                "0" => Ok(Action::Left),
                "1" => Ok(Action::Up),
                "2" => Ok(Action::Right),
                "3" => Ok(Action::Down),
                _ => Err(WireError::InvalidDirection(format!("{s:?}"))),
            },
            other => Err(WireError::InvalidDirection(other.to_string())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PathPlan(actions))
}

/// Primitives that turn the robot from heading `prev` to heading `next` and
/// advance one cell.
pub fn transition_moves(prev: Action, next: Action) -> &'static [MovePrimitive] {
    use MovePrimitive::*;
    match prev.code() as i8 - next.code() as i8 {
        0 => &[Forward],
        -1 | 3 => &[TurnRight, Forward],
        1 | -3 => &[TurnLeft, Forward],
        _ => &[TurnLeft, TurnLeft, Forward],
    }
}

pub fn decode_moves(plan: &PathPlan, initial_heading: Action) -> Vec<MovePrimitive> {
    let mut moves = Vec::with_capacity(plan.len() * 2);
    let mut prev = initial_heading;
    for &next in plan.actions() {
        moves.extend_from_slice(transition_moves(prev, next));
        prev = next;
    }
    moves
}

/// Heading after a single rotation. Left turns step backwards through
/// LEFT→UP→RIGHT→DOWN, right turns step forwards.
pub fn rotate(heading: Action, primitive: MovePrimitive) -> Action {
    let code = heading.code();
    let next = match primitive {
        MovePrimitive::Forward => code,
        MovePrimitive::TurnLeft => (code + 3) % 4,
        MovePrimitive::TurnRight => (code + 1) % 4,
    };
    Action::from_code(next).expect("mod 4 is a valid code")
}

pub fn fold_heading(initial: Action, moves: &[MovePrimitive]) -> Action {
    moves.iter().fold(initial, |h, &p| rotate(h, p))
}

/// Final heading after executing the decoded plan.
pub fn simulate_headings(plan: &PathPlan, initial_heading: Action) -> Action {
    fold_heading(initial_heading, &decode_moves(plan, initial_heading))
}

#[cfg(test)]
mod tests {
    use super::*;
    use MovePrimitive::*;

    fn plan(codes: &[u8]) -> PathPlan {
        PathPlan::from_codes(codes).unwrap()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode_wire(&plan(&[1, 2])), br#"{"array":["1","2"]}"#);
        assert_eq!(encode_wire(&plan(&[0])), br#"{"array":["0"]}"#);
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_wire(br#"{"array":["1","0","0","3"]}"#).unwrap().codes(), vec![1, 0, 0, 3]);
        assert_eq!(
            decode_wire(b" {\n  \"array\" : [ \"2\" ,\"2\" ]\n} ").unwrap().codes(),
            vec![2, 2]
        );
    }

    #[test]
    fn decode_error_classes() {
        assert!(matches!(decode_wire(br#"{"array":["4"]}"#), Err(WireError::InvalidDirection(_))));
        assert!(matches!(decode_wire(br#"{"array":[1]}"#), Err(WireError::InvalidDirection(_))));
        assert!(matches!(decode_wire(br#"{"array":["12"]}"#), Err(WireError::InvalidDirection(_))));
        assert!(matches!(decode_wire(br#"{"path":["1"]}"#), Err(WireError::Schema(_))));
        assert!(matches!(decode_wire(br#"{"array":"1"}"#), Err(WireError::Schema(_))));
        assert!(matches!(decode_wire(br#"["1"]"#), Err(WireError::Schema(_))));
        assert!(matches!(
            decode_wire(br#"{"array":["1"],"extra":1}"#),
            Err(WireError::Schema(_))
        ));
        assert!(matches!(decode_wire(br#"{"array":["1""#), Err(WireError::Malformed(_))));
        assert!(matches!(decode_wire(b""), Err(WireError::Malformed(_))));
        assert_eq!(decode_wire(br#"{"array":[]}"#), Err(WireError::EmptyPlan));
    }

    #[test]
    fn decode_moves_examples() {
        assert_eq!(decode_moves(&plan(&[2]), Action::Up), vec![TurnRight, Forward]);
        assert_eq!(decode_moves(&plan(&[0]), Action::Right), vec![TurnLeft, TurnLeft, Forward]);
        assert_eq!(decode_moves(&plan(&[0]), Action::Left), vec![Forward]);
        assert_eq!(decode_moves(&plan(&[0]), Action::Down), vec![TurnRight, Forward]);
        assert_eq!(
            decode_moves(&plan(&[1, 0, 0, 3]), Action::Up),
            vec![Forward, TurnLeft, Forward, Forward, TurnLeft, Forward]
        );
    }

    #[test]
    fn heading_fold_examples() {
        assert_eq!(fold_heading(Action::Up, &[TurnRight]), Action::Right);
        assert_eq!(fold_heading(Action::Left, &[TurnLeft]), Action::Down);
        for h in Action::ALL {
            for d in Action::ALL {
                assert_eq!(simulate_headings(&PathPlan::new(vec![d]).unwrap(), h), d);
            }
        }
    }

    #[test]
    fn plan_constructors() {
        assert!(PathPlan::new(vec![]).is_none());
        assert_eq!(PathPlan::from_codes(&[]), Err(WireError::EmptyPlan));
        assert!(matches!(PathPlan::from_codes(&[7]), Err(WireError::InvalidDirection(_))));
        assert_eq!(plan(&[1, 2, 3]).to_string(), "[1,2,3]");
    }
}
