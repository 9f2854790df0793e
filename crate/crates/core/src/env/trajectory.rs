use serde::{Deserialize, Serialize};

use super::Termination;
use crate::dynamics::{ContactPair, Foot};
use crate::rewards::{BodySignals, Command, RewardBreakdown, TERM_NAMES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub pair: ContactPair,
    pub foot: Option<Foot>,
    pub point: [f64; 3],
    pub penetration: f64,
    pub normal_force: f64,
}

/// Full record of one control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFrame {
    pub step: usize,
    pub t: f64,
    pub phase: f64,
    pub expected_contact: [f64; 2],
    pub command: Command,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub q_board: Vec<f64>,
    pub v_board: Vec<f64>,
    /// Joint targets, rad.
    pub action: Vec<f64>,
    pub previous_action: Vec<f64>,
    pub torque: Vec<f64>,
    pub signals: BodySignals,
    pub reward: Option<RewardBreakdown>,
    pub contacts: Vec<ContactRecord>,
    pub termination: Option<Termination>,
}

impl TrajectoryFrame {
    /// CSV header matching `csv_row` for a frame of the same shape.
    pub fn csv_header(&self) -> String {
        let mut cols = vec!["t".to_string()];
        let mut push = |prefix: &str, n: usize| cols.extend((0..n).map(|i| format!("{prefix}{i}")));
        push("q", self.q.len());
        push("v", self.v.len());
        push("deck_q", self.q_board.len());
        push("deck_v", self.v_board.len());
        push("action", self.action.len());
        cols.extend(TERM_NAMES.iter().map(|s| s.to_string()));
        cols.push("total".into());
        cols.join(",")
    }

    /// Values in `csv_header` order; reward columns are empty for the reset frame.
    pub fn csv_row(&self) -> String {
        let mut vals = vec![self.t.to_string()];
        for x in self.q.iter().chain(&self.v).chain(&self.q_board).chain(&self.v_board).chain(&self.action) {
            vals.push(x.to_string());
        }
        match &self.reward {
            Some(r) => {
                vals.extend(r.terms.iter().map(|x| x.to_string()));
                vals.push(r.total.to_string());
            }
            None => vals.extend(std::iter::repeat_n(String::new(), TERM_NAMES.len() + 1)),
        }
        vals.join(",")
    }
}
