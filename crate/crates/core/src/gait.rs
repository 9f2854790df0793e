//! Cyclic phase clock with per-foot expected-contact indicators.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitSchedule {
    /// Both feet loaded: left on the ground, right on the deck, s.
    pub t_double: f64,
    /// Left foot in swing, s.
    pub t_single: f64,
    /// Half-width of the linear indicator transitions, s.
    pub smooth_width: f64,
}

impl Default for GaitSchedule {
    fn default() -> Self {
        Self {
            t_double: 0.75,
            t_single: 1.0,
            smooth_width: 0.05,
        }
    }
}

impl GaitSchedule {
    pub fn cycle(&self) -> f64 {
        self.t_double + self.t_single
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_double.is_finite() && self.t_double > 0.0) {
            return Err(invalid("gait.t_double", "must be positive"));
        }
        if !(self.t_single.is_finite() && self.t_single > 0.0) {
            return Err(invalid("gait.t_single", "must be positive"));
        }
        let max = 0.5 * self.t_double.min(self.t_single);
        if !(self.smooth_width >= 0.0 && self.smooth_width < max) {
            return Err(invalid("gait.smooth_width", format!("must lie in [0, {max})")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaitFoot {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitClock {
    /// Time since the start of the current cycle, in `[0, cycle)`.
    pub phase_time: f64,
    pub schedule: GaitSchedule,
}

impl GaitClock {
    /// Clock at the start of double support.
    pub fn new(schedule: GaitSchedule) -> Self {
        Self {
            phase_time: 0.0,
            schedule,
        }
    }

    pub fn advance(&self, dt: f64) -> Self {
        debug_assert!(dt >= 0.0);
        let cycle = self.schedule.cycle();
        let mut phase = (self.phase_time + dt).rem_euclid(cycle);
        if phase >= cycle {
            phase = 0.0;
        }
        Self {
            phase_time: phase,
            schedule: self.schedule,
        }
    }

    /// Expected contact in `[0, 1]`. The right foot stays on the deck; the
    /// left foot is loaded during double support and swings otherwise, with
    /// linear ramps of width `2 smooth_width` centered on each transition.
    pub fn expected_contact(&self, foot: GaitFoot) -> f64 {
        match foot {
            GaitFoot::Right => 1.0,
            GaitFoot::Left => self.left_indicator(),
        }
    }

    fn left_indicator(&self) -> f64 {
        let s = &self.schedule;
        let (p, td, w, cycle) = (self.phase_time, s.t_double, s.smooth_width, s.cycle());
        let down = |p: f64| 0.5 - (p - td) / (2.0 * w);
        let up = |d: f64| 0.5 + d / (2.0 * w);
        if w == 0.0 {
            return if p < td { 1.0 } else { 0.0 };
        }
        if p < td {
            if p < w {
                up(p)
            } else if p > td - w {
                down(p)
            } else {
                1.0
            }
        } else if p < td + w {
            down(p)
        } else if p > cycle - w {
            up(p - cycle)
        } else {
            0.0
        }
    }

    /// `(sin, cos)` of the cycle angle.
    pub fn clock_features(&self) -> [f64; 2] {
        let angle = TAU * self.phase_time / self.schedule.cycle();
        [angle.sin(), angle.cos()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(phase: f64) -> GaitClock {
        GaitClock {
            phase_time: phase,
            schedule: GaitSchedule::default(),
        }
    }

    #[test]
    fn advance_wraps_at_cycle() {
        assert!((at(0.0).advance(0.3).phase_time - 0.3).abs() < 1e-15);
        assert!((at(1.70).advance(0.10).phase_time - 0.05).abs() < 1e-12);
        assert_eq!(at(0.4).advance(0.0).phase_time, 0.4);
    }

    #[test]
    fn indicator_examples() {
        assert_eq!(at(0.3).expected_contact(GaitFoot::Left), 1.0);
        assert_eq!(at(1.2).expected_contact(GaitFoot::Left), 0.0);
        assert_eq!(at(1.2).expected_contact(GaitFoot::Right), 1.0);
        assert!((at(0.75).expected_contact(GaitFoot::Left) - 0.5).abs() < 1e-12);
        assert!((at(0.0).expected_contact(GaitFoot::Left) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn clock_feature_examples() {
        let [s, c] = at(0.0).clock_features();
        assert_eq!((s, c), (0.0, 1.0));
        let [s, c] = at(1.75 / 4.0).clock_features();
        assert!((s - 1.0).abs() < 1e-15 && c.abs() < 1e-15);
    }

    #[test]
    fn schedule_validation() {
        assert!(GaitSchedule::default().validate().is_ok());
        let bad = GaitSchedule {
            smooth_width: 0.4,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = GaitSchedule {
            t_single: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
