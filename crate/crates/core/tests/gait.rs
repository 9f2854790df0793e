mod common;

use boardpush::gait::{GaitClock, GaitFoot, GaitSchedule};
use common::reward_oracle;
use proptest::prelude::*;

fn clock(phase: f64) -> GaitClock {
    GaitClock {
        phase_time: phase,
        schedule: GaitSchedule::default(),
    }
}

#[test]
fn cycle_is_one_point_seven_five_seconds() {
    assert_eq!(GaitSchedule::default().cycle(), 1.75);
}

#[test]
fn left_indicator_integrates_to_double_support() {
    let s = GaitSchedule::default();
    let n = 175_000;
    let h = s.cycle() / n as f64;
    let area: f64 = (0..n)
        .map(|i| clock((i as f64 + 0.5) * h).expected_contact(GaitFoot::Left) * h)
        .sum();
    assert!((area - s.t_double).abs() <= 2.0 * s.smooth_width, "{area}");
}

#[test]
fn indicator_matches_independent_ramp() {
    let s = GaitSchedule::default();
    let p = reward_oracle::Params {
        t_double: s.t_double,
        t_single: s.t_single,
        w: s.smooth_width,
        sigma: 1.0,
        f_min: 0.0,
        v_swing: 0.0,
    };
    for i in 0..17_500 {
        let phase = i as f64 * 1e-4;
        let lib = clock(phase).expected_contact(GaitFoot::Left);
        assert!((lib - reward_oracle::left_contact(&p, phase)).abs() < 1e-12, "phase {phase}");
    }
}

proptest! {
    #[test]
    fn left_is_one_in_stance_and_zero_in_swing(p in 0.0..1.75f64) {
        let v = clock(p).expected_contact(GaitFoot::Left);
        prop_assert!((0.0..=1.0).contains(&v));
        if (0.05..=0.70).contains(&p) {
            prop_assert_eq!(v, 1.0);
        }
        if (0.80..1.70).contains(&p) {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn right_is_always_one(p in 0.0..1.75f64) {
        prop_assert_eq!(clock(p).expected_contact(GaitFoot::Right), 1.0);
    }

    #[test]
    fn indicators_are_periodic(p in 0.0..1.75f64, k in 1u32..5) {
        let a = clock(p);
        let b = a.advance(1.75 * k as f64);
        for foot in [GaitFoot::Left, GaitFoot::Right] {
            prop_assert!((a.expected_contact(foot) - b.expected_contact(foot)).abs() < 1e-9);
        }
    }

    #[test]
    fn advance_composes(p in 0.0..1.75f64, a in 0.0..5.0f64, b in 0.0..5.0f64) {
        let two = clock(p).advance(a).advance(b).phase_time;
        let one = clock(p).advance(a + b).phase_time;
        let d = (two - one).abs();
        prop_assert!(d.min(1.75 - d) < 1e-12);
        prop_assert!((0.0..1.75).contains(&two));
    }

    #[test]
    fn clock_features_lie_on_unit_circle(p in 0.0..1.75f64) {
        let [s, c] = clock(p).clock_features();
        prop_assert!((s * s + c * c - 1.0).abs() < 1e-12);
    }
}
