//! Direct evaluations of the advantage estimator and the PPO loss.

use boardpush::learn::{Policy, Samples, TrainConfig};

/// Advantage as an explicit sum of discounted TD residuals up to the first
/// cut, written without recursion.
pub fn brute_force_advantage(r: &[f64], v: &[f64], done: &[bool], boot: &[f64], t: usize, gamma: f64, lambda: f64) -> f64 {
    let horizon = r.len();
    let mut sum = 0.0;
    for k in t..horizon {
        let cut = done[k] || k + 1 == horizon;
        let next = if cut { boot[k] } else { v[k + 1] };
        let delta = r[k] + gamma * next - v[k];
        sum += (gamma * lambda).powi((k - t) as i32) * delta;
        if cut {
            break;
        }
    }
    sum
}

/// Independent forward pass from the documented parameter layout.
pub fn oracle_mlp(sizes: &[usize], p: &[f64], x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let mut off = 0;
    for l in 0..sizes.len() - 1 {
        let (ni, no) = (sizes[l], sizes[l + 1]);
        let mut z = vec![0.0; no];
        for o in 0..no {
            z[o] = p[off + ni * no + o];
            for i in 0..ni {
                z[o] += p[off + o * ni + i] * a[i];
            }
        }
        off += ni * no + no;
        a = if l + 2 < sizes.len() { z.iter().map(|v| v.tanh()).collect() } else { z };
    }
    a
}

pub fn oracle_loss(policy: &Policy, s: &Samples, cfg: &TrainConfig, flat: &[f64]) -> f64 {
    let na = policy.actor_params.len();
    let nc = policy.critic_params.len();
    let (pa, pc, ls) = (&flat[..na], &flat[na..na + nc], &flat[na + nc..]);
    let n = s.len();
    let mut pl = 0.0;
    let mut vl = 0.0;
    for r in 0..n {
        let x: Vec<f64> = s.obs.row(r).iter().copied().collect();
        let z = oracle_mlp(policy.actor.sizes(), pa, &x);
        let mut lp = 0.0;
        for i in 0..z.len() {
            let m = z[i].tanh();
            let sd = ls[i].exp();
            let d = (s.actions[(r, i)] - m) / sd;
            lp += -0.5 * d * d - ls[i] - 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        let ratio = (lp - s.old_log_probs[r]).exp();
        let a = s.advantages[r];
        pl -= (ratio * a).min(ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * a) / n as f64;
        let v = oracle_mlp(policy.critic.sizes(), pc, &x)[0];
        vl += 0.5 * (v - s.returns[r]).powi(2) / n as f64;
    }
    let ent: f64 = ls.iter().map(|l| l + 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()).sum();
    pl + cfg.value_coef * vl - cfg.entropy_coef * ent
}
