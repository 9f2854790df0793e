//! Generalized advantage estimation over time-major batches.

/// Advantages and returns for `n_envs` parallel streams of `horizon` steps,
/// index `t * n_envs + e`.
///
/// `bootstrap[i]` is the value of the successor state wherever the stream is
/// cut at step `i`: at episode ends (zero for terminal states, the critic
/// estimate for truncations) and at the last step of the horizon. Elsewhere
/// it is ignored in favor of `values` at the next step.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: &[f64],
    n_envs: usize,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(n_envs > 0 && n.is_multiple_of(n_envs), "batch of {n} is not a multiple of {n_envs}");
    assert!(values.len() == n && dones.len() == n && bootstrap.len() == n);
    let horizon = n / n_envs;
    let mut adv = vec![0.0; n];
    for e in 0..n_envs {
        let mut next_adv = 0.0;
        for t in (0..horizon).rev() {
            let i = t * n_envs + e;
            let cut = dones[i] || t + 1 == horizon;
            let next_value = if cut { bootstrap[i] } else { values[i + n_envs] };
            let delta = rewards[i] + gamma * next_value - values[i];
            let carry = if cut { 0.0 } else { gamma * lambda * next_adv };
            adv[i] = delta + carry;
            next_adv = adv[i];
        }
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales to zero mean and unit standard deviation. Fewer than
/// two samples are left unchanged.
pub fn normalize(x: &mut [f64]) {
    let n = x.len() as f64;
    if x.len() < 2 {
        return;
    }
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    x.iter_mut().for_each(|v| *v = (*v - mean) / std);
}
