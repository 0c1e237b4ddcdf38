//! Generalized advantage estimation.

/// Advantages and returns of one trajectory. `terminal[t]` cuts the
/// bootstrap after step `t`; a trajectory that ends without a terminal
/// (time limit) bootstraps from `last_value`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    terminal: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && terminal.len() == n, "sequence lengths differ");
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { last_value };
        let cont = if terminal[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * cont - values[t];
        running = delta + gamma * lambda * cont * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales to zero mean, unit variance (population statistics).
pub fn normalize(adv: &mut [f64]) {
    let n = adv.len() as f64;
    if adv.len() < 2 {
        return;
    }
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-12);
    adv.iter_mut().for_each(|a| *a = (*a - mean) / std);
}
