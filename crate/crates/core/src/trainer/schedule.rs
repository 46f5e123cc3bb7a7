use std::f64::consts::PI;

/// Cosine annealing with warm restarts:
/// `lr0 · ½(1 + cos(π · (epoch mod P) / P))`.
pub fn lr_at(initial_lr: f64, restart_period: f64, epoch: f64) -> f64 {
    let t = epoch.max(0.0).rem_euclid(restart_period);
    initial_lr * 0.5 * (1.0 + (PI * t / restart_period).cos())
}
