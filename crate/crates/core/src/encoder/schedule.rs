use std::f64::consts::PI;

/// Cosine learning-rate cycle between `lr_min` and `lr_max`, starting at the
/// peak and reaching the trough half-way through each period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CyclicSchedule {
    pub lr_min: f64,
    pub lr_max: f64,
    /// Period in optimizer steps.
    pub period: usize,
}

pub fn cyclic_lr(step: usize, schedule: &CyclicSchedule) -> f64 {
    let CyclicSchedule {
        lr_min,
        lr_max,
        period,
    } = *schedule;
    let period = period.max(1);
    let phase = (step % period) as f64 / period as f64;
    let lr = lr_min + (lr_max - lr_min) * (1.0 + (2.0 * PI * phase).cos()) / 2.0;
    lr.clamp(lr_min, lr_max)
}
