use super::DayRecord;

/// Sum of observed clicks.
pub fn total_clicks(trajectory: &[DayRecord]) -> u64 {
    trajectory.iter().map(|r| r.clicks).sum()
}

/// One step's share of the achievable range; 1.0 when best equals worst.
pub fn normalized_step(r: &DayRecord) -> f64 {
    if r.best == r.worst {
        1.0
    } else {
        (r.clicks - r.worst) as f64 / (r.best - r.worst) as f64
    }
}

/// Sum over steps of `(Y − Y⁻) / (Y* − Y⁻)`, between 0 and the step count.
pub fn normalized_clicks(trajectory: &[DayRecord]) -> f64 {
    trajectory.iter().map(normalized_step).sum()
}

/// Running totals of clicks and normalized clicks, one entry per step.
pub fn cumulative(trajectory: &[DayRecord]) -> Vec<(u64, f64)> {
    let mut clicks = 0;
    let mut norm = 0.0;
    trajectory
        .iter()
        .map(|r| {
            clicks += r.clicks;
            norm += normalized_step(r);
            (clicks, norm)
        })
        .collect()
}

/// Checks that a trajectory log is internally consistent and causal.
///
/// Every step's clicks lie in `[worst, best]`, steps run `1..=T`, and the
/// model version at step `t` counts only feedback that arrived by step
/// `t − 1`: selection `s` arrives at step `s + delay`, so the version must
/// be `max(0, t − 1 − delay)`.
pub fn audit_trajectory(trajectory: &[DayRecord], feedback_delay: usize) -> Result<(), String> {
    let mut last_day = None;
    for (i, r) in trajectory.iter().enumerate() {
        let t = i + 1;
        if r.step != t {
            return Err(format!("record {i} has step {}, expected {t}", r.step));
        }
        if !(r.worst <= r.clicks && r.clicks <= r.best) {
            return Err(format!(
                "step {t}: clicks {} outside [{}, {}]",
                r.clicks, r.worst, r.best
            ));
        }
        if r.n_candidates == 0 {
            return Err(format!("step {t}: no candidates"));
        }
        if last_day.is_some_and(|d| r.day <= d) {
            return Err(format!(
                "step {t}: calendar day {} not after previous step",
                r.day
            ));
        }
        last_day = Some(r.day);
        let expected = (t - 1).saturating_sub(feedback_delay) as u64;
        if r.model_version != expected {
            return Err(format!(
                "step {t}: selected with model version {}, causality allows exactly {expected}",
                r.model_version
            ));
        }
    }
    Ok(())
}
