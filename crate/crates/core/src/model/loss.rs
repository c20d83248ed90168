/// Margin ranking loss for a canonically ordered pair:
/// `max(0, margin - (score_high - score_low))`.
pub fn mrl_loss(score_low: f64, score_high: f64, margin: f64) -> f64 {
    (margin - (score_high - score_low)).max(0.0)
}
