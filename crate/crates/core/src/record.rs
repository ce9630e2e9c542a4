//! Per-round trace records shared by both simulation loops.

/// Everything the metrics layer needs to know about one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    /// Round number, starting at 1.
    pub round: usize,
    /// Index of the played domain point.
    pub action: usize,
    /// Observed (noisy) reward.
    pub reward: f64,
    /// Observed (noisy) cost.
    pub cost: f64,
    /// Ground-truth reward at the played point.
    pub true_reward: f64,
    /// Ground-truth cost at the played point.
    pub true_cost: f64,
    /// Dual multiplier (primal-dual loop) or virtual queue length (Lyapunov
    /// loop) *at selection time*, before this round's update.
    pub dual: f64,
}
