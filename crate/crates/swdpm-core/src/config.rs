//! Market-wide parameters shared by every module.
//!
//! All volumes and currency amounts in the system are integer multiples of
//! the minimum units `uv` and `uc`; state and action fields store those
//! integer counts, and real values are recovered by multiplying by the unit.

use serde::{Deserialize, Serialize};

/// How a trader's per-step surplus is measured from its executed quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurplusMode {
    /// `w = |dc| - |dc_min(dv)|` for both roles.
    Literal,
    /// Consumer/producer surplus signs: buyers earn `|dc_min| - |dc|`,
    /// sellers earn `|dc| - |dc_min|`.
    Economic,
}

/// Reference mean used by the per-trader fairness term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessMeanMode {
    /// Arithmetic mean of unit prices over traders with executed volume.
    TraderMean,
    /// Volume-weighted mean `-sum|dc| / sum|dv|` over the same traders.
    VolumeWeighted,
}

/// Simulation parameters. Field names follow the symbols used throughout
/// the pricing and reward formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarketConfig {
    /// Standard unit price of information volume (currency per volume unit).
    pub eta: f64,
    /// Half-width of the willingness interval around the standard price.
    pub delta: f64,
    /// Discount factor for Q-learning updates.
    pub gamma: f64,
    /// Q-learning step size.
    pub alpha: f64,
    /// Weight of the fairness term in the per-trader reward.
    pub theta: f64,
    /// Weight of the unexecuted-volume penalty in the per-trader reward.
    pub lambda: f64,
    /// Number of pre-training update iterations.
    pub xi: u64,
    /// Minimum information-volume unit.
    pub uv: f64,
    /// Minimum currency unit.
    pub uc: f64,
    /// Hard cap on episode length; episodes truncate at this step count.
    pub max_steps_per_episode: u32,
    /// Cap on |dv| per action, counted in volume units.
    pub max_volume_per_action: i64,
    /// Surplus measure used inside rewards.
    pub surplus_mode: SurplusMode,
    /// Reference mean used by the fairness term.
    pub fairness_mean_mode: FairnessMeanMode,
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig {
            eta: 1.0,
            delta: 0.2,
            gamma: 0.995,
            alpha: 0.1,
            theta: -0.5,
            lambda: -100.0,
            xi: 1_000_000,
            uv: 1.0,
            uc: 1.0,
            max_steps_per_episode: 100,
            max_volume_per_action: 12,
            surplus_mode: SurplusMode::Economic,
            fairness_mean_mode: FairnessMeanMode::TraderMean,
        }
    }
}

impl MarketConfig {
    /// Standard price of one volume unit, expressed in currency units.
    pub fn grid_price(&self) -> f64 {
        self.eta * self.uv / self.uc
    }

    /// Real currency value of a grid amount.
    pub fn currency(&self, units: i64) -> f64 {
        units as f64 * self.uc
    }

    /// Real volume value of a grid amount.
    pub fn volume(&self, units: i64) -> f64 {
        units as f64 * self.uv
    }

    /// Checks every invariant the rest of the crate relies on. Returns the
    /// name of the first offending field.
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err("eta");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err("delta");
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err("gamma");
        }
        if !(self.alpha >= 0.0 && self.alpha <= 1.0) {
            return Err("alpha");
        }
        if !self.theta.is_finite() {
            return Err("theta");
        }
        if !self.lambda.is_finite() {
            return Err("lambda");
        }
        if !(self.uv > 0.0 && self.uv.is_finite()) {
            return Err("uv");
        }
        if !(self.uc > 0.0 && self.uc.is_finite()) {
            return Err("uc");
        }
        if self.max_steps_per_episode == 0 {
            return Err("max_steps_per_episode");
        }
        if self.max_volume_per_action < 1 {
            return Err("max_volume_per_action");
        }
        Ok(())
    }
}
