use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum level applied to the jammed tendons, kPa below atmospheric.
pub const JAMMED_KPA: f64 = 50.0;
pub const MAX_PRESSURE_KPA: f64 = 100.0;

/// Membrane vacuum with a first-order lag toward its set point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JammingState {
    pub pressure_kpa: f64,
    pub target_kpa: f64,
    pub time_constant_s: f64,
}

impl JammingState {
    /// Settled at `pressure_kpa` with the default 0.1 s lag.
    pub fn settled(pressure_kpa: f64) -> Self {
        Self {
            pressure_kpa,
            target_kpa: pressure_kpa,
            time_constant_s: 0.1,
        }
    }

    pub fn unjammed() -> Self {
        Self::settled(0.0)
    }

    pub fn jammed() -> Self {
        Self::settled(JAMMED_KPA)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("pressure", self.pressure_kpa), ("target", self.target_kpa)] {
            if !(0.0..=MAX_PRESSURE_KPA).contains(&p) {
                return Err(Error::InvalidSpec(format!(
                    "{name} {p} kPa outside [0, {MAX_PRESSURE_KPA}]"
                )));
            }
        }
        if !(self.time_constant_s >= 0.0) {
            return Err(Error::InvalidSpec("time constant must be non-negative".into()));
        }
        Ok(())
    }

    pub fn set_target(&mut self, target_kpa: f64) {
        self.target_kpa = target_kpa.clamp(0.0, MAX_PRESSURE_KPA);
    }

    /// Advances the lag by `dt` using the exact exponential solution, so the
    /// pressure never overshoots its target.
    pub fn advance(&mut self, dt: f64) -> f64 {
        if self.time_constant_s <= 0.0 {
            self.pressure_kpa = self.target_kpa;
        } else {
            let decay = (-dt / self.time_constant_s).exp();
            self.pressure_kpa = self.target_kpa + (self.pressure_kpa - self.target_kpa) * decay;
        }
        self.pressure_kpa = self.pressure_kpa.max(0.0);
        self.pressure_kpa
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_reaches_ninety_five_percent_near_300_ms() {
        let mut s = JammingState::unjammed();
        s.set_target(JAMMED_KPA);
        let dt = 1e-4;
        let mut t = 0.0;
        let mut last = s.pressure_kpa;
        while s.pressure_kpa < 0.95 * JAMMED_KPA {
            s.advance(dt);
            assert!(s.pressure_kpa >= last);
            assert!(s.pressure_kpa <= JAMMED_KPA);
            last = s.pressure_kpa;
            t += dt;
        }
        assert!((t - 0.2996).abs() < 2e-3, "{t}");
    }

    #[test]
    fn release_is_monotone_and_non_negative() {
        let mut s = JammingState::jammed();
        s.set_target(0.0);
        let mut last = s.pressure_kpa;
        for _ in 0..10_000 {
            s.advance(1e-3);
            assert!(s.pressure_kpa <= last && s.pressure_kpa >= 0.0);
            last = s.pressure_kpa;
        }
        assert!(JammingState::settled(120.0).validate().is_err());
    }
}
