use serde::{Deserialize, Serialize};

use crate::robot::{Action, KinematicLimits};

/// Consecutive infeasible planner results before recovery starts.
pub const RECOVERY_AFTER: u32 = 5;
const ROTATE_SECS: f64 = 1.0;
const BACKUP_SECS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecoveryPhase {
    Rotate,
    Backup,
}

/// Rotate in place, or creep backwards at the reverse floor of the limits.
pub fn recovery_action(phase: RecoveryPhase, limits: &KinematicLimits) -> Action {
    match phase {
        RecoveryPhase::Rotate => Action::new(0.0, 0.8 * limits.max_w),
        RecoveryPhase::Backup => Action::new(limits.min_v(), 0.0),
    }
}

/// Infeasibility streak and the rotate/back-up cycle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RecoveryState {
    pub infeasible_streak: u32,
    pub phase: Option<RecoveryPhase>,
    pub phase_elapsed: f64,
}

impl RecoveryState {
    pub fn active(&self) -> bool {
        self.phase.is_some()
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }

    /// Records one infeasible planner result and returns the command for
    /// this control period: a stop before the streak reaches
    /// [`RECOVERY_AFTER`], a recovery motion afterwards.
    pub fn on_infeasible(&mut self, limits: &KinematicLimits, period: f64) -> Action {
        self.infeasible_streak = self.infeasible_streak.saturating_add(1);
        if self.infeasible_streak < RECOVERY_AFTER {
            return Action::ZERO;
        }
        let phase = match self.phase {
            None => {
                self.phase_elapsed = 0.0;
                RecoveryPhase::Rotate
            }
            Some(p) => {
                let limit = match p {
                    RecoveryPhase::Rotate => ROTATE_SECS,
                    RecoveryPhase::Backup => BACKUP_SECS,
                };
                if self.phase_elapsed >= limit - 1e-9 {
                    self.phase_elapsed = 0.0;
                    match p {
                        RecoveryPhase::Rotate => RecoveryPhase::Backup,
                        RecoveryPhase::Backup => RecoveryPhase::Rotate,
                    }
                } else {
                    p
                }
            }
        };
        self.phase = Some(phase);
        self.phase_elapsed += period;
        recovery_action(phase, limits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_actions() {
        let lim = KinematicLimits::with_speeds(0.5, 1.57);
        let r = recovery_action(RecoveryPhase::Rotate, &lim);
        assert_eq!(r.v, 0.0);
        assert!(r.w > 0.0);
        let b = recovery_action(RecoveryPhase::Backup, &lim);
        assert!(b.v < 0.0);
        assert_eq!(b.w, 0.0);
    }

    #[test]
    fn cycle_timing() {
        let lim = KinematicLimits::default();
        let mut st = RecoveryState::default();
        let mut phases = Vec::new();
        for _ in 0..(RECOVERY_AFTER - 1) {
            assert_eq!(st.on_infeasible(&lim, 0.1), Action::ZERO);
        }
        for _ in 0..30 {
            st.on_infeasible(&lim, 0.1);
            phases.push(st.phase.unwrap());
        }
        let rotate = phases.iter().take_while(|p| **p == RecoveryPhase::Rotate).count();
        assert_eq!(rotate, 10);
        let backup = phases[rotate..]
            .iter()
            .take_while(|p| **p == RecoveryPhase::Backup)
            .count();
        assert_eq!(backup, 5);
        assert_eq!(phases[15], RecoveryPhase::Rotate);
        st.reset();
        assert!(!st.active());
        assert_eq!(st.infeasible_streak, 0);
    }
}
