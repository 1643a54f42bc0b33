//! Cyclic triangular learning-rate schedule, starting at the peak.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr_min: f64,
    pub lr_max: f64,
    pub cycle_iters: u64,
}

/// Triangular wave between lr_max and lr_min with period `cycle_iters`:
/// peak at iteration 0, trough at half period, peak again at a full period.
pub fn lr_at(iter: u64, s: &LrSchedule) -> f64 {
    if s.cycle_iters == 0 {
        return s.lr_max;
    }
    let phase = (iter % s.cycle_iters) as f64 / s.cycle_iters as f64;
    let tri = if phase <= 0.5 {
        2.0 * phase
    } else {
        2.0 * (1.0 - phase)
    };
    s.lr_max - (s.lr_max - s.lr_min) * tri
}

#[cfg(test)]
mod tests {
    use super::*;

    const S: LrSchedule = LrSchedule {
        lr_min: 1e-5,
        lr_max: 1e-4,
        cycle_iters: 500,
    };

    #[test]
    fn starts_at_peak() {
        assert_eq!(lr_at(0, &S), 1e-4);
    }

    #[test]
    fn trough_at_half_cycle() {
        assert!((lr_at(250, &S) - 1e-5).abs() < 1e-12);
    }

    #[test]
    fn peak_again_at_full_cycle() {
        assert_eq!(lr_at(500, &S), 1e-4);
    }

    #[test]
    fn bounded_everywhere() {
        for i in 0..1500 {
            let lr = lr_at(i, &S);
            assert!(lr >= 1e-5 - 1e-15 && lr <= 1e-4 + 1e-15);
        }
    }
}
