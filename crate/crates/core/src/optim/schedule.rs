use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::OptimError;

/// Linear warmup followed by cosine annealing, evaluated per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub warmup_epochs: usize,
    pub total_epochs: usize,
    pub lr_peak: f64,
    pub lr_start: f64,
    pub eta_min: f64,
}

impl ScheduleSpec {
    pub fn validate(&self) -> Result<(), OptimError> {
        let bad = |m: String| Err(OptimError::Invalid(m));
        if self.total_epochs <= self.warmup_epochs {
            return bad(format!(
                "total_epochs {} must exceed warmup_epochs {}",
                self.total_epochs, self.warmup_epochs
            ));
        }
        if !(self.lr_peak.is_finite() && self.lr_start >= 0.0 && self.lr_start <= self.lr_peak) {
            return bad(format!(
                "need 0 <= lr_start ({}) <= lr_peak ({})",
                self.lr_start, self.lr_peak
            ));
        }
        if !(self.eta_min >= 0.0 && self.eta_min <= self.lr_peak) {
            return bad(format!("need 0 <= eta_min ({}) <= lr_peak ({})", self.eta_min, self.lr_peak));
        }
        Ok(())
    }
}

/// Learning rate at the start of `epoch`; exactly `lr_start` at 0,
/// `lr_peak` at the end of warmup and `eta_min` at `total_epochs`.
pub fn lr_at(epoch: usize, spec: &ScheduleSpec) -> Result<f64, OptimError> {
    if epoch > spec.total_epochs {
        return Err(OptimError::EpochOutOfRange {
            epoch,
            total: spec.total_epochs,
        });
    }
    lr_at_time(epoch as f64, spec)
}

/// The same schedule at a fractional epoch `t ∈ [0, total_epochs]`.
pub fn lr_at_time(t: f64, spec: &ScheduleSpec) -> Result<f64, OptimError> {
    let (w, total) = (spec.warmup_epochs as f64, spec.total_epochs as f64);
    if !(0.0..=total).contains(&t) {
        return Err(OptimError::EpochOutOfRange {
            epoch: t.max(0.0).ceil() as usize,
            total: spec.total_epochs,
        });
    }
    spec.validate()?;
    if t == w {
        return Ok(spec.lr_peak);
    }
    if t == total {
        return Ok(spec.eta_min);
    }
    if t < w {
        return Ok(spec.lr_start + (spec.lr_peak - spec.lr_start) * (t / w));
    }
    let frac = (t - w) / (total - w);
    Ok(spec.eta_min + (spec.lr_peak - spec.eta_min) * (1.0 + (PI * frac).cos()) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(w: usize, t: usize) -> ScheduleSpec {
        ScheduleSpec {
            warmup_epochs: w,
            total_epochs: t,
            lr_peak: 0.1,
            lr_start: 0.01,
            eta_min: 0.001,
        }
    }

    #[test]
    fn endpoints_are_exact() {
        let s = spec(5, 25);
        assert_eq!(lr_at(0, &s).unwrap(), 0.01);
        assert_eq!(lr_at(5, &s).unwrap(), 0.1);
        assert_eq!(lr_at(25, &s).unwrap(), 0.001);
    }

    #[test]
    fn cosine_midpoint() {
        let s = spec(5, 25);
        let mid = 0.001 + 0.5 * (0.1 - 0.001);
        assert!((lr_at(15, &s).unwrap() - mid).abs() < 1e-12);
    }

    #[test]
    fn no_warmup_starts_at_peak() {
        let s = spec(0, 10);
        assert_eq!(lr_at(0, &s).unwrap(), 0.1);
        assert!(lr_at(1, &s).unwrap() < 0.1);
    }

    #[test]
    fn out_of_range_and_invalid() {
        assert_eq!(
            lr_at(11, &spec(0, 10)).unwrap_err(),
            OptimError::EpochOutOfRange { epoch: 11, total: 10 }
        );
        assert!(lr_at(0, &spec(10, 10)).is_err());
        let mut s = spec(1, 3);
        s.lr_start = 0.5;
        assert!(lr_at(0, &s).is_err());
    }

    #[test]
    fn fractional_time_matches_epochs_and_is_continuous() {
        let s = spec(5, 25);
        for e in 0..=25 {
            assert_eq!(lr_at_time(e as f64, &s).unwrap(), lr_at(e, &s).unwrap());
        }
        for t in [5.0 - 1e-13, 5.0 + 1e-13] {
            assert!((lr_at_time(t, &s).unwrap() - 0.1).abs() <= 1e-12);
        }
        assert!(lr_at_time(25.5, &s).is_err());
        assert!(lr_at_time(-0.5, &s).is_err());
    }
}
