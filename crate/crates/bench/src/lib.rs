//! Shared scenarios for the criterion benches.

use grst_core::{GaussianSpec, MarginalSchedule, OptionContract, OptionKind, Result};

/// Arithmetic Brownian motion from `s0` on `segments` uniform points in `(0, t]`.
pub fn brownian_schedule(
    segments: usize,
    s0: f64,
    sigma_abs: f64,
    t: f64,
) -> Result<MarginalSchedule> {
    let entries = (1..=segments)
        .map(|i| {
            let ti = t * i as f64 / segments as f64;
            GaussianSpec::new(ti, s0, sigma_abs * ti.sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    MarginalSchedule::new(entries)
}

/// Four-point schedule with alternating means and a late variance drop.
pub fn caption_schedule() -> Result<MarginalSchedule> {
    MarginalSchedule::new(vec![
        GaussianSpec::new(0.1, 1.0, 0.15)?,
        GaussianSpec::new(0.15, -3.5, 0.6)?,
        GaussianSpec::new(0.55, 2.0, 0.75)?,
        GaussianSpec::new(0.68, -0.5, 0.25)?,
    ])
}

pub fn atm_call(s0: f64, t: f64) -> Result<OptionContract> {
    OptionContract::european(OptionKind::Call, s0, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenarios_build() {
        let s = brownian_schedule(4, 100.0, 20.0, 1.0).unwrap();
        assert_eq!(s.len(), 4);
        assert!((s.entries()[3].sigma - 20.0).abs() < 1e-12);
        assert_eq!(caption_schedule().unwrap().len(), 4);
        assert_eq!(atm_call(100.0, 1.0).unwrap().strike, 100.0);
    }
}
