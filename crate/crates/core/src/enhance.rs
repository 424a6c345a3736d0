//! Rescaling neuron parameters for a shortened presentation window.
//!
//! Parameters tuned for a long presentation window misbehave when the
//! window shrinks: relative to the shorter sample exposure the firing
//! threshold sits too high, the refractory period blocks too large a
//! fraction of the window, and threshold adaptation accumulates too fast.
//! The functions here scale all three by the window ratio `t1 / t0`:
//!
//! * the threshold gap above reset scales and is rounded up to a whole
//!   millivolt, keeping the threshold strictly above reset;
//! * the refractory period scales and is rounded up to a whole timestep,
//!   keeping it at least one step;
//! * the adaptation increment scales exactly, with no rounding.
//!
//! Scaling is only defined for shrinking or keeping the window
//! (`1 <= t1 <= t0`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::NeuronParams;

fn check_window(t0: u32, t1: u32) -> Result<()> {
    if t0 < 1 || t1 < 1 {
        return Err(Error::Config(format!(
            "window lengths must be >= 1, got t0 = {t0}, t1 = {t1}"
        )));
    }
    if t1 > t0 {
        return Err(Error::Config(format!(
            "scaled window t1 = {t1} must not exceed the base window t0 = {t0}"
        )));
    }
    Ok(())
}

/// Scales the firing threshold to a `t1`-step window.
///
/// The gap between threshold and reset shrinks by `t1 / t0` and is rounded
/// up to the next whole millivolt: `v_reset + ceil((t1 / t0) * (v_th0 -
/// v_reset))`. Because the gap is positive, the result always stays at least
/// one millivolt above reset. Note the round-up means a base configuration
/// whose gap is not a whole number is normalized upward even at `t1 = t0`.
pub fn enhance_vth(v_th0: f64, v_reset: f64, t0: u32, t1: u32) -> Result<f64> {
    check_window(t0, t1)?;
    let gap = v_th0 - v_reset;
    if !gap.is_finite() || gap <= 0.0 {
        return Err(Error::Config(format!(
            "v_th ({v_th0}) must exceed v_reset ({v_reset})"
        )));
    }
    let scaled_gap = (f64::from(t1) * gap / f64::from(t0)).ceil();
    Ok(v_reset + scaled_gap)
}

/// Scales the refractory period to a `t1`-step window, rounding up so the
/// result is never below one timestep.
pub fn enhance_tref(t_ref0: u32, t0: u32, t1: u32) -> Result<u32> {
    check_window(t0, t1)?;
    if t_ref0 < 1 {
        return Err(Error::Config("t_ref must be >= 1".into()));
    }
    let scaled = (u64::from(t_ref0) * u64::from(t1)).div_ceil(u64::from(t0));
    // t1 <= t0 keeps the result within the base value, so it fits.
    Ok(scaled as u32)
}

/// Scales the threshold-adaptation increment to a `t1`-step window.
/// Proportional scaling, no rounding beyond the arithmetic itself: the
/// window ratio is formed first so the full window maps to exactly 1 and
/// the result can never exceed the base increment.
pub fn enhance_theta(theta0: f64, t0: u32, t1: u32) -> Result<f64> {
    check_window(t0, t1)?;
    if !theta0.is_finite() || theta0 < 0.0 {
        return Err(Error::Config(format!(
            "theta_plus must be finite and >= 0, got {theta0}"
        )));
    }
    Ok(theta0 * (f64::from(t1) / f64::from(t0)))
}

/// Base and rescaled parameter sets for one window change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnhancedParams {
    pub base: NeuronParams,
    pub t0: u32,
    pub t1: u32,
    pub scaled: NeuronParams,
}

/// Rescales a full parameter set from a `t0`-step to a `t1`-step window.
///
/// Threshold, refractory period, and adaptation increment are scaled as by
/// [`enhance_vth`], [`enhance_tref`], and [`enhance_theta`]; the reset and
/// rest potentials and the time constants carry over unchanged.
pub fn enhance_params(base: &NeuronParams, t0: u32, t1: u32) -> Result<EnhancedParams> {
    base.validate()?;
    let scaled = NeuronParams {
        v_th: enhance_vth(base.v_th, base.v_reset, t0, t1)?,
        t_ref: enhance_tref(base.t_ref, t0, t1)?,
        theta_plus: enhance_theta(base.theta_plus, t0, t1)?,
        ..*base
    };
    scaled
        .validate()
        .map_err(|e| Error::Contract(format!("scaled parameters violate their invariants: {e}")))?;
    Ok(EnhancedParams {
        base: *base,
        t0,
        t1,
        scaled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Expected values below are frozen from hand computation with the
    // default parameter set (v_th -52, v_reset -60, t_ref 5, theta_plus 1,
    // base window 350).

    #[test]
    fn threshold_at_selected_windows() {
        // gap 8 mV: 8*30/350 = 0.686 -> 1; 8*100/350 = 2.286 -> 3;
        // 8*10/350 = 0.229 -> 1; 8*350/350 = 8 exactly.
        assert_eq!(enhance_vth(-52.0, -60.0, 350, 30).unwrap(), -59.0);
        assert_eq!(enhance_vth(-52.0, -60.0, 350, 100).unwrap(), -57.0);
        assert_eq!(enhance_vth(-52.0, -60.0, 350, 10).unwrap(), -59.0);
        assert_eq!(enhance_vth(-52.0, -60.0, 350, 1).unwrap(), -59.0);
        assert_eq!(enhance_vth(-52.0, -60.0, 350, 350).unwrap(), -52.0);
    }

    #[test]
    fn refractory_at_selected_windows() {
        // t_ref 5: 5*30/350 = 0.43 -> 1; 5*100/350 = 1.43 -> 2;
        // 5*340/350 = 4.857 -> 5; identity at 350.
        assert_eq!(enhance_tref(5, 350, 30).unwrap(), 1);
        assert_eq!(enhance_tref(5, 350, 100).unwrap(), 2);
        assert_eq!(enhance_tref(5, 350, 340).unwrap(), 5);
        assert_eq!(enhance_tref(5, 350, 350).unwrap(), 5);
        assert_eq!(enhance_tref(5, 350, 1).unwrap(), 1);
    }

    #[test]
    fn adaptation_scales_exactly() {
        assert_eq!(enhance_theta(1.0, 350, 30).unwrap(), 30.0 / 350.0);
        assert_eq!(enhance_theta(1.0, 350, 350).unwrap(), 1.0);
        assert_eq!(enhance_theta(0.05, 350, 100).unwrap(), 100.0 * 0.05 / 350.0);
        assert_eq!(enhance_theta(0.0, 350, 7).unwrap(), 0.0);
    }

    #[test]
    fn adaptation_identity_is_exact_for_awkward_increments() {
        // At the full window the increment must come back bit-identical
        // even when increment/t0 is not representable. Forming the window
        // ratio first multiplies by exactly 1.0; the other association,
        // (t1 * theta) / t0, lands one ulp above the base for values like
        // this one (found by the randomized suite).
        let theta = 1.817_455_945_399_278_2_f64;
        assert_eq!(
            enhance_theta(theta, 3, 3).unwrap().to_bits(),
            theta.to_bits()
        );
        assert!(enhance_theta(theta, 3, 1).unwrap() <= theta);
    }

    #[test]
    fn full_set_identity_at_equal_windows() {
        let base = NeuronParams::default();
        let e = enhance_params(&base, 350, 350).unwrap();
        assert_eq!(e.scaled, base);
    }

    #[test]
    fn full_set_at_short_window() {
        let base = NeuronParams::default();
        let e = enhance_params(&base, 350, 30).unwrap();
        assert_eq!(e.scaled.v_th, -59.0);
        assert_eq!(e.scaled.t_ref, 1);
        assert_eq!(e.scaled.theta_plus, 30.0 / 350.0);
        // Untouched fields carry over.
        assert_eq!(e.scaled.v_reset, base.v_reset);
        assert_eq!(e.scaled.v_rest, base.v_rest);
        assert_eq!(e.scaled.tau_mem, base.tau_mem);
        assert_eq!(e.scaled.tau_theta, base.tau_theta);
    }

    #[test]
    fn growing_window_rejected() {
        assert!(enhance_params(&NeuronParams::default(), 350, 351).is_err());
        assert!(enhance_vth(-52.0, -60.0, 100, 101).is_err());
    }

    #[test]
    fn zero_window_rejected() {
        assert!(enhance_tref(5, 0, 0).is_err());
        assert!(enhance_theta(1.0, 350, 0).is_err());
    }

    #[test]
    fn results_stay_above_floors_everywhere() {
        // Even at t1 = 1 the threshold sits above reset and the refractory
        // period is a full step.
        for t1 in 1..=350 {
            let e = enhance_params(&NeuronParams::default(), 350, t1).unwrap();
            assert!(e.scaled.v_th > e.scaled.v_reset, "t1 = {t1}");
            assert!(e.scaled.t_ref >= 1, "t1 = {t1}");
            assert!(e.scaled.theta_plus >= 0.0, "t1 = {t1}");
        }
    }

    #[test]
    fn scaling_is_monotone_in_window_length() {
        let base = NeuronParams::default();
        let mut prev = enhance_params(&base, 350, 1).unwrap().scaled;
        for t1 in 2..=350 {
            let cur = enhance_params(&base, 350, t1).unwrap().scaled;
            assert!(cur.v_th >= prev.v_th);
            assert!(cur.t_ref >= prev.t_ref);
            assert!(cur.theta_plus > prev.theta_plus);
            prev = cur;
        }
    }
}
