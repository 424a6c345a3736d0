//! Rate coding of intensity images into binary spike trains.
//!
//! Each input channel fires as a Bernoulli process: at every timestep,
//! channel `c` spikes with probability `intensity[c] * rate_gain`,
//! independently across steps and channels. Over a window this yields
//! binomially distributed spike counts whose law converges to a Poisson
//! distribution at the usual rare-event limit, which is how firing rates
//! are commonly modelled; [`poisson_pmf`] evaluates that reference law for
//! statistical checks.
//!
//! Very short windows can leave the network completely silent for a sample.
//! [`encode_with_retry`] re-presents such samples with a boosted gain until
//! the network responds or the retry budget runs out, which keeps
//! downstream spike-count statistics usable at aggressive window lengths.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest representable intensity; probabilities are validated against it.
pub const MAX_INTENSITY: f64 = 255.0;

/// Encoder settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    /// Presentation window length in timesteps.
    pub timestep_count: u32,
    /// Firing probability per unit intensity per timestep. The default maps
    /// full intensity (255) to roughly 64 Hz at a 1 ms timestep.
    pub rate_gain: f64,
    /// Minimum output spikes a presentation must evoke before it is
    /// accepted without a retry. Zero disables retrying.
    pub min_output_spikes: u32,
    /// Gain added on each retry of an under-responsive sample.
    pub gain_boost: f64,
    /// Maximum number of boosted re-presentations.
    pub max_retries: u32,
    /// Seed for the encoder's random stream (callers deriving their own
    /// streams may ignore it).
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            timestep_count: 350,
            rate_gain: 0.06375 / MAX_INTENSITY,
            min_output_spikes: 5,
            gain_boost: 0.032 / MAX_INTENSITY,
            max_retries: 4,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    /// Checks the window is non-empty and the gain keeps every possible
    /// per-step probability within `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        if self.timestep_count < 1 {
            return Err(Error::Config("timestep_count must be >= 1".into()));
        }
        if !self.rate_gain.is_finite() || self.rate_gain < 0.0 {
            return Err(Error::Config(format!(
                "rate_gain must be finite and >= 0, got {}",
                self.rate_gain
            )));
        }
        if self.rate_gain * MAX_INTENSITY > 1.0 {
            return Err(Error::Config(format!(
                "rate_gain {} maps full intensity to probability {} > 1",
                self.rate_gain,
                self.rate_gain * MAX_INTENSITY
            )));
        }
        if !self.gain_boost.is_finite() || self.gain_boost < 0.0 {
            return Err(Error::Config(format!(
                "gain_boost must be finite and >= 0, got {}",
                self.gain_boost
            )));
        }
        Ok(())
    }
}

/// A binary spike train over `t` timesteps and `c` channels, stored
/// row-major by timestep. Every entry is exactly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTrain {
    t: u32,
    c: usize,
    bits: Vec<u8>,
}

impl SpikeTrain {
    /// Number of timesteps.
    pub fn timesteps(&self) -> u32 {
        self.t
    }

    /// Number of channels.
    pub fn channels(&self) -> usize {
        self.c
    }

    /// The spike vector of one timestep.
    pub fn row(&self, t: u32) -> &[u8] {
        let start = t as usize * self.c;
        &self.bits[start..start + self.c]
    }

    /// Total spikes in the train.
    pub fn total_spikes(&self) -> u64 {
        self.bits.iter().map(|&b| u64::from(b)).sum()
    }

    /// Spikes emitted by one channel over the whole window.
    pub fn channel_count(&self, c: usize) -> u64 {
        (0..self.t as usize)
            .map(|t| u64::from(self.bits[t * self.c + c]))
            .sum()
    }
}

/// Encodes an intensity image into a spike train.
///
/// Channel `c` spikes at step `t` with probability `image[c] * rate_gain`.
/// Draws are consumed in step order and, within a step, in ascending
/// channel order over channels with non-zero probability — so under a fixed
/// generator state, raising one channel's intensity can only add spikes on
/// that channel, never remove them elsewhere.
pub fn encode(image: &[u8], cfg: &EncoderConfig, rng: &mut ChaCha8Rng) -> Result<SpikeTrain> {
    cfg.validate()?;
    encode_with_gain(image, cfg.timestep_count, cfg.rate_gain, rng)
}

fn encode_with_gain(
    image: &[u8],
    timesteps: u32,
    gain: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SpikeTrain> {
    if image.is_empty() {
        return Err(Error::Contract("cannot encode an empty image".into()));
    }
    let probs: Vec<f64> = image.iter().map(|&v| f64::from(v) * gain).collect();
    if let Some(p) = probs.iter().find(|&&p| p > 1.0) {
        return Err(Error::Config(format!(
            "per-step spike probability {p} exceeds 1"
        )));
    }
    let c = image.len();
    let mut bits = vec![0u8; timesteps as usize * c];
    for t in 0..timesteps as usize {
        let row = &mut bits[t * c..(t + 1) * c];
        for (slot, &p) in row.iter_mut().zip(&probs) {
            if p > 0.0 && rng.random::<f64>() < p {
                *slot = 1;
            }
        }
    }
    Ok(SpikeTrain {
        t: timesteps,
        c,
        bits,
    })
}

/// Encodes a sample, runs it through `run`, and re-presents it with a
/// boosted gain while the network's response stays below
/// `min_output_spikes`.
///
/// `run` receives each candidate train and returns the number of output
/// spikes it evoked. Retries add `gain_boost` to the gain each time, capped
/// so the brightest pixel of this image keeps a valid probability. After
/// `max_retries` boosted presentations the last train is accepted
/// regardless of the response, so the call never fails on a quiet sample.
/// Returns the accepted train and the number of presentations made.
pub fn encode_with_retry(
    image: &[u8],
    cfg: &EncoderConfig,
    rng: &mut ChaCha8Rng,
    mut run: impl FnMut(&SpikeTrain) -> Result<u64>,
) -> Result<(SpikeTrain, u32)> {
    cfg.validate()?;
    let max_px = image.iter().copied().max().unwrap_or(0);
    let gain_cap = if max_px > 0 {
        1.0 / f64::from(max_px)
    } else {
        f64::INFINITY
    };
    let mut attempt = 0u32;
    loop {
        let gain = (cfg.rate_gain + f64::from(attempt) * cfg.gain_boost).min(gain_cap);
        let train = encode_with_gain(image, cfg.timestep_count, gain, rng)?;
        let response = run(&train)?;
        attempt += 1;
        if response >= u64::from(cfg.min_output_spikes) || attempt > cfg.max_retries {
            return Ok((train, attempt));
        }
    }
}

/// Probability that a Poisson process with mean `lambda` produces exactly
/// `k` events.
///
/// Evaluated by the stable recurrence `p_k = p_{k-1} * lambda / k` starting
/// from `p_0 = exp(-lambda)`; every intermediate value is itself a
/// probability, so the computation cannot overflow for any `k`.
pub fn poisson_pmf(lambda: f64, k: u32) -> Result<f64> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Config(format!(
            "poisson rate must be finite and >= 0, got {lambda}"
        )));
    }
    let mut p = (-lambda).exp();
    for i in 1..=k {
        p *= lambda / f64::from(i);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn pmf_matches_hand_values() {
        // p(0; 1) = e^-1, p(2; 2) = 2 e^-2, p(3; 0.5) = 0.125 e^-0.5 / 6.
        assert!((poisson_pmf(1.0, 0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!((poisson_pmf(2.0, 2).unwrap() - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        let expect = 0.5f64.powi(3) / 6.0 * (-0.5f64).exp();
        assert!((poisson_pmf(0.5, 3).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn pmf_zero_rate_is_point_mass() {
        assert_eq!(poisson_pmf(0.0, 0).unwrap(), 1.0);
        assert_eq!(poisson_pmf(0.0, 1).unwrap(), 0.0);
        assert_eq!(poisson_pmf(0.0, 17).unwrap(), 0.0);
    }

    #[test]
    fn pmf_rejects_bad_rates() {
        assert!(poisson_pmf(-0.1, 0).is_err());
        assert!(poisson_pmf(f64::NAN, 0).is_err());
        assert!(poisson_pmf(f64::INFINITY, 2).is_err());
    }

    #[test]
    fn pmf_mean_matches_rate() {
        // sum k p(k) over enough terms reproduces lambda.
        for &lambda in &[0.5, 1.0, 5.0] {
            let mean: f64 = (0..200)
                .map(|k| f64::from(k) * poisson_pmf(lambda, k).unwrap())
                .sum();
            assert!((mean - lambda).abs() < 1e-9, "lambda = {lambda}");
        }
    }

    #[test]
    fn encode_shape_and_binaryness() {
        let cfg = EncoderConfig {
            timestep_count: 25,
            ..EncoderConfig::default()
        };
        let mut rng = stream_rng(1, "encode");
        let train = encode(&[0, 128, 255], &cfg, &mut rng).unwrap();
        assert_eq!(train.timesteps(), 25);
        assert_eq!(train.channels(), 3);
        for t in 0..25 {
            for &b in train.row(t) {
                assert!(b <= 1);
            }
        }
        // Zero-intensity channel never spikes.
        assert_eq!(train.channel_count(0), 0);
    }

    #[test]
    fn encode_is_deterministic_per_seed() {
        let cfg = EncoderConfig {
            timestep_count: 100,
            ..EncoderConfig::default()
        };
        let img = [3u8, 200, 77, 0, 255];
        let a = encode(&img, &cfg, &mut stream_rng(9, "e")).unwrap();
        let b = encode(&img, &cfg, &mut stream_rng(9, "e")).unwrap();
        let c = encode(&img, &cfg, &mut stream_rng(10, "e")).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn encode_rejects_invalid_probability() {
        let cfg = EncoderConfig {
            rate_gain: 0.5,
            ..EncoderConfig::default()
        };
        // 255 * 0.5 >> 1: rejected at validation.
        assert!(encode(&[255], &cfg, &mut stream_rng(0, "e")).is_err());
    }

    #[test]
    fn encode_rejects_empty_image() {
        let cfg = EncoderConfig::default();
        assert!(encode(&[], &cfg, &mut stream_rng(0, "e")).is_err());
    }

    #[test]
    fn retry_stops_once_response_suffices() {
        let cfg = EncoderConfig {
            timestep_count: 10,
            min_output_spikes: 3,
            max_retries: 5,
            ..EncoderConfig::default()
        };
        let mut calls = 0;
        let (_, attempts) = encode_with_retry(&[200, 100], &cfg, &mut stream_rng(4, "r"), |_| {
            calls += 1;
            Ok(if calls >= 3 { 10 } else { 0 })
        })
        .unwrap();
        assert_eq!(attempts, 3);
        assert_eq!(calls, 3);
    }

    #[test]
    fn retry_gives_up_after_budget() {
        let cfg = EncoderConfig {
            timestep_count: 10,
            min_output_spikes: 1,
            max_retries: 2,
            ..EncoderConfig::default()
        };
        let mut calls = 0;
        let (_, attempts) = encode_with_retry(&[50], &cfg, &mut stream_rng(4, "r"), |_| {
            calls += 1;
            Ok(0)
        })
        .unwrap();
        // One initial presentation plus two boosted ones.
        assert_eq!(attempts, 3);
        assert_eq!(calls, 3);
    }

    #[test]
    fn retry_with_zero_threshold_presents_once() {
        let cfg = EncoderConfig {
            timestep_count: 10,
            min_output_spikes: 0,
            max_retries: 7,
            ..EncoderConfig::default()
        };
        let mut calls = 0;
        let (_, attempts) = encode_with_retry(&[50], &cfg, &mut stream_rng(4, "r"), |_| {
            calls += 1;
            Ok(0)
        })
        .unwrap();
        assert_eq!(attempts, 1);
        assert_eq!(calls, 1);
    }

    #[test]
    fn retry_caps_gain_at_valid_probability() {
        // Huge boost: the effective gain must stay at 1/max_pixel, keeping
        // encode from rejecting the probability.
        let cfg = EncoderConfig {
            timestep_count: 50,
            min_output_spikes: 1000,
            gain_boost: 10.0 / MAX_INTENSITY,
            max_retries: 30,
            ..EncoderConfig::default()
        };
        let (train, attempts) =
            encode_with_retry(&[255, 10], &cfg, &mut stream_rng(4, "r"), |_| Ok(0)).unwrap();
        assert_eq!(attempts, 31);
        // At the cap, the brightest channel fires every step.
        assert_eq!(train.channel_count(0), 50);
    }
}
