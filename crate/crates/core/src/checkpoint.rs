//! Binary model checkpoints.
//!
//! Layout, all multi-byte fields little-endian:
//!
//! ```text
//! offset  size             field
//! 0       4                magic "TSPK"
//! 4       4                format version (currently 1)
//! 8       4                n_neurons (u32)
//! 12      4                input_dim (u32)
//! 16      4                timestep the model was trained at (u32)
//! 20      8*input_dim*n    weights, f64, row-major by input channel
//! ...     8*n              adaptive thresholds (theta), f64
//! ```
//!
//! Weights and thresholds are the learned state; membranes, traces, and
//! refractory counters are transient and excluded. Loading reconstructs a
//! network at rest.

use std::io::Write;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::neuron::{NetworkState, NeuronParams};

const MAGIC: &[u8; 4] = b"TSPK";
const VERSION: u32 = 1;

/// A deserialized checkpoint: the learned state plus its shape and the
/// window length it was trained at.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub n_neurons: u32,
    pub input_dim: u32,
    pub timestep: u32,
    pub weights: Vec<f64>,
    pub theta: Vec<f64>,
}

impl Checkpoint {
    /// Captures the learned state of a network.
    pub fn from_state(state: &NetworkState, timestep: u32) -> Self {
        Checkpoint {
            n_neurons: state.n_neurons as u32,
            input_dim: state.n_inputs as u32,
            timestep,
            weights: state.weights.clone(),
            theta: state.theta.clone(),
        }
    }

    /// Rebuilds a network at rest around the stored weights and
    /// thresholds.
    pub fn into_state(self, params: &NeuronParams) -> Result<NetworkState> {
        params.validate()?;
        let n = self.n_neurons as usize;
        let inputs = self.input_dim as usize;
        if n == 0 || inputs == 0 {
            return Err(Error::Format(format!(
                "checkpoint describes a degenerate {inputs}x{n} network"
            )));
        }
        Ok(NetworkState {
            n_inputs: inputs,
            n_neurons: n,
            v_mem: vec![params.v_rest; n],
            theta: self.theta,
            refrac_remaining: vec![0; n],
            weights: self.weights,
            pre_trace: vec![0.0; inputs],
            post_trace: vec![0.0; n],
            last_drive: vec![f64::NEG_INFINITY; n],
            counts: Default::default(),
        })
    }
}

/// Writes a checkpoint file.
pub fn save_checkpoint(path: &Path, state: &NetworkState, timestep: u32) -> Result<()> {
    let mut out = Vec::with_capacity(20 + 8 * (state.weights.len() + state.theta.len()));
    out.extend_from_slice(MAGIC);
    out.write_u32::<LittleEndian>(VERSION).unwrap();
    out.write_u32::<LittleEndian>(state.n_neurons as u32)
        .unwrap();
    out.write_u32::<LittleEndian>(state.n_inputs as u32)
        .unwrap();
    out.write_u32::<LittleEndian>(timestep).unwrap();
    for &w in &state.weights {
        out.write_f64::<LittleEndian>(w).unwrap();
    }
    for &t in &state.theta {
        out.write_f64::<LittleEndian>(t).unwrap();
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Reads a checkpoint file, validating magic, version, and exact payload
/// size before any allocation is sized from the header.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display();
    if raw.len() < 20 {
        return Err(Error::Format(format!(
            "{origin}: checkpoint header needs 20 bytes, file has {}",
            raw.len()
        )));
    }
    if &raw[0..4] != MAGIC {
        return Err(Error::Format(format!(
            "{origin}: bad checkpoint magic {:02X?}, expected {:02X?}",
            &raw[0..4],
            MAGIC
        )));
    }
    let mut cur = &raw[4..20];
    let version = cur.read_u32::<LittleEndian>().unwrap();
    if version != VERSION {
        return Err(Error::Format(format!(
            "{origin}: unsupported checkpoint version {version}, expected {VERSION}"
        )));
    }
    let n_neurons = cur.read_u32::<LittleEndian>().unwrap();
    let input_dim = cur.read_u32::<LittleEndian>().unwrap();
    let timestep = cur.read_u32::<LittleEndian>().unwrap();
    let weight_count = u64::from(n_neurons)
        .checked_mul(u64::from(input_dim))
        .ok_or_else(|| Error::Format(format!("{origin}: weight count overflows")))?;
    let expected = weight_count
        .checked_add(u64::from(n_neurons))
        .and_then(|floats| floats.checked_mul(8))
        .ok_or_else(|| Error::Format(format!("{origin}: payload size overflows")))?;
    let body = &raw[20..];
    if body.len() as u64 != expected {
        return Err(Error::Format(format!(
            "{origin}: payload is {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let mut body_reader = body;
    let mut read_f64s = |count: usize| -> Vec<f64> {
        let mut v = Vec::with_capacity(count);
        for _ in 0..count {
            v.push(body_reader.read_f64::<LittleEndian>().unwrap());
        }
        v
    };
    let weights = read_f64s(weight_count as usize);
    let theta = read_f64s(n_neurons as usize);
    Ok(Checkpoint {
        n_neurons,
        input_dim,
        timestep,
        weights,
        theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn trained_like_state() -> NetworkState {
        let params = NeuronParams::default();
        let mut s = NetworkState::new(6, 4, &params, 1.0, &mut stream_rng(3, "init")).unwrap();
        s.theta.copy_from_slice(&[0.5, 1.5, 0.0, 2.25]);
        s
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let state = trained_like_state();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.tspk");
        save_checkpoint(&path, &state, 350).unwrap();
        let cp = load_checkpoint(&path).unwrap();
        assert_eq!(cp.n_neurons, 4);
        assert_eq!(cp.input_dim, 6);
        assert_eq!(cp.timestep, 350);
        assert_eq!(cp.weights, state.weights);
        assert_eq!(cp.theta, state.theta);
        let rebuilt = cp.into_state(&NeuronParams::default()).unwrap();
        assert_eq!(rebuilt.weights, state.weights);
        assert_eq!(rebuilt.v_mem, vec![-60.0; 4]);
        assert_eq!(rebuilt.refrac_remaining, vec![0; 4]);
    }

    #[test]
    fn wrong_magic_rejected() {
        let state = trained_like_state();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.tspk");
        save_checkpoint(&path, &state, 10).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_rejected() {
        let state = trained_like_state();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.tspk");
        save_checkpoint(&path, &state, 10).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format(_))));
    }

    #[test]
    fn version_bump_rejected() {
        let state = trained_like_state();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.tspk");
        save_checkpoint(&path, &state, 10).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 99;
        std::fs::write(&path, &bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_checkpoint(&dir.path().join("nope")),
            Err(Error::Io { .. })
        ));
    }
}
