//! Spike events and the binary spike log.
//!
//! Within a simulation step a population's spikes are a list of neuron
//! indices (`&[u32]`). The log stores one 9-byte little-endian record per
//! spike: step `u32`, neuron `u32`, layer `u8`.

use std::io::{self, Read, Write};

pub const RECORD_BYTES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpikeEvent {
    pub step: u32,
    pub neuron: u32,
    pub layer: u8,
}

impl SpikeEvent {
    pub fn to_bytes(self) -> [u8; RECORD_BYTES] {
        let mut b = [0u8; RECORD_BYTES];
        b[..4].copy_from_slice(&self.step.to_le_bytes());
        b[4..8].copy_from_slice(&self.neuron.to_le_bytes());
        b[8] = self.layer;
        b
    }

    pub fn from_bytes(b: &[u8; RECORD_BYTES]) -> Self {
        Self {
            step: u32::from_le_bytes([b[0], b[1], b[2], b[3]]),
            neuron: u32::from_le_bytes([b[4], b[5], b[6], b[7]]),
            layer: b[8],
        }
    }
}

pub struct SpikeLogWriter<W: Write> {
    out: W,
    written: u64,
}

impl<W: Write> SpikeLogWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out, written: 0 }
    }

    pub fn record(&mut self, step: u64, layer: u8, neurons: &[u32]) -> io::Result<()> {
        for &n in neurons {
            let ev = SpikeEvent {
                step: step as u32,
                neuron: n,
                layer,
            };
            self.out.write_all(&ev.to_bytes())?;
        }
        self.written += neurons.len() as u64;
        Ok(())
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn read_spike_log<R: Read>(mut input: R) -> io::Result<Vec<SpikeEvent>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!(
                "spike log length {} not a multiple of {RECORD_BYTES}",
                bytes.len()
            ),
        ));
    }
    Ok(bytes
        .chunks_exact(RECORD_BYTES)
        .map(|c| SpikeEvent::from_bytes(c.try_into().unwrap()))
        .collect())
}
