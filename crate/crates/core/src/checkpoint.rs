//! Binary weight checkpoints.
//!
//! Layout (little-endian): 8-byte magic, `u32` layer count, `(n_post, n_pre)`
//! as `u32` pairs for every layer, then each layer's weights row by row with
//! one row per postsynaptic neuron. `ERBPQ001` stores `i8` weights,
//! `ERBPF001` stores `f64`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC_QUANT: &[u8; 8] = b"ERBPQ001";
pub const MAGIC_FLOAT: &[u8; 8] = b"ERBPF001";

/// One weight matrix in postsynaptic-major order: `w[post * n_pre + pre]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights<T> {
    pub n_post: usize,
    pub n_pre: usize,
    pub w: Vec<T>,
}

impl<T: Copy> LayerWeights<T> {
    /// Build from presynaptic-major storage.
    pub fn from_pre_major(n_pre: usize, n_post: usize, w: &[T]) -> Self {
        assert_eq!(w.len(), n_pre * n_post);
        let mut out = Vec::with_capacity(w.len());
        for post in 0..n_post {
            out.extend((0..n_pre).map(|pre| w[pre * n_post + post]));
        }
        Self {
            n_post,
            n_pre,
            w: out,
        }
    }

    pub fn to_pre_major(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.w.len());
        for pre in 0..self.n_pre {
            out.extend((0..self.n_post).map(|post| self.w[post * self.n_pre + pre]));
        }
        out
    }

    pub fn row(&self, post: usize) -> &[T] {
        &self.w[post * self.n_pre..(post + 1) * self.n_pre]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoint {
    Float(Vec<LayerWeights<f64>>),
    Quant(Vec<LayerWeights<i8>>),
}

impl Checkpoint {
    pub fn dims(&self) -> Vec<(usize, usize)> {
        match self {
            Checkpoint::Float(l) => l.iter().map(|l| (l.n_post, l.n_pre)).collect(),
            Checkpoint::Quant(l) => l.iter().map(|l| (l.n_post, l.n_pre)).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let dims = self.dims();
        out.extend_from_slice(match self {
            Checkpoint::Float(_) => MAGIC_FLOAT,
            Checkpoint::Quant(_) => MAGIC_QUANT,
        });
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for (post, pre) in &dims {
            out.extend_from_slice(&(*post as u32).to_le_bytes());
            out.extend_from_slice(&(*pre as u32).to_le_bytes());
        }
        match self {
            Checkpoint::Float(layers) => {
                for l in layers {
                    for w in &l.w {
                        out.extend_from_slice(&w.to_le_bytes());
                    }
                }
            }
            Checkpoint::Quant(layers) => {
                for l in layers {
                    out.extend(l.w.iter().map(|&w| w as u8));
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 12 {
            return Err(bad("file shorter than header"));
        }
        let magic = &bytes[..8];
        let float = if magic == MAGIC_FLOAT {
            true
        } else if magic == MAGIC_QUANT {
            false
        } else {
            return Err(bad("unknown magic"));
        };
        let u32_at = |o: usize| -> Result<usize> {
            bytes
                .get(o..o + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
                .ok_or_else(|| bad("truncated header"))
        };
        let n_layers = u32_at(8)?;
        let mut dims = Vec::with_capacity(n_layers);
        let mut off = 12;
        for _ in 0..n_layers {
            dims.push((u32_at(off)?, u32_at(off + 4)?));
            off += 8;
        }
        let width = if float { 8 } else { 1 };
        let needed: usize = dims.iter().map(|(a, b)| a * b * width).sum();
        if bytes.len() - off != needed {
            return Err(Error::Checkpoint(format!(
                "payload is {} bytes, dimensions imply {needed}",
                bytes.len() - off
            )));
        }
        if float {
            let mut layers = Vec::new();
            for (n_post, n_pre) in dims {
                let n = n_post * n_pre;
                let w = bytes[off..off + 8 * n]
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                off += 8 * n;
                layers.push(LayerWeights { n_post, n_pre, w });
            }
            Ok(Checkpoint::Float(layers))
        } else {
            let mut layers = Vec::new();
            for (n_post, n_pre) in dims {
                let n = n_post * n_pre;
                let w = bytes[off..off + n].iter().map(|&b| b as i8).collect();
                off += n;
                layers.push(LayerWeights { n_post, n_pre, w });
            }
            Ok(Checkpoint::Quant(layers))
        }
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut buf = Vec::new();
        input.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quant_layout() {
        let c = Checkpoint::Quant(vec![LayerWeights {
            n_post: 2,
            n_pre: 3,
            w: vec![1, -2, 3, -128, 127, 0],
        }]);
        let b = c.to_bytes();
        assert_eq!(&b[..8], b"ERBPQ001");
        assert_eq!(&b[8..12], &[1, 0, 0, 0]);
        assert_eq!(&b[12..20], &[2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&b[20..], &[1, 0xFE, 3, 0x80, 0x7F, 0]);
        assert_eq!(Checkpoint::from_bytes(&b).unwrap(), c);
    }

    #[test]
    fn float_round_trip() {
        let c = Checkpoint::Float(vec![
            LayerWeights {
                n_post: 1,
                n_pre: 2,
                w: vec![0.5, -1e-300],
            },
            LayerWeights {
                n_post: 2,
                n_pre: 1,
                w: vec![f64::MAX, -0.0],
            },
        ]);
        let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back.to_bytes(), c.to_bytes());
    }

    #[test]
    fn rejects_corruption() {
        let c = Checkpoint::Quant(vec![LayerWeights {
            n_post: 2,
            n_pre: 2,
            w: vec![0; 4],
        }]);
        let mut b = c.to_bytes();
        b.pop();
        assert!(Checkpoint::from_bytes(&b).is_err());
        let mut b = c.to_bytes();
        b[0] = b'X';
        assert!(Checkpoint::from_bytes(&b).is_err());
        assert!(Checkpoint::from_bytes(&[0; 5]).is_err());
    }

    #[test]
    fn transposition() {
        // pre-major: w[pre * n_post + post]
        let pre_major = [1, 2, 3, 4, 5, 6]; // 2 pre x 3 post
        let l = LayerWeights::from_pre_major(2, 3, &pre_major);
        assert_eq!(l.w, vec![1, 4, 2, 5, 3, 6]);
        assert_eq!(l.row(1), &[2, 5]);
        assert_eq!(l.to_pre_major(), pre_major.to_vec());
    }
}
