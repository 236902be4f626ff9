//! MNIST IDX ingestion and sample streaming.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use thiserror::Error;

use crate::rng::{permutation, CounterRng};

pub const IMAGE_PIXELS: usize = 784;
pub const NUM_CLASSES: usize = 10;
pub const TRAIN_SIZE: usize = 50_000;
pub const VALID_SIZE: usize = 10_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdxError {
    #[error("bad magic: expected two zero bytes, found {0:#04x} {1:#04x}")]
    BadMagic(u8, u8),
    #[error("unsupported or unexpected type code {found:#04x} (expected {expected:#04x})")]
    TypeCode { found: u8, expected: u8 },
    #[error("truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("{0}")]
    Layout(String),
}

/// Element type codes of the IDX container.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdxType {
    U8 = 0x08,
    I8 = 0x09,
    I16 = 0x0B,
    I32 = 0x0C,
    F32 = 0x0D,
    F64 = 0x0E,
}

impl IdxType {
    fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0x08 => Self::U8,
            0x09 => Self::I8,
            0x0B => Self::I16,
            0x0C => Self::I32,
            0x0D => Self::F32,
            0x0E => Self::F64,
            _ => return None,
        })
    }

    pub fn width(self) -> usize {
        match self {
            Self::U8 | Self::I8 => 1,
            Self::I16 => 2,
            Self::I32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }
}

/// Decoded IDX tensor. Payload bytes are kept as stored (big-endian).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxTensor {
    pub dtype: IdxType,
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxTensor {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.dims.len() + self.data.len());
        out.extend_from_slice(&[0, 0, self.dtype as u8, self.dims.len() as u8]);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor, IdxError> {
    if bytes.len() < 4 {
        return Err(IdxError::Truncated {
            needed: 4,
            available: bytes.len(),
        });
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(IdxError::BadMagic(bytes[0], bytes[1]));
    }
    let dtype = IdxType::from_code(bytes[2]).ok_or(IdxError::TypeCode {
        found: bytes[2],
        expected: IdxType::U8 as u8,
    })?;
    let ndim = bytes[3] as usize;
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(IdxError::Truncated {
            needed: header,
            available: bytes.len(),
        });
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let payload = dims.iter().product::<usize>() * dtype.width();
    let available = bytes.len() - header;
    if available < payload {
        return Err(IdxError::Truncated {
            needed: payload,
            available,
        });
    }
    if available > payload {
        return Err(IdxError::Layout(format!(
            "{} trailing bytes",
            available - payload
        )));
    }
    Ok(IdxTensor {
        dtype,
        dims,
        data: bytes[header..].to_vec(),
    })
}

/// Read a raw or gzipped IDX file.
pub fn read_idx_file(path: &Path) -> crate::Result<IdxTensor> {
    let mut raw = Vec::new();
    let mut file = BufReader::new(File::open(path)?);
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(file).read_to_end(&mut raw)?;
    } else {
        file.read_to_end(&mut raw)?;
    }
    Ok(parse_idx(&raw)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// Images stored as raw bytes; intensities are `byte / 255`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub split: Split,
    images: Vec<u8>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(split: Split, images: Vec<u8>, labels: Vec<u8>) -> crate::Result<Self> {
        if images.len() != labels.len() * IMAGE_PIXELS {
            return Err(crate::Error::Shape(format!(
                "{} image bytes for {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(IdxError::Layout(format!("label {bad} out of range")).into());
        }
        Ok(Self {
            split,
            images,
            labels,
        })
    }

    fn from_tensors(split: Split, images: IdxTensor, labels: IdxTensor) -> crate::Result<Self> {
        for t in [&images, &labels] {
            if t.dtype != IdxType::U8 {
                return Err(IdxError::TypeCode {
                    found: t.dtype as u8,
                    expected: 0x08,
                }
                .into());
            }
        }
        if images.dims.len() != 3 || images.dims[1] * images.dims[2] != IMAGE_PIXELS {
            return Err(IdxError::Layout(format!("image dims {:?}", images.dims)).into());
        }
        if labels.dims.len() != 1 || labels.dims[0] != images.dims[0] {
            return Err(IdxError::Layout(format!(
                "label dims {:?} vs {} images",
                labels.dims, images.dims[0]
            ))
            .into());
        }
        Self::new(split, images.data, labels.data)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_bytes(&self, i: usize) -> &[u8] {
        &self.images[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS]
    }

    pub fn image(&self, i: usize) -> Vec<f64> {
        self.image_bytes(i)
            .iter()
            .map(|&b| b as f64 / 255.0)
            .collect()
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// First `n` samples (or all, if fewer).
    pub fn subset(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            split: self.split,
            images: self.images[..n * IMAGE_PIXELS].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }

    fn range(&self, split: Split, start: usize, end: usize) -> Dataset {
        Dataset {
            split,
            images: self.images[start * IMAGE_PIXELS..end * IMAGE_PIXELS].to_vec(),
            labels: self.labels[start..end].to_vec(),
        }
    }

    pub fn stream(&self, order: Order) -> impl Iterator<Item = (&[u8], usize)> + '_ {
        let idx: Vec<usize> = match order {
            Order::Sequential => (0..self.len()).collect(),
            Order::Shuffled { seed, epoch } => {
                permutation(&CounterRng::new(seed), self.len(), epoch)
            }
        };
        idx.into_iter()
            .map(move |i| (self.image_bytes(i), self.label(i)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Sequential,
    /// The permutation depends on both the seed and the epoch tag.
    Shuffled {
        seed: u64,
        epoch: u64,
    },
}

/// The three splits. Validation is the last 10000 images of the training file.
#[derive(Debug, Clone)]
pub struct Mnist {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
}

fn find_file(dir: &Path, stem: &str) -> crate::Result<PathBuf> {
    for name in [format!("{stem}.gz"), stem.to_string()] {
        let p = dir.join(name);
        if p.exists() {
            return Ok(p);
        }
    }
    Err(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("{stem}[.gz] not found in {}", dir.display()),
    )
    .into())
}

impl Mnist {
    pub fn load(dir: &Path) -> crate::Result<Self> {
        let read = |stem: &str| read_idx_file(&find_file(dir, stem)?);
        let full_train = Dataset::from_tensors(
            Split::Train,
            read("train-images-idx3-ubyte")?,
            read("train-labels-idx1-ubyte")?,
        )?;
        let test = Dataset::from_tensors(
            Split::Test,
            read("t10k-images-idx3-ubyte")?,
            read("t10k-labels-idx1-ubyte")?,
        )?;
        let n = full_train.len();
        let cut = n.saturating_sub(VALID_SIZE);
        Ok(Self {
            train: full_train.range(Split::Train, 0, cut),
            valid: full_train.range(Split::Valid, cut, n),
            test,
        })
    }

    /// Directory from `ERBP_DATA_DIR`, falling back to `./data/mnist`.
    pub fn default_dir() -> PathBuf {
        std::env::var_os("ERBP_DATA_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("data/mnist"))
    }
}
