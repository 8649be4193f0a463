//! Binary checkpoints that round-trip a trained model bit-exactly.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! 8 bytes   magic "SADVCKP1"
//! u32       descriptor length in bytes
//! ...       descriptor: JSON {"model", "input", "classes", "tensors"}
//! per tensor (in the order Network::parameters reports them):
//!   u32           rank
//!   rank x u32    dimensions
//!   n x f64       values, raw IEEE-754 bit patterns
//! ```
//!
//! The descriptor carries the model architecture, so a checkpoint is
//! self-contained: loading rebuilds the network from the spec and then
//! overwrites every parameter with the stored bits. Values pass through
//! `to_le_bytes`/`from_le_bytes` untouched, which is what makes the
//! round-trip exact rather than merely close.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{build_model, ModelKind, ModelSpec, Network};
use crate::rng::Seed;
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"SADVCKP1";

#[derive(Serialize, Deserialize)]
struct Descriptor {
    model: String,
    input: [usize; 3],
    classes: usize,
    tensors: usize,
}

/// Write `net` (built from `spec`) to `path`.
pub fn save_checkpoint(path: &Path, spec: &ModelSpec, net: &Network) -> Result<()> {
    let params = net.parameters();
    let desc = Descriptor {
        model: spec.kind.as_str().to_string(),
        input: spec.input,
        classes: spec.num_classes,
        tensors: params.len(),
    };
    let desc_bytes = serde_json::to_vec(&desc)?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&u32::try_from(desc_bytes.len()).unwrap().to_le_bytes())?;
    w.write_all(&desc_bytes)?;
    for t in params {
        w.write_all(&u32::try_from(t.shape().len()).unwrap().to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&u32::try_from(d).unwrap().to_le_bytes())?;
        }
        for &v in t.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Checkpoint(format!("file ends inside {what}")))?;
    Ok(u32::from_le_bytes(buf))
}

/// Read a checkpoint back: the spec it was saved with and a network holding
/// exactly the stored parameter bits.
pub fn load_checkpoint(path: &Path) -> Result<(ModelSpec, Network)> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("file shorter than the magic header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(MAGIC),
        )));
    }

    let desc_len = read_u32(&mut r, "the descriptor length")? as usize;
    let mut desc_bytes = vec![0u8; desc_len];
    r.read_exact(&mut desc_bytes)
        .map_err(|_| Error::Checkpoint("file ends inside the descriptor".into()))?;
    let desc: Descriptor = serde_json::from_slice(&desc_bytes)?;

    let spec = ModelSpec {
        kind: ModelKind::parse(&desc.model)?,
        input: desc.input,
        num_classes: desc.classes,
    };
    let mut net = build_model(&spec, Seed(0))?;
    let expected = net.parameters().len();
    if desc.tensors != expected {
        return Err(Error::Checkpoint(format!(
            "descriptor promises {} tensors, the {} model has {}",
            desc.tensors, desc.model, expected,
        )));
    }

    let mut tensors = Vec::with_capacity(desc.tensors);
    for k in 0..desc.tensors {
        let rank = read_u32(&mut r, &format!("tensor {k}'s rank"))? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut r, &format!("tensor {k}'s shape"))? as usize);
        }
        let n: usize = shape.iter().product();
        let mut values = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf)
                .map_err(|_| Error::Checkpoint(format!("file ends inside tensor {k}")))?;
            values.push(f64::from_le_bytes(buf));
        }
        tensors.push(Tensor::new(shape, values)?);
    }

    let mut trailer = [0u8; 1];
    if r.read(&mut trailer)? != 0 {
        return Err(Error::Checkpoint(
            "trailing bytes after the last tensor".into(),
        ));
    }

    net.set_parameters(&tensors)?;
    Ok((spec, net))
}
