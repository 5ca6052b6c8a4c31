//! Binary model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "VGECKPT\0"
//! version    u32      currently 1
//! meta_len   u32      byte length of the metadata block
//! metadata   UTF-8    "key=value" lines (embed, hidden1, hidden2, attention,
//!                     feature, vocab_size) followed by vocab_size lines
//!                     "word<TAB>count" in id order
//! n_tensors  u32
//! per tensor:
//!   name_len u32, name (UTF-8), rank u32, rank × u64 dims,
//!   product(dims) × f64 values
//! ```

use std::io::{self, Read, Write};

use super::{GroundedModelParams, ModelDims};
use crate::corpus::Vocab;
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"VGECKPT\0";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn metadata(params: &GroundedModelParams) -> String {
    let d = params.dims;
    let mut s = format!(
        "embed={}\nhidden1={}\nhidden2={}\nattention={}\nfeature={}\nvocab_size={}\n",
        d.embed,
        d.hidden1,
        d.hidden2,
        d.attention,
        d.feature,
        params.vocab.len()
    );
    for (i, w) in params.vocab.words().iter().enumerate() {
        s.push_str(&format!("{w}\t{}\n", params.vocab.count(i)));
    }
    s
}

pub fn write_checkpoint<W: Write>(params: &GroundedModelParams, mut w: W) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    put_u32(&mut w, VERSION)?;
    let meta = metadata(params);
    put_u32(&mut w, meta.len() as u32)?;
    w.write_all(meta.as_bytes())?;
    put_u32(&mut w, params.tensors().len() as u32)?;
    for (name, t) in params.named() {
        put_u32(&mut w, name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        put_u32(&mut w, t.rank() as u32)?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_meta(text: &str) -> Result<(ModelDims, Vocab), CheckpointError> {
    let bad = |m: &str| CheckpointError::Malformed(m.to_string());
    let mut lines = text.lines();
    let mut field = |key: &str| -> Result<usize, CheckpointError> {
        let line = lines.next().ok_or_else(|| bad("truncated metadata"))?;
        let (k, v) = line.split_once('=').ok_or_else(|| bad("metadata line without '='"))?;
        if k != key {
            return Err(bad(&format!("expected {key}, found {k}")));
        }
        v.parse().map_err(|_| bad(&format!("bad value for {key}")))
    };
    let dims = ModelDims {
        embed: field("embed")?,
        hidden1: field("hidden1")?,
        hidden2: field("hidden2")?,
        attention: field("attention")?,
        feature: field("feature")?,
    };
    let n = field("vocab_size")?;
    let mut entries = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next().ok_or_else(|| bad("truncated vocabulary"))?;
        let (w, c) = line.split_once('\t').ok_or_else(|| bad("vocabulary line without tab"))?;
        let c = c.parse().map_err(|_| bad("bad vocabulary count"))?;
        entries.push((w.to_string(), c));
    }
    if lines.next().is_some() {
        return Err(bad("trailing metadata"));
    }
    Ok((dims, Vocab::from_entries(entries)))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<GroundedModelParams, CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = get_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let meta_len = get_u32(&mut r)? as usize;
    let mut meta = vec![0u8; meta_len];
    r.read_exact(&mut meta)?;
    let meta = String::from_utf8(meta).map_err(|_| CheckpointError::Malformed("metadata is not UTF-8".into()))?;
    let (dims, vocab) = parse_meta(&meta)?;

    let n = get_u32(&mut r)? as usize;
    let mut named = Vec::with_capacity(n);
    for _ in 0..n {
        let len = get_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?;
        let rank = get_u32(&mut r)? as usize;
        let shape = (0..rank)
            .map(|_| get_u64(&mut r).map(|d| d as usize))
            .collect::<io::Result<Vec<_>>>()?;
        let numel: usize = shape.iter().product();
        let mut buf = vec![0u8; numel * 8];
        r.read_exact(&mut buf)?;
        let data = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        named.push((name, t));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(CheckpointError::Malformed("trailing bytes".into()));
    }
    GroundedModelParams::from_tensors(dims, vocab, named).map_err(CheckpointError::Malformed)
}

pub fn save_checkpoint(params: &GroundedModelParams, path: &std::path::Path) -> Result<(), CheckpointError> {
    let f = std::fs::File::create(path)?;
    write_checkpoint(params, io::BufWriter::new(f))
}

pub fn load_checkpoint(path: &std::path::Path) -> Result<GroundedModelParams, CheckpointError> {
    let f = std::fs::File::open(path)?;
    read_checkpoint(io::BufReader::new(f))
}
