//! Model container: a length-prefixed JSON header followed by named row-major
//! little-endian `f64` matrices.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::FORMAT_VERSION;

use super::{LatentModel, ModelConfig};

const FORMAT: &str = "kgraph-latent-model";
const MAX_HEADER: u64 = 1 << 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixShape {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub num_entities: usize,
    pub num_relations: usize,
    pub seed: u64,
    pub matrices: Vec<MatrixShape>,
}

pub fn write_model<W: Write>(mut w: W, model: &LatentModel, seed: u64) -> Result<()> {
    let blocks = model.blocks();
    let header = ModelHeader {
        format: FORMAT.to_string(),
        version: FORMAT_VERSION,
        config: model.config(),
        num_entities: model.num_entities(),
        num_relations: model.num_relations(),
        seed,
        matrices: blocks.iter().map(|(name, m)| MatrixShape { name: name.clone(), rows: m.rows(), cols: m.cols() }).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (name, m) in &blocks {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(m.rows() as u64).to_le_bytes())?;
        w.write_all(&(m.cols() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(m.len() * 8);
        for v in m.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated model file".into()),
        _ => Error::Io(e),
    })?;
    Ok(b)
}

pub fn read_model<R: Read>(mut r: R) -> Result<(ModelHeader, LatentModel)> {
    let len = u64::from_le_bytes(read_array(&mut r)?);
    if len > MAX_HEADER {
        return Err(Error::Format("model header too large".into()));
    }
    let mut json = vec![0u8; len as usize];
    r.read_exact(&mut json).map_err(|_| Error::Format("truncated model header".into()))?;
    let header: ModelHeader = serde_json::from_slice(&json).map_err(|e| Error::Format(format!("model header: {e}")))?;
    if header.format != FORMAT {
        return Err(Error::Format(format!("not a model file (format `{}`)", header.format)));
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported model version {}", header.version)));
    }
    header.config.validate()?;
    let mut blocks = Vec::with_capacity(header.matrices.len());
    for shape in &header.matrices {
        let name_len = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(|_| Error::Format("truncated model file".into()))?;
        let rows = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let cols = u64::from_le_bytes(read_array(&mut r)?) as usize;
        if name != shape.name.as_bytes() || rows != shape.rows || cols != shape.cols {
            return Err(Error::DimensionMismatch(format!("matrix `{}` disagrees with the header", shape.name)));
        }
        let mut data = vec![0u8; rows * cols * 8];
        r.read_exact(&mut data).map_err(|_| Error::Format("truncated model file".into()))?;
        let values = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        blocks.push(Matrix::from_vec(rows, cols, values)?);
    }
    let model = LatentModel::from_blocks(&header.config, header.num_entities, header.num_relations, blocks)?;
    let expected: Vec<String> = model.blocks().into_iter().map(|(n, _)| n).collect();
    let found: Vec<&String> = header.matrices.iter().map(|m| &m.name).collect();
    if expected.iter().collect::<Vec<_>>() != found {
        return Err(Error::DimensionMismatch("matrix names do not match the model kind".into()));
    }
    Ok((header, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::ModelKind;

    #[test]
    fn round_trip_every_kind() {
        for kind in ModelKind::ALL {
            let cfg = ModelConfig { hidden_b: 2, ..ModelConfig::new(kind, 3) };
            let m = LatentModel::init(&cfg, 6, 2, 9).unwrap();
            let mut buf = Vec::new();
            write_model(&mut buf, &m, 9).unwrap();
            let (h, back) = read_model(buf.as_slice()).unwrap();
            assert_eq!(back, m);
            assert_eq!(h.seed, 9);
        }
    }

    #[test]
    fn truncated_or_tampered_files_are_rejected() {
        let m = LatentModel::init(&ModelConfig::new(ModelKind::Rescal, 2), 3, 1, 0).unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &m, 0).unwrap();
        assert!(read_model(&buf[..buf.len() - 1]).is_err());
        let key = b"\"num_entities\":3";
        let at = buf.windows(key.len()).position(|w| w == key).unwrap();
        buf[at + key.len() - 1] = b'4';
        assert!(matches!(read_model(buf.as_slice()), Err(Error::DimensionMismatch(_))));
    }
}
