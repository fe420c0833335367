//! Binary model persistence.
//!
//! Layout: `b"DGGF"`, one version byte, a little-endian `u32` header length,
//! the UTF-8 JSON header, then every parameter as a little-endian `f64` in
//! layer order (weights row-major, then bias).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, Mlp};
use crate::error::{ModelFileError, Result};

pub const MAGIC: &[u8; 4] = b"DGGF";
pub const FORMAT_VERSION: u8 = 1;

/// What a persisted network is for, and what it was trained against.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMetadata {
    /// `t_regular`, `g_t`, `pinn`, `gaussnet`, ...
    pub role: String,
    /// Dimension `n` of one coordinate (the network input is `2n` for kernels).
    pub coord_dim: usize,
    pub domain_id: String,
    pub operator_id: String,
    pub train_config_digest: String,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    layer_sizes: Vec<usize>,
    activation: Activation,
    #[serde(default = "unit_scale")]
    output_scale: f64,
    metadata: ModelMetadata,
}

fn unit_scale() -> f64 {
    1.0
}

pub fn save_model(net: &Mlp, metadata: &ModelMetadata) -> Vec<u8> {
    let header = Header {
        layer_sizes: net.layer_sizes().to_vec(),
        activation: net.activation(),
        output_scale: net.output_scale(),
        metadata: metadata.clone(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(9 + header.len() + 8 * net.num_params());
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for p in net.params_flat() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn load_model(bytes: &[u8]) -> std::result::Result<(Mlp, ModelMetadata), ModelFileError> {
    if bytes.len() < 4 {
        return Err(ModelFileError::Truncated("magic"));
    }
    if &bytes[..4] != MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    let version = *bytes.get(4).ok_or(ModelFileError::Truncated("version"))?;
    if version != FORMAT_VERSION {
        return Err(ModelFileError::Version { found: version, expected: FORMAT_VERSION });
    }
    let len_bytes: [u8; 4] = bytes
        .get(5..9)
        .ok_or(ModelFileError::Truncated("header length"))?
        .try_into()
        .unwrap();
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let header_bytes = bytes.get(9..9 + header_len).ok_or(ModelFileError::Truncated("header"))?;
    let header: Header =
        serde_json::from_slice(header_bytes).map_err(|e| ModelFileError::Header(e.to_string()))?;

    let mut net = Mlp::zeros(&header.layer_sizes, header.activation)
        .and_then(|net| net.with_output_scale(header.output_scale))
        .map_err(|e| ModelFileError::Header(e.to_string()))?;
    let payload = &bytes[9 + header_len..];
    let expected = 8 * net.num_params();
    if payload.len() < expected {
        return Err(ModelFileError::Truncated("parameter payload"));
    }
    if payload.len() > expected {
        return Err(ModelFileError::Payload { expected, found: payload.len() });
    }
    let params: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    net.set_params_flat(&params).expect("payload length checked");
    Ok((net, header.metadata))
}

pub fn save_model_file(path: &Path, net: &Mlp, metadata: &ModelMetadata) -> Result<()> {
    std::fs::write(path, save_model(net, metadata))?;
    Ok(())
}

pub fn load_model_file(path: &Path) -> Result<(Mlp, ModelMetadata)> {
    let bytes = std::fs::read(path)?;
    Ok(load_model(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::init_mlp;

    fn sample() -> (Mlp, ModelMetadata) {
        let net = init_mlp(&[4, 12, 12, 1], Activation::Tanh, 5).unwrap().with_output_scale(0.03).unwrap();
        let mut meta = ModelMetadata {
            role: "g_t".into(),
            coord_dim: 2,
            domain_id: "square".into(),
            operator_id: "poisson".into(),
            train_config_digest: "abc".into(),
            ..Default::default()
        };
        meta.notes.insert("t_model".into(), "deadbeef".into());
        (net, meta)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (net, meta) = sample();
        let bytes = save_model(&net, &meta);
        let (back, back_meta) = load_model(&bytes).unwrap();
        let a: Vec<u64> = net.params_flat().iter().map(|p| p.to_bits()).collect();
        let b: Vec<u64> = back.params_flat().iter().map(|p| p.to_bits()).collect();
        assert_eq!(a, b);
        assert_eq!(back, net);
        assert_eq!(back.output_scale(), 0.03);
        assert_eq!(back_meta, meta);
    }

    #[test]
    fn error_categories() {
        let (net, meta) = sample();
        let bytes = save_model(&net, &meta);

        let mut bad = bytes.clone();
        bad[0] ^= 0xff;
        assert_eq!(load_model(&bad).unwrap_err(), ModelFileError::BadMagic);

        let mut future = bytes.clone();
        future[4] = FORMAT_VERSION + 1;
        assert!(matches!(load_model(&future).unwrap_err(), ModelFileError::Version { found, .. } if found == FORMAT_VERSION + 1));

        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(load_model(cut).unwrap_err(), ModelFileError::Truncated(_)));
        assert!(matches!(load_model(&bytes[..2]).unwrap_err(), ModelFileError::Truncated(_)));

        let mut long = bytes.clone();
        long.extend_from_slice(&[0u8; 8]);
        assert!(matches!(load_model(&long).unwrap_err(), ModelFileError::Payload { .. }));

        let mut garbled = bytes;
        garbled[10] = b'#';
        assert!(matches!(load_model(&garbled).unwrap_err(), ModelFileError::Header(_)));
    }

    #[test]
    fn layout_starts_with_magic_and_version() {
        let (net, meta) = sample();
        let bytes = save_model(&net, &meta);
        assert_eq!(&bytes[..4], b"DGGF");
        assert_eq!(bytes[4], 1);
        let len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), 9 + len + 8 * net.num_params());
        let first = f64::from_le_bytes(bytes[9 + len..9 + len + 8].try_into().unwrap());
        assert_eq!(first, net.layers()[0].weights[[0, 0]]);
    }
}
