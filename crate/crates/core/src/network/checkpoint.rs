//! Portable parameter checkpoints.
//!
//! Format: one ASCII header line
//!
//! ```text
//! bpl-pinn-checkpoint v1 input_dim=2 hidden_layers=4 hidden_width=50 output_dim=1 count=7851
//! ```
//!
//! terminated by `\n`, followed by `count` little-endian IEEE-754 `f64`
//! values in the layout documented on [`crate::network`].

use std::io::{self, BufRead, Write};

use super::{Architecture, ParameterVector};

const MAGIC: &str = "bpl-pinn-checkpoint";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed checkpoint header: {0}")]
    Header(String),
    #[error("checkpoint holds {got} values, header says {expected}")]
    Truncated { expected: usize, got: usize },
    #[error("checkpoint contains non-finite parameters")]
    NonFinite,
}

pub fn write<W: Write>(mut w: W, arch: Architecture, params: &ParameterVector) -> io::Result<()> {
    writeln!(
        w,
        "{MAGIC} v1 input_dim={} hidden_layers={} hidden_width={} output_dim={} count={}",
        arch.input_dim,
        arch.hidden_layers,
        arch.hidden_width,
        arch.output_dim,
        params.len()
    )?;
    for v in params.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

pub fn read<R: BufRead>(mut r: R) -> Result<(Architecture, ParameterVector), CheckpointError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let mut fields = line.trim_end().split(' ');
    if fields.next() != Some(MAGIC) || fields.next() != Some("v1") {
        return Err(CheckpointError::Header(line.trim_end().to_string()));
    }
    let mut get = |key: &str| -> Result<usize, CheckpointError> {
        let f = fields.next().ok_or_else(|| CheckpointError::Header(format!("missing {key}")))?;
        f.strip_prefix(key)
            .and_then(|s| s.strip_prefix('='))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CheckpointError::Header(format!("bad field {f:?}, expected {key}=<n>")))
    };
    let arch = Architecture {
        input_dim: get("input_dim")?,
        hidden_layers: get("hidden_layers")?,
        hidden_width: get("hidden_width")?,
        output_dim: get("output_dim")?,
    };
    let count = get("count")?;
    if count != arch.num_params() {
        return Err(CheckpointError::Header(format!(
            "count {count} does not match architecture ({} parameters)",
            arch.num_params()
        )));
    }
    let mut bytes = Vec::with_capacity(count * 8);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(CheckpointError::Truncated { expected: count, got: bytes.len() / 8 });
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let params = ParameterVector::new(values).map_err(|_| CheckpointError::NonFinite)?;
    Ok((arch, params))
}
