//! Binary tensor files: one JSON header line followed by little-endian `f64`
//! pairs `(re, im)` in row-major order.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::{Kind, Tensor, C64};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Header {
    names: Vec<String>,
    shape: Vec<usize>,
    kind: Kind,
}

pub fn write_tensor<W: Write>(mut w: W, t: &Tensor) -> Result<()> {
    let header = Header {
        names: t.names().to_vec(),
        shape: t.shape().to_vec(),
        kind: t.kind(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(t.len() * 16);
    for z in t.data() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_tensor<R: Read>(r: R) -> Result<Tensor> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Format(format!("bad tensor header: {e}")))?;
    let n: usize = header.shape.iter().product();
    let mut bytes = vec![0u8; n * 16];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format("truncated tensor payload".into()))?;
    let data = bytes
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Tensor::new(header.shape, header.names, data, header.kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let t = Tensor::complex(
            &[2, 1],
            &["a", "b"],
            vec![C64::new(1.5, -2.0), C64::new(0.0, 3.25)],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        let back = read_tensor(buf.as_slice()).unwrap();
        assert_eq!(back.names(), t.names());
        assert_eq!(back.data(), t.data());
        assert_eq!(back.kind(), Kind::Complex);
    }
}
