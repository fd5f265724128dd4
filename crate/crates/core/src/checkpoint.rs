//! Versioned binary serialization of fully connected networks.
//!
//! Layout (little endian): 8-byte magic, `u32` version, `u32` network
//! count; per network a `u32` layer count and per layer `u32` in, `u32`
//! out, `u8` activation code, then the `out x in` weights and `out` biases
//! as `f64`.

use crate::metric::{Activation, Mlp};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TSNETCK\0";
pub const VERSION: u32 = 1;

pub fn encode(nets: &[&Mlp]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(nets.len() as u32).to_le_bytes());
    for net in nets {
        out.extend_from_slice(&(net.num_layers() as u32).to_le_bytes());
        for l in 0..net.num_layers() {
            out.extend_from_slice(&(net.sizes()[l] as u32).to_le_bytes());
            out.extend_from_slice(&(net.sizes()[l + 1] as u32).to_le_bytes());
            out.push(net.activations()[l].code());
        }
        for v in &net.theta {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::input("checkpoint is truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Mlp>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::input("not a network checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::input(format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32()?;
    let mut nets = Vec::new();
    for _ in 0..count {
        let layers = r.u32()? as usize;
        let mut sizes = Vec::new();
        let mut acts = Vec::new();
        for l in 0..layers {
            let (i, o) = (r.u32()? as usize, r.u32()? as usize);
            if l == 0 {
                sizes.push(i);
            } else if sizes[l] != i {
                return Err(Error::input("checkpoint layer sizes do not chain"));
            }
            sizes.push(o);
            let code = r.take(1)?[0];
            acts.push(Activation::from_code(code).ok_or_else(|| Error::input(format!("unknown activation {code}")))?);
        }
        let n: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::input("checkpoint too large"))?)?;
        let theta = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        nets.push(Mlp::from_parts(sizes, acts, theta)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::input("trailing bytes after checkpoint"));
    }
    Ok(nets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let e = Mlp::encoder(12, 3).unwrap();
        let d = Mlp::decoder(12, 3).unwrap();
        let bytes = encode(&[&e, &d]);
        assert_eq!(decode(&bytes).unwrap(), vec![e, d]);
    }

    #[test]
    fn rejects_corruption() {
        let e = Mlp::encoder(4, 0).unwrap();
        let bytes = encode(&[&e]);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(decode(&long).is_err());
    }
}
