//! Little-endian primitives shared by the binary container formats.

use crate::error::{Error, Result};

pub(crate) fn read_u32(buf: &mut &[u8], what: &str) -> Result<u32> {
    if buf.len() < 4 {
        return Err(Error::Format(format!("truncated file while reading {what}")));
    }
    let (head, rest) = buf.split_at(4);
    *buf = rest;
    Ok(u32::from_le_bytes([head[0], head[1], head[2], head[3]]))
}

pub(crate) fn read_f32_into(buf: &mut &[u8], out: &mut Vec<f32>, n: usize, what: &str) -> Result<()> {
    if buf.len() < 4 * n {
        return Err(Error::Format(format!("truncated file while reading {what}")));
    }
    let (head, rest) = buf.split_at(4 * n);
    *buf = rest;
    out.extend(
        head.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])),
    );
    Ok(())
}

pub(crate) fn read_bytes<'a>(buf: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if buf.len() < n {
        return Err(Error::Format(format!("truncated file while reading {what}")));
    }
    let (head, rest) = buf.split_at(n);
    *buf = rest;
    Ok(head)
}

pub(crate) fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn push_f32s(out: &mut Vec<u8>, vs: &[f32]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}
