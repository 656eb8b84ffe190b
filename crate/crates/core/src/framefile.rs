//! Binary dump of a complex baseband frame.
//!
//! Layout, all little-endian:
//!
//! | offset | size | content                      |
//! |--------|------|------------------------------|
//! | 0      | 8    | magic `b"ICIFRAME"`          |
//! | 8      | 8    | carriers K, `u64`            |
//! | 16     | 8    | blocks N, `u64`              |
//! | 24     | 8    | sample rate in Hz, `f64`     |
//! | 32     | 16n  | samples as `f64` re, im pairs |

use std::io::{Read, Write};

use crate::{Error, Result, C64};

pub const MAGIC: [u8; 8] = *b"ICIFRAME";
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameDump {
    pub carriers: u64,
    pub blocks: u64,
    pub sample_rate: f64,
    pub samples: Vec<C64>,
}

impl FrameDump {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = [0u8; HEADER_LEN];
        header[..8].copy_from_slice(&MAGIC);
        header[8..16].copy_from_slice(&self.carriers.to_le_bytes());
        header[16..24].copy_from_slice(&self.blocks.to_le_bytes());
        header[24..32].copy_from_slice(&self.sample_rate.to_le_bytes());
        w.write_all(&header)?;
        let mut body = Vec::with_capacity(16 * self.samples.len());
        for s in &self.samples {
            body.extend_from_slice(&s.re.to_le_bytes());
            body.extend_from_slice(&s.im.to_le_bytes());
        }
        w.write_all(&body)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        if header[..8] != MAGIC {
            return Err(Error::InputShape("not a frame dump (bad magic)".into()));
        }
        let word = |i: usize| -> [u8; 8] { header[i..i + 8].try_into().expect("8-byte slice") };
        let carriers = u64::from_le_bytes(word(8));
        let blocks = u64::from_le_bytes(word(16));
        let sample_rate = f64::from_le_bytes(word(24));
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() % 16 != 0 {
            return Err(Error::InputShape(format!(
                "frame body of {} bytes is not a whole number of samples",
                body.len()
            )));
        }
        let f = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
        let samples = body
            .chunks_exact(16)
            .map(|c| C64::new(f(&c[..8]), f(&c[8..])))
            .collect();
        Ok(Self {
            carriers,
            blocks,
            sample_rate,
            samples,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dump() -> FrameDump {
        FrameDump {
            carriers: 64,
            blocks: 2,
            sample_rate: 192_000.0,
            samples: vec![
                C64::new(1.5, -2.0),
                C64::new(0.0, 1e-300),
                C64::new(-0.25, 3.0),
            ],
        }
    }

    #[test]
    fn layout_is_fixed() {
        let mut buf = Vec::new();
        dump().write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 3 * 16);
        assert_eq!(&buf[..8], b"ICIFRAME");
        assert_eq!(buf[8], 64);
        assert_eq!(buf[16], 2);
        assert_eq!(&buf[24..32], &192_000f64.to_le_bytes());
        assert_eq!(&buf[32..40], &1.5f64.to_le_bytes());
        assert_eq!(&buf[40..48], &(-2.0f64).to_le_bytes());
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        dump().write_to(&mut buf).unwrap();
        assert_eq!(FrameDump::read_from(&buf[..]).unwrap(), dump());
    }

    #[test]
    fn rejects_bad_input() {
        let mut buf = Vec::new();
        dump().write_to(&mut buf).unwrap();
        assert!(FrameDump::read_from(&buf[..buf.len() - 3]).is_err());
        buf[0] = b'X';
        assert!(FrameDump::read_from(&buf[..]).is_err());
        assert!(FrameDump::read_from(&buf[..10]).is_err());
    }
}
