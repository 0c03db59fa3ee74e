//! Append-only binary trajectory files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! u8   format version (= 1)
//! u32  header length, then that many bytes of JSON header
//! records until EOF:
//!   u32  replica id
//!   f64  time
//!   u32  number of runs
//!   runs: u8 symbol, u32 run length
//! ```
//!
//! Symbols are the text-format characters (`0 1 - + 2`). Coupled states store
//! `η` followed by `ζ`.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::gillespie::ProcessState;

pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub dimension: usize,
    pub side: usize,
    pub process: super::Process,
    /// Resolved run configuration, embedded verbatim.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub replica: u32,
    pub time: f64,
    pub symbols: Vec<u8>,
}

pub fn run_length_encode(symbols: &[u8]) -> Vec<(u8, u32)> {
    let mut runs: Vec<(u8, u32)> = Vec::new();
    for &s in symbols {
        match runs.last_mut() {
            Some((sym, n)) if *sym == s => *n += 1,
            _ => runs.push((s, 1)),
        }
    }
    runs
}

pub struct TrajectoryWriter<W: Write> {
    inner: W,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut inner: W, header: &TrajectoryHeader) -> Result<Self> {
        let json = serde_json::to_vec(header).map_err(|e| Error::Parse(e.to_string()))?;
        inner.write_all(&[FORMAT_VERSION])?;
        inner.write_all(&(json.len() as u32).to_le_bytes())?;
        inner.write_all(&json)?;
        Ok(TrajectoryWriter { inner })
    }

    pub fn write_state(&mut self, replica: u32, time: f64, state: &ProcessState) -> Result<()> {
        self.write_symbols(replica, time, &state.symbols())
    }

    pub fn write_symbols(&mut self, replica: u32, time: f64, symbols: &[u8]) -> Result<()> {
        let runs = run_length_encode(symbols);
        let mut buf = Vec::with_capacity(16 + 5 * runs.len());
        buf.extend_from_slice(&replica.to_le_bytes());
        buf.extend_from_slice(&time.to_le_bytes());
        buf.extend_from_slice(&(runs.len() as u32).to_le_bytes());
        for (s, n) in runs {
            buf.push(s);
            buf.extend_from_slice(&n.to_le_bytes());
        }
        self.inner.write_all(&buf)?;
        Ok(())
    }

    pub fn into_inner(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(Error::Parse("truncated trajectory record".into())),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(true)
}

/// Read a whole trajectory file.
pub fn read_trajectory<R: Read>(mut r: R) -> Result<(TrajectoryHeader, Vec<TrajectoryRecord>)> {
    let mut version = [0u8; 1];
    r.read_exact(&mut version)?;
    if version[0] != FORMAT_VERSION {
        return Err(Error::Parse(format!("unknown trajectory format version {}", version[0])));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    let header: TrajectoryHeader =
        serde_json::from_slice(&json).map_err(|e| Error::Parse(e.to_string()))?;
    let mut records = Vec::new();
    let mut head = [0u8; 16];
    while read_exact_or_eof(&mut r, &mut head)? {
        let replica = u32::from_le_bytes(head[0..4].try_into().expect("4 bytes"));
        let time = f64::from_le_bytes(head[4..12].try_into().expect("8 bytes"));
        let runs = u32::from_le_bytes(head[12..16].try_into().expect("4 bytes"));
        let mut symbols = Vec::new();
        let mut run = [0u8; 5];
        for _ in 0..runs {
            if !read_exact_or_eof(&mut r, &mut run)? {
                return Err(Error::Parse("truncated run list".into()));
            }
            let n = u32::from_le_bytes(run[1..5].try_into().expect("4 bytes"));
            symbols.extend(std::iter::repeat_n(run[0], n as usize));
        }
        records.push(TrajectoryRecord { replica, time, symbols });
    }
    Ok((header, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn records_round_trip(sym in proptest::collection::vec(prop_oneof![Just(b'0'), Just(b'-'), Just(b'+'), Just(b'2')], 1..200),
                              replica in any::<u32>(), time in 0.0f64..1e6) {
            let header = TrajectoryHeader {
                dimension: 1,
                side: sym.len(),
                process: super::super::Process::Free,
                config: serde_json::json!({"seed": 3}),
            };
            let mut w = TrajectoryWriter::new(Vec::new(), &header).unwrap();
            w.write_symbols(replica, time, &sym).unwrap();
            w.write_symbols(replica + 1, time + 1.0, &sym).unwrap();
            let bytes = w.into_inner().unwrap();
            prop_assert_eq!(bytes[0], FORMAT_VERSION);
            let (h, recs) = read_trajectory(&bytes[..]).unwrap();
            prop_assert_eq!(h, header);
            prop_assert_eq!(recs.len(), 2);
            prop_assert_eq!(&recs[0].symbols, &sym);
            prop_assert_eq!(recs[0].replica, replica);
            prop_assert_eq!(recs[1].time, time + 1.0);
        }
    }

    #[test]
    fn run_lengths() {
        assert_eq!(run_length_encode(b"000+0"), vec![(b'0', 3), (b'+', 1), (b'0', 1)]);
        assert!(run_length_encode(b"").is_empty());
    }

    #[test]
    fn rejects_truncation_and_version() {
        assert!(read_trajectory(&[2u8, 0, 0, 0, 0][..]).is_err());
        let header = TrajectoryHeader {
            dimension: 1,
            side: 3,
            process: super::super::Process::Sep,
            config: serde_json::Value::Null,
        };
        let mut w = TrajectoryWriter::new(Vec::new(), &header).unwrap();
        w.write_symbols(0, 1.0, b"010").unwrap();
        let mut bytes = w.into_inner().unwrap();
        bytes.pop();
        assert!(read_trajectory(&bytes[..]).is_err());
    }
}
