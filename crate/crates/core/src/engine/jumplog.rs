//! Binary jump log: one 13-byte little-endian record per executed jump.
//!
//! | bytes | content                                        |
//! |-------|------------------------------------------------|
//! | 0..8  | event time, fixed point in units of 2⁻³² (u64) |
//! | 8..12 | bond index x of the bond {x, x+1} (u32)         |
//! | 12    | direction: 0 forward (x→x+1), 1 backward (u8)   |

use std::io::{self, Read, Write};

use super::{Direction, JumpEvent, JumpObserver};
use crate::error::{Error, Result};
use crate::lattice::Configuration;

pub const JUMP_RECORD_BYTES: usize = 13;
const FIXED_POINT_SCALE: f64 = 4_294_967_296.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JumpRecord {
    pub time_fixed: u64,
    pub bond: u32,
    pub direction: Direction,
}

impl JumpRecord {
    pub fn from_event(event: &JumpEvent) -> Self {
        JumpRecord {
            time_fixed: (event.time * FIXED_POINT_SCALE).round() as u64,
            bond: event.bond as u32,
            direction: event.direction,
        }
    }

    pub fn time(&self) -> f64 {
        self.time_fixed as f64 / FIXED_POINT_SCALE
    }

    pub fn to_bytes(&self) -> [u8; JUMP_RECORD_BYTES] {
        let mut out = [0u8; JUMP_RECORD_BYTES];
        out[..8].copy_from_slice(&self.time_fixed.to_le_bytes());
        out[8..12].copy_from_slice(&self.bond.to_le_bytes());
        out[12] = match self.direction {
            Direction::Forward => 0,
            Direction::Backward => 1,
        };
        out
    }

    pub fn from_bytes(bytes: &[u8; JUMP_RECORD_BYTES]) -> Result<Self> {
        let direction = match bytes[12] {
            0 => Direction::Forward,
            1 => Direction::Backward,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "jump log direction byte {other} is neither 0 nor 1"
                )))
            }
        };
        Ok(JumpRecord {
            time_fixed: u64::from_le_bytes(bytes[..8].try_into().unwrap()),
            bond: u32::from_le_bytes(bytes[8..12].try_into().unwrap()),
            direction,
        })
    }
}

/// Observer streaming records to a writer. Write errors are kept and
/// reported by [`JumpLogWriter::finish`].
pub struct JumpLogWriter<W: Write> {
    out: W,
    error: Option<io::Error>,
    written: u64,
}

impl<W: Write> JumpLogWriter<W> {
    pub fn new(out: W) -> Self {
        JumpLogWriter {
            out,
            error: None,
            written: 0,
        }
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> JumpObserver for JumpLogWriter<W> {
    fn on_jump(&mut self, event: &JumpEvent, _: &Configuration) {
        if self.error.is_some() {
            return;
        }
        match self.out.write_all(&JumpRecord::from_event(event).to_bytes()) {
            Ok(()) => self.written += 1,
            Err(e) => self.error = Some(e),
        }
    }
}

pub fn read_jump_log<R: Read>(mut input: R) -> Result<Vec<JumpRecord>> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<jump log>", e))?;
    if bytes.len() % JUMP_RECORD_BYTES != 0 {
        return Err(Error::InvalidParameter(format!(
            "jump log of {} bytes is not a whole number of records",
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(JUMP_RECORD_BYTES)
        .map(|c| JumpRecord::from_bytes(c.try_into().unwrap()))
        .collect()
}

/// Apply recorded jumps to `config`, notifying `obs` after each swap.
///
/// Fails if a record moves a particle that is not there.
pub fn replay<O: JumpObserver>(
    config: &mut Configuration,
    records: &[JumpRecord],
    obs: &mut O,
) -> Result<()> {
    let mut last = 0.0;
    for rec in records {
        let x = rec.bond as usize;
        if x >= config.len() {
            return Err(Error::InvalidParameter(format!("bond {x} outside the torus")));
        }
        let (from, to) = match rec.direction {
            Direction::Forward => (x as isize, x as isize + 1),
            Direction::Backward => (x as isize + 1, x as isize),
        };
        if config.at(from) != 1 || config.at(to) != 0 {
            return Err(Error::InvalidParameter(format!(
                "record at t={} moves across bond {x} against the configuration",
                rec.time()
            )));
        }
        config.swap_bond(x);
        let time = rec.time();
        let event = JumpEvent {
            time,
            dt: time - last,
            bond: x,
            direction: rec.direction,
        };
        last = time;
        obs.on_jump(&event, config);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{EngineState, SimParams};

    #[test]
    fn record_layout() {
        let rec = JumpRecord {
            time_fixed: 3 << 31,
            bond: 258,
            direction: Direction::Backward,
        };
        let bytes = rec.to_bytes();
        assert_eq!(&bytes[..8], &[0, 0, 0, 128, 1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[2, 1, 0, 0]);
        assert_eq!(bytes[12], 1);
        assert_eq!(rec.time(), 1.5);
        assert_eq!(JumpRecord::from_bytes(&bytes).unwrap(), rec);
    }

    #[test]
    fn log_replays_to_same_state() {
        let params = SimParams::ssep(8, 1.0, 1.0, 0.5).unwrap().with_seed(3);
        let mut state = EngineState::init(&params).unwrap();
        let start = state.config().clone();
        let mut log = JumpLogWriter::new(Vec::new());
        state.run_until_with(0.3, &mut log).unwrap();
        let bytes = log.finish().unwrap();
        assert_eq!(bytes.len() as u64, state.event_count() * JUMP_RECORD_BYTES as u64);
        let records = read_jump_log(bytes.as_slice()).unwrap();
        let mut replayed = start;
        replay(&mut replayed, &records, &mut ()).unwrap();
        assert_eq!(&replayed, state.config());
        assert!(read_jump_log(&bytes[..bytes.len() - 1]).is_err());
    }
}
