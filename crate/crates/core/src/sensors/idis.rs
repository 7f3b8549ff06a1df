//! Obstacle-list radar over CAN.
//!
//! The frame layout is our own stand-in: ids `0x310..=0x31F` carry one
//! obstacle slot each, 8 bytes little-endian:
//! `u16 range_cm, i16 lateral_cm, u16 width_cm, u8 flags (bit0 valid), u8 sequence`.

use crate::transport::{can_decode_write, CanFrame, Endpoint, CAN_MAX_ENCODED};

use super::{Obstacle, ObstacleReport, SensorError};

pub const IDIS_BASE_ID: u16 = 0x310;
pub const IDIS_SLOTS: usize = 16;
pub const IDIS_FLAG_VALID: u8 = 0x01;
pub const IDIS_MIN_RANGE_M: f32 = 3.0;
pub const IDIS_MAX_RANGE_M: f32 = 150.0;
const IDIS_PAYLOAD_LEN: usize = 8;

/// Contents of one slot frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdisSlot {
    pub slot: u8,
    pub range_m: f32,
    pub lateral_m: f32,
    pub width_m: f32,
    pub valid: bool,
    pub sequence: u8,
}

fn to_cm_u16(m: f32) -> u16 {
    (m * 100.0).round().clamp(0.0, u16::MAX as f32) as u16
}

fn to_cm_i16(m: f32) -> i16 {
    (m * 100.0).round().clamp(i16::MIN as f32, i16::MAX as f32) as i16
}

pub fn idis_encode_slot(s: &IdisSlot) -> Result<CanFrame, SensorError> {
    if s.slot as usize >= IDIS_SLOTS {
        return Err(SensorError::Invalid(format!("slot {} out of range", s.slot)));
    }
    let mut data = [0u8; IDIS_PAYLOAD_LEN];
    data[0..2].copy_from_slice(&to_cm_u16(s.range_m).to_le_bytes());
    data[2..4].copy_from_slice(&to_cm_i16(s.lateral_m).to_le_bytes());
    data[4..6].copy_from_slice(&to_cm_u16(s.width_m).to_le_bytes());
    data[6] = if s.valid { IDIS_FLAG_VALID } else { 0 };
    data[7] = s.sequence;
    Ok(CanFrame::new(u32::from(IDIS_BASE_ID) + u32::from(s.slot), &data)?)
}

/// `Ok(None)` for frames that are not obstacle slots.
pub fn idis_parse_frame(frame: &CanFrame) -> Result<Option<IdisSlot>, SensorError> {
    let id = frame.id();
    if !(IDIS_BASE_ID..IDIS_BASE_ID + IDIS_SLOTS as u16).contains(&id) {
        return Ok(None);
    }
    let d = frame.data();
    if d.len() != IDIS_PAYLOAD_LEN {
        return Err(SensorError::MalformedFrame {
            id,
            reason: format!("expected {IDIS_PAYLOAD_LEN} bytes, got {}", d.len()),
        });
    }
    Ok(Some(IdisSlot {
        slot: (id - IDIS_BASE_ID) as u8,
        range_m: f32::from(u16::from_le_bytes([d[0], d[1]])) / 100.0,
        lateral_m: f32::from(i16::from_le_bytes([d[2], d[3]])) / 100.0,
        width_m: f32::from(u16::from_le_bytes([d[4], d[5]])) / 100.0,
        valid: d[6] & IDIS_FLAG_VALID != 0,
        sequence: d[7],
    }))
}

/// Keeps the newest obstacle list seen on a CAN endpoint.
pub struct HellaDriver {
    ep: Endpoint,
    slots: [Option<Obstacle>; IDIS_SLOTS],
    last_seq: Option<u8>,
    sequence: u32,
    malformed: u64,
    fresh: bool,
}

impl HellaDriver {
    /// The endpoint is switched to non-blocking mode.
    pub fn new(mut ep: Endpoint) -> Self {
        ep.set_blocking(false);
        HellaDriver {
            ep,
            slots: [None; IDIS_SLOTS],
            last_seq: None,
            sequence: 0,
            malformed: 0,
            fresh: false,
        }
    }

    pub fn malformed_frames(&self) -> u64 {
        self.malformed
    }

    fn apply(&mut self, s: IdisSlot) {
        match self.last_seq {
            None => {
                self.sequence = u32::from(s.sequence);
                self.last_seq = Some(s.sequence);
            }
            Some(last) => {
                let ahead = s.sequence.wrapping_sub(last);
                if ahead == 0 {
                } else if ahead <= 128 {
                    self.sequence = self.sequence.wrapping_add(u32::from(ahead));
                    self.last_seq = Some(s.sequence);
                    self.slots = [None; IDIS_SLOTS];
                } else {
                    log::trace!("ignoring stale slot {} (seq {} < {last})", s.slot, s.sequence);
                    return;
                }
            }
        }
        self.fresh = true;
        let in_range = (IDIS_MIN_RANGE_M..=IDIS_MAX_RANGE_M).contains(&s.range_m);
        self.slots[s.slot as usize] = (s.valid && in_range).then_some(Obstacle {
            range_m: s.range_m,
            lateral_m: s.lateral_m,
            width_m: s.width_m,
        });
    }

    /// Drains every pending frame, then reports the newest state.
    pub fn read(&mut self) -> Result<ObstacleReport, SensorError> {
        loop {
            let bytes = self.ep.read(CAN_MAX_ENCODED)?;
            if bytes.is_empty() {
                break;
            }
            let frame = match can_decode_write(&bytes) {
                Ok(f) => f,
                Err(e) => {
                    self.malformed += 1;
                    log::debug!("undecodable CAN chunk: {e}");
                    continue;
                }
            };
            match idis_parse_frame(&frame) {
                Ok(Some(s)) => self.apply(s),
                Ok(None) => {}
                Err(e) => {
                    self.malformed += 1;
                    log::debug!("{e}");
                }
            }
        }
        Ok(self.report())
    }

    /// True once after any slot update arrived.
    pub(crate) fn take_fresh(&mut self) -> bool {
        std::mem::take(&mut self.fresh)
    }

    pub fn report(&self) -> ObstacleReport {
        ObstacleReport {
            obstacles: self.slots.iter().flatten().copied().collect(),
            sequence: self.sequence,
        }
    }
}

pub fn idis_read(driver: &mut HellaDriver) -> Result<ObstacleReport, SensorError> {
    driver.read()
}
