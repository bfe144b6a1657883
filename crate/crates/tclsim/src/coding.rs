//! Signed power-of-two ("oneffset") encoding of activations, dynamic
//! precision, and serial cycle pricing for synchronization groups.

use serde::Serialize;

use crate::error::{Error, Result};

/// One signed power-of-two term of an encoded activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Oneffset {
    pub negative: bool,
    /// Power of two, 0..=16 (16 appears for values near the top of the range).
    pub exponent: u8,
}

/// Canonical non-adjacent-form encoding of an unsigned 16-bit value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OneffsetStream {
    /// Most-significant term first.
    pub terms: Vec<Oneffset>,
}

impl OneffsetStream {
    /// Reassemble the encoded value.
    pub fn value(&self) -> u32 {
        let mut v: i32 = 0;
        for t in &self.terms {
            let m = 1i32 << t.exponent;
            v += if t.negative { -m } else { m };
        }
        v as u32
    }
}

/// Encode `v` in canonical non-adjacent form (modified Booth): the unique
/// signed power-of-two representation where no two terms have adjacent
/// exponents. It is also minimal, so `terms.len() <= 9` for 16-bit inputs.
pub fn oneffsets(v: u16) -> OneffsetStream {
    let mut x = v as u32;
    let mut e: u8 = 0;
    let mut terms = Vec::new();
    while x > 0 {
        if x & 1 == 1 {
            // x mod 4 == 1 -> +1, == 3 -> -1; keeps the next bit clear.
            let neg = x & 3 == 3;
            terms.push(Oneffset {
                negative: neg,
                exponent: e,
            });
            if neg {
                x += 1;
            } else {
                x -= 1;
            }
        }
        x >>= 1;
        e += 1;
    }
    terms.reverse();
    OneffsetStream { terms }
}

/// Number of oneffset terms without building the stream.
pub fn oneffset_count(v: u16) -> u32 {
    let mut x = v as u32;
    let mut n = 0;
    while x > 0 {
        if x & 1 == 1 {
            n += 1;
            if x & 3 == 3 {
                x += 1;
            } else {
                x -= 1;
            }
        }
        x >>= 1;
    }
    n
}

/// Minimal bits to represent `v`: 0 for zero, else highest set bit + 1.
///
/// Errors with a precision violation when `v` does not fit in `cap` bits.
pub fn needed_bits(v: u16, cap: u8) -> Result<u32> {
    debug_assert!((1..=16).contains(&cap));
    let bits = 16 - v.leading_zeros();
    if cap < 16 && (v as u32) >= (1u32 << cap) {
        return Err(Error::Precision { value: v, cap });
    }
    Ok(bits)
}

/// Which serial back-end prices a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SerialMode {
    /// Group cost = max needed bits (dynamic precision).
    PrecisionSerial,
    /// Group cost = max oneffset count (effectual bits only).
    OneffsetSerial,
}

/// Cycle price of one synchronization group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupCost {
    /// Always >= 1: a compute column costs a cycle even if every selected
    /// activation is zero.
    pub cycles: u32,
    pub mode: SerialMode,
}

/// Price a synchronization group: the slowest member sets the cost.
///
/// `max_shift_delta` models the finite shift encoding between consecutive
/// oneffsets: when set, exponent gaps larger than the delta pay filler
/// cycles. `None` (the default) prices exactly one cycle per term.
pub fn group_cost(
    values: &[u16],
    mode: SerialMode,
    cap: u8,
    max_shift_delta: Option<u8>,
) -> Result<GroupCost> {
    let mut worst: u32 = 0;
    for &v in values {
        let cost = match mode {
            SerialMode::PrecisionSerial => needed_bits(v, cap)?,
            SerialMode::OneffsetSerial => {
                needed_bits(v, cap)?; // same precision contract as tclP
                match max_shift_delta {
                    None => oneffset_count(v),
                    Some(delta) => padded_term_cycles(v, delta),
                }
            }
        };
        worst = worst.max(cost);
    }
    Ok(GroupCost {
        cycles: worst.max(1),
        mode,
    })
}

/// Term count plus filler cycles for exponent gaps beyond `delta`.
fn padded_term_cycles(v: u16, delta: u8) -> u32 {
    let delta = delta.max(1) as u32;
    let stream = oneffsets(v);
    let mut cycles = stream.terms.len() as u32;
    for pair in stream.terms.windows(2) {
        let gap = (pair[0].exponent - pair[1].exponent) as u32;
        cycles += (gap - 1) / delta; // extra hops beyond the first
    }
    cycles
}
