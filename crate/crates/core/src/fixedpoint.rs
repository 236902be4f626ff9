//! Integer primitives of the digital learning core.
//!
//! States are 16-bit, plastic weights are 8-bit and every coupling is a
//! power of two stored as a small signed exponent. All arithmetic saturates.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Signed shift exponent of a power-of-two coupling, stored in 5 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub struct ShiftExp(i8);

impl ShiftExp {
    pub const MIN: i8 = -16;
    pub const MAX: i8 = 15;

    pub fn new(value: i8) -> Result<Self, Error> {
        if (Self::MIN..=Self::MAX).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::Config(format!(
                "shift exponent {value} outside 5-bit range [{}, {}]",
                Self::MIN,
                Self::MAX
            )))
        }
    }

    /// Panics if `value` does not fit in 5 bits. For constants.
    pub const fn from_const(value: i8) -> Self {
        assert!(value >= Self::MIN && value <= Self::MAX);
        Self(value)
    }

    #[inline(always)]
    pub const fn get(self) -> i8 {
        self.0
    }
}

impl TryFrom<i8> for ShiftExp {
    type Error = Error;
    fn try_from(v: i8) -> Result<Self, Error> {
        Self::new(v)
    }
}

impl From<ShiftExp> for i8 {
    fn from(s: ShiftExp) -> i8 {
        s.0
    }
}

/// Largest and smallest stored neural state.
pub const STATE_MAX: i32 = i16::MAX as i32;
pub const STATE_MIN: i32 = i16::MIN as i32;
/// Plastic weight bounds. `+128` does not exist in signed 8-bit storage.
pub const WEIGHT_MAX: i32 = i8::MAX as i32;
pub const WEIGHT_MIN: i32 = i8::MIN as i32;

/// Power-of-two multiply `x * 2^a` built from shifts.
///
/// Right shifts act on the magnitude so that negative values round toward
/// zero like positive ones: an arithmetic shift would leave `-1` where `0`
/// is expected. Left shifts saturate to the `i32` range.
#[inline(always)]
pub fn diamond(a: ShiftExp, x: i32) -> i32 {
    let a = a.get();
    if a >= 0 {
        let wide = (x as i64) << a;
        wide.clamp(i32::MIN as i64, i32::MAX as i64) as i32
    } else {
        let mag = (x as i64).abs() >> (-a);
        (x.signum() as i64 * mag) as i32
    }
}

/// Leak helper: the decay amount for a state `y` whose scaled leak is `x`.
///
/// When the shift has rounded the leak to zero on a non-zero state, the
/// state still moves one unit toward zero, so every state eventually
/// reaches exactly zero.
#[inline(always)]
pub fn leak_m(x: i32, y: i32) -> i32 {
    if x == 0 && y != 0 {
        y.signum()
    } else {
        x
    }
}

/// `min(max(x, lo), hi)`.
pub fn clip(x: i32, lo: i32, hi: i32) -> Result<i32, Error> {
    if lo > hi {
        return Err(Error::InvalidBounds { lo, hi });
    }
    Ok(x.clamp(lo, hi))
}

#[inline(always)]
pub(crate) fn clip_weight(x: i32) -> i8 {
    x.clamp(WEIGHT_MIN, WEIGHT_MAX) as i8
}

/// Narrow to a 16-bit state, reporting whether the value saturated.
#[inline(always)]
pub fn saturate16(x: i32) -> (i16, bool) {
    let c = x.clamp(STATE_MIN, STATE_MAX);
    (c as i16, c != x)
}

/// One leak step `x - m(a ⋄ x, x)`.
#[inline(always)]
pub fn leak_step(a: ShiftExp, x: i32) -> i32 {
    x - leak_m(diamond(a, x), x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: i8) -> ShiftExp {
        ShiftExp::new(v).unwrap()
    }

    #[test]
    fn diamond_examples() {
        assert_eq!(diamond(s(2), 3), 12);
        assert_eq!(diamond(s(-1), 5), 2);
        assert_eq!(diamond(s(-2), -3), 0);
        assert_eq!(diamond(s(-3), -8), -1);
        // an arithmetic shift would give -1 here
        assert_eq!(-3i32 >> 2, -1);
    }

    #[test]
    fn diamond_saturates_left_shift() {
        assert_eq!(diamond(s(15), i32::MAX), i32::MAX);
        assert_eq!(diamond(s(15), i32::MIN), i32::MIN);
        assert_eq!(diamond(s(-16), i32::MIN), -(1 << 15));
    }

    #[test]
    fn leak_m_examples() {
        assert_eq!(leak_m(4, 100), 4);
        assert_eq!(leak_m(0, 7), 1);
        assert_eq!(leak_m(0, -7), -1);
        assert_eq!(leak_m(0, 0), 0);
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip(130, -128, 127).unwrap(), 127);
        assert_eq!(clip(-129, -128, 127).unwrap(), -128);
        assert_eq!(clip(5, -128, 127).unwrap(), 5);
        assert!(matches!(
            clip(0, 1, -1),
            Err(Error::InvalidBounds { lo: 1, hi: -1 })
        ));
    }

    #[test]
    fn shift_exp_range() {
        assert!(ShiftExp::new(-16).is_ok());
        assert!(ShiftExp::new(15).is_ok());
        assert!(ShiftExp::new(16).is_err());
        assert!(ShiftExp::new(-17).is_err());
    }

    #[test]
    fn small_state_leaks_to_zero_instead_of_sticking() {
        assert_eq!(leak_step(s(-3), 100), 88);
        assert_eq!(leak_step(s(-3), 3), 2);
        assert_eq!(leak_step(s(-3), -3), -2);
    }

    #[test]
    fn saturate16_reports() {
        assert_eq!(saturate16(40000), (i16::MAX, true));
        assert_eq!(saturate16(-40000), (i16::MIN, true));
        assert_eq!(saturate16(-5), (-5, false));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn right_shift_is_within_one_of_exact(a in -16i8..0, x in any::<i32>()) {
                let d = diamond(s(a), x) as f64;
                let exact = x as f64 * (a as f64).exp2();
                prop_assert!((d - exact).abs() < 1.0);
                prop_assert!(d == 0.0 || d.signum() == (x as f64).signum());
            }

            #[test]
            fn left_shift_is_exact_when_it_fits(a in 0i8..=15, x in -(1i32 << 15)..(1i32 << 15)) {
                prop_assert_eq!(diamond(s(a), x) as i64, (x as i64) * (1i64 << a));
            }

            #[test]
            fn leak_reaches_zero_without_crossing(a in -16i8..0, x0 in any::<i16>()) {
                let mut x = x0 as i32;
                let mut steps = 0u32;
                while x != 0 {
                    let next = leak_step(s(a), x);
                    prop_assert!(next == 0 || next.signum() == x.signum());
                    prop_assert!(next.abs() < x.abs());
                    x = next;
                    steps += 1;
                    prop_assert!(steps <= 1 << 17);
                }
            }

            #[test]
            fn clip_is_idempotent(x in any::<i32>(), lo in -1000i32..0, hi in 0i32..1000) {
                let once = clip(x, lo, hi).unwrap();
                prop_assert_eq!(clip(once, lo, hi).unwrap(), once);
            }
        }
    }
}
