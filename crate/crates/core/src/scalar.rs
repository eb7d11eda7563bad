//! Integer scalar abstraction used by every evaluator in the crate.
//!
//! MiniC integers are mathematical integers. Fixed-width carriers (`i64`,
//! `i128`) are accepted as long as every operation is checked: an overflow is
//! reported as an error instead of wrapping, so a run either agrees with exact
//! arithmetic or fails loudly. `BigInt` never overflows.

use std::fmt::{Debug, Display};
use std::hash::Hash;

use num_bigint::BigInt;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, FromPrimitive, Signed, ToPrimitive};

/// An integer carrier for MiniC values.
pub trait Scalar:
    Signed
    + CheckedAdd
    + CheckedSub
    + CheckedMul
    + CheckedDiv
    + FromPrimitive
    + ToPrimitive
    + Ord
    + Hash
    + Clone
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn from_int(v: i64) -> Self {
        Self::from_i64(v).expect("every scalar carrier holds i64")
    }

    fn from_bool(b: bool) -> Self {
        if b {
            Self::one()
        } else {
            Self::zero()
        }
    }

    fn truthy(&self) -> bool {
        !self.is_zero()
    }

    /// Negation, `None` on overflow.
    fn checked_negate(&self) -> Option<Self> {
        Self::zero().checked_sub(self)
    }

    /// Absolute value, `None` on overflow.
    fn checked_magnitude(&self) -> Option<Self> {
        if self.is_negative() {
            self.checked_negate()
        } else {
            Some(self.clone())
        }
    }

    /// C-style remainder (sign of the dividend). The divisor must be nonzero.
    fn checked_remainder(&self, rhs: &Self) -> Option<Self> {
        // checked_div rejects the single overflowing pair (MIN, -1) first
        let q = self.checked_div(rhs)?;
        let prod = q.checked_mul(rhs)?;
        self.checked_sub(&prod)
    }
}

impl<T> Scalar for T where
    T: Signed
        + CheckedAdd
        + CheckedSub
        + CheckedMul
        + CheckedDiv
        + FromPrimitive
        + ToPrimitive
        + Ord
        + Hash
        + Clone
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Exact carrier.
pub type Exact = BigInt;
