//! Integer money and energy quantities.
//!
//! Realized rewards are accounted in whole cents and state-of-charge in whole
//! watt-hours, so that every conservation and replay check can be exact.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// An amount of money in cents. Prices are expressed as cents per kWh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cents(pub i64);

impl Cents {
    pub const ZERO: Cents = Cents(0);

    pub fn dollars(self) -> f64 {
        self.0 as f64 / 100.0
    }

    /// Converts a dollar amount, failing unless it is a whole number of cents.
    pub fn from_dollars(dollars: f64) -> Option<Cents> {
        let cents = (dollars * 100.0).round();
        ((cents / 100.0 - dollars).abs() < 1e-9 && cents.is_finite()).then_some(Cents(cents as i64))
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}${}.{:02}", abs / 100, abs % 100)
    }
}

impl Add for Cents {
    type Output = Cents;
    fn add(self, rhs: Cents) -> Cents {
        Cents(self.0 + rhs.0)
    }
}

impl Sub for Cents {
    type Output = Cents;
    fn sub(self, rhs: Cents) -> Cents {
        Cents(self.0 - rhs.0)
    }
}

impl Neg for Cents {
    type Output = Cents;
    fn neg(self) -> Cents {
        Cents(-self.0)
    }
}

impl AddAssign for Cents {
    fn add_assign(&mut self, rhs: Cents) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Cents {
    fn sub_assign(&mut self, rhs: Cents) {
        self.0 -= rhs.0;
    }
}

impl Mul<i64> for Cents {
    type Output = Cents;
    fn mul(self, rhs: i64) -> Cents {
        Cents(self.0 * rhs)
    }
}

impl Sum for Cents {
    fn sum<I: Iterator<Item = Cents>>(iter: I) -> Cents {
        Cents(iter.map(|c| c.0).sum())
    }
}

/// Stored or transferred energy in watt-hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Energy(pub i64);

impl Energy {
    pub const ZERO: Energy = Energy(0);

    pub fn from_kwh(kwh: f64) -> Option<Energy> {
        let wh = (kwh * 1000.0).round();
        ((wh / 1000.0 - kwh).abs() < 1e-9 && wh.is_finite()).then_some(Energy(wh as i64))
    }

    pub fn kwh(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn wh(self) -> i64 {
        self.0
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} kWh", self.kwh())
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0 + rhs.0)
    }
}

impl Sub for Energy {
    type Output = Energy;
    fn sub(self, rhs: Energy) -> Energy {
        Energy(self.0 - rhs.0)
    }
}

impl Neg for Energy {
    type Output = Energy;
    fn neg(self) -> Energy {
        Energy(-self.0)
    }
}

impl Sum for Energy {
    fn sum<I: Iterator<Item = Energy>>(iter: I) -> Energy {
        Energy(iter.map(|e| e.0).sum())
    }
}

/// Value of `energy` traded at `price_per_kwh`, or `None` when the product is
/// not a whole number of cents.
pub fn trade_value(price_per_kwh: Cents, energy: Energy) -> Option<Cents> {
    let milli = price_per_kwh.0.checked_mul(energy.0)?;
    (milli % 1000 == 0).then_some(Cents(milli / 1000))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_formats_dollars() {
        assert_eq!(Cents(1050).to_string(), "$10.50");
        assert_eq!(Cents(-250).to_string(), "-$2.50");
    }

    #[test]
    fn trade_value_requires_whole_cents() {
        assert_eq!(trade_value(Cents(1000), Energy(1000)), Some(Cents(1000)));
        assert_eq!(trade_value(Cents(500), Energy(100)), Some(Cents(50)));
        assert_eq!(trade_value(Cents(333), Energy(100)), None);
    }

    #[test]
    fn kwh_conversion_round_trips() {
        assert_eq!(Energy::from_kwh(2.5), Some(Energy(2500)));
        assert_eq!(Energy::from_kwh(0.0001), None);
        assert_eq!(Cents::from_dollars(7.5), Some(Cents(750)));
        assert_eq!(Cents::from_dollars(0.001), None);
    }
}
