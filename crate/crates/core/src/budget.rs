//! Spend accounting against a hard cap.
//!
//! Work is gated by a reservation taken *before* it starts: a reservation that
//! would push committed plus reserved spend over the cap is refused. Once the
//! work finishes the reservation is settled with the actual amount, which is
//! again refused if it would break the cap. The committed total therefore
//! never exceeds the cap at any commit point.

use std::fmt;
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetUnit {
    Dollars,
    Evaluations,
    WallClockSeconds,
}

impl fmt::Display for BudgetUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BudgetUnit::Dollars => "dollars",
            BudgetUnit::Evaluations => "evaluations",
            BudgetUnit::WallClockSeconds => "seconds",
        })
    }
}

impl std::str::FromStr for BudgetUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dollars" | "usd" | "$" => Ok(BudgetUnit::Dollars),
            "evaluations" | "evals" => Ok(BudgetUnit::Evaluations),
            "seconds" | "wall_clock_seconds" | "wall-clock" => Ok(BudgetUnit::WallClockSeconds),
            other => Err(format!("unknown budget unit `{other}`")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BudgetError {
    #[error("budget exhausted: {requested} {unit} requested, {remaining} of {cap} remaining")]
    Exhausted {
        unit: BudgetUnit,
        requested: f64,
        remaining: f64,
        cap: f64,
    },
    #[error("budget cap must be finite and non-negative, got {0}")]
    InvalidCap(f64),
    #[error("amount must be finite and non-negative, got {0}")]
    InvalidAmount(f64),
    #[error("unknown reservation {0}")]
    UnknownReservation(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub item_id: String,
    pub amount: f64,
}

/// Handle for spend set aside before work begins.
#[derive(Debug, PartialEq, Eq)]
#[must_use = "a reservation must be committed or released"]
pub struct Reservation {
    id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub unit: BudgetUnit,
    pub cap: f64,
    pub entries: Vec<LedgerEntry>,
    #[serde(skip)]
    reserved: Vec<(u64, f64)>,
    #[serde(skip)]
    next_reservation: u64,
}

impl BudgetLedger {
    pub fn new(unit: BudgetUnit, cap: f64) -> Result<Self, BudgetError> {
        if !(cap >= 0.0) || !cap.is_finite() {
            return Err(BudgetError::InvalidCap(cap));
        }
        Ok(Self {
            unit,
            cap,
            entries: Vec::new(),
            reserved: Vec::new(),
            next_reservation: 0,
        })
    }

    /// A ledger that only fixes unit and cap, as used for archive prefixes.
    pub fn cap_only(unit: BudgetUnit, cap: f64) -> Result<Self, BudgetError> {
        Self::new(unit, cap)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().fold(0.0, |acc, e| acc + e.amount)
    }

    fn outstanding(&self) -> f64 {
        self.reserved.iter().fold(0.0, |acc, (_, a)| acc + a)
    }

    pub fn remaining(&self) -> f64 {
        (self.cap - self.total() - self.outstanding()).max(0.0)
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining() <= 0.0
    }

    fn check_amount(amount: f64) -> Result<(), BudgetError> {
        if amount.is_finite() && amount >= 0.0 {
            Ok(())
        } else {
            Err(BudgetError::InvalidAmount(amount))
        }
    }

    fn fits(&self, extra: f64) -> bool {
        self.total() + self.outstanding() + extra <= self.cap
    }

    /// Sets `amount` aside, refusing if the cap would be exceeded. A zero
    /// amount is refused once nothing remains, so an exhausted ledger gates all work.
    pub fn reserve(&mut self, amount: f64) -> Result<Reservation, BudgetError> {
        Self::check_amount(amount)?;
        if !self.fits(amount) || (amount == 0.0 && self.is_exhausted()) {
            return Err(self.exhausted(amount));
        }
        let id = self.next_reservation;
        self.next_reservation += 1;
        self.reserved.push((id, amount));
        Ok(Reservation { id })
    }

    fn take_reservation(&mut self, r: &Reservation) -> Result<f64, BudgetError> {
        let pos = self
            .reserved
            .iter()
            .position(|(id, _)| *id == r.id)
            .ok_or(BudgetError::UnknownReservation(r.id))?;
        Ok(self.reserved.swap_remove(pos).1)
    }

    /// Settles a reservation with the actual amount. If the actual amount does
    /// not fit, nothing is recorded and the reservation is dropped.
    pub fn commit(
        &mut self,
        reservation: Reservation,
        item_id: impl Into<String>,
        amount: f64,
    ) -> Result<(), BudgetError> {
        Self::check_amount(amount)?;
        self.take_reservation(&reservation)?;
        if !self.fits(amount) {
            return Err(self.exhausted(amount));
        }
        self.entries.push(LedgerEntry {
            item_id: item_id.into(),
            amount,
        });
        Ok(())
    }

    pub fn release(&mut self, reservation: Reservation) {
        let _ = self.take_reservation(&reservation);
    }

    /// Reserve-and-commit in one step.
    pub fn charge(&mut self, item_id: impl Into<String>, amount: f64) -> Result<(), BudgetError> {
        let r = self.reserve(amount)?;
        self.commit(r, item_id, amount)
    }

    fn exhausted(&self, requested: f64) -> BudgetError {
        BudgetError::Exhausted {
            unit: self.unit,
            requested,
            remaining: self.remaining(),
            cap: self.cap,
        }
    }
}

/// Ledger shared between worker threads; commits are serialized by the lock.
#[derive(Debug, Clone)]
pub struct SharedLedger(Arc<Mutex<BudgetLedger>>);

impl SharedLedger {
    pub fn new(ledger: BudgetLedger) -> Self {
        Self(Arc::new(Mutex::new(ledger)))
    }

    pub fn lock(&self) -> MutexGuard<'_, BudgetLedger> {
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn unit(&self) -> BudgetUnit {
        self.lock().unit
    }

    pub fn snapshot(&self) -> BudgetLedger {
        self.lock().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_before_exceeding_cap() {
        let mut l = BudgetLedger::new(BudgetUnit::Dollars, 2.0).unwrap();
        l.charge("a", 1.0).unwrap();
        l.charge("b", 1.0).unwrap();
        assert!(matches!(l.charge("c", 0.5), Err(BudgetError::Exhausted { .. })));
        assert_eq!(l.entries.len(), 2);
        assert_eq!(l.total(), 2.0);
    }

    #[test]
    fn reservations_count_against_cap() {
        let mut l = BudgetLedger::new(BudgetUnit::Evaluations, 2.0).unwrap();
        let r1 = l.reserve(1.0).unwrap();
        let r2 = l.reserve(1.0).unwrap();
        assert!(l.reserve(1.0).is_err());
        l.release(r2);
        let r3 = l.reserve(1.0).unwrap();
        l.commit(r1, "x", 1.0).unwrap();
        l.commit(r3, "y", 1.0).unwrap();
        assert_eq!(l.total(), 2.0);
        assert!(l.is_exhausted());
        assert!(l.reserve(0.0).is_err());
    }

    #[test]
    fn overrunning_commit_is_refused() {
        let mut l = BudgetLedger::new(BudgetUnit::Dollars, 1.0).unwrap();
        let r = l.reserve(0.5).unwrap();
        assert!(l.commit(r, "x", 1.5).is_err());
        assert!(l.entries.is_empty());
        assert_eq!(l.remaining(), 1.0);
    }

    #[test]
    fn invalid_cap_and_amounts() {
        assert!(BudgetLedger::new(BudgetUnit::Dollars, -1.0).is_err());
        assert!(BudgetLedger::new(BudgetUnit::Dollars, f64::NAN).is_err());
        let mut zero = BudgetLedger::new(BudgetUnit::Dollars, 0.0).unwrap();
        assert!(zero.is_exhausted());
        assert!(zero.reserve(0.0).is_err());
        let mut l = BudgetLedger::new(BudgetUnit::Dollars, 1.0).unwrap();
        assert!(matches!(l.reserve(-1.0), Err(BudgetError::InvalidAmount(_))));
    }
}
