//! EIRP-constrained downlink MAC scheduling.
//!
//! The crate is organised bottom-up:
//!
//! - [`emf`]: angular segments, beam gain patterns and the EIRP consumption
//!   ledger with its sliding-window compliance check.
//! - [`budget`]: per-period EIRP caps and the per-slot budgets derived from
//!   them.
//! - [`waterfill`]: the alpha-fair power allocation solved by water-filling.
//! - [`scheduler`]: the per-slot MAC pipeline (UE selection, MCS/power
//!   downgrade, resource or power limiting, PRB allocation).
//! - [`sim`]: a desk-scale system-level simulator wiring the above together.
//!
//! All EIRP, power and gain quantities are linear (watts, dimensionless).

pub mod budget;
pub mod emf;
pub mod scheduler;
pub mod sim;
pub mod units;
pub mod waterfill;
