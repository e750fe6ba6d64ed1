//! Coded event records to relational panels, plus synthetic panels for verification.

mod aggregate;
mod events;
mod simulate;

pub use aggregate::{aggregate, Aggregation, AggregationConfig, DropTally, YearMonth};
pub use events::{parse_events, CameoMapping, EventRecord, ParseReport, QuadClass, RowError};
pub use simulate::{linear_spectral_radius, simulate_synthetic};
