//! Earliest-arrival routing in public transport under real-time delays,
//! with query envelopes for local (push) replanning and a simulator that
//! compares replanning strategies.

pub mod cache;
pub mod clock;
pub mod config;
pub mod csa;
pub mod delay;
pub mod envelope;
pub mod error;
pub mod fixtures;
pub mod gtfs;
pub mod replan;
pub mod report;
pub mod sim;
pub mod synthetic;
pub mod tig;
pub mod timetable;

pub use clock::{Duration, Time, INFINITY};
pub use error::{Error, ErrorKind, Result};
