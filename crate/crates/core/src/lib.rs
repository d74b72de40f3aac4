//! Chaos-masked message transmission with switched-mode power converters.
//!
//! A buck converter (ramp-comparator control) and a boost converter (clocked
//! current-mode control) act as chaos generators. Their state signals mask a
//! message at the transmitter; a receiver built from identical converters
//! regenerates the mask by synchronization and subtracts it.

pub mod analysis;
pub mod channel;
pub mod cli;
pub mod config;
pub mod control;
pub mod csv_io;
pub mod defaults;
pub mod dynamics;
pub mod error;
pub mod link;
pub mod sim;
pub mod waveform;

pub use error::{Error, Result};
