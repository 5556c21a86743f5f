#![doc = include_str!("../README.md")]

pub mod backend;
pub mod cli;
pub mod fixtures;
pub mod formats;

pub use backend::HighsBackend;
