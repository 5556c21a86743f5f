#![no_std]
#![doc = include_str!("../README.md")]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cuts;
pub mod encoding;
pub mod fingerprint;
pub mod formulation;
pub mod gates;
pub mod mip;
pub mod oracle;
pub mod rho;

#[cfg(test)]
mod testutil;
