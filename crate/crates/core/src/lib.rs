//! Secure multiparty evaluation of C-like programs with private pointers.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod field;
pub mod harness;
pub mod heap;
pub mod lang;
pub mod mpcops;
pub mod privptr;
pub mod shamir;
