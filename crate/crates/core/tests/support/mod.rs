//! Oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

pub mod fd;
pub mod fixtures;
pub mod gradcheck;
pub mod oracles;
