#![allow(dead_code)]

pub mod crash;
pub mod fuzz;
pub mod orch;
pub mod packaging;
pub mod pretag;
pub mod qc;
pub mod sim;
pub mod speaker;
