#![allow(dead_code)]

pub mod complexes;
pub mod displayed;
