#![allow(dead_code)]

pub mod gradcheck;
pub mod gradsuite;
pub mod oracles;
