#![allow(dead_code)]

pub mod complex_step;
