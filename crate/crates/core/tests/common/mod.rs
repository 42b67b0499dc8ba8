#![allow(dead_code)]

pub mod dsl_ref;
