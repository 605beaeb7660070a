#![allow(dead_code)]

pub mod leiden_oracle;
