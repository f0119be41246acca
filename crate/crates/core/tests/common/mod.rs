#![allow(dead_code)]

pub mod normal_oracle;
