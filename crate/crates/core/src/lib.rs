pub mod analysis;
pub mod bits;
pub mod construction;
pub mod fhat;
pub mod function;
pub mod generator;
pub mod kc;
pub mod mass;
pub mod oracle;
pub mod request;
pub mod single;
pub mod tree;
pub mod universal;
pub mod config;
pub mod trace;
pub mod runner;
