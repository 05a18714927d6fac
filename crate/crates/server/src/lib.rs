//! HTTP service, capability gateway and persistence around `easel-core`.

pub mod config;
pub mod gateway;
pub mod mockserver;
pub mod store;
pub mod service;
