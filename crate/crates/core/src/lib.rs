//! Secure deployment of a UAV swarm serving an IoT field with eavesdroppers.
//!
//! The optimization alternates three blocks: node association (a potential
//! game solved by synchronous log-linear learning), UAV positioning (k-means
//! plus a best-response altitude game) and per-UAV power allocation
//! (QoS floor plus max-min secrecy by bisection). Benchmarks for every block
//! and a seeded Monte Carlo harness sit alongside.

pub mod association;
pub mod channel;
pub mod framework;
pub mod harness;
pub mod power;
pub mod positioning;
pub mod radio;
pub mod scenario;
