//! Random-access MAC protocol laboratory.
//!
//! Simulators and analytical tools for a family of SIC-based random access
//! schemes: frame-synchronous repetition protocols (SA, DSA, CRDSA, IRSA)
//! over collision and Rayleigh block-fading channels, asynchronous replica
//! schemes with combining (CRA, ECRA), density-evolution analysis and degree
//! distribution optimization, layer-3 performance formulas, multi-receiver
//! relay forwarding strategies, tree-splitting collision resolution, and
//! sync-word detection on complex baseband windows.
//!
//! All randomized routines take explicit seeds or generators; derived
//! sub-seeds make batch runs reproducible regardless of worker count.

pub mod analytics;
pub mod asynchronous;
pub mod channels;
pub mod de_irsa;
pub mod detect;
pub mod legacy;
pub mod multirx;
pub mod optimizer;
pub mod rng;
pub mod slotted;
pub mod stats;
