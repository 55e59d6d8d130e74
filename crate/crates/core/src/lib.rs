//! Parametric generation and analysis of a single-layer, eight-resonator
//! coplanar-waveguide test chip for dielectric-loss studies.
//!
//! - [`cpw_analytics`]: closed-form line models (impedance, permittivity, λ/4 length).
//! - [`coupling`]: coupler-length to Qc model, decay rates, TLS loss budget, crosstalk.
//! - [`layout`]: chip geometry, GDSII/SVG writers, design-rule scan, wirebond plan.
//! - [`participation`]: 2-D electrostatic cross-section solver and surface participation.
//! - [`fitting`]: notch-type S21 synthesis, trace readers and least-squares fitting.
//! - [`config`]: closed-schema run configuration.

// `!(x > 0.0)` is how validation rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Stencil and mesh loops read clearer with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod coupling;
pub mod cpw_analytics;
pub mod fitting;
pub mod layout;
pub mod participation;
