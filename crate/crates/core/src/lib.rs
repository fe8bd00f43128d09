//! Motor and friction parameter identification for robot joints driven
//! through gearboxes, including joints coupled by differential transmissions.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod dataset;
pub mod error;
pub mod identify;
pub mod io;
pub mod model;
pub mod regression;
pub mod simulator;
