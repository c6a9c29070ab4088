//! Finite-blocklength toolbox for the Wyner-Ahlswede-Körner (WAK) one-helper
//! network and the Gray-Wyner (GW) network: explicit lookup-table codes with
//! exact and Monte Carlo error evaluation, the balanced-code reduction that
//! turns a WAK code into a GW code with certified rate and error guarantees,
//! and numerical single-letter rate regions with supporting lines and
//! converse-bound arithmetic.

pub mod code;
pub mod error;
pub mod optim;
pub mod prob;
pub mod reduction;
pub mod regions;
pub mod types;

pub use error::{Error, Result};
