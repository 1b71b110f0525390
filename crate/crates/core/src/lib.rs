//! Contractive online adaptation of lifted (Koopman) linear models, D-optimal
//! active-learning MPC, and barrier-based safety with disturbance tightening.

pub mod adaptation;
pub mod error;
pub mod lifting;
pub mod linalg;
pub mod mpc;
pub mod plants;
pub mod qp;
pub mod safety;
pub mod tightening;

pub use error::{CoreError, Result};
