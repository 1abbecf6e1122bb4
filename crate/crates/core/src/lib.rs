//! Two-stage stochastic programming engine.

pub mod lp;
pub mod lshaped;
pub mod saa;
pub mod sp;
