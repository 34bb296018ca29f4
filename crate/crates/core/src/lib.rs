//! Collective spontaneous emission of circular atomic arrays around an
//! optical nanofiber.

pub mod collective;
pub mod cylinder;
pub mod fiber_modes;
pub mod fields;
pub mod green;
pub mod quadrature;
pub mod specfun;
pub mod tworing;
