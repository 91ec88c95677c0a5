//! Numerical building blocks shared by the physics modules: double-double
//! helpers, polynomial root finding and adaptive quadrature.

pub(crate) mod dd;
pub(crate) mod poly;
pub(crate) mod quadrature;
