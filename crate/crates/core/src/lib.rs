//! Recovery of a nonlinear boundary flux law from Cauchy data of a harmonic
//! potential on a planar polygon.

pub mod continuation;
pub mod forward;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod reconstruction;
pub mod experiments;
