pub mod error;
pub mod numerics;
pub mod spaces;
pub mod profiles;
pub mod kernels;
pub mod resummation;
pub mod linops;
pub mod bifurcation;
pub mod returnmap;
pub mod multid;
