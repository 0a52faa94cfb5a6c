//! Planar shocks on a cylinder `ℝ × T^q`, `T = ℝ/2πℤ`, `q ∈ {1, 2}`: the
//! transverse Fourier family `L_ξ`, decay of the modes `ξ ≠ 0`, the
//! mode-wise right inverse and periodic orbits bifurcating from a pair
//! planted at a longitudinal (`ξ* = 0`) or transverse (`ξ* ≠ 0`) mode.

mod family;
mod field;
mod orbit;

pub use family::{
    assemble_mode_family, gap_decay, inverse_substeps, is_real_semisimple, multid_right_inverse, transverse_flux_set, CylinderInverse,
    GapDecay, ModeCrossing, ModeLedger, ModeOperator, ModeStepper, ScaledFlux, TransverseModeFamily,
};
pub use field::{full_modes, half_modes, xi_norm_sq, CylinderField, PackedLayout, TransverseGrid};
pub use orbit::{multid_orbit, shape_fit_residual, CylinderFamily, CylinderOrbit, CylinderSystem};
