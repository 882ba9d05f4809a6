//! Representations, Fourier-Wigner and Wigner transforms on the two phase spaces.

mod fourier;
mod function;
mod grid;
mod klm;
mod rep;
mod transform;

pub use fourier::symplectic_fourier;
pub use function::{Domain, PhaseFunction, Side, Tomogram};
pub use grid::{Lattice, PhaseGrid};
pub use klm::{klm_check, MAX_KLM_POINTS};
pub use rep::{
    discrete_weyl, displacement, displacement_block, displacement_columns, duflo_moore_constant, klm_phase, RepDescriptor, Representation,
    MAX_FOCK_DIM, MAX_WEYL_DIM, MIN_FOCK_DIM,
};
pub use transform::{
    expectation_phase_space, fw_inverse, fw_transform, wigner_inverse, wigner_pure_state, wigner_transform,
    WIGNER_DIRECT_PREFACTOR,
};
