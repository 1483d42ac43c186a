//! Changes of variables `φ(x, s) = W(x, s) · u(a R x + S, τ(s))` and their
//! action on fields and equations.

pub mod records;
pub mod resample;

pub use records::{
    comoving, electric_removal, galilean, harmonic_removal, harmonic_removal_on, phase_removal, repulsive_removal,
    repulsive_removal_on, rotating_frame, Path, RecordSummary, Scale, TransformChain, TransformRecord,
};
pub use resample::{resample, Affine};
