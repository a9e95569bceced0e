//! Magnetic near-field of the deflected beam and of the pick-up coil.
//!
//! Coordinates: origin at the microcoil center, coil in the yz-plane
//! (normal along +x), sample occupying `0 <= x <= H`, beam travelling along
//! +z at `x = H + standoff` above the sample top.

mod beam;
mod coil;
mod harmonics;

pub use beam::{beam_line_position, field_at, BeamSpec, FieldVector, SINGULAR_RADIUS};
pub use coil::{coil_unitary_field, segment_field, self_weighted_average, CoilSpec, LoopRect};
pub use harmonics::{dc_field, harmonics, HarmonicField, HarmonicSampler, DEFAULT_SAMPLES};
