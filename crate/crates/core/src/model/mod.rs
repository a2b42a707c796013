//! Model parametrization, packing, identifiability and interpretation.

mod correlation;
mod identify;
mod pack;
mod params;
mod schema;

pub use correlation::first_second_order_correlation;
pub use identify::{count_parameters, ParameterCount};
pub use pack::{pack, unpack, PackLayout};
pub use params::{derive_moments, random_parameters, ComponentMoments, ScrParameters};
pub use schema::{OrdinalSchema, Thresholds};
