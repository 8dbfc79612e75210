//! Samplers for the lattice model and the continuous Poisson edge process.

pub mod continuous;
pub mod discrete;
pub mod mass;

pub use continuous::{merge, proposal_mean, sample_continuous, superpose, unit_sphere_area};
pub use discrete::{
    sample_discrete, sample_discrete_naive, sample_discrete_with, superpose_discrete,
    superpose_discrete_with,
};
pub use mass::{cube_pair_mass, discrete_edge_prob, CubePairMass, MassCache};
