pub mod error;
pub mod hamiltonian;
pub mod krawtchouk;
pub mod lattice;
pub mod rotation;
pub mod spectral;
pub mod transfer;
pub mod cli;
