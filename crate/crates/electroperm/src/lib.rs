//! Stochastic single-cell electropermeabilization simulator.
//!
//! The coupled model: the electric potential in the intra- and extracellular
//! regions solves an electrostatics transmission problem whose interface data
//! is the transmembrane jump `v`; the jump itself evolves under the membrane
//! current, a nonlinear conductivity `(S0 + S1 w) v`, and Brownian forcing,
//! while the porosity degree `w` relaxes toward a sigmoid of `|v|`.
//!
//! Pipeline: [`mesh`] builds a boundary-fitted triangulation, [`fem`]
//! assembles and factorizes the saddle-point system that maps a jump to the
//! membrane current, [`membrane`] and [`noise`] provide the semi-implicit
//! Euler-Maruyama update pieces, [`sim`] runs trajectories and ensembles, and
//! [`stats`] computes time averages and decay-slope diagnostics.

pub mod cli;
pub mod config;
pub mod fem;
pub mod manifest;
pub mod membrane;
pub mod mesh;
pub mod noise;
pub mod record_io;
pub mod sim;
pub mod stats;
