//! Brute-force reference solvers used only to check the closed-form models.
//!
//! [`fd`] solves the 2D Laplace problem of a cross-section on a graded
//! finite-volume grid; [`ladder`] discretises coupled quarter-wave lines into
//! lumped LC cells and solves their generalized eigenproblem.

pub mod fd;
pub mod ladder;

pub use fd::{
    coupled_fd, fd_capacitance, slot_capacitor_fd, tgcpw_fd, FdCoupled, FdGrid, FdLine,
    GridResolution, Node, SolverOptions,
};
pub use ladder::{
    ladder_coupling, ladder_eigenfrequencies, End, LadderCoupling, LadderLine, LadderModel,
};
