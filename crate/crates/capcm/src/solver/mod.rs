//! Newton continuation solver for `sigma_k(tau[s]) = phi` on the cap.

mod config;
mod drive;
mod homotopy;
mod newton;
mod residual;
mod translate;

pub use config::{HomotopyMode, ProblemSpec, PsiChoice, SolverConfig, Symmetry};
pub use drive::{solve_cm, SolveOutcome, SolveReport, StepRecord};
pub use homotopy::{check_hypotheses, Path, PathPoint};
pub use newton::{assemble_jacobian, kernel_constraints, newton_solve, newton_solve_carry, NewtonResult};
pub use residual::{forward, Discretization};
pub use translate::{find_translation_point, Psi};
