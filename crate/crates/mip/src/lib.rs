//! Mixed-binary linear models, the linearizations used to build them, an LP
//! relaxation on a revised simplex, and a branch-and-bound driver.

pub mod bnb;
pub mod error;
pub mod linearize;
pub mod lp;
pub mod model;
pub mod mps;

pub use bnb::{branch_and_bound, BnbOptions, MipSolution, MipStatus, NodeRecord};
pub use error::{MipError, SolveError};
pub use linearize::{convex_loss_epigraph, mccormick_product, tangent_envelope, tangent_points};
pub use lp::{solve_lp, BoundOverride, LpOptions, LpSolution, LpStatus};
pub use model::{ConId, Epigraph, LinearConstraint, MipModel, Sense, Site, Tag, VarId, VarKind, Variable};
pub use mps::{export_mps, read_mps};
