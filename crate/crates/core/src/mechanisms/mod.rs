//! Offspring laws, continuum branching mechanisms, and the bridge between them.

mod condition;
mod discrete;
mod family;
mod law;
mod mechanism;
mod recipe;

pub use condition::{check_condition_5a, ConditionRecord, ConditionReport, RATIO_BAND};
pub use discrete::{
    discrete_mechanism, DiscreteFlowFamily, FamilyValidation, LawSource, RecipeCoefficients,
};
pub use family::{
    eval_phi_theta, eval_psi, BranchingMechanism, CatalogParams, FamilyMember, MechanismFamily,
    ThetaProfile,
};
pub use crate::cumulant::eval_big_psi;
pub use law::{eval_pgf, OffspringLaw, NORMALIZATION_TOL};
pub use mechanism::{eval_phi, ExpJumps, JumpAtom, Mechanism};
pub use recipe::{
    build_discrete_family, build_discrete_family_with, RecipeOptions, RecipeReport, TAIL_MASS_TOL,
};
