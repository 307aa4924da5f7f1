//! POD bases and LSPG time integration on linear or nonlinear trial manifolds.

mod lspg;
mod pod;

pub use lspg::{gn_step, pod_lspg, rom_solve, GnOutcome, Normalization, RomConfig, RomTrajectory, StepPolicy};
pub use pod::{fix_signs, pod_basis, PodBasis, StoredBasis};
