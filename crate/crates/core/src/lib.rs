//! Constraint-aware symbolic regression for adsorption isotherms.

pub mod algebra;
pub mod bsr;
pub mod constraints;
pub mod datasets;
pub mod expr;
pub mod fit;
pub mod ga;
pub mod report;
pub mod search;

pub use algebra::{canonical_form, differentiate, equivalent_numeric, simplify, CanonicalForm};
pub use datasets::Dataset;
pub use expr::{parse, CompiledExpr, Expr, ExprError, OpKind, ParseError};
pub use fit::{fit_constants, l2_loss, FitConfig, FitResult};
pub use report::{Engine, ParetoFront, RunRecord, ScoredModel};
