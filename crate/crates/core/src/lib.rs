//! Relational logistic regression: count-feature formulas over relational
//! databases, L1-regularized weight learning, hierarchical structure search
//! and learned hidden attributes.

pub mod cli;
pub mod database;
pub mod error;
pub mod eval;
pub mod grounding;
pub mod hidden;
pub mod ingest;
pub mod lr;
pub mod model;
pub mod pipeline;
pub mod schema;
pub mod structure;

pub use database::{DatabaseBuilder, Population, Relation, RelationalDatabase};
pub use error::{Result, RlrError};
pub use model::RlrModel;
pub use schema::{Formula, Literal, Schema, TargetSpec, WeightedFormula};
