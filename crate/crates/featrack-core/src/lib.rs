//! featrack: feature-usage tracking for annotation-based software product
//! lines.
//!
//! The platform's variability is expressed with `//PVSCL:IFCOND(<expr>)` /
//! `//PVSCL:ENDCOND` directives. A YAML feedback model (goals, questions,
//! metrics, pointcuts) declares which feature slices to track and where.
//! Product derivation then runs in two steps: hit injection at the model's
//! pointcuts, followed by the usual pre-compilation filtering. Running
//! variants report usage events to a local collector log, and the analysis
//! side resolves per-metric counts back into an attributed feature model.
//!
//! Modules, in pipeline order:
//!
//! - [`expr`] — the AND/OR feature-expression language
//! - [`model`] — feature model, configurations, file index, portfolio
//! - [`annotation`] — directive scanning and pre-compilation filtering
//! - [`feedback`] — the GQM feedback model and its static validation
//! - [`transform`] — two-step variant derivation with hit injection
//! - [`collector`] — event ingestion and the append-only feedback log
//! - [`analysis`] — log queries and feedback pull into attributed models
//! - [`simulator`] — scripted variant "execution" with a ground-truth ledger

pub mod analysis;
pub mod annotation;
pub mod collector;
pub mod expr;
pub mod feedback;
pub mod model;
pub mod simulator;
pub mod transform;

pub use expr::{parse_expr, ExprError, FeatureExpression};
