//! Gaze-assisted authentication: a user proves knowledge of three shapes by
//! following them, one per frame, among twelve shapes moving on screen.
//!
//! The building blocks are path normalization ([`geometry`]), two
//! recognizers ([`template`] and [`dtree`]), the session logic ([`auth`]),
//! a pursuit simulator standing in for an eye tracker ([`sim`]) and a
//! line-oriented network service ([`protocol`], [`service`]).

pub mod auth;
pub mod catalog;
pub mod dtree;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod protocol;
pub mod service;
pub mod sim;
pub mod store;
pub mod template;
pub mod trace_io;

pub use auth::{Algorithm, AuthConfig, AuthEngine, Decision, PasswordTriple};
pub use catalog::{Catalog, ShapeId};
pub use error::{Error, Result};
pub use geometry::{NormalizeConfig, NormalizedPath, Point, PolyPath, RawTrace, TimedSample};
