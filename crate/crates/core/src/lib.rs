//! Deterministic simulation of truck-trailer swarms on a torus with
//! context-steering control, jackknife and collision prevention, and a batch
//! experiment harness.

pub mod behaviors;
pub mod context;
pub mod controller;
pub mod dubins;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod model;
pub mod metrics;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use geometry::{Pose, TorusWorld, Vec2};
pub use model::{Action, HavConfig, HavState};
