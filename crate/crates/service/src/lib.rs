//! Annotation coordination service: hands out decision-tree tasks for
//! sampled interactions, resolves disagreements through experts and keeps
//! the adversarial-testing leaderboard.

pub mod clock;
pub mod error;
pub mod http;
pub mod service;
pub mod state;

pub use clock::{Clock, ManualClock, SystemClock};
pub use error::ServiceError;
pub use service::{AnnotationService, ServiceConfig, TaskLease, Window};
