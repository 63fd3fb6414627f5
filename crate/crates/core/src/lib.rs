//! Simulation core for a teleoperation interface that shows the robot as a
//! CG model drawn over images its own camera captured earlier.
//!
//! The crate is organised around one simulation session:
//!
//! - [`geometry`], [`frame`] and [`scene`]: poses, the pinhole camera, and a
//!   small software rasterizer for the synthetic course.
//! - [`vehicle`] and [`course`]: kinematic bicycle model and the closed course.
//! - [`channel`]: interval-gated, fixed-delay links between robot and operator.
//! - [`compositor`]: past-image records, background selection, the zoom law,
//!   steering overlays and frame composition.
//! - [`metrics`] and [`stats`]: trial metrics, within-subjects ANOVA and LSD.
//! - [`session`] and [`protocol`]: the tick loop, scripted operators,
//!   recording/replay and the console wire format.
//!
//! Batch work (scene rendering, frame resampling, independent sessions) goes
//! through [`par`], which runs on rayon when the `parallel` feature is on.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod compositor;
pub mod course;
pub mod error;
pub mod frame;
pub mod geometry;
pub mod metrics;
pub mod par;
pub mod protocol;
pub mod scene;
pub mod session;
pub mod stats;
pub mod time;
pub mod vehicle;

pub use error::{Error, Result};
pub use time::SimTime;
