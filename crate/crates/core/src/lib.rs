//! Rolling contact kinematics on parametric surfaces: surface charts,
//! relative contact motion, geodesic contact curves with slip rejection,
//! rolling evolution, a penalty-contact dynamics model and scenario runs.

pub mod contact;
pub mod dynamics;
pub mod error;
pub mod geodesic;
pub mod ode;
pub mod rolling;
pub mod scenario;
pub mod surface;

pub use contact::{relative_acceleration, relative_velocity, ContactState, RelativeMotion};
pub use error::{Error, Result};
pub use geodesic::{PairSystem, PairTrajectory, SigmaProfile};
pub use scenario::{load_scenario, run, Scenario};
pub use surface::{cylinder_chart, ellipsoid_chart, geometry_at, sphere_chart, Chart, SurfaceGeometry};
