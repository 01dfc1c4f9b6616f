pub mod absorption;
pub mod arrival;
pub mod battery;
pub mod error;
pub mod groundstate;
pub mod linops;
pub mod minimality;
pub mod models;
mod ode;
pub mod optimize;
pub mod quad;

pub use error::{Error, Result};
