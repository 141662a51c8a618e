//! Software twin of a wearable Peltier thermal-feedback device.

pub mod client;
pub mod control;
pub mod device;
pub mod driver;
pub mod protocol;
pub mod ted;
pub mod trace;
