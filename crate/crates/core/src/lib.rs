pub mod bus;
pub mod clock;
pub mod transport;
pub mod calib;
pub mod sensors;
pub mod sim;
pub mod dmcp;
pub mod cli;
