pub mod check;
pub mod config;
pub mod controller;
pub mod engine;
pub mod error;
pub mod leader;
pub mod observer;
pub mod output;
pub mod plant;
pub mod topology;
pub mod verify;

pub use error::{Error, Result};
