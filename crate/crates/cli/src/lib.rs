pub mod ablate;
pub mod config;
pub mod diagnose;
pub mod run;
pub mod verify;
