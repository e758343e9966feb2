//! HTTP service and command line around the crowdgate engine.

pub mod api;
pub mod cli;
