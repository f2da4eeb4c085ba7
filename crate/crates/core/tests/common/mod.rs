//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

pub mod joint_search;
pub mod scenarios;
pub mod trace_replay;
