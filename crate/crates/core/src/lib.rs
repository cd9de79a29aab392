//! Simulation and fleet management for rack-carrying robot warehouses where
//! human workers share the floor with the fleet.

pub mod agents;
pub mod ar;
pub mod batch;
pub mod error;
pub mod grid;
pub mod hir;
pub mod ids;
pub mod layouts;
pub mod path;
pub mod planner;
pub mod service;
pub mod sim;
pub mod vest;
pub mod wms;
