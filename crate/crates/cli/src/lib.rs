//! Scenario runner for the event-driven management protocol: loads a JSON
//! scenario, simulates it (optionally against the polling baseline), and
//! writes a JSON run report.

pub mod report;
pub mod runner;
pub mod scenario;
