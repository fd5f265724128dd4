//! Global semantic terrain map fused from per-view predictions by vote,
//! and minimum-cost planning on the derived cost grid.

mod map;
mod plan;

pub use map::{assign_costs, CostMap, FuseReport, SemanticMap};
pub use plan::{path_cost, plan, Trajectory};
