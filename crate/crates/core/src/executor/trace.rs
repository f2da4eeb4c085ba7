use std::fmt;

use crate::mapf::{AgentId, VertexId};
use crate::time::Time;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceKind {
    Start,
    Complete,
    Blocked,
    ObstacleAppear,
    ObstacleDisappear,
    Replan,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Start => "start",
            TraceKind::Complete => "complete",
            TraceKind::Blocked => "blocked",
            TraceKind::ObstacleAppear => "obstacle_appear",
            TraceKind::ObstacleDisappear => "obstacle_disappear",
            TraceKind::Replan => "replan",
        }
    }
}

/// One line of the execution trace: `time kind agent action_idx from to`,
/// with `-` for fields that do not apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: Time,
    pub kind: TraceKind,
    pub agent: Option<AgentId>,
    pub action_idx: Option<usize>,
    pub from: Option<VertexId>,
    pub to: Option<VertexId>,
}

fn field(v: Option<usize>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.3} {} {} {} {} {}",
            self.time.as_secs_f64(),
            self.kind.as_str(),
            field(self.agent),
            field(self.action_idx),
            field(self.from),
            field(self.to)
        )
    }
}
