//! Distribution topologies: the clan evolver, the agent state machine,
//! and the center drivers, plus a convenience entry point that assembles
//! a simulated cluster and runs a topology on it.

pub mod agent;
pub mod center;
pub mod evolver;

pub use agent::{run_agent_loop, AgentNode};
pub use center::{run_dcs, run_dda, run_dds, run_serial, RunParams, RunResult, Topology};
pub use evolver::{ChildKind, ChildSpec, ClanEvolver, GenerationStat};

use std::collections::BTreeMap;

use crate::error::RunError;
use crate::transport::sim::{LinkModel, SimNet};
use crate::transport::NodeAddr;

/// Builds a simulated cluster with agents at addresses `1..=count`.
pub fn sim_cluster(count: u16, link: LinkModel) -> SimNet<AgentNode> {
    let agents: BTreeMap<NodeAddr, AgentNode> =
        (1..=count).map(|a| (a, AgentNode::new(a))).collect();
    SimNet::new(link, agents)
}

/// Runs one topology on a fresh simulated cluster.
pub fn run_sim(
    topology: Topology,
    agent_count: u16,
    link: LinkModel,
    params: &RunParams,
) -> Result<RunResult, RunError> {
    match topology {
        Topology::Serial => run_serial(params),
        _ => {
            let mut net = sim_cluster(agent_count, link);
            let agents: Vec<NodeAddr> = net.agent_addrs();
            match topology {
                Topology::Dcs => run_dcs(&mut net, &agents, params),
                Topology::Dds => run_dds(&mut net, &agents, params),
                Topology::Dda => run_dda(&mut net, &agents, params),
                Topology::Serial => unreachable!(),
            }
        }
    }
}
