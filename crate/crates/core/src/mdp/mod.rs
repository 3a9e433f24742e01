//! Low-rank MDPs over a finite state set and the action cube `[0,1]^m`.

pub mod distance;
pub mod features;
pub mod model;
pub mod policy;
pub mod reward;
pub mod rollout;
pub mod value;

pub use distance::{hellinger_distance, tv_distance};
pub use features::{FeatureMap, StateEmbedding};
pub use model::{validate_distribution, LowRankMdp};
pub use policy::{DeterministicPolicy, GridPolicy, MixtureComponent, Policy};
pub use reward::{HolderMeta, RewardFunction, RewardShape};
pub use rollout::{rollout, Trajectory, Transition};
pub use value::{state_occupancy, value_exact, value_mc};
