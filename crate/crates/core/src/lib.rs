//! Achievable rates of compress-and-forward relaying over discrete
//! memoryless relay networks.
//!
//! * [`prob`]: dense probability tensors and information measures in bits.
//! * [`network`]: channel laws, coding distributions, and the joint model.
//! * [`rate`]: the successive-decoding rate, the joint-decoding single-relay
//!   rate, and the multi-relay rates obtained by optimizing bin rates.
//! * [`lp`]: a small dense simplex solver backing the multi-relay rates.
//! * [`optimize`]: projected ascent over coding distributions, sweeps.
//! * [`oracle`]: naive reference computations for cross-checking.
//! * [`cli`]: file formats and the command-line front end.

pub mod cli;
pub mod error;
pub mod lp;
pub mod network;
pub mod optimize;
pub mod oracle;
pub mod prob;
pub mod rate;

pub use error::{Error, Result};
pub use network::{build_joint, validate_markov, Alphabets, CodingDistribution, JointModel, RelayNetworkSpec};
pub use prob::{ProbTensor, Role, VarId};
pub use rate::{full_report, RateReport, RateVector, SubsetId};
