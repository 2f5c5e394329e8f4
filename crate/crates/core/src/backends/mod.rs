//! Univariate sub-networks: coordinate encodings followed by an MLP.

mod activation;
mod encoding;
mod subnet;

pub use activation::ActivationKind;
pub use encoding::Encoding;
pub use subnet::{forward_axis, init_subnetwork, SubNetwork, SubNetworkSpec};
pub(crate) use subnet::{mlp_param_count, Mlp};
