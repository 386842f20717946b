//! Head architectures over a shared encoder, parameter/FLOP accounting and
//! the checkpoint format.

mod accounting;
mod checkpoint;
mod network;

pub use accounting::{head_flop_deltas, head_parameter_deltas, HeadDims, HeadFlopCounts, HeadParameterCounts};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, CHECKPOINT_MAGIC};
pub use network::{
    ArchitectureMode, BoundNetwork, DropoutPlacement, ForwardOutput, MtlNetwork, NetworkSpec, TaxonomyBinding,
};
