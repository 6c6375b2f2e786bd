//! The visual episodic memory: sequence autoencoder, weight snapshots and
//! weight files.

pub mod frame;
pub mod model;
pub mod persist;
pub mod snapshot;

pub use frame::{Frame, SequenceWindow, FRAME_SIZE, WINDOW_LEN};
pub use model::{ArchDescriptor, AutoencoderModel, GRAD_CLIP_NORM};
pub use persist::{load_weights, load_weights_into, read_kind, save_weights, Persist};
pub use snapshot::{
    load_snapshot, param_checksum, snapshot_weights, InferenceTwin, Parameterized, SnapshotChannel,
    WeightSnapshot,
};
