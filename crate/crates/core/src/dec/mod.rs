//! Deep embedded clustering: a dense autoencoder with hand-written
//! backpropagation, Student-t soft assignments, the clustering, reconstruction,
//! uniformity and centroid-distance losses, Adamax, and k-Means
//! re-calibration of the latent centroids.

mod adamax;
mod assign;
mod checkpoint;
mod gradcheck;
mod loss;
mod network;
mod train;

pub use adamax::Adamax;
pub use assign::{argmax_rows, soft_assign, sq_distances, target_distribution, Exponent};
pub use checkpoint::{loss_csv, Checkpoint, CheckpointHeader};
pub use gradcheck::{analytic_gradient, grad_check, LossTerm};
pub use loss::{
    breakdown, centroid_mse, kl_rows, kl_uniform, reconstruction_mse, LossBreakdown, LossWeights,
};
pub use network::{
    ae_forward, Activation, AutoencoderParams, Dense, ForwardCache, Gradients, DESK_LAYERS,
    FULL_LAYERS,
};
pub use train::{
    loss_terms, pretrain_autoencoder, pretrain_from, train_dec, DecConfig, DecFit, DecState,
    PretrainConfig, Pretrained,
};
