//! Parameter-space datasets, small MLPs trained by Levenberg-Marquardt and
//! the regressor chain that maps obstacle sections to coupling parameters.

mod chain;
mod dataset;
mod mlp;

pub use chain::{
    chain_nmse, derive_seed, train_chain, ChainScores, ChainSet, ChainTraining, ChainVariant, RegressorChain,
    CHAIN_FORMAT_VERSION,
};
pub use dataset::{
    gen_dataset, latin_hypercube_shapes, nmse, read_dataset, split_dataset, training_scenario, write_dataset, DatasetConfig, Grid, GridAxis,
    Sample, DATASET_FORMAT_VERSION, DATASET_HEADER,
};
pub use mlp::{train_mlp, Mlp, MlpRegressor, Normalizer, TrainConfig, TrainReport, TARGET_HI, TARGET_LO};
