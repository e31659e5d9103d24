//! Small reverse-mode autodiff engine and the classifier architectures
//! built on it.

pub mod checkpoint;
mod gemm;
pub mod graph;
pub mod model;
pub mod params;
pub mod train;

pub use checkpoint::{decode_checkpoint, embeddings_to_csv, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use graph::{sigmoid, softmax_rows, Graph, Padding, Var};
pub use model::{
    build, build_cnn1d, build_eegnet, build_fusion_mlp, build_siamese, build_spect_cnn, build_topo_cnn, similarity, Arch,
    Forward, Layer, Mode, Model, ModelSpec, Variant, EMBEDDING_DIM,
};
pub use params::{Param, ParamStore};
pub use train::{stratified_split, train_classifier, train_classifier_split, train_siamese, Adam, Fusion, TrainConfig, TrainReport, DEFAULT_MARGIN};
