//! Video descriptors built from the first- and second-order statistics of
//! per-frame ConvNet features (spatial, temporal and combined variants), an
//! LBP-TOP baseline, and leave-one-out evaluation with nearest-neighbour and
//! linear SVM classifiers.

pub mod tensor;
pub mod convnet;
pub mod ingest;
pub mod pooling;
pub mod lbptop;
pub mod classify;
pub mod pipeline;
