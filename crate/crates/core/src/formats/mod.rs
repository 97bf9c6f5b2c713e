//! On-disk formats: feature cache, model checkpoint, score and fusion files.

mod cache;
mod checkpoint;
mod scores;

pub use cache::{decode_features, encode_features, read_features, write_features};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use scores::{
    parse_scores, read_fusion_model, read_scores, write_curve, write_fusion_model, write_scores,
};
