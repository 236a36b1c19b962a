//! Images, dense feature maps, similarity and the SCPF file format.

pub mod descriptor;
pub mod feature;
pub mod image;
pub mod scpf;

pub use descriptor::{extract_features_builtin, DescriptorConfig};
pub use feature::{cosine_similarity, point_similarity, FeatureLayer, FeatureMap};
pub use image::{read_pgm, write_pgm16, Image, Pixel};
pub use scpf::{read_feature_file, write_feature_file};
