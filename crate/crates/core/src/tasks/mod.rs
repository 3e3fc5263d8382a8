//! Data and evaluation for number sorting and image mosaics.

pub mod encoder;
pub mod eval;
pub mod idx;
pub mod mosaic;
pub mod sort;

pub use encoder::{encode, encode_tiles, encode_vjp, EncoderCache, TileEncoderParams};
pub use eval::{evaluate, InstanceMetrics, Metrics};
pub use idx::{load_idx, parse_idx, write_idx, IdxArray, ImageStack};
pub use mosaic::{make_mosaic, make_mosaic_with_order, synthetic_image, Image, MosaicInstance, SyntheticStyle};
pub use sort::{gen_eval_sets, gen_sort_batch, sort_example, SortExample, SortTaskConfig, Split, EVAL_INTERVALS};
