//! Parameter storage, initialisation, optimisation and gradient checking.

mod adam;
mod checkpoint;
mod gradcheck;
mod init;
mod loss;
mod params;

pub use adam::{adam_step, TrainConfig};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, MAGIC, VERSION,
};
pub use gradcheck::{finite_diff_check, relative_error, GradCheckOptions, GradCheckReport, ParamCheck};
pub use init::{fans, xavier_init, xavier_with};
pub use loss::mse_loss;
pub use params::{Gradients, ParamStore, Tensor};
