//! Conditional generator/discriminator pair, adversarial losses and the
//! training loop.

mod loss;
mod model;
mod synth;
mod train;

pub use loss::{d_loss, g_loss, DiscriminatorLoss, GenLoss};
pub use model::{batch_tensor, frames_to_input, tensor_to_frames, Discriminator, GanArch, Generator, WeightInit, BASE_STEPS};
pub use synth::{generate, label_profile, synthesize_batch, to_device_space, SYNTHETIC_ID};
pub use train::{format_log, train_gan, EpochLog, GanTrainer, LabelSampling, LrSchedule, TrainConfig, TrainingSet, LOG_HEADER};
