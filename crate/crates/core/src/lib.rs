//! Ordinality-aware binary cross-entropy for ≥M-class solar flare
//! forecasting, with the supporting experiment machinery: magnetogram
//! preprocessing, augmentation, dataset labeling and partitioning, forecast
//! skill scores with threshold calibration, and a small deterministic
//! gradient-descent trainer.

pub mod augment;
pub mod dataset;
pub mod loss;
pub mod metrics;
pub mod preprocess;
pub mod raster;
pub mod trainer;

pub use loss::{BinaryLabel, FlareClass, LossBatch, LossConfig, LossKind};
pub use metrics::{ConfusionMatrix, SkillReport, SkillScores, ZoneMode, ZoneSpec};
pub use raster::{BitmapMask, ByteImage, Raster};
