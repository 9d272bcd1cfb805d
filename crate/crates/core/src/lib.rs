//! Conditional laws of fractional Brownian motion and the fractional
//! Ornstein-Uhlenbeck process for every Hurst index in (0, 1), transformed to
//! derived processes and used for COS option pricing, with a Monte Carlo
//! oracle for validation.

pub mod cli;
pub mod conditional;
pub mod cos;
pub mod derived;
pub mod error;
pub mod mc;
pub mod model;
pub mod output;
pub mod quad;
pub mod specfun;

pub use conditional::{
    conditional_law, conditional_mean, conditional_variance, ConditionalNormal, KernelRule, QuadratureConfig,
};
pub use cos::{cos_price, gfou_closed_form, CosConfig, OptionSpec, Side};
pub use derived::{pdf_transform, MapKind, ProcessMap};
pub use error::{Error, Result};
pub use mc::{empirical_conditional_stats, gen_fbm_paths, gen_fou_paths, McConfig, PathBundle, Scheme};
pub use model::{FbmGrid, FouParams, TimeWindow};
