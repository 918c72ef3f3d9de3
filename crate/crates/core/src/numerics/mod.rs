//! Small numerical kernel shared by the model modules.

mod dist;
mod mat2;
mod optim;
mod rng;

pub use dist::{chisq_quantile, chisq_sf, invlogit, logit, norm_quantile, norm_sf, t_quantile, t_sf};
pub use mat2::{Mat2, Vec2};
pub use optim::{nelder_mead, NelderMead, Optimum};
pub use rng::{mvn2_sample, RngStream};
