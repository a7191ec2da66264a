//! Radio-interferometric imaging with plug-and-play forward-backward
//! iterations (AIRI) and the re-weighted uSARA baseline.

pub mod image;
pub mod operator;
pub mod prox;
pub mod sara;
pub mod solvers;

pub use image::Image;
pub mod dataset;
pub mod denoiser;
pub mod harness;
