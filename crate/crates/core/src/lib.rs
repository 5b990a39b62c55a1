//! Grasp planning and finger trajectory optimization for multi-fingered hands
//! working directly on oriented point clouds.

pub mod config;
pub mod correspondence;
pub mod error;
pub mod geometry;
pub mod gto;
pub mod hand;
pub mod io;
pub mod ipfo;
pub mod mdisf;
pub mod pipeline;
pub mod quality;
pub mod scene;

pub use error::{Error, Result};
