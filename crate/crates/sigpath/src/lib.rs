//! File formats and command-line front end for [`sigpath_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod io;
pub mod render;

pub use app::{run, Config, Format, RegressConfig};
