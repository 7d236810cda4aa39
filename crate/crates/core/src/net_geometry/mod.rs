//! Multi-cell geometry and uplink channel.
//!
//! RAPs sit in a rectangular region and serve their Voronoi cells. Each
//! subframe a cell is active with the complement of the Poisson void
//! probability `1 - exp(-lambda A_i)`; an active cell holds one UE placed
//! uniformly inside it, transmitting with fractional power control
//! `P_i = P_0 |Y_i - X_i|^(s alpha)`.

mod channel;
mod geometry;
mod layout;

use thiserror::Error;

pub use channel::{
    compute_sinr, draw_subframe, sample_in_cell, sinr_kernel, ChannelParams, Interferer,
    SubframeDrop,
};
pub use geometry::{voronoi_cells, ConvexPolygon, Point, Rect};
pub use layout::{
    build_layout, load_layout_csv, read_layout_csv, synthesize_layout, NetworkLayout,
    SyntheticLayout, LAYOUT_CSV_HEADER,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LayoutError {
    #[error("region must be a nondegenerate finite rectangle")]
    InvalidRegion,
    #[error("a layout needs at least 2 RAPs, got {0}")]
    TooFewRaps(usize),
    #[error("RAP {rap} lies outside the region")]
    OutsideRegion { rap: usize },
    #[error("RAPs {first} and {second} share a position")]
    Duplicate { first: usize, second: usize },
    #[error("cloud group is empty")]
    EmptyCloudGroup,
    #[error("cloud group index {index} out of range for {n_total} RAPs")]
    CloudIndex { index: usize, n_total: usize },
    #[error("RAP {0} listed twice in the cloud group")]
    CloudDuplicate(usize),
    #[error("layout row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("layout file: {0}")]
    Io(String),
    #[error("layout synthesis failed: {0}")]
    Synthesis(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ChannelError {
    #[error("invalid channel parameter: {0}")]
    Param(&'static str),
}
